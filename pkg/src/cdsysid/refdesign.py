"""Per-mode reference design: amplitude bounds and chirp excitation.

A reference applied along ``U_i`` only excites mode ``i``. Its amplitude is
squeezed between a lower bound that keeps the estimation error below
``eps_max`` against the closed-loop residual ``S_i d_i - T_i n_i``, and
upper bounds from the actuator and output limits.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.signal import welch

from .dynamics import (
    ConfigurationError,
    ControllerParams,
    comp_sensitivity_bandwidth,
    modal_comp_sensitivity,
    modal_sensitivity,
)
from .spectral import choose_window_M, lag_window_power

SWEEP_FACTOR = 5.0
BAND_POINTS = 200
DEFAULT_COVERAGE = 4.0


@dataclass(frozen=True)
class ChirpSpec:
    mode: int
    amplitude: float
    omega_hat: float
    N: int
    Ts: float

    def __post_init__(self):
        if not self.amplitude > 0:
            raise ValueError(f"chirp amplitude must be positive, got {self.amplitude}")
        if not 0 < self.omega_hat < np.pi / self.Ts:
            raise ConfigurationError(
                f"sweep limit {self.omega_hat:.4g} rad/s outside (0, Nyquist={np.pi / self.Ts:.4g})"
            )

    def phase(self, t):
        return self.omega_hat * np.asarray(t) ** 2 / (2.0 * self.N * self.Ts)

    def instantaneous_frequency(self, t):
        return self.omega_hat * np.asarray(t) / (self.N * self.Ts)

    def series(self) -> np.ndarray:
        t = np.arange(self.N) * self.Ts
        return self.amplitude * np.cos(self.phase(t))


@dataclass
class ModalSpectrum:
    """One-sided modal ASDs (um/sqrt(Hz)) of the open-loop output ``d + n``."""

    freq_hz: np.ndarray
    asd: np.ndarray  # modes x freqs
    noise_floor: float | None = None

    def __post_init__(self):
        self.freq_hz = np.asarray(self.freq_hz, dtype=float)
        self.asd = np.atleast_2d(np.asarray(self.asd, dtype=float))
        if self.noise_floor is None:
            self.noise_floor = estimate_noise_floor(self.freq_hz, self.asd)

    def _interp(self, values, f_hz):
        # log-log interpolation, ends held flat
        if not np.any(values > 0):
            return np.zeros(np.shape(f_hz))
        x = np.log(self.freq_hz)
        logv = np.log(np.maximum(values, 1e-300))
        return np.exp(np.interp(np.log(f_hz), x, logv))

    def total(self, i: int, f_hz) -> np.ndarray:
        return self._interp(self.asd[i], f_hz)

    def noise(self, f_hz) -> np.ndarray:
        return np.full(np.shape(f_hz), self.noise_floor)

    def disturbance(self, i: int, f_hz) -> np.ndarray:
        tot = self.total(i, f_hz)
        return np.sqrt(np.maximum(tot**2 - self.noise_floor**2, 0.0))


def estimate_noise_floor(freq_hz, asd, top_decades: float = 1.0) -> float:
    """White-noise ASD common to all modes.

    Orthonormal ``U`` maps i.i.d. channel noise to i.i.d. modal noise, so the
    floor is read from the quietest mode: the median ASD over the top
    ``top_decades`` of the band, minimised over modes.
    """
    freq_hz = np.asarray(freq_hz)
    sel = freq_hz >= freq_hz[-1] * 10.0 ** (-top_decades)
    if not np.any(sel):
        sel = slice(-1, None)
    return float(np.min(np.median(np.atleast_2d(asd)[:, sel], axis=1)))


def modal_asd(y_modal, fs: float, freq_hz, nperseg: int | None = None) -> np.ndarray:
    """Welch ASD of each modal channel, resampled onto ``freq_hz`` (log-log, ends held)."""
    y_modal = np.atleast_2d(np.asarray(y_modal, dtype=float))
    N = y_modal.shape[0]
    if nperseg is None:
        nperseg = min(N, 1024)
    f, P = welch(y_modal, fs=fs, nperseg=nperseg, axis=0, detrend="constant")
    f, P = f[1:], P[1:]
    asd = np.sqrt(P).T
    out = np.empty((asd.shape[0], len(freq_hz)))
    for i, row in enumerate(asd):
        if not np.any(row > 0):
            out[i] = 0.0
            continue
        out[i] = np.exp(np.interp(np.log(freq_hz), np.log(f), np.log(np.maximum(row, 1e-300))))
    return out


def sweep_limit(params: ControllerParams, i: int) -> float:
    """Chirp end frequency: five times the -3 dB bandwidth of ``T_i``."""
    w = SWEEP_FACTOR * comp_sensitivity_bandwidth(params, i)
    if w >= params.nyquist:
        raise ConfigurationError(f"mode {i}: sweep limit {w:.4g} rad/s exceeds Nyquist {params.nyquist:.4g}")
    return w


def bound_band(omega_hat: float, n: int = BAND_POINTS) -> np.ndarray:
    return np.geomspace(omega_hat / 1000.0, omega_hat, n)


def window_factor(M: int, omega_hat: float, N: int, coverage: float = DEFAULT_COVERAGE) -> float:
    """Converts a residual ASD (um/sqrt(Hz)) into a chirp amplitude (um).

    A chirp of amplitude ``A`` spreads ``A**2/2`` of power evenly over
    ``[0, f_hat]``. The Blackman-Tukey ratio error then has variance
    ``(sum W_M**2 / N) * Phi_res / Phi_chirp``; requiring ``coverage``
    standard deviations to stay below ``eps_max`` gives
    ``A >= coverage * ASD_res / eps_max * sqrt(2 f_hat sum W_M**2 / N)``.
    """
    f_hat = omega_hat / (2.0 * np.pi)
    return coverage * np.sqrt(2.0 * f_hat * lag_window_power(M) / N)


def residual_asd(params: ControllerParams, i: int, spectrum: ModalSpectrum, omega) -> np.ndarray:
    """ASD of ``S_i d_i - T_i n_i``; ``d`` and ``n`` are independent so powers add."""
    f = np.asarray(omega) / (2.0 * np.pi)
    S = np.abs(modal_sensitivity(params, i, omega))
    T = np.abs(modal_comp_sensitivity(params, i, omega))
    return np.sqrt((S * spectrum.disturbance(i, f)) ** 2 + (T * spectrum.noise(f)) ** 2)


def lower_bound_amplitude(i: int, spectrum: ModalSpectrum, params: ControllerParams,
                          eps_max: float, window_factor: float, omega_hat: float | None = None) -> float:
    """Smallest chirp amplitude keeping the mode-``i`` error below ``eps_max``."""
    if not eps_max > 0:
        raise ValueError(f"eps_max must be positive, got {eps_max}")
    if spectrum.asd.shape[1] == 0:
        raise ValueError("empty open-loop spectrum")
    if omega_hat is None:
        omega_hat = sweep_limit(params, i)
    band = bound_band(omega_hat)
    return float(np.max(residual_asd(params, i, spectrum, band)) / eps_max * window_factor)


def upper_bound_amplitude_input(i: int, params: ControllerParams, sigma_i: float, u_max: float,
                                omega_hat: float | None = None, band=None) -> float:
    """Largest chirp amplitude keeping the modal input within ``u_max`` over the band.

    ``band`` overrides the default log grid up to ``omega_hat``.
    """
    if band is None:
        band = bound_band(sweep_limit(params, i) if omega_hat is None else omega_hat)
    w = np.asarray(band, dtype=float)
    gamma = params.gamma[i]
    lam = params.lam(w)
    ratio = np.abs((1.0 - lam) + gamma * lam) / np.abs(lam / params.g(w))
    return float(np.min(u_max * sigma_i / gamma * ratio))


def upper_bound_amplitude_output(y_max: float) -> float:
    return float(y_max)


@dataclass
class BoundsReport:
    modes: np.ndarray  # 0-based indices
    lower: np.ndarray
    ub_input: np.ndarray
    ub_output: np.ndarray
    omega_hat: np.ndarray
    M: np.ndarray
    window_factor: np.ndarray

    @property
    def amplitude(self) -> np.ndarray:
        return np.minimum(self.ub_input, self.ub_output)

    @property
    def feasible(self) -> np.ndarray:
        return self.lower <= self.amplitude

    def row(self, mode: int) -> int:
        hits = np.nonzero(self.modes == mode)[0]
        if hits.size == 0:
            raise KeyError(f"mode {mode} not in bounds report")
        return int(hits[0])

    def to_csv(self, path) -> None:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with path.open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["mode", "lower_um", "ub_input_um", "ub_output_um", "feasible"])
            for k, m in enumerate(self.modes):
                w.writerow([int(m) + 1, repr(float(self.lower[k])), repr(float(self.ub_input[k])),
                            repr(float(self.ub_output[k])), int(self.feasible[k])])

    @staticmethod
    def read_csv(path) -> dict:
        with Path(path).open(newline="") as fh:
            rows = list(csv.DictReader(fh))
        return {
            "mode": np.array([int(r["mode"]) for r in rows]),
            "lower_um": np.array([float(r["lower_um"]) for r in rows]),
            "ub_input_um": np.array([float(r["ub_input_um"]) for r in rows]),
            "ub_output_um": np.array([float(r["ub_output_um"]) for r in rows]),
            "feasible": np.array([bool(int(r["feasible"])) for r in rows]),
        }


def compute_bounds(sigma, params: ControllerParams, spectrum: ModalSpectrum, *, eps_max: float,
                   u_max: float, y_max: float, N: int, modes=None,
                   coverage: float = DEFAULT_COVERAGE) -> BoundsReport:
    """Bounds for each requested mode; the window schedule is anchored at mode 0."""
    sigma = np.asarray(sigma, dtype=float)
    modes = np.arange(len(sigma)) if modes is None else np.asarray(modes, dtype=int)
    omega_hat_1 = sweep_limit(params, 0)
    rows = []
    for i in modes:
        w_hat = sweep_limit(params, int(i))
        M = choose_window_M(w_hat, omega_hat_1, N)
        wf = window_factor(M, w_hat, N, coverage)
        rows.append((
            lower_bound_amplitude(int(i), spectrum, params, eps_max, wf, w_hat),
            upper_bound_amplitude_input(int(i), params, sigma[i], u_max, w_hat),
            upper_bound_amplitude_output(y_max),
            w_hat, M, wf,
        ))
    cols = list(zip(*rows)) if rows else [()] * 6
    return BoundsReport(modes, *(np.array(c, dtype=float) for c in cols[:4]),
                        np.array(cols[4], dtype=int), np.array(cols[5], dtype=float))


def design_chirp(i: int, params: ControllerParams, bounds: BoundsReport, N: int) -> tuple[ChirpSpec, np.ndarray]:
    """Chirp at the upper-bound amplitude sweeping ``0 -> omega_hat_i`` over ``N`` samples.

    Infeasible modes still get the upper-bound amplitude.
    """
    k = bounds.row(i)
    spec = ChirpSpec(mode=i, amplitude=float(bounds.amplitude[k]), omega_hat=float(bounds.omega_hat[k]),
                     N=N, Ts=params.Ts)
    return spec, spec.series()


def write_spectrum(spectrum: ModalSpectrum, path, modes=None) -> None:
    """CSV ``mode,freq_hz,asd_um_rthz``, one row per mode and grid point."""
    modes = range(spectrum.asd.shape[0]) if modes is None else modes
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["mode", "freq_hz", "asd_um_rthz"])
        for i in modes:
            for f, a in zip(spectrum.freq_hz, spectrum.asd[i]):
                w.writerow([i + 1, repr(float(f)), repr(float(a))])


def read_spectrum(path, n_modes: int | None = None) -> ModalSpectrum:
    with Path(path).open(newline="") as fh:
        rows = list(csv.DictReader(fh))
    if not rows:
        raise ValueError(f"{path}: empty spectrum file")
    modes = np.array([int(r["mode"]) for r in rows])
    freq = np.array([float(r["freq_hz"]) for r in rows])
    asd = np.array([float(r["asd_um_rthz"]) for r in rows])
    uniq = np.unique(modes)
    grid = freq[modes == uniq[0]]
    if n_modes is not None and not np.array_equal(uniq, np.arange(1, n_modes + 1)):
        raise ValueError(f"{path}: expected modes 1..{n_modes}, got {uniq.min()}..{uniq.max()} ({uniq.size})")
    if asd.size != uniq.size * grid.size:
        raise ValueError(f"{path}: modes have different frequency grids")
    return ModalSpectrum(grid, asd.reshape(uniq.size, grid.size))
