"""Blackman-Tukey frequency-response estimation with a Hamming lag window."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.signal import correlate

M_MIN = 500
M_MAX = 14000
T_HAT_CAP = 10.0


class GridError(ValueError):
    pass


def correlation(v, w, tau: int) -> float:
    """Biased cross-correlation ``(1/N) sum_t v[t+tau] w[t]``, zero outside the record."""
    v = np.asarray(v, dtype=float)
    w = np.asarray(w, dtype=float)
    N = v.shape[0]
    if w.shape[0] != N:
        raise ValueError("series must have equal length")
    if abs(tau) >= N:
        raise ValueError(f"|tau| must be < N={N}, got {tau}")
    if tau >= 0:
        return float(np.dot(v[tau:], w[: N - tau]) / N)
    return float(np.dot(v[: N + tau], w[-tau:]) / N)


def lagged_correlations(v, w, M: int) -> np.ndarray:
    """``correlation(v, w, tau)`` for ``tau = -M..M`` computed by zero-padded FFT."""
    v = np.asarray(v, dtype=float)
    w = np.asarray(w, dtype=float)
    N = v.shape[0]
    full = correlate(v, w, mode="full", method="fft") / N  # lags -(N-1)..N-1
    return full[N - 1 - M: N + M]


def hamming_lag_window(tau, M: int):
    tau = np.asarray(tau, dtype=float)
    return np.where(np.abs(tau) <= M, 0.54 + 0.46 * np.cos(np.pi * tau / M), 0.0)


def lag_window_power(M: int) -> float:
    """``sum W_M(tau)**2``; the variance inflation of a lag-window spectral estimate."""
    tau = np.arange(-M, M + 1)
    return float(np.sum(hamming_lag_window(tau, M) ** 2))


def windowed_spectrum(R, M: int, omega, Ts: float) -> np.ndarray:
    """``sum_tau W_M(tau) R(tau) exp(-j omega tau Ts)`` for ``R`` on lags ``-M..M``."""
    tau = np.arange(-M, M + 1)
    wr = hamming_lag_window(tau, M) * R
    phase = np.exp(-1j * np.outer(np.asarray(omega, dtype=float) * Ts, tau))
    return phase @ wr


@dataclass
class SpectralEstimate:
    mode: int
    freq_grid: np.ndarray
    T_hat: np.ndarray
    M: int
    valid: np.ndarray = None
    clamped: bool = False

    def __post_init__(self):
        if self.valid is None:
            self.valid = np.isfinite(self.T_hat)

    def at(self, omega):
        """Interpolate in log-frequency; raises :class:`GridError` outside the grid."""
        omega = np.atleast_1d(np.asarray(omega, dtype=float))
        lo, hi = self.freq_grid[0], self.freq_grid[-1]
        if np.any((omega < lo * (1 - 1e-12)) | (omega > hi * (1 + 1e-12))):
            raise GridError(f"mode {self.mode}: frequencies outside [{lo:g}, {hi:g}] rad/s")
        x = np.log(self.freq_grid)
        xi = np.log(np.clip(omega, lo, hi))
        return np.interp(xi, x, self.T_hat.real) + 1j * np.interp(xi, x, self.T_hat.imag)


def estimate_grid(omega_hat: float, n: int = 100) -> np.ndarray:
    """Log grid on ``(omega_hat/100, omega_hat]``."""
    return np.geomspace(omega_hat / 100.0, omega_hat, n + 1)[1:]


def blackman_tukey(y, rho, M: int, freq_grid, Ts: float, mode: int = 0) -> SpectralEstimate:
    """Ratio of windowed cross- and auto-spectra, ``Phi_y_rho / Phi_rho_rho``.

    Means are removed first. ``M`` is clamped to ``N - 1``. Grid points where
    the input spectrum is below ``1e-12`` of its peak, or where the ratio
    exceeds the sanity cap, are marked invalid.
    """
    y = np.asarray(y, dtype=float)
    rho = np.asarray(rho, dtype=float)
    if y.shape != rho.shape or y.ndim != 1:
        raise ValueError("y and rho must be 1-D series of equal length")
    N = y.shape[0]
    clamped = M > N - 1
    M = min(int(M), N - 1)
    y = y - y.mean()
    rho = rho - rho.mean()
    freq_grid = np.asarray(freq_grid, dtype=float)
    phi_yr = windowed_spectrum(lagged_correlations(y, rho, M), M, freq_grid, Ts)
    phi_rr = windowed_spectrum(lagged_correlations(rho, rho, M), M, freq_grid, Ts)
    peak = np.max(np.abs(phi_rr)) if phi_rr.size else 0.0
    ok = np.abs(phi_rr) >= 1e-12 * peak if peak > 0 else np.zeros(freq_grid.shape, bool)
    T_hat = np.full(freq_grid.shape, np.nan + 0j)
    T_hat[ok] = phi_yr[ok] / phi_rr[ok]
    valid = ok & (np.abs(np.nan_to_num(T_hat, nan=np.inf)) <= T_HAT_CAP)
    return SpectralEstimate(mode=mode, freq_grid=freq_grid, T_hat=T_hat, M=M, valid=valid, clamped=clamped)


def choose_window_M(omega_hat_i: float, omega_hat_1: float, N: int) -> int:
    """Lag-window width proportional to ``1/omega_hat_i`` starting from 500 at mode 1."""
    if omega_hat_i <= 0 or omega_hat_1 <= 0:
        raise ValueError("sweep limits must be positive")
    M = int(round(M_MIN * omega_hat_1 / omega_hat_i))
    return int(min(max(M, M_MIN), M_MAX, N - 1))


@dataclass
class ErrorReport:
    """Per-mode absolute errors and the original-space spectral-norm error."""

    eps_max: float
    abs_error: dict = field(default_factory=dict)
    freq_grid: dict = field(default_factory=dict)
    common_grid: np.ndarray = field(default_factory=lambda: np.empty(0))
    spectral_norm_error: np.ndarray = field(default_factory=lambda: np.empty(0))

    def sup_error(self, mode: int) -> float:
        err = self.abs_error[mode]
        return float(np.nanmax(err)) if np.any(np.isfinite(err)) else float("nan")


def assemble_full(T_hat_modal, U, T_true_modal=None):
    """Original-space ``T_hat = U diag(T_hat_i) U^T`` at one frequency.

    With ``T_true_modal`` also returns ``||T - T_hat||_2`` computed on the
    full matrices.
    """
    T_hat_modal = np.asarray(T_hat_modal)
    U = np.asarray(U, dtype=float)
    T_hat = (U * T_hat_modal) @ U.T
    if T_true_modal is None:
        return T_hat
    T_true = (U * np.asarray(T_true_modal)) @ U.T
    return T_hat, float(np.linalg.norm(T_true - T_hat, ord=2))


def common_values(estimates, omega):
    """Stack per-mode estimates interpolated at ``omega`` (``n_omega x n_modes``)."""
    omega = np.atleast_1d(np.asarray(omega, dtype=float))
    lo = max(e.freq_grid[0] for e in estimates)
    hi = min(e.freq_grid[-1] for e in estimates)
    if lo > hi:
        raise GridError("mode grids do not overlap")
    return np.stack([e.at(omega) for e in estimates], axis=1)
