"""Synthetic disturbance and noise, plus the time-series CSV format.

Open-loop modal output spectra of cross-directional systems scale with the
square of the singular values at low frequency. The generator draws per-mode
low-passed Gaussian noise with RMS ``scale * sigma_i**2`` and maps it to the
output channels through ``U``.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.signal import lfilter

from .modal import ResponseModel, from_modal


@dataclass(frozen=True)
class DisturbanceSpec:
    """Statistics of the synthetic disturbance ``d`` and measurement noise ``n``.

    ``scale`` is in um per unit ``sigma**2``, ``noise_std`` in um per channel.
    """

    basis: ResponseModel
    scale: float
    corner_hz: float
    noise_std: float
    seed: int
    fs: float = 10_000.0

    def __post_init__(self):
        if self.scale < 0:
            raise ValueError(f"scale must be >= 0, got {self.scale}")
        if self.noise_std < 0:
            raise ValueError(f"noise_std must be >= 0, got {self.noise_std}")
        if not 0 < self.corner_hz < self.fs / 2:
            raise ValueError(f"corner_hz must lie in (0, fs/2), got {self.corner_hz}")

    @property
    def modal_rms(self) -> np.ndarray:
        return self.scale * self.basis.sigma**2


def _mode_rng(spec: DisturbanceSpec, stream: int, realization: int, mode: int) -> np.random.Generator:
    # one stream per mode: a mode's samples do not depend on how many modes are drawn
    return np.random.default_rng([spec.seed, stream, realization, mode])


def _modes(spec: DisturbanceSpec, modes):
    n_y = spec.basis.n_y
    modes = np.arange(n_y) if modes is None else np.atleast_1d(np.asarray(modes, dtype=int))
    if modes.size and (modes.min() < 0 or modes.max() >= n_y):
        raise ValueError(f"modes must lie in 0..{n_y - 1}")
    return modes


def lowpass_coefficient(corner_hz: float, fs: float) -> float:
    return float(np.exp(-2.0 * np.pi * corner_hz / fs))


def synth_modal_disturbance(spec: DisturbanceSpec, N: int, realization: int = 0, modes=None) -> np.ndarray:
    """``N x len(modes)`` modal disturbance; each column is a stationary AR(1) process."""
    if N < 1:
        raise ValueError(f"N must be >= 1, got {N}")
    modes = _modes(spec, modes)
    w = np.empty((N, modes.size))
    x0 = np.empty(modes.size)
    for k, j in enumerate(modes):
        rng = _mode_rng(spec, 0, realization, int(j))
        w[:, k] = rng.standard_normal(N)
        x0[k] = rng.standard_normal()
    alpha = lowpass_coefficient(spec.corner_hz, spec.fs)
    unit_std = np.sqrt((1.0 - alpha) / (1.0 + alpha))
    # start in the stationary distribution so there is no start-up transient
    zi = alpha * unit_std * x0
    x = lfilter([1.0 - alpha], [1.0, -alpha], w, axis=0, zi=zi[None, :])[0]
    return x * (spec.modal_rms[modes] / unit_std)


def synth_disturbance(spec: DisturbanceSpec, N: int, realization: int = 0) -> np.ndarray:
    """``N x n_y`` disturbance in output coordinates."""
    return from_modal(synth_modal_disturbance(spec, N, realization), spec.basis.U)


def synth_modal_noise(spec: DisturbanceSpec, N: int, realization: int = 0, modes=None) -> np.ndarray:
    """White modal noise, ``noise_std`` per mode."""
    if N < 1:
        raise ValueError(f"N must be >= 1, got {N}")
    modes = _modes(spec, modes)
    out = np.empty((N, modes.size))
    for k, j in enumerate(modes):
        out[:, k] = _mode_rng(spec, 1, realization, int(j)).standard_normal(N)
    return spec.noise_std * out


def synth_noise(spec: DisturbanceSpec, N: int, realization: int = 0) -> np.ndarray:
    """White Gaussian measurement noise, ``noise_std`` on every output channel.

    Drawn in modal coordinates and rotated by the square orthonormal ``U``,
    which leaves the channels i.i.d. with the same standard deviation.
    """
    return from_modal(synth_modal_noise(spec, N, realization), spec.basis.U)


def save_timeseries(path, x, Ts: float) -> None:
    """Write ``t,ch_0,...,ch_{n-1}`` with round-trip exact float formatting."""
    x = np.asarray(x, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["t"] + [f"ch_{j}" for j in range(x.shape[1])])
        for k, row in enumerate(x):
            writer.writerow([repr(k * Ts)] + [repr(float(v)) for v in row])


def load_timeseries(path, n_channels: int | None = None) -> np.ndarray:
    """Read a time-series CSV and return the ``N x n`` channel matrix (time column dropped)."""
    path = Path(path)
    with path.open(newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise ValueError(f"{path}: empty file")
    header = [h.strip() for h in rows[0]]
    if not header or header[0] != "t" or header[1:] != [f"ch_{j}" for j in range(len(header) - 1)]:
        raise ValueError(f"{path}: header must be 't,ch_0,...,ch_(n-1)', got {','.join(header)}")
    width = len(header)
    if width < 2:
        raise ValueError(f"{path}: no channel columns")
    data = np.empty((len(rows) - 1, width - 1))
    for k, row in enumerate(rows[1:]):
        if len(row) != width:
            raise ValueError(f"{path}: row {k + 2} has {len(row)} fields, expected {width}")
        try:
            data[k] = [float(v) for v in row[1:]]
        except ValueError as exc:
            raise ValueError(f"{path}: row {k + 2}: {exc}") from None
    if not np.all(np.isfinite(data)):
        raise ValueError(f"{path}: NaN or Inf entries")
    if n_channels is not None and data.shape[1] != n_channels:
        raise ValueError(f"{path}: {data.shape[1]} channels, scenario expects {n_channels}")
    return data
