"""Scalar dynamics, modal (complementary) sensitivities and their discrete realizations.

Both the actuator dynamics ``g(s) = a/(s+a) exp(-tau_d s)`` and the IMC
shaping filter ``lambda(s) = lb/(s+lb) exp(-tau_d s)`` are first-order lags
with a shared transport delay. With the regularized compensator
``gamma_i = sigma_i^2 / (sigma_i^2 + mu)`` each mode closes the loop

    T_i(s) = gamma_i lambda(s) / (1 - (1 - gamma_i) lambda(s)),   S_i = 1 - T_i.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

TWO_PI = 2.0 * np.pi


class ConfigurationError(ValueError):
    pass


class BracketError(ValueError):
    pass


@dataclass(frozen=True)
class ScalarDynamics:
    """First-order lag with unit DC gain and transport delay."""

    pole: float
    tau_d: float = 0.0

    def __post_init__(self):
        if not self.pole > 0:
            raise ValueError(f"pole must be positive, got {self.pole}")
        if self.tau_d < 0:
            raise ValueError(f"delay must be non-negative, got {self.tau_d}")

    def __call__(self, omega):
        return freq_response(self, omega)


def freq_response(dyn: ScalarDynamics, omega):
    """``a / (j omega + a) * exp(-j omega tau_d)``."""
    omega = np.asarray(omega, dtype=float)
    return dyn.pole / (1j * omega + dyn.pole) * np.exp(-1j * omega * dyn.tau_d)


@dataclass(frozen=True)
class DiscreteFirstOrder:
    """ZOH equivalent of a delayed first-order lag.

    Realizes ``x[k] = p x[k-1] + (1-p) u[k-1]`` followed by an integer
    ``delay``-sample shift, i.e. ``H(z) = (1-p) z^-(1+delay) / (1 - p z^-1)``.
    """

    p: float
    delay: int
    Ts: float

    @property
    def b(self) -> float:
        return 1.0 - self.p

    def freq_response(self, omega):
        z1 = np.exp(-1j * np.asarray(omega, dtype=float) * self.Ts)
        return self.b * z1 ** (1 + self.delay) / (1.0 - self.p * z1)

    def filter(self, u) -> np.ndarray:
        """Run the recurrence from rest along axis 0."""
        u = np.asarray(u, dtype=float)
        x = np.zeros_like(u)
        state = np.zeros(u.shape[1:])
        for k in range(1, u.shape[0]):
            state = self.p * state + self.b * u[k - 1]
            x[k] = state
        out = np.zeros_like(u)
        if self.delay < u.shape[0]:
            out[self.delay:] = x[: u.shape[0] - self.delay]
        return out


def delay_samples(tau_d: float, Ts: float) -> int:
    ratio = tau_d / Ts
    D = int(round(ratio))
    if abs(ratio - D) > 1e-9 * max(1.0, ratio):
        raise ConfigurationError(f"delay {tau_d} s is not an integer multiple of Ts={Ts} s")
    return D


def discretize(dyn: ScalarDynamics, Ts: float) -> DiscreteFirstOrder:
    """Zero-order-hold discretization with integer-sample delay."""
    if not Ts > 0:
        raise ConfigurationError(f"sample time must be positive, got {Ts}")
    return DiscreteFirstOrder(p=float(np.exp(-dyn.pole * Ts)), delay=delay_samples(dyn.tau_d, Ts), Ts=Ts)


def compensator_gains(sigma, mu: float) -> np.ndarray:
    sigma = np.asarray(sigma, dtype=float)
    s2 = sigma**2
    return s2 / (s2 + mu)


@dataclass(frozen=True)
class ControllerParams:
    """IMC controller of a cross-directional loop, all rates in rad/s.

    ``plant_pole`` is the actuator pole ``a`` of ``g(s)``; it enters the
    modal inputs and the input-limited reference bound but not ``T_i``.
    """

    lambda_bar: float
    mu: float
    gamma: np.ndarray
    tau_d: float
    Ts: float
    plant_pole: float

    def __post_init__(self):
        gamma = np.array(self.gamma, dtype=float)
        gamma.setflags(write=False)
        object.__setattr__(self, "gamma", gamma)
        if self.mu < 0:
            raise ValueError(f"regularisation mu must be >= 0, got {self.mu}")
        if np.any(gamma < 0) or np.any(gamma > 1):
            raise ValueError("compensator gains must lie in [0, 1]")
        delay_samples(self.tau_d, self.Ts)

    @classmethod
    def from_sigma(cls, sigma, *, lambda_bar_hz: float, mu: float, a_hz: float,
                   tau_d_s: float, fs_hz: float) -> "ControllerParams":
        return cls(
            lambda_bar=TWO_PI * lambda_bar_hz,
            mu=mu,
            gamma=compensator_gains(sigma, mu),
            tau_d=tau_d_s,
            Ts=1.0 / fs_hz,
            plant_pole=TWO_PI * a_hz,
        )

    @property
    def fs(self) -> float:
        return 1.0 / self.Ts

    @property
    def nyquist(self) -> float:
        """Nyquist rate in rad/s."""
        return np.pi / self.Ts

    @property
    def n_modes(self) -> int:
        return self.gamma.shape[0]

    @property
    def shaping(self) -> ScalarDynamics:
        return ScalarDynamics(self.lambda_bar, self.tau_d)

    @property
    def plant(self) -> ScalarDynamics:
        return ScalarDynamics(self.plant_pole, self.tau_d)

    @property
    def delay(self) -> int:
        return delay_samples(self.tau_d, self.Ts)

    def lam(self, omega, discrete: bool = False):
        if discrete:
            return discretize(self.shaping, self.Ts).freq_response(omega)
        return freq_response(self.shaping, omega)

    def g(self, omega, discrete: bool = False):
        if discrete:
            return discretize(self.plant, self.Ts).freq_response(omega)
        return freq_response(self.plant, omega)

    def subset(self, modes) -> "ControllerParams":
        return ControllerParams(self.lambda_bar, self.mu, self.gamma[np.asarray(modes)],
                                self.tau_d, self.Ts, self.plant_pole)


def _gamma(params: ControllerParams, i) -> np.ndarray:
    gamma = params.gamma[i]
    if np.any(np.asarray(gamma) <= 0):
        raise ValueError(f"mode {i} has gamma = 0 and is not controlled")
    return gamma


def _denominator(gamma, lam):
    # 1 - (1 - gamma) lam, arranged to avoid cancellation for small gamma near DC
    return (1.0 - lam) + gamma * lam


def modal_comp_sensitivity(params: ControllerParams, i, omega, discrete: bool = False):
    """``T_i(j omega)`` for mode index ``i`` (0-based).

    With ``discrete=True`` the ZOH realization of ``lambda`` is used, which is
    the loop the time-domain simulator actually runs.
    """
    gamma = _gamma(params, i)
    lam = params.lam(omega, discrete)
    return gamma * lam / _denominator(gamma, lam)


def modal_sensitivity(params: ControllerParams, i, omega, discrete: bool = False):
    return 1.0 - modal_comp_sensitivity(params, i, omega, discrete)


def modal_input_gain(params: ControllerParams, i, sigma_i: float, omega, discrete: bool = False):
    """Transfer from ``r_i - d_i - n_i`` to the modal input ``u_i``."""
    gamma = _gamma(params, i)
    lam = params.lam(omega, discrete)
    g = params.g(omega, discrete)
    return gamma / sigma_i * (lam / g) / _denominator(gamma, lam)


def log_grid(fs_hz: float, n: int = 400, f_lo: float = 1e-2) -> np.ndarray:
    """Logarithmic analysis grid in Hz from ``f_lo`` to Nyquist."""
    return np.geomspace(f_lo, fs_hz / 2.0, n)


def bandwidth(curve, reference_level: float, lo: float, hi: float,
              rtol: float = 1e-6, n_scan: int = 2000) -> float:
    """First frequency in ``[lo, hi]`` where ``curve`` crosses ``reference_level``.

    The bracket is scanned on a log grid for the first sign change, which is
    then refined with Brent's method.
    """
    if not 0 < lo < hi:
        raise BracketError(f"invalid bracket [{lo}, {hi}]")
    w = np.geomspace(lo, hi, n_scan)
    f = np.asarray(curve(w), dtype=float) - reference_level
    if f[0] == 0:
        return float(w[0])
    flips = np.nonzero(np.sign(f[1:]) != np.sign(f[:-1]))[0]
    if flips.size == 0:
        raise BracketError(f"no crossing of level {reference_level:g} in [{lo:g}, {hi:g}] rad/s")
    k = flips[0]
    return float(brentq(lambda x: float(curve(np.array([x]))[0]) - reference_level,
                        w[k], w[k + 1], rtol=rtol, xtol=1e-300))


def _bracket(params: ControllerParams):
    return 1e-6, params.nyquist


def comp_sensitivity_bandwidth(params: ControllerParams, i: int) -> float:
    """-3 dB frequency (rad/s) of ``|T_i|`` relative to its DC value of 1."""
    lo, hi = _bracket(params)
    return bandwidth(lambda w: np.abs(modal_comp_sensitivity(params, i, w)), 1 / np.sqrt(2), lo, hi)


def sensitivity_bandwidth(params: ControllerParams, i: int) -> float:
    """Frequency (rad/s) where ``|S_i|`` first rises to -3 dB."""
    lo, hi = _bracket(params)
    return bandwidth(lambda w: np.abs(modal_sensitivity(params, i, w)), 1 / np.sqrt(2), lo, hi)
