"""Time-domain simulation of the IMC closed loop, per mode and in full.

The exact-model IMC loop decouples under the SVD, so the default closed-loop
path runs one scalar recurrence per mode and maps the result back. The
``method="mimo"`` path instead steps the controller in original coordinates
with full matrices; it exists as an independent check of the decoupling.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .dynamics import ControllerParams, comp_sensitivity_bandwidth, discretize
from .modal import ResponseModel, to_modal


@dataclass(frozen=True)
class SimRun:
    y: np.ndarray
    u: np.ndarray
    y_modal: np.ndarray
    u_modal: np.ndarray
    Ts: float
    saturation: dict = field(default_factory=dict)

    @property
    def N(self) -> int:
        return self.y.shape[0]


def _as_series(x, N, n, name):
    x = np.asarray(x, dtype=float)
    if x.shape != (N, n):
        raise ValueError(f"{name} has shape {x.shape}, expected {(N, n)}")
    if not np.all(np.isfinite(x)):
        raise ValueError(f"{name} contains non-finite samples")
    return x


def _poles(params: ControllerParams):
    g = discretize(params.plant, params.Ts)
    lam = discretize(params.shaping, params.Ts)
    return g.p, lam.p, g.delay


def count_saturation(run_y, run_u, u_max=None, y_max=None) -> dict:
    """Samples exceeding the limits; limits are monitored, never enforced."""
    out = {}
    if u_max is not None:
        out["u_exceed"] = int(np.count_nonzero(np.abs(run_u) > u_max))
    if y_max is not None:
        out["y_exceed"] = int(np.count_nonzero(np.abs(run_y) > y_max))
    return out


def simulate_modal_loop(params: ControllerParams, i: int, sigma_i: float, d, n, r, backend=None):
    """Single-mode loop; returns ``(y_i, u_i)`` modal output and input series."""
    if not sigma_i > 0:
        raise ValueError(f"sigma_i must be positive, got {sigma_i}")
    d, n, r = (np.asarray(x, dtype=float).reshape(-1, 1) for x in (d, n, r))
    if not d.shape == n.shape == r.shape:
        raise ValueError("modal series must have equal length")
    p, l, D = _poles(params)
    y, u = kernels.modal_loop(d, n, r, [sigma_i], [params.gamma[i]], p, l, D, backend=backend)
    return y[:, 0], u[:, 0]


def simulate_closed_loop(model: ResponseModel, params: ControllerParams, d, n, r,
                         method: str = "modal", u_max=None, y_max=None, backend=None) -> SimRun:
    """Closed loop driven by disturbance ``d``, noise ``n`` and reference ``r`` (all ``N x n_y``)."""
    if params.n_modes != model.n_y:
        raise ValueError(f"controller has {params.n_modes} modes, model has {model.n_y}")
    d = np.asarray(d, dtype=float)
    N = d.shape[0]
    d = _as_series(d, N, model.n_y, "d")
    n = _as_series(n, N, model.n_y, "n")
    r = _as_series(r, N, model.n_y, "r")
    if method == "modal":
        U = model.U
        y_m, u_m = kernels.modal_loop(d @ U, n @ U, r @ U, model.sigma, params.gamma,
                                      *_poles(params), backend=backend)
        y = y_m @ U.T
        u = u_m @ model.V.T
    elif method == "mimo":
        y, u = _mimo_loop(model, params, d, n, r)
        y_m, u_m = to_modal(y, model.U), to_modal(u, model.V)
    else:
        raise ValueError(f"unknown method {method!r}")
    return SimRun(y=y, u=u, y_modal=y_m, u_modal=u_m, Ts=params.Ts,
                  saturation=count_saturation(y, u, u_max, y_max))


def _mimo_loop(model: ResponseModel, params: ControllerParams, d, n, r):
    # IMC in original coordinates: e = Gamma (y + n - r) - P_hat u ; u = -Q e
    p, l, D = _poles(params)
    R = model.R
    Gamma = (model.U * params.gamma) @ model.U.T
    Qs = (model.V / model.sigma) @ model.U.T
    K = (1.0 - l) / (1.0 - p)
    N = d.shape[0]
    y = np.zeros((N, model.n_y))
    u = np.zeros((N, model.n_u))
    G = np.zeros((N, model.n_u))
    v = np.zeros(model.n_u)
    x_prev = np.zeros(model.n_u)
    for k in range(N):
        if k > 0:
            G[k] = p * G[k - 1] + (1.0 - p) * u[k - 1]
        gd = G[k - D] if k >= D else np.zeros(model.n_u)
        model_out = R @ gd
        y[k] = R @ gd + d[k]
        e = Gamma @ (y[k] + n[k] - r[k]) - model_out
        x = Qs @ e
        v = l * v + K * (x - p * x_prev)
        x_prev = x
        u[k] = -v
    return y, u


def simulate_open_loop(d, n, Ts: float = 1e-4) -> SimRun:
    """Loop disabled: ``y = d + n`` and zero input."""
    d = np.asarray(d, dtype=float)
    n = np.asarray(n, dtype=float)
    if d.shape != n.shape:
        raise ValueError(f"d {d.shape} and n {n.shape} differ in shape")
    y = d + n
    u = np.zeros_like(y)
    return SimRun(y=y, u=u, y_modal=y, u_modal=u, Ts=Ts)


def open_loop_modal(model: ResponseModel, d, n, Ts: float = 1e-4) -> SimRun:
    run = simulate_open_loop(d, n, Ts)
    return SimRun(y=run.y, u=np.zeros((run.N, model.n_u)), y_modal=to_modal(run.y, model.U),
                  u_modal=np.zeros((run.N, model.n_y)), Ts=Ts)


def settle_length(params: ControllerParams, N: int, factor: float = 5.0) -> int:
    """Transient prefix: ``factor`` slowest-mode time constants, capped at ``N // 4``."""
    slowest = int(np.argmin(params.gamma))
    tc = 1.0 / comp_sensitivity_bandwidth(params, slowest)
    return int(min(np.ceil(factor * tc / params.Ts), N // 4))
