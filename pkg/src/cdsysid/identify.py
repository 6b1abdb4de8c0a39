"""Mode-by-mode closed-loop identification of the complementary sensitivity."""
from __future__ import annotations

import csv
import json
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .disturbance import (
    DisturbanceSpec,
    synth_disturbance,
    synth_modal_disturbance,
    synth_modal_noise,
    synth_noise,
)
from .dynamics import ControllerParams, log_grid, modal_comp_sensitivity
from .loop import count_saturation, open_loop_modal, settle_length, simulate_closed_loop, simulate_modal_loop
from .modal import ResponseModel
from .refdesign import (
    DEFAULT_COVERAGE,
    BoundsReport,
    ModalSpectrum,
    compute_bounds,
    design_chirp,
    modal_asd,
)
from .spectral import (
    ErrorReport,
    GridError,
    SpectralEstimate,
    assemble_full,
    blackman_tukey,
    common_values,
    estimate_grid,
)

log = logging.getLogger(__name__)

# realization 0 is reserved for the open-loop record used by the bounds
BOUNDS_REALIZATION = 0


@dataclass
class IdentificationResult:
    estimates: dict
    errors: ErrorReport
    bounds: BoundsReport
    diagnostics: dict = field(default_factory=dict)
    failed: dict = field(default_factory=dict)
    settle: int = 0

    def feasible_within(self) -> dict:
        """``mode -> sup error <= eps_max`` for every estimated mode."""
        return {m: self.errors.sup_error(m) <= self.errors.eps_max for m in self.estimates}

    def summary(self) -> dict:
        modes = []
        for m in sorted(self.diagnostics):
            modes.append({"mode": m + 1} | self.diagnostics[m])
        return {
            "eps_max": self.errors.eps_max,
            "settle_samples": self.settle,
            "n_modes": len(self.diagnostics),
            "failed_modes": {str(m + 1): msg for m, msg in self.failed.items()},
            "max_abs_u_modal": _peak(d["max_abs_u_modal"] for d in self.diagnostics.values()),
            "max_abs_u": _peak(d["max_abs_u"] for d in self.diagnostics.values()),
            "violations": [d["mode"] for d in modes if d["feasible"] and not d["within_eps"]],
            "modes": modes,
        }


def _peak(values) -> float:
    values = [v for v in values if not np.isnan(v)]
    return float(max(values)) if values else float("nan")


def open_loop_spectrum(model: ResponseModel, dist: DisturbanceSpec, N: int,
                       freq_hz=None, realization: int = BOUNDS_REALIZATION) -> ModalSpectrum:
    """Modal ASD of an open-loop record ``d + n`` of length ``N``."""
    if freq_hz is None:
        freq_hz = log_grid(dist.fs)
    d = synth_disturbance(dist, N, realization)
    n = synth_noise(dist, N, realization)
    run = open_loop_modal(model, d, n, 1.0 / dist.fs)
    return ModalSpectrum(freq_hz, modal_asd(run.y_modal, dist.fs, freq_hz))


def identify_mode(i: int, model: ResponseModel, params: ControllerParams, dist: DisturbanceSpec,
                  bounds: BoundsReport, N: int, settle: int, *, u_limit=None, y_limit=None,
                  backend=None, discrete_truth: bool = True, decoupled: bool = False):
    """Run one experiment: chirp along ``U_i``, simulate, project, estimate.

    With ``decoupled`` only mode ``i``'s scalar loop is simulated. Disturbance
    and noise are drawn per mode, so ``y_i`` is the same as in the full run;
    the input and output maxima then cover mode ``i`` alone and the
    original-space maxima are reported as NaN.
    """
    chirp, rho = design_chirp(i, params, bounds, N)
    L = settle + N
    r_i = np.zeros(L)
    r_i[settle:] = rho
    if decoupled:
        d_i = synth_modal_disturbance(dist, L, 1 + i, modes=i)[:, 0]
        n_i = synth_modal_noise(dist, L, 1 + i, modes=i)[:, 0]
        y_m, u_m = simulate_modal_loop(params, i, model.sigma[i], d_i, n_i, r_i, backend=backend)
        y_i = y_m[settle:]
        peaks = {"max_abs_u_modal": np.max(np.abs(u_m)), "max_abs_u": np.nan,
                 "max_abs_y_modal": np.max(np.abs(y_m)), "max_abs_y": np.nan}
        saturation = count_saturation(y_m, u_m, u_limit, y_limit)
    else:
        d = synth_disturbance(dist, L, realization=1 + i)
        n = synth_noise(dist, L, realization=1 + i)
        r = np.outer(r_i, model.U[:, i])
        run = simulate_closed_loop(model, params, d, n, r, u_max=u_limit, y_max=y_limit, backend=backend)
        y_i = run.y[settle:] @ model.U[:, i]
        peaks = {"max_abs_u_modal": np.max(np.abs(run.u_modal)), "max_abs_u": np.max(np.abs(run.u)),
                 "max_abs_y_modal": np.max(np.abs(run.y_modal)), "max_abs_y": np.max(np.abs(run.y))}
        saturation = run.saturation
    k = bounds.row(i)
    grid = estimate_grid(chirp.omega_hat)
    est = blackman_tukey(y_i, rho, int(bounds.M[k]), grid, params.Ts, mode=i)
    truth = modal_comp_sensitivity(params, i, grid, discrete=discrete_truth)
    err = np.where(est.valid, np.abs(est.T_hat - truth), np.nan)
    diag = {
        "feasible": bool(bounds.feasible[k]),
        "lower_um": float(bounds.lower[k]),
        "amplitude_um": chirp.amplitude,
        "omega_hat_rad_s": chirp.omega_hat,
        "M": est.M,
        "M_clamped": est.clamped,
        "n_invalid": int(np.count_nonzero(~est.valid)),
    } | {key: float(v) for key, v in peaks.items()} | saturation
    return est, err, diag


def identify_all(model: ResponseModel, params: ControllerParams, dist: DisturbanceSpec, *,
                 eps_max: float, u_max: float, y_max: float, N: int, modes=None,
                 spectrum: ModalSpectrum | None = None, u_limit: float | None = None,
                 coverage: float = DEFAULT_COVERAGE, workers: int = 1, backend=None,
                 discrete_truth: bool = True, settle: int | None = None,
                 decoupled: bool = False) -> IdentificationResult:
    """Identify ``T_i`` for every requested mode and compare with the analytic loop.

    ``u_max`` sizes the chirps; ``u_limit`` (default ``u_max``) is the hard
    actuator limit the simulated inputs are checked against. A failing mode
    is recorded in ``failed`` and does not stop the others. ``decoupled``
    simulates each experiment as a single scalar loop (see
    :func:`identify_mode`), which makes the cost linear in the number of modes.
    """
    modes = np.arange(model.n_y) if modes is None else np.asarray(modes, dtype=int)
    if spectrum is None:
        spectrum = open_loop_spectrum(model, dist, N)
    bounds = compute_bounds(model.sigma, params, spectrum, eps_max=eps_max, u_max=u_max,
                            y_max=y_max, N=N, modes=modes, coverage=coverage)
    if settle is None:
        settle = settle_length(params, N)
    u_limit = u_max if u_limit is None else u_limit

    def task(i):
        try:
            return i, identify_mode(int(i), model, params, dist, bounds, N, settle, u_limit=u_limit,
                                    y_limit=y_max, backend=backend, discrete_truth=discrete_truth,
                                    decoupled=decoupled), None
        except Exception as exc:  # per-mode failures are reported, not raised
            log.warning("mode %d failed: %s", i + 1, exc)
            return i, None, f"{type(exc).__name__}: {exc}"

    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            outcomes = list(pool.map(task, modes))
    else:
        outcomes = [task(i) for i in modes]

    result = IdentificationResult({}, ErrorReport(eps_max), bounds, settle=settle)
    for i, out, msg in outcomes:
        i = int(i)
        if out is None:
            result.failed[i] = msg
            continue
        est, err, diag = out
        result.estimates[i] = est
        result.errors.abs_error[i] = err
        result.errors.freq_grid[i] = est.freq_grid
        diag["sup_error"] = result.errors.sup_error(i)
        diag["within_eps"] = bool(diag["sup_error"] <= eps_max)
        result.diagnostics[i] = diag
    _fill_spectral_norm(result, model, params, discrete_truth)
    return result


def _fill_spectral_norm(result: IdentificationResult, model, params, discrete_truth, n: int = 50):
    # only defined where every estimated mode has a valid grid, and only for full-mode runs
    ests = [result.estimates[m] for m in sorted(result.estimates)]
    if len(ests) != model.n_y:
        return
    lo = max(e.freq_grid[0] for e in ests)
    hi = min(e.freq_grid[-1] for e in ests)
    if lo > hi:
        return
    grid = np.geomspace(lo, hi, n)
    try:
        T_hat = common_values(ests, grid)
    except GridError:
        return
    modes = np.array(sorted(result.estimates))
    norms = np.empty(n)
    for k, w in enumerate(grid):
        T_true = np.array([modal_comp_sensitivity(params, m, w, discrete=discrete_truth) for m in modes])
        norms[k] = assemble_full(T_hat[k], model.U, T_true)[1]
    result.errors.common_grid = grid
    result.errors.spectral_norm_error = norms


def write_estimates(result: IdentificationResult, path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["mode", "freq_hz", "re_That", "im_That", "abs_err", "valid"])
        for m in sorted(result.estimates):
            est = result.estimates[m]
            err = result.errors.abs_error[m]
            for k, omega in enumerate(est.freq_grid):
                t = est.T_hat[k]
                w.writerow([m + 1, repr(float(omega / (2 * np.pi))), repr(float(t.real)),
                            repr(float(t.imag)), repr(float(err[k])), int(est.valid[k])])


def write_summary(result: IdentificationResult, path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(result.summary(), indent=2, allow_nan=True))
