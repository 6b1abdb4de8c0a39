"""Response matrix container, SVD modal basis and synthetic response matrices.

A cross-directional plant factors as ``P(s) = R g(s)``. The thin SVD
``R = U diag(sigma) V^T`` maps outputs and inputs into modal coordinates
``y_modal = U^T y`` and ``u_modal = V^T u`` in which the loop decouples.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

RANK_TOL = 1e-12


class RankError(ValueError):
    """Raised when a response matrix does not have full row rank."""


@dataclass(frozen=True)
class ResponseModel:
    """Response matrix ``R`` (n_y x n_u, um/A) with its thin SVD factors."""

    R: np.ndarray
    U: np.ndarray
    sigma: np.ndarray
    V: np.ndarray
    n_y: int = field(init=False)
    n_u: int = field(init=False)

    def __post_init__(self):
        for name in ("R", "U", "sigma", "V"):
            arr = np.array(getattr(self, name), dtype=float)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        n_y, n_u = self.R.shape
        object.__setattr__(self, "n_y", n_y)
        object.__setattr__(self, "n_u", n_u)
        if self.U.shape != (n_y, n_y) or self.V.shape != (n_u, n_y) or self.sigma.shape != (n_y,):
            raise ValueError(
                f"inconsistent SVD factor shapes: U{self.U.shape}, sigma{self.sigma.shape}, "
                f"V{self.V.shape} for R{self.R.shape}"
            )
        if np.any(self.sigma <= 0) or np.any(np.diff(self.sigma) > 0):
            raise ValueError("singular values must be positive and non-increasing")

    @property
    def kappa(self) -> float:
        return condition_number(self)

    def to_dict(self) -> dict:
        return {"n_y": self.n_y, "n_u": self.n_u, "sigma": self.sigma.tolist()}


def svd_decompose(R) -> ResponseModel:
    """Thin SVD of a full-row-rank response matrix.

    Raises
    ------
    RankError
        If ``n_y > n_u`` or any singular value falls below ``1e-12 * sigma_max``.
    """
    R = np.asarray(R, dtype=float)
    if R.ndim != 2:
        raise ValueError(f"response matrix must be 2-D, got shape {R.shape}")
    n_y, n_u = R.shape
    if n_y > n_u:
        raise RankError(f"need n_y <= n_u for full row rank, got {n_y} x {n_u}")
    if not np.all(np.isfinite(R)):
        raise ValueError("response matrix contains non-finite entries")
    U, s, Vt = np.linalg.svd(R, full_matrices=False)
    if s[0] == 0 or s[-1] < RANK_TOL * s[0]:
        raise RankError(f"rank-deficient response matrix: sigma_min/sigma_max = {s[-1] / max(s[0], 1e-300):.3e}")
    return ResponseModel(R=R, U=U, sigma=s, V=Vt.T)


def condition_number(model: ResponseModel) -> float:
    return float(model.sigma[0] / model.sigma[-1])


def _check_basis(signal: np.ndarray, basis: np.ndarray) -> None:
    if signal.shape[-1] != basis.shape[0]:
        raise ValueError(
            f"signal has {signal.shape[-1]} channels but basis has {basis.shape[0]} rows"
        )


def to_modal(signal, basis) -> np.ndarray:
    """Project samples (rows of ``signal``) onto the columns of ``basis``.

    ``basis`` is ``U`` for outputs and ``V`` for inputs; a single sample may
    be given as a 1-D vector.
    """
    signal = np.asarray(signal, dtype=float)
    basis = np.asarray(basis, dtype=float)
    _check_basis(signal, basis)
    return signal @ basis


def from_modal(signal, basis) -> np.ndarray:
    """Expand modal coordinates back into the original channel space."""
    signal = np.asarray(signal, dtype=float)
    basis = np.asarray(basis, dtype=float)
    if signal.shape[-1] != basis.shape[1]:
        raise ValueError(
            f"modal signal has {signal.shape[-1]} modes but basis has {basis.shape[1]} columns"
        )
    return signal @ basis.T


def geometric_sigma(n: int, sigma_max: float, sigma_min: float) -> np.ndarray:
    if n == 1:
        return np.array([float(sigma_max)])
    sigma = np.geomspace(sigma_max, sigma_min, n)
    # pin endpoints so kappa is exact
    sigma[0], sigma[-1] = sigma_max, sigma_min
    return sigma


def _random_orthonormal(rng: np.random.Generator, rows: int, cols: int) -> np.ndarray:
    Q, Rq = np.linalg.qr(rng.standard_normal((rows, cols)))
    # sign fix makes the factor Haar-distributed
    return Q * np.sign(np.diag(Rq))


def generate_synthetic_response(
    n_y: int, n_u: int, sigma_max: float, sigma_min: float, seed: int
) -> ResponseModel:
    """Seeded ill-conditioned response matrix with geometrically spaced singular values."""
    if n_y < 1 or n_u < n_y:
        raise ValueError(f"need 1 <= n_y <= n_u, got n_y={n_y}, n_u={n_u}")
    if not (sigma_min > 0 and sigma_max >= sigma_min):
        raise ValueError(f"need sigma_max >= sigma_min > 0, got {sigma_max}, {sigma_min}")
    rng = np.random.default_rng(seed)
    U = _random_orthonormal(rng, n_y, n_y)
    V = _random_orthonormal(rng, n_u, n_y)
    sigma = geometric_sigma(n_y, sigma_max, sigma_min)
    R = (U * sigma) @ V.T
    return ResponseModel(R=R, U=U, sigma=sigma, V=V)


def load_response_csv(path, n_y: int | None = None, n_u: int | None = None) -> np.ndarray:
    """Plain rectangular CSV, one row per output channel."""
    R = np.loadtxt(path, delimiter=",", ndmin=2)
    if not np.all(np.isfinite(R)):
        raise ValueError(f"{path}: non-finite entries in response matrix")
    if (n_y is not None and R.shape[0] != n_y) or (n_u is not None and R.shape[1] != n_u):
        raise ValueError(f"{path}: expected {n_y} x {n_u} response matrix, got {R.shape}")
    return R


def save_model(model: ResponseModel, out_dir) -> Path:
    """Write R/U/V CSVs and a JSON index; returns the JSON path."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    files = {}
    for name in ("R", "U", "V"):
        fname = f"{name}.csv"
        np.savetxt(out_dir / fname, getattr(model, name), delimiter=",", fmt="%.17g")
        files[name] = fname
    doc = model.to_dict() | {"files": files, "kappa": model.kappa}
    path = out_dir / "model.json"
    path.write_text(json.dumps(doc, indent=2))
    return path


def load_model(path) -> ResponseModel:
    """Load a model JSON written by :func:`save_model`.

    The stored factors are used as-is after checking they reproduce ``R``;
    re-running the SVD could flip column signs.
    """
    path = Path(path)
    doc = json.loads(path.read_text())
    base = path.parent
    R = load_response_csv(base / doc["files"]["R"], doc["n_y"], doc["n_u"])
    U = np.loadtxt(base / doc["files"]["U"], delimiter=",", ndmin=2)
    V = np.loadtxt(base / doc["files"]["V"], delimiter=",", ndmin=2)
    model = ResponseModel(R=R, U=U, sigma=np.asarray(doc["sigma"]), V=V)
    err = np.linalg.norm((model.U * model.sigma) @ model.V.T - R) / np.linalg.norm(R)
    if err > 1e-10:
        raise ValueError(f"{path}: stored factors do not reconstruct R (rel. error {err:.2e})")
    return model
