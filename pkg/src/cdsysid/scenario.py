"""Scenario configuration: one JSON document with unit-suffixed keys."""
from __future__ import annotations

import json
from dataclasses import dataclass, field, fields
from pathlib import Path

from .disturbance import DisturbanceSpec
from .dynamics import ControllerParams
from .modal import ResponseModel, generate_synthetic_response, load_model, load_response_csv, svd_decompose


@dataclass
class Scenario:
    # plant / synthetic response matrix
    n_y: int = 165
    n_u: int = 165
    sigma_max: float = 195.0
    sigma_min: float = 0.02
    seed: int = 1
    response_matrix_csv: str | None = None
    model_json: str | None = None
    # controller
    lambda_bar_hz: float = 176.0
    mu: float = 1.0
    a_hz: float = 700.0
    tau_d_s: float = 900e-6
    fs_hz: float = 10_000.0
    # disturbance and noise
    dist_scale: float = 1e-4
    dist_corner_hz: float = 50.0
    noise_std: float = 0.3
    # limits and identification
    u_max_amp: float = 5.0
    u_design_amp: float | None = 1.0
    y_max_um: float = 150.0
    eps_max: float = 0.1
    n_samples: int = 10_000
    openloop_samples: int = 10_000
    coverage: float = 4.0
    out_dir: str = "out"
    base_dir: Path = field(default=Path("."), repr=False)

    def __post_init__(self):
        for name in ("u_max_amp", "y_max_um", "eps_max", "n_samples", "openloop_samples", "fs_hz"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive, got {getattr(self, name)}")
        if self.u_design_amp is None:
            self.u_design_amp = self.u_max_amp

    @classmethod
    def from_dict(cls, doc: dict, base_dir=".") -> "Scenario":
        known = {f.name for f in fields(cls)} - {"base_dir"}
        unknown = set(doc) - known
        if unknown:
            raise ValueError(f"unknown scenario keys: {', '.join(sorted(unknown))}")
        return cls(**doc, base_dir=Path(base_dir))

    @classmethod
    def load(cls, path) -> "Scenario":
        path = Path(path)
        return cls.from_dict(json.loads(path.read_text()), base_dir=path.parent)

    def to_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self) if f.name != "base_dir"}

    def resolve(self, p) -> Path:
        p = Path(p)
        return p if p.is_absolute() else self.base_dir / p

    @property
    def Ts(self) -> float:
        return 1.0 / self.fs_hz

    def synthetic_model(self) -> ResponseModel:
        if self.response_matrix_csv:
            return svd_decompose(load_response_csv(self.resolve(self.response_matrix_csv), self.n_y, self.n_u))
        return generate_synthetic_response(self.n_y, self.n_u, self.sigma_max, self.sigma_min, self.seed)

    def load_model(self, out_dir=None) -> ResponseModel:
        """Model written by ``gen-system`` (or the configured ``model_json``)."""
        path = self.resolve(self.model_json) if self.model_json else Path(out_dir or self.out_dir) / "model.json"
        if not path.exists():
            raise FileNotFoundError(f"model file {path} not found; run gen-system first")
        model = load_model(path)
        if (model.n_y, model.n_u) != (self.n_y, self.n_u):
            raise ValueError(f"model {path} is {model.n_y}x{model.n_u}, scenario expects {self.n_y}x{self.n_u}")
        return model

    def params(self, model: ResponseModel) -> ControllerParams:
        return ControllerParams.from_sigma(model.sigma, lambda_bar_hz=self.lambda_bar_hz, mu=self.mu,
                                           a_hz=self.a_hz, tau_d_s=self.tau_d_s, fs_hz=self.fs_hz)

    def dist_spec(self, model: ResponseModel) -> DisturbanceSpec:
        return DisturbanceSpec(model, self.dist_scale, self.dist_corner_hz, self.noise_std, self.seed, self.fs_hz)


def smoke_scenario(**overrides) -> Scenario:
    """Eight-mode system whose modes are all feasible at ``eps_max = 0.1``."""
    doc = dict(n_y=8, n_u=8, sigma_max=195.0, sigma_min=5.0, dist_scale=1e-4, noise_std=0.05)
    doc.update(overrides)
    return Scenario(**doc)
