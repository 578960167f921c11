"""Experiment configuration: parsing, validation and provenance hashing."""

from __future__ import annotations

import hashlib
import json
import os
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

from ..errors import ConfigError
from ..mle import Schedule
from ..models import REGISTRY, get_model

MODES = ("batch", "online", "likelihood-eval", "pit-check", "gradient-histogram")
PREPROCESS = ("none", "log_returns", "ar1_residuals")
OUTPUT_ROOT_ENV = "NOISYABC_OUTPUT_ROOT"
EXECUTION_ONLY = ("workers", "output_dir", "enabled", "description")


@dataclass
class ExperimentConfig:
    name: str
    model: str
    mode: str
    epsilon: float
    n_particles: int
    model_options: dict = field(default_factory=dict)
    theta_true: list | None = None
    data_path: str | None = None
    preprocess: str = "none"
    n: int | None = None
    theta0: list | None = None
    theta: list | None = None
    thetas: list | None = None
    use_psi: bool | None = None
    corrupt_data: bool = True
    schedule: dict = field(default_factory=dict)
    score_method: str = "ON"
    iterations: int = 1000
    average_last: int = 1000
    thin: int = 1
    precenter: bool = False
    precenter_head: int = 100
    replicates: int = 1
    shared_data: bool = False
    seed: int = 0
    n_evals: int = 10
    pit_evaluate: str = "noisy"
    histogram_bins: int = 100
    write_samples: bool = False
    record_time: bool = False
    workers: int = 1
    enabled: bool = True
    output_dir: str = "results"
    description: str = ""

    # -- construction ----------------------------------------------------------
    @classmethod
    def from_dict(cls, raw: dict) -> "ExperimentConfig":
        if not isinstance(raw, dict):
            raise ConfigError("config must be a JSON object")
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(raw) - known)
        if unknown:
            raise ConfigError(f"unknown config keys: {unknown}")
        missing = [k for k in ("name", "model", "mode", "epsilon", "n_particles") if k not in raw]
        if missing:
            raise ConfigError(f"missing required config keys: {missing}")
        try:
            cfg = cls(**raw)
        except TypeError as exc:
            raise ConfigError(str(exc)) from None
        cfg.validate()
        return cfg

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        try:
            with open(path) as fh:
                raw = json.load(fh)
        except FileNotFoundError:
            raise ConfigError(f"config file not found: {path}") from None
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON ({exc})") from None
        cfg = cls.from_dict(raw)
        if cfg.data_path and not os.path.isabs(cfg.data_path):
            cfg.data_path = str((Path(path).parent / cfg.data_path).resolve())
        return cfg

    # -- validation --------------------------------------------------------------
    def build_model(self):
        return get_model(self.model, **self.model_options)

    def validate(self) -> None:
        if self.model not in REGISTRY:
            raise ConfigError(f"unknown model {self.model!r}; registered: {sorted(REGISTRY)}")
        if self.mode not in MODES:
            raise ConfigError(f"unknown mode {self.mode!r}; expected one of {MODES}")
        model = self.build_model()
        if not (isinstance(self.epsilon, (int, float)) and self.epsilon > 0):
            raise ConfigError(f"epsilon must be a positive number, got {self.epsilon!r}")
        if not (isinstance(self.n_particles, int) and self.n_particles >= 2):
            raise ConfigError(f"n_particles must be an integer >= 2, got {self.n_particles!r}")
        if self.preprocess not in PREPROCESS:
            raise ConfigError(f"preprocess must be one of {PREPROCESS}")
        if (self.theta_true is None) == (self.data_path is None):
            raise ConfigError("exactly one of theta_true (simulate) or data_path (load) is required")
        if self.theta_true is not None:
            self._check_theta(model, self.theta_true, "theta_true")
            if not (isinstance(self.n, int) and self.n >= 1):
                raise ConfigError("n (data length) is required when simulating from theta_true")
        if self.mode in ("batch", "online"):
            if self.theta0 is None:
                raise ConfigError(f"mode {self.mode!r} requires theta0")
            self._check_theta(model, self.theta0, "theta0")
            Schedule(**self.schedule).multipliers(model.d_theta)
            if self.score_method not in ("ON", "ON2"):
                raise ConfigError("score_method must be 'ON' or 'ON2'")
        if self.mode == "batch":
            if self.iterations < 1 or self.average_last < 1:
                raise ConfigError("iterations and average_last must be >= 1")
        if self.mode == "likelihood-eval":
            if not self.thetas:
                raise ConfigError("mode 'likelihood-eval' requires a nonempty thetas list")
            for i, th in enumerate(self.thetas):
                self._check_theta(model, th, f"thetas[{i}]")
            if self.n_evals < 1:
                raise ConfigError("n_evals must be >= 1")
        if self.mode in ("pit-check", "gradient-histogram"):
            if self.theta is None and self.theta_true is None:
                raise ConfigError(f"mode {self.mode!r} requires theta (or theta_true)")
            if self.theta is not None:
                self._check_theta(model, self.theta, "theta")
        if self.mode == "gradient-histogram" and model.d_x != 0:
            raise ConfigError("gradient-histogram needs a model without hidden dynamics")
        if self.pit_evaluate not in ("noisy", "raw"):
            raise ConfigError("pit_evaluate must be 'noisy' or 'raw'")
        if self.precenter and getattr(model, "location_param", None) is None:
            raise ConfigError(f"model {self.model!r} has no location parameter to pre-center")
        for key in ("replicates", "workers", "thin", "histogram_bins", "precenter_head"):
            if getattr(self, key) < 1:
                raise ConfigError(f"{key} must be >= 1")
        if not isinstance(self.seed, int) or self.seed < 0:
            raise ConfigError("seed must be a nonnegative integer")

    @staticmethod
    def _check_theta(model, theta, label):
        if len(theta) != model.d_theta:
            raise ConfigError(f"{label} has {len(theta)} entries; {model.name} expects {model.d_theta} {model.param_names}")
        try:
            model.check(theta)
        except ValueError as exc:
            raise ConfigError(f"{label}: {exc}") from None

    # -- provenance --------------------------------------------------------------
    def to_dict(self) -> dict:
        return asdict(self)

    def canonical_json(self) -> str:
        """Settings that determine results; execution-only fields are left out."""
        d = {k: v for k, v in self.to_dict().items() if k not in EXECUTION_ONLY}
        return json.dumps(d, sort_keys=True, separators=(",", ":"))

    def hash(self) -> str:
        return hashlib.sha256(self.canonical_json().encode()).hexdigest()[:16]

    def output_path(self) -> Path:
        root = os.environ.get(OUTPUT_ROOT_ENV) or self.output_dir
        return Path(root) / self.name

    def schedule_obj(self) -> Schedule:
        return Schedule(**self.schedule)
