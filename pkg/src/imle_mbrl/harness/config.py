"""Experiment configuration: flat key=value files plus CLI overrides.

Every field of ExperimentConfig is a key in the config file and a CLI flag
of the same name; precedence is CLI > file > defaults.  Defaults follow
the common-hyperparameter table the method ships with.
"""

from __future__ import annotations

from dataclasses import dataclass, fields

from ..envs import REGISTRY

MODEL_VARIANTS = ("imle", "gaussian", "none")
# horizon=0 means per-env default
AUTO_HORIZON = {"pendulum": 4, "bimodal-fork": 1}
HORIZON_CAP = 8


@dataclass(frozen=True)
class ExperimentConfig:
    env: str = "pendulum"
    steps: int = 30000
    seed: int = 0
    model: str = "imle"
    horizon: int = 0
    members: int = 7
    rollouts: int = 200
    candidates: int = 4
    latent_dim: int = 16
    model_hidden: int = 32
    model_blocks: int = 3
    model_lr: float = 1e-3
    model_batch: int = 512
    model_updates: int = 100
    train_freq: int = 1000
    actor_lr: float = 3e-4
    critic_lr: float = 3e-4
    alpha_lr: float = 3e-4
    agent_batch: int = 128
    quantiles: int = 100
    updates_per_step: int = 10
    real_fraction: float = 0.5
    warmup: int = 1000
    eval_interval: int = 1000
    eval_episodes: int = 5
    weighting: bool = True
    weight_actor: bool = False
    force_zero_sigma: bool = False
    # horizon above the default cap is reserved for the long-horizon study
    allow_long_horizon: bool = False

    def __post_init__(self):
        if self.env not in REGISTRY:
            raise ValueError(f"unknown env '{self.env}'; "
                             f"choose from {sorted(REGISTRY)}")
        if self.model not in MODEL_VARIANTS:
            raise ValueError(f"unknown model variant '{self.model}'; "
                             f"choose from {MODEL_VARIANTS}")
        for name in ("steps", "members", "rollouts", "candidates", "latent_dim",
                     "model_hidden", "model_blocks", "model_batch",
                     "model_updates", "train_freq", "agent_batch", "quantiles",
                     "updates_per_step", "eval_interval", "eval_episodes"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be positive")
        for name in ("model_lr", "actor_lr", "critic_lr", "alpha_lr"):
            if getattr(self, name) <= 0.0:
                raise ValueError(f"{name} must be positive")
        if not 0.0 <= self.real_fraction <= 1.0:
            raise ValueError("real_fraction must be in [0, 1]")
        if self.horizon < 0:
            raise ValueError("horizon must be 0 (auto) or positive")
        if self.warmup < 0:
            raise ValueError("warmup must be non-negative")
        if (self.resolved_horizon() > HORIZON_CAP
                and not self.allow_long_horizon):
            raise ValueError(
                f"horizon {self.resolved_horizon()} exceeds the default cap "
                f"{HORIZON_CAP}; set allow_long_horizon=true to override")

    def resolved_horizon(self) -> int:
        return AUTO_HORIZON[self.env] if self.horizon == 0 else self.horizon

    def as_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}


def _coerce(name: str, kind: type, raw: str):
    if kind is bool:
        low = raw.strip().lower()
        if low in ("1", "true", "on", "yes"):
            return True
        if low in ("0", "false", "off", "no"):
            return False
        raise ValueError(f"{name}: expected a boolean, got '{raw}'")
    try:
        return kind(raw)
    except ValueError as exc:
        raise ValueError(f"{name}: expected {kind.__name__}, got '{raw}'") from exc


def parse_config_text(text: str) -> dict[str, str]:
    """key=value lines; blank lines and # comments ignored."""
    raw: dict[str, str] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            raise ValueError(f"line {lineno}: expected key=value, got '{line.strip()}'")
        key, value = stripped.split("=", 1)
        raw[key.strip()] = value.strip()
    return raw


def build_config(file_values: dict[str, str] | None = None,
                 overrides: dict | None = None) -> ExperimentConfig:
    """Merge defaults <- config file <- explicit overrides (CLI flags)."""
    types = {f.name: f.type for f in fields(ExperimentConfig)}
    kinds = {"str": str, "int": int, "float": float, "bool": bool}
    merged: dict = {}
    for key, value in (file_values or {}).items():
        if key not in types:
            raise ValueError(f"unknown config key '{key}'")
        merged[key] = _coerce(key, kinds[types[key]], value)
    for key, value in (overrides or {}).items():
        if value is None:
            continue
        if key not in types:
            raise ValueError(f"unknown config key '{key}'")
        merged[key] = (_coerce(key, kinds[types[key]], value)
                       if isinstance(value, str) else value)
    return ExperimentConfig(**merged)


def load_config(path, overrides: dict | None = None) -> ExperimentConfig:
    with open(path, encoding="utf-8") as fh:
        return build_config(parse_config_text(fh.read()), overrides)
