"""Model/training configuration and the ``key=value`` config file format."""

from __future__ import annotations

import dataclasses
import os
from dataclasses import dataclass, fields

MODES = ("full", "self_only", "social_only", "short_only", "long_only")
DTYPES = ("float32", "float64")


class ConfigError(ValueError):
    pass


@dataclass
class ModelConfig:
    hidden: int = 100
    embed: int = 100
    layers: int = 2
    fanouts: tuple[int, ...] = (10, 15)
    dropout: float = 0.2
    batch: int = 200
    base_lr: float = 0.002
    decay: float = 0.98
    decay_interval: int = 400
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    max_session_len: int = 20
    mode: str = "full"
    seed: int = 0
    epochs: int = 30
    patience: int = 5
    eval_k: int = 20
    dtype: str = "float32"
    tie_embeddings: bool = False
    strict_train_context: bool = False

    def __post_init__(self):
        self.fanouts = tuple(int(k) for k in self.fanouts)
        self.validate()

    def validate(self) -> None:
        if self.mode not in MODES:
            raise ConfigError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.dtype not in DTYPES:
            raise ConfigError(f"dtype must be one of {DTYPES}, got {self.dtype!r}")
        for name in ("hidden", "embed", "layers", "batch", "decay_interval", "max_session_len",
                     "epochs", "patience", "eval_k"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be positive")
        if len(self.fanouts) != self.layers or min(self.fanouts) < 1:
            raise ConfigError(f"need {self.layers} positive fan-outs, got {self.fanouts}")
        if not 0.0 <= self.dropout < 1.0:
            raise ConfigError("dropout must lie in [0, 1)")
        if self.base_lr <= 0 or not 0 < self.decay <= 1:
            raise ConfigError("learning rate and decay must be positive (decay <= 1)")
        if self.tie_embeddings and self.embed != self.hidden:
            raise ConfigError("tie_embeddings needs embed == hidden")

    @property
    def np_dtype(self):
        import numpy as np

        return np.float32 if self.dtype == "float32" else np.float64

    def replace(self, **changes) -> "ModelConfig":
        return dataclasses.replace(self, **changes)

    def to_text(self) -> str:
        lines = []
        for f in fields(self):
            value = getattr(self, f.name)
            if isinstance(value, tuple):
                value = ",".join(str(v) for v in value)
            elif isinstance(value, bool):
                value = "true" if value else "false"
            lines.append(f"{f.name}={value}")
        return "\n".join(lines) + "\n"


_FIELDS = {f.name: f for f in fields(ModelConfig)}


def _coerce(name: str, raw: str):
    default = getattr(ModelConfig, name, None)
    if name == "fanouts":
        try:
            return tuple(int(x) for x in raw.replace(" ", "").split(",") if x)
        except ValueError:
            raise ConfigError(f"fanouts must be comma-separated integers, got {raw!r}") from None
    if isinstance(default, bool):
        low = raw.strip().lower()
        if low in ("1", "true", "yes", "on"):
            return True
        if low in ("0", "false", "no", "off"):
            return False
        raise ConfigError(f"{name} expects a boolean, got {raw!r}")
    try:
        if isinstance(default, int):
            return int(raw)
        if isinstance(default, float):
            return float(raw)
    except ValueError:
        raise ConfigError(f"{name} expects {type(default).__name__}, got {raw!r}") from None
    return raw.strip()


def parse_config_text(text: str) -> dict:
    """Parse ``key=value`` lines; ``#`` starts a comment. Unknown keys fail."""
    out = {}
    for n, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {n}: expected key=value, got {line!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        key = key.replace("-", "_")
        if key not in _FIELDS:
            raise ConfigError(f"line {n}: unknown config key {key!r}")
        out[key] = _coerce(key, value)
    return out


def resolve_config(path: str | None = None, overrides: dict | None = None) -> ModelConfig:
    """Defaults, then the file, then ``overrides`` (CLI flags) win.

    ``DGREC_SEED`` supplies the seed when neither file nor flags set it.
    """
    values: dict = {}
    env_seed = os.environ.get("DGREC_SEED")
    if env_seed is not None:
        values["seed"] = _coerce("seed", env_seed)
    if path is not None:
        with open(path, encoding="utf-8") as fh:
            values.update(parse_config_text(fh.read()))
    for key, value in (overrides or {}).items():
        if value is None:
            continue
        key = key.replace("-", "_")
        if key not in _FIELDS:
            raise ConfigError(f"unknown config key {key!r}")
        values[key] = _coerce(key, value) if isinstance(value, str) else value
    if "fanouts" in values and "layers" not in values:
        values["layers"] = len(values["fanouts"])
    if "layers" in values and "fanouts" not in values:
        base = ModelConfig.fanouts
        values["fanouts"] = tuple(base[i] if i < len(base) else base[-1] for i in range(values["layers"]))
    return ModelConfig(**values)
