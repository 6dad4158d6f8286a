"""Run configuration: dataclasses plus strict JSON validation for the CLI.

Validation rejects unknown keys so a typo in a config file fails loudly
instead of silently using a default.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

from .corpus import SyntheticSpec
from .errors import ConfigError, SchemaError

VARIANTS = ("ssm", "slm", "semnet")


@dataclass
class TrainConfig:
    margin: float = 0.2
    learning_rate: float = 1e-3
    epochs: int = 30
    batch_size: int = 16
    seed: int = 0
    segments: int = 16
    dim: int = 32
    descriptors: int = 8
    memory_slots: int = 16
    read_mode: str = "hard"
    negative_sampling: str = "in_batch_uniform"
    word_dim: int = 32
    conv_hidden: int = 128
    kernel_size: int = 3
    activation: str = "relu"
    optimizer: str = "adam"
    grad_clip: float = 5.0
    r_max: int = 0
    memory_reset: str = "zero"
    eval_memory_writes: bool = False
    dtype: str = "float32"

    def validate(self) -> None:
        if self.margin <= 0:
            raise ConfigError("margin must be > 0")
        if self.batch_size < 2:
            raise ConfigError("batch_size must be >= 2 (in-batch negatives)")
        if self.read_mode not in ("hard", "soft"):
            raise ConfigError(f"read_mode must be hard or soft, got {self.read_mode!r}")
        if self.negative_sampling != "in_batch_uniform":
            raise ConfigError(f"unknown negative_sampling {self.negative_sampling!r}")
        if self.optimizer not in ("adam", "sgd"):
            raise ConfigError(f"optimizer must be adam or sgd, got {self.optimizer!r}")
        if self.activation not in ("relu", "tanh"):
            raise ConfigError(f"activation must be relu or tanh, got {self.activation!r}")
        if self.dtype not in ("float32", "float64"):
            raise ConfigError(f"dtype must be float32 or float64, got {self.dtype!r}")
        if self.kernel_size % 2 == 0:
            raise ConfigError("kernel_size must be odd")
        if self.r_max >= self.memory_slots:
            raise ConfigError("r_max must be < memory_slots")
        if self.memory_reset not in ("zero", "seeded_random"):
            raise ConfigError(f"unknown memory_reset policy {self.memory_reset!r}")
        for name in ("epochs", "segments", "dim", "descriptors", "memory_slots", "word_dim", "conv_hidden"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be positive")


@dataclass
class RunConfig:
    seed: int = 0
    variant: str = "semnet"
    train: TrainConfig = field(default_factory=TrainConfig)
    synthetic: SyntheticSpec = field(default_factory=SyntheticSpec)

    def validate(self) -> None:
        if self.variant not in VARIANTS:
            raise ConfigError(f"variant must be one of {VARIANTS}, got {self.variant!r}")
        self.train.validate()
        self.synthetic.validate()

    def config_hash(self) -> str:
        blob = json.dumps(dataclasses.asdict(self), sort_keys=True).encode("utf-8")
        return hashlib.sha256(blob).hexdigest()[:16]


def _build_dataclass(cls, obj: dict, where: str):
    fields = {f.name: f for f in dataclasses.fields(cls)}
    unknown = set(obj) - set(fields)
    if unknown:
        raise SchemaError(f"{where}: unknown key(s) {sorted(unknown)}")
    kwargs = {}
    names = {"int": int, "float": float, "str": str, "bool": bool}
    for name, value in obj.items():
        f = fields[name]
        type_name = f.type if isinstance(f.type, str) else f.type.__name__
        ftype = names.get(type_name)
        if ftype is None:
            raise SchemaError(f"{where}.{name}: unsupported field type {type_name}")
        if ftype is bool:
            ok = isinstance(value, bool)
        elif ftype is float:
            ok = isinstance(value, (int, float)) and not isinstance(value, bool)
        else:
            ok = isinstance(value, ftype) and not isinstance(value, bool)
        if not ok:
            raise SchemaError(f"{where}.{name}: expected {ftype.__name__}, got {type(value).__name__}")
        kwargs[name] = ftype(value)
    return cls(**kwargs)


def parse_run_config(obj: dict, where: str = "config") -> RunConfig:
    if not isinstance(obj, dict):
        raise SchemaError(f"{where}: expected a JSON object")
    known = {"seed", "variant", "train", "synthetic"}
    unknown = set(obj) - known
    if unknown:
        raise SchemaError(f"{where}: unknown key(s) {sorted(unknown)}")
    cfg = RunConfig()
    if "seed" in obj:
        if not isinstance(obj["seed"], int) or isinstance(obj["seed"], bool):
            raise SchemaError(f"{where}.seed: expected int")
        cfg.seed = obj["seed"]
    if "variant" in obj:
        if not isinstance(obj["variant"], str):
            raise SchemaError(f"{where}.variant: expected string")
        cfg.variant = obj["variant"]
    if "train" in obj:
        if not isinstance(obj["train"], dict):
            raise SchemaError(f"{where}.train: expected object")
        cfg.train = _build_dataclass(TrainConfig, obj["train"], f"{where}.train")
    if "synthetic" in obj:
        if not isinstance(obj["synthetic"], dict):
            raise SchemaError(f"{where}.synthetic: expected object")
        cfg.synthetic = _build_dataclass(SyntheticSpec, obj["synthetic"], f"{where}.synthetic")
    # The root seed flows into sub-configs unless they pinned their own.
    if "train" not in obj or "seed" not in obj.get("train", {}):
        cfg.train.seed = cfg.seed
    if "synthetic" not in obj or "seed" not in obj.get("synthetic", {}):
        cfg.synthetic.seed = cfg.seed
    cfg.validate()
    return cfg


def load_run_config(path) -> RunConfig:
    path = Path(path)
    if not path.exists():
        raise SchemaError(f"config file {path} does not exist")
    try:
        obj = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise SchemaError(f"{path}: invalid JSON: {exc}") from None
    return parse_run_config(obj, where=str(path))
