"""Configuration dataclasses and JSON round-tripping (unknown keys are rejected)."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

from .loss import LossConfig
from .regularize import DisagreementConfig


class ConfigError(ValueError):
    pass


@dataclass
class ModelConfig:
    k: int = 50  # word embedding width
    p: int = 5  # position embedding width
    max_len: int = 100  # sentence length l; longer sentences are truncated
    pos_clip: int = 100  # relative distances are clipped to [-pos_clip, pos_clip]
    d: int = 256  # LSTM hidden size
    n_heads: int = 16  # also the low-level capsule count t
    d_ffn: int = 256  # FFN output width d', must equal n_heads * d_u
    d_u: int = 16
    d_r: int = 16
    routing_iters: int = 3
    na_capsule: bool = True
    energy_scale: str = "d"
    relation_query: bool = True

    def __post_init__(self):
        if self.d % self.n_heads:
            raise ConfigError(f"d={self.d} is not divisible by n_heads={self.n_heads}")
        if self.n_heads * self.d_u != self.d_ffn:
            raise ConfigError(f"n_heads * d_u = {self.n_heads * self.d_u} must equal d_ffn = {self.d_ffn}")
        if self.routing_iters < 1:
            raise ConfigError("routing_iters must be >= 1")
        if self.energy_scale not in ("d", "d_h"):
            raise ConfigError("energy_scale must be 'd' or 'd_h'")

    @property
    def t(self) -> int:
        return self.n_heads

    @property
    def in_dim(self) -> int:
        return self.k + 2 * self.p


@dataclass
class TrainConfig:
    batch_size: int = 50
    lr: float = 1e-4
    epochs: int = 10
    dropout: float = 0.5
    seed: int = 0
    aggregate: str = "max"  # bag aggregation at evaluation time
    model: ModelConfig = field(default_factory=ModelConfig)
    loss: LossConfig = field(default_factory=LossConfig)
    reg: DisagreementConfig = field(default_factory=DisagreementConfig)

    def __post_init__(self):
        if self.batch_size < 1 or self.epochs < 0:
            raise ConfigError("batch_size must be >= 1 and epochs >= 0")
        if not 0.0 <= self.dropout < 1.0:
            raise ConfigError("dropout must lie in [0, 1)")
        if self.aggregate not in ("max", "mean"):
            raise ConfigError("aggregate must be 'max' or 'mean'")

    # -- presets -----------------------------------------------------------

    @classmethod
    def gradcheck(cls, **overrides) -> "TrainConfig":
        """Smallest architecture that still exercises every component."""
        model = ModelConfig(k=4, p=2, max_len=6, pos_clip=6, d=8, n_heads=2, d_ffn=8, d_u=4, d_r=4)
        return replace(cls(batch_size=1, lr=1e-3, epochs=1, dropout=0.0, model=model), **overrides)

    @classmethod
    def tiny(cls, **overrides) -> "TrainConfig":
        """Desk-scale training preset used by the synthetic experiments."""
        model = ModelConfig(k=8, p=2, max_len=16, pos_clip=16, d=16, n_heads=4, d_ffn=16, d_u=4, d_r=8)
        return replace(cls(batch_size=10, lr=0.01, epochs=60, dropout=0.0, model=model), **overrides)

    # -- serialization -----------------------------------------------------

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, raw: dict) -> "TrainConfig":
        return _build(cls, raw, "config")

    @classmethod
    def from_json(cls, path: str | Path) -> "TrainConfig":
        return cls.from_dict(json.loads(Path(path).read_text()))

    def to_json(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2))


_NESTED = {"model": ModelConfig, "loss": LossConfig, "reg": DisagreementConfig}


def _build(cls, raw: dict, where: str):
    if not isinstance(raw, dict):
        raise ConfigError(f"{where}: expected an object")
    names = {f.name for f in fields(cls)}
    unknown = set(raw) - names
    if unknown:
        raise ConfigError(f"{where}: unknown keys {sorted(unknown)}")
    kwargs = {}
    for key, value in raw.items():
        if cls is TrainConfig and key in _NESTED:
            value = _build(_NESTED[key], value, f"{where}.{key}")
        kwargs[key] = value
    try:
        return cls(**kwargs)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{where}: {exc}") from exc
