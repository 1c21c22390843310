"""Relation-aware capsule network for multi-label relation extraction, on a small numpy autodiff."""

from .config import ConfigError, ModelConfig, TrainConfig
from .data import Corpus, SynthSpec, bags, generate, load_nyt
from .model import Model, forward
from .train import load_checkpoint, save_checkpoint, train

__all__ = [
    "ConfigError",
    "Corpus",
    "Model",
    "ModelConfig",
    "SynthSpec",
    "TrainConfig",
    "bags",
    "forward",
    "generate",
    "load_checkpoint",
    "load_nyt",
    "save_checkpoint",
    "train",
]
