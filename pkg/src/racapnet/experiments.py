"""Desk-scale synthetic experiments shared by the scripts and the acceptance suite."""

from __future__ import annotations

import time
from dataclasses import dataclass, field, replace

from .config import TrainConfig
from .data import SynthSpec, bags, generate
from .evaluation import gold_pairs, majority_baseline, pr_curve
from .model import Model
from .regularize import DisagreementConfig
from .train import exact_match, heldout_auc, train

OVERFIT_SPEC = SynthSpec(n_relations=5, n_bags=50, sentences_per_bag=(1, 1), overlap_rate=0.5, na_rate=0.1)
HELDOUT_SPEC = SynthSpec(
    n_relations=5, n_bags=1000, sentences_per_bag=(2, 2), overlap_rate=0.5, na_rate=0.2, test_fraction=0.2
)


@dataclass
class OverfitResult:
    seed: int
    epochs: int
    match: float
    seconds: float
    reached: bool


def overfit(seed: int, target: float = 0.95, max_epochs: int = 200, spec: SynthSpec = OVERFIT_SPEC) -> OverfitResult:
    """Train the tiny preset on a 50-sentence corpus until the exact-set match reaches ``target``."""
    corpus = generate(replace(spec, seed=seed)).train
    cfg = TrainConfig.tiny(seed=seed, epochs=max_epochs)
    model = Model.create(cfg, corpus.vocab, corpus.relations)
    state = {"epoch": 0, "match": 0.0}

    def check(record):
        state["epoch"] = record["epoch"]
        state["match"] = exact_match(model, corpus.instances)
        return state["match"] >= target

    start = time.perf_counter()
    train(corpus, cfg, model=model, on_epoch=check)
    seconds = time.perf_counter() - start
    return OverfitResult(seed, state["epoch"], state["match"], seconds, state["match"] >= target)


@dataclass
class HeldoutResult:
    seed: int
    n_train: int
    n_test: int
    auc: float
    baseline_auc: float
    seconds: float
    history: list[dict] = field(default_factory=list)


def heldout(seed: int = 0, epochs: int = 8, batch_size: int = 20, spec: SynthSpec = HELDOUT_SPEC) -> HeldoutResult:
    """Train on the train split, report the final model's bag-level PR-AUC on unseen entity pairs."""
    splits = generate(replace(spec, seed=seed))
    test_bags = bags(splits.test)
    real = range(1, len(splits.train.relations))
    baseline = pr_curve(majority_baseline(bags(splits.train), test_bags, real), gold_pairs(test_bags)).area
    cfg = TrainConfig.tiny(seed=seed, epochs=epochs, batch_size=batch_size)
    start = time.perf_counter()
    result = train(splits.train, cfg, test=splits.test)
    auc = heldout_auc(result.model, splits.test)
    seconds = time.perf_counter() - start
    return HeldoutResult(seed, len(splits.train), len(splits.test), auc, baseline, seconds, result.history)


ABLATIONS = {
    "full": DisagreementConfig(enable_head=True, enable_capsule=True),
    "head_only": DisagreementConfig(enable_head=True, enable_capsule=False),
    "capsule_only": DisagreementConfig(enable_head=False, enable_capsule=True),
    "none": DisagreementConfig(enable_head=False, enable_capsule=False),
}


def ablation(
    seed: int = 0, epochs: int = 8, batch_size: int = 20, relation_query: bool = True, spec: SynthSpec = HELDOUT_SPEC
) -> dict[str, float]:
    """Held-out PR-AUC of each disagreement variant on one corpus."""
    splits = generate(replace(spec, seed=seed))
    out = {}
    for name, reg in ABLATIONS.items():
        cfg = TrainConfig.tiny(seed=seed, epochs=epochs, batch_size=batch_size, reg=reg)
        cfg.model = replace(cfg.model, relation_query=relation_query)
        model = train(splits.train, cfg).model
        out[name] = heldout_auc(model, splits.test)
    return out
