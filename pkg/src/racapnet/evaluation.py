"""Held-out bag-level evaluation: scoring, PR curve, PR-AUC and P@N."""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np


@dataclass(frozen=True)
class Prediction:
    bag_key: tuple[str, str]
    relation: int
    score: float


def _rank(preds: Iterable[Prediction]) -> list[Prediction]:
    # score descending, ties by (bag_key, relation) ascending
    return sorted(preds, key=lambda p: (-p.score, p.bag_key, p.relation))


def score_bags(
    norms_fn: Callable,
    bags: Mapping,
    relation_of_capsule: Sequence[int],
    aggregate: str = "max",
    na: int = 0,
) -> list[Prediction]:
    """One prediction per (bag, non-NA relation): the max (or mean) capsule length over instances.

    ``norms_fn(instance)`` returns the capsule lengths; ``relation_of_capsule[j]``
    names the relation id of capsule j.
    """
    if aggregate not in ("max", "mean"):
        raise ValueError(f"unknown aggregate {aggregate!r}")
    reduce = np.max if aggregate == "max" else np.mean
    preds = []
    for key, bag in bags.items():
        norms = np.stack([np.asarray(norms_fn(inst), dtype=np.float64) for inst in bag.instances])
        scores = reduce(norms, axis=0)
        for j, rel in enumerate(relation_of_capsule):
            if rel != na:
                preds.append(Prediction(key, rel, float(scores[j])))
    return preds


def majority_baseline(train_bags: Mapping, test_bags: Mapping, relations: Sequence[int]) -> list[Prediction]:
    """Score every (test bag, relation) by how often the relation labels training bags."""
    total = max(len(train_bags), 1)
    freq = {r: sum(r in bag.labels for bag in train_bags.values()) / total for r in relations}
    return [Prediction(key, r, freq[r]) for key in test_bags for r in relations]


def gold_pairs(bags: Mapping, na: int = 0) -> set[tuple[tuple[str, str], int]]:
    return {(key, r) for key, bag in bags.items() for r in bag.labels if r != na}


@dataclass
class PRCurve:
    precision: np.ndarray
    recall: np.ndarray
    area: float

    def points(self) -> list[tuple[float, float]]:
        return list(zip(self.precision.tolist(), self.recall.tolist()))


def pr_curve(preds: Iterable[Prediction], gold: set) -> PRCurve:
    """Precision/recall after each ranked prediction; trapezoid area over recall.

    The integration starts from the empty prefix, whose recall and precision are both 0.
    """
    if not gold:
        raise ValueError("no gold positives: recall is undefined")
    ranked = _rank(preds)
    hits = np.array([(p.bag_key, p.relation) in gold for p in ranked], dtype=np.float64)
    tp = np.cumsum(hits)
    precision = tp / np.arange(1, len(ranked) + 1)
    recall = tp / len(gold)
    r = np.concatenate([[0.0], recall])
    p = np.concatenate([[0.0], precision])
    area = float(np.sum((r[1:] - r[:-1]) * (p[1:] + p[:-1]) / 2.0))
    return PRCurve(precision, recall, area)


def p_at_n(preds: Iterable[Prediction], gold: set, n: int) -> float:
    ranked = _rank(preds)
    if n < 1 or n > len(ranked):
        raise ValueError(f"P@{n} requested but only {len(ranked)} predictions exist")
    return sum((p.bag_key, p.relation) in gold for p in ranked[:n]) / n


def summarize(preds: list[Prediction], gold: set, ns: Sequence[int] = (100, 200, 300)) -> dict:
    curve = pr_curve(preds, gold)
    out = {"auc": curve.area, "n_predictions": len(preds), "n_gold": len(gold)}
    for n in ns:
        if n <= len(preds):
            out[f"p@{n}"] = p_at_n(preds, gold, n)
    out["p@all"] = p_at_n(preds, gold, len(preds)) if preds else 0.0
    return out


def write_pr_csv(curve: PRCurve, path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["precision", "recall"])
        for p, r in curve.points():
            writer.writerow([repr(p), repr(r)])


def write_summary(summary: dict, path: str | Path) -> None:
    Path(path).write_text(json.dumps(summary, indent=2, sort_keys=True))
