"""Central-difference check of every named parameter against the analytic gradient."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import tensor as T
from .config import TrainConfig
from .features import Instance, Vocab
from .model import Model, batch_objective, forward


@dataclass
class GradResult:
    objective: str
    name: str
    size: int
    rel_error: float
    tol: float
    step: float

    @property
    def ok(self) -> bool:
        return self.rel_error < self.tol


def rel_error(analytic: np.ndarray, numeric: np.ndarray, floor: float = 1e-12) -> float:
    """``|a - n| / max(|a|, |n|)`` over the whole array; 0 when both are below ``floor``."""
    scale = max(np.linalg.norm(analytic), np.linalg.norm(numeric))
    if scale < floor:
        return 0.0
    return float(np.linalg.norm(analytic - numeric) / scale)


def numeric_grad(f: Callable[[], float], x: np.ndarray, h: float = 1e-4) -> np.ndarray:
    grad = np.zeros_like(x)
    flat, gflat = x.reshape(-1), grad.reshape(-1)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + h
        up = f()
        flat[i] = orig - h
        down = f()
        flat[i] = orig
        gflat[i] = (up - down) / (2 * h)
    return grad


def random_case(cfg: TrainConfig, seed: int = 0, length: int = 6, n_relations: int = 3, n_words: int = 8):
    """A freshly initialised model and one random instance it can process."""
    rng = np.random.default_rng(seed)
    vocab = Vocab(f"w{i}" for i in range(n_words))
    relations = ["NA"] + [f"r{i}" for i in range(1, n_relations)]
    model = Model.create(cfg, vocab, relations)
    tokens = [f"w{int(i)}" for i in rng.integers(n_words, size=length)]
    e1, e2 = (int(p) for p in rng.choice(length, size=2, replace=False))
    labels = frozenset(int(r) for r in rng.choice(np.arange(1, n_relations), size=1))
    inst = Instance(tokens, e1, e2, labels, ("a", "b"), vocab.encode(tokens))
    return model, inst


def run_gradcheck(
    cfg: TrainConfig | None = None,
    seed: int = 0,
    length: int = 6,
    n_relations: int = 3,
    steps: tuple[float, ...] = (1e-4, 1e-6),
    tol: float = 1e-4,
) -> list[GradResult]:
    """Check the training objective and, separately, the disagreement term.

    The disagreement term is checked on its own because its weight in the
    objective is small enough to hide an error in its gradient.

    Each parameter is tried with the steps in order until one agrees. A coarse
    step loses to a relu corner closer than the step; a fine step loses to
    rounding on gradients many orders below the loss. A wrong analytic gradient
    fails at every step.
    """
    cfg = cfg or TrainConfig.gradcheck()
    model, inst = random_case(cfg, seed, length, n_relations)
    params = model.params

    def objective_loss() -> T.Tensor:
        # a fresh rng per call keeps any dropout mask fixed across evaluations
        rng = np.random.default_rng(seed + 7)
        return batch_objective([inst], params, cfg, model.relation_of_capsule, rng=rng).loss

    def disagreement_only() -> T.Tensor:
        rng = np.random.default_rng(seed + 7)
        return forward(inst, params, cfg, training=True, rng=rng)[1]

    results = []
    for label, build in (("loss", objective_loss), ("disagreement", disagreement_only)):
        params.zero_grad()
        out = build()
        if not out.requires_grad:
            # the term is identically zero (both disagreement flags off)
            continue
        T.backward(out)
        analytic = {name: p.grad.copy() for name, p in params.items()}
        for name, p in params.items():
            for h in steps:
                err = rel_error(analytic[name], numeric_grad(lambda: build().item(), p.data, h))
                if err < tol:
                    break
            results.append(GradResult(label, name, p.data.size, err, tol, h))
    return results


def report(results: list[GradResult]) -> str:
    lines = []
    for r in results:
        status = "ok  " if r.ok else "FAIL"
        lines.append(
            f"{status} {r.objective:<12} {r.name:<10} n={r.size:<5} h={r.step:.0e} rel_err={r.rel_error:.3e}"
        )
    return "\n".join(lines)
