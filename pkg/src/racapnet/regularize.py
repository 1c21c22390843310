"""Disagreement regularization: mean pairwise cosine among heads and capsules."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import tensor as T
from .tensor import Tensor


@dataclass
class DisagreementConfig:
    enable_head: bool = True
    enable_capsule: bool = True
    beta: float = 0.001
    exclude_diagonal: bool = False

    def __post_init__(self):
        if self.beta < 0:
            raise ValueError(f"disagreement weight must be >= 0, got {self.beta}")


def _as_matrix(vectors) -> Tensor:
    if isinstance(vectors, Tensor):
        return vectors if vectors.ndim == 2 else vectors.reshape(1, -1)
    if isinstance(vectors, np.ndarray):
        return T.Tensor(np.atleast_2d(vectors))
    return T.stack([T.as_tensor(v) for v in vectors], axis=0)


def cosine_matrix(vectors) -> Tensor:
    """m x m cosine similarities; any pair involving a zero vector scores 0."""
    V = _as_matrix(vectors)
    m = V.shape[0]
    # elementwise-product sums keep G[i, j] bitwise equal to G[i, i] for identical rows
    G = T.tsum(V.reshape(m, 1, -1) * V.reshape(1, m, -1), axis=-1)
    diag = T.getitem(G, (np.arange(m), np.arange(m)))
    denom = T.sqrt(diag.reshape(m, 1) * diag.reshape(1, m))
    return T.safe_div(G, denom)


def avg_pairwise_cosine(vectors, exclude_diagonal: bool = False) -> Tensor:
    """Sum of cos(v_i, v_j) over all ordered pairs (diagonal included) divided by m**2."""
    cos = cosine_matrix(vectors)
    m = cos.shape[0]
    if not exclude_diagonal:
        # true division keeps an all-ones matrix at exactly 1
        return T.div(T.tsum(cos), float(m * m))
    if m < 2:
        return T.Tensor(0.0)
    off = T.mul(cos, 1.0 - np.eye(m))
    return T.div(T.tsum(off), float(m * (m - 1)))


def disagreement(heads, capsules, cfg: DisagreementConfig) -> Tensor:
    """Average of head and capsule disagreement over whichever terms are enabled."""
    terms = []
    if cfg.enable_head:
        terms.append(avg_pairwise_cosine(heads, cfg.exclude_diagonal))
    if cfg.enable_capsule:
        terms.append(avg_pairwise_cosine(capsules, cfg.exclude_diagonal))
    if not terms:
        return T.Tensor(0.0)
    if len(terms) == 1:
        return terms[0]
    return T.scale(terms[0] + terms[1], 0.5)


def head_and_capsule_terms(heads, capsules, exclude_diagonal: bool = False) -> tuple[float, float]:
    """Both raw disagreement values, for logging."""
    return (
        avg_pairwise_cosine(heads, exclude_diagonal).item(),
        avg_pairwise_cosine(capsules, exclude_diagonal).item(),
    )
