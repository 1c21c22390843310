"""Sliding-margin loss on capsule lengths, the full objective and the decision rule."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable

import numpy as np

from . import tensor as T
from .tensor import Tensor


@dataclass
class LossConfig:
    gamma: float = 0.4  # margin half-width around S
    lam: float = 1.0  # weight of absent-relation terms
    beta_l2: float = 1e-8
    s_init: float = 0.5

    def __post_init__(self):
        if self.gamma <= 0:
            raise ValueError("margin width must be positive")
        if not self.gamma <= self.s_init <= 1.0 - self.gamma:
            raise ValueError(f"s_init {self.s_init} outside [gamma, 1 - gamma]")

    def clamp_threshold(self, S: Tensor) -> None:
        np.clip(S.data, self.gamma, 1.0 - self.gamma, out=S.data)


def margin_loss(norms, Y, S, gamma: float, lam: float) -> Tensor:
    """Present relations are pushed above ``S + gamma``, absent ones below ``S - gamma``."""
    norms, S = T.as_tensor(norms), T.as_tensor(S)
    Y = np.asarray(Y, dtype=np.float64)
    if Y.shape != norms.shape:
        raise T.DimensionError(f"labels {Y.shape} do not match capsule norms {norms.shape}")
    present = T.square(T.relu(T.sub(S + gamma, norms)))
    absent = T.square(T.relu(T.sub(norms, S - gamma)))
    return T.tsum(present * Y + absent * (lam * (1.0 - Y)))


def l2_penalty(params: Iterable[Tensor]) -> Tensor:
    total: Tensor = T.Tensor(0.0)
    for p in params:
        total = total + T.tsum(T.square(p))
    return total


def total_loss(margin, D, params: Iterable[Tensor], beta: float, beta_l2: float) -> Tensor:
    """``margin + beta * D + beta_l2 * sum(theta ** 2)``; pass ``params`` without S."""
    loss = T.as_tensor(margin)
    if beta:
        loss = loss + T.scale(D, beta)
    if beta_l2:
        loss = loss + T.scale(l2_penalty(params), beta_l2)
    return loss


def predict(norms, S: float, na: int = 0) -> frozenset[int]:
    """Indices whose norm exceeds S; ``{na}`` when none does."""
    if isinstance(norms, Tensor):
        norms = norms.data
    if isinstance(S, Tensor):
        S = S.data
    norms, S = np.asarray(norms, dtype=np.float64), float(S)
    hits = frozenset(int(j) for j in np.flatnonzero(norms > S))
    return hits or frozenset({na})
