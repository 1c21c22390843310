"""Relation-query multi-head attention followed by a position-wise FFN."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import tensor as T
from .tensor import DimensionError, Tensor


@dataclass
class AttentionParams:
    W_q: Tensor | None  # d x d; None when a learned constant query replaces it
    W_k: Tensor  # d x d
    W_v: Tensor  # d x d
    W_o: Tensor  # d x d
    W_f1: Tensor  # d x d
    b_f1: Tensor  # d
    W_f2: Tensor  # d x d'
    b_f2: Tensor  # d'
    n_heads: int
    energy_scale: str = "d"  # "d" or "d_h"

    def __post_init__(self):
        d = self.W_k.shape[0]
        if d % self.n_heads:
            raise ValueError(f"hidden size {d} not divisible by {self.n_heads} heads")
        if self.energy_scale not in ("d", "d_h"):
            raise ValueError(f"energy_scale must be 'd' or 'd_h', got {self.energy_scale!r}")

    @property
    def d(self) -> int:
        return self.W_k.shape[0]

    @property
    def d_head(self) -> int:
        return self.d // self.n_heads

    @property
    def d_out(self) -> int:
        return self.W_f2.shape[1]

    @classmethod
    def init(cls, d: int, d_out: int, n_heads: int, rng: np.random.Generator, energy_scale: str = "d") -> "AttentionParams":
        def glorot(rows, cols):
            bound = np.sqrt(6.0 / (rows + cols))
            return T.parameter(rng.uniform(-bound, bound, (rows, cols)))

        return cls(
            glorot(d, d), glorot(d, d), glorot(d, d), glorot(d, d),
            glorot(d, d), T.parameter(np.zeros(d)),
            glorot(d, d_out), T.parameter(np.zeros(d_out)),
            n_heads, energy_scale,
        )


@dataclass
class AttentionOutput:
    H_r: Tensor  # (d',)
    heads: Tensor  # (n, d_h), row i is head_i
    weights: np.ndarray  # (n, l), each row a distribution over tokens

    def head_list(self) -> list[Tensor]:
        return [self.heads[i] for i in range(self.heads.shape[0])]


def relation_query(H: Tensor, en1: int, en2: int, W_q: Tensor) -> Tensor:
    """``(h_en1 - h_en2) W_q`` as a length-d vector."""
    if en1 == en2:
        raise ValueError("relation query needs two distinct entity positions")
    diff = H[en1 : en1 + 1] - H[en2 : en2 + 1]
    return (diff @ W_q).reshape(-1)


def multi_head(H: Tensor, q: Tensor, params: AttentionParams) -> AttentionOutput:
    l, d = H.shape
    if d != params.d or q.shape != (d,):
        raise DimensionError(f"multi_head: H {H.shape} and query {q.shape} do not match d={params.d}")
    n, dh = params.n_heads, params.d_head
    K = H @ params.W_k
    V = H @ params.W_v
    K_heads = T.transpose(K.reshape(l, n, dh), (1, 0, 2))  # n x l x dh
    V_heads = T.transpose(V.reshape(l, n, dh), (1, 0, 2))
    q_heads = q.reshape(n, dh, 1)
    scale = np.sqrt(d if params.energy_scale == "d" else dh)
    energy = T.scale((K_heads @ q_heads).reshape(n, l), 1.0 / scale)
    weights = T.softmax(energy, axis=1)
    heads = (weights.reshape(n, 1, l) @ V_heads).reshape(n, dh)
    E_m = heads.reshape(1, d) @ params.W_o
    hidden = T.relu(E_m @ params.W_f1 + params.b_f1)
    H_r = (hidden @ params.W_f2 + params.b_f2).reshape(-1)
    return AttentionOutput(H_r, heads, weights.data)
