"""Bidirectional LSTM whose two directions are summed per token."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import tensor as T
from .tensor import Tensor

# gate column blocks inside the fused matrices
GATES = ("input", "forget", "output", "candidate")


@dataclass
class LstmDirection:
    W: Tensor  # (in, 4d) input-to-gates
    U: Tensor  # (d, 4d) hidden-to-gates
    b: Tensor  # (4d,)

    @property
    def hidden(self) -> int:
        return self.U.shape[0]

    @classmethod
    def init(cls, in_dim: int, d: int, rng: np.random.Generator, forget_bias: float = 1.0) -> "LstmDirection":
        bound = 1.0 / np.sqrt(d)
        b = rng.uniform(-bound, bound, 4 * d)
        b[d : 2 * d] = forget_bias
        return cls(
            T.parameter(rng.uniform(-bound, bound, (in_dim, 4 * d))),
            T.parameter(rng.uniform(-bound, bound, (d, 4 * d))),
            T.parameter(b),
        )


@dataclass
class LstmParams:
    fw: LstmDirection
    bw: LstmDirection

    @property
    def hidden(self) -> int:
        return self.fw.hidden

    @classmethod
    def init(cls, in_dim: int, d: int, rng: np.random.Generator) -> "LstmParams":
        return cls(LstmDirection.init(in_dim, d, rng), LstmDirection.init(in_dim, d, rng))


def run_direction(x: Tensor, params: LstmDirection, reverse: bool = False) -> list[Tensor]:
    """Hidden states (each 1 x d) in token order, from zero initial states."""
    n = x.shape[0]
    d = params.hidden
    projected = x @ params.W + params.b  # all input contributions in one product
    h = c = None
    out: list[Tensor | None] = [None] * n
    steps = range(n - 1, -1, -1) if reverse else range(n)
    for i in steps:
        z = projected[i : i + 1]
        if h is not None:
            z = z + h @ params.U
        gates = T.sigmoid(z[:, : 3 * d])
        cand = T.tanh(z[:, 3 * d :])
        in_gate, forget, out_gate = gates[:, :d], gates[:, d : 2 * d], gates[:, 2 * d :]
        c = in_gate * cand if c is None else forget * c + in_gate * cand
        h = out_gate * T.tanh(c)
        out[i] = h
    return out


def blstm(x: Tensor, params: LstmParams) -> Tensor:
    """Encode ``x`` (l x in) to ``H`` (l x d) with ``h_i = fw_i + bw_i``."""
    if x.ndim != 2 or x.shape[0] < 1:
        raise ValueError(f"blstm needs a non-empty l x dim sequence, got shape {x.shape}")
    fw = T.concat(run_direction(x, params.fw), axis=0)
    bw = T.concat(run_direction(x, params.bw, reverse=True), axis=0)
    return fw + bw
