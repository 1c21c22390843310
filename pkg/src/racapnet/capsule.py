"""Low-level capsules from the attention output and dynamic routing to relation capsules."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import tensor as T
from .tensor import Tensor


@dataclass
class CapsuleConfig:
    t: int = 16  # low-level capsules, one per head
    d_u: int = 16
    d_r: int = 16
    m: int = 53  # relation capsules
    routing_iters: int = 3

    def __post_init__(self):
        if self.routing_iters < 1:
            raise ValueError("routing needs at least one iteration")

    @property
    def d_in(self) -> int:
        return self.t * self.d_u


@dataclass
class RoutingState:
    logits: np.ndarray  # t x m, after the last agreement update
    coupling: np.ndarray  # t x m, coefficients used in the final iteration
    predictions: np.ndarray  # t x m x d_r
    history: list[np.ndarray] = field(default_factory=list)  # coupling per iteration


def squash(v, axis: int = -1) -> Tensor:
    """Shrink ``v`` to length ``|v|^2 / (1 + |v|^2)`` keeping its direction; 0 maps to 0."""
    v = T.as_tensor(v)
    norm = T.l2_norm(v, axis=axis, keepdims=True)
    # |v|^2/(1+|v|^2) * v/|v| == v * |v|/(1+|v|^2), finite at v = 0
    return v * T.div(norm, 1.0 + T.square(norm))


def form_low_capsules(H_r: Tensor, cfg: CapsuleConfig) -> Tensor:
    """Split ``H_r`` into t contiguous slices and squash each; returns t x d_u."""
    width = H_r.shape[-1]
    if cfg.t * cfg.d_u != width:
        raise ValueError(f"cannot partition width {width} into {cfg.t} capsules of {cfg.d_u}")
    return squash(H_r.reshape(cfg.t, cfg.d_u), axis=-1)


def init_routing_weights(cfg: CapsuleConfig, rng: np.random.Generator) -> Tensor:
    bound = np.sqrt(6.0 / (cfg.d_u + cfg.d_r))
    return T.parameter(rng.uniform(-bound, bound, (cfg.m, cfg.d_u, cfg.d_r)))


def dynamic_routing(u: Tensor, W_h: Tensor, iters: int = 3) -> tuple[Tensor, RoutingState]:
    """Route t low-level capsules (t x d_u) through per-class maps W_h (m x d_u x d_r).

    Returns the m x d_r relation capsules and the routing trace.
    """
    if iters < 1:
        raise ValueError("routing needs at least one iteration")
    u = T.as_tensor(u)
    t, d_u = u.shape
    m, _, d_r = W_h.shape
    # u_hat[i, j] = u_i W_j, computed once
    u_hat = (u.reshape(t, 1, 1, d_u) @ W_h.reshape(1, m, d_u, d_r)).reshape(t, m, d_r)
    b: Tensor = T.Tensor(np.zeros((t, m)))
    history = []
    for it in range(iters):
        c = T.softmax(b, axis=1)
        history.append(c.data)
        s = T.tsum(c.reshape(t, m, 1) * u_hat, axis=0)
        r = squash(s, axis=-1)
        if it < iters - 1:
            b = b + T.tsum(u_hat * r.reshape(1, m, d_r), axis=-1)
    state = RoutingState(b.data.copy(), history[-1], u_hat.data, history)
    return r, state
