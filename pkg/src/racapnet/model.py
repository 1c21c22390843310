"""Parameter inventory and the end-to-end forward pass for one instance."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator

import numpy as np

from . import tensor as T
from .attention import AttentionParams, AttentionOutput, multi_head, relation_query
from .capsule import CapsuleConfig, RoutingState, dynamic_routing, form_low_capsules
from .config import ConfigError, ModelConfig, TrainConfig
from .encoder import LstmDirection, LstmParams, blstm
from .features import EmbeddingTables, Instance, Vocab, embed
from .loss import l2_penalty, margin_loss, predict
from .regularize import disagreement
from .tensor import Tensor

THRESHOLD = "S"


class ModelParams:
    """Named learnable tensors; iteration order is the checkpoint order."""

    def __init__(self, tensors: dict[str, Tensor]):
        self._tensors = dict(tensors)

    def __getitem__(self, name: str) -> Tensor:
        return self._tensors[name]

    def __contains__(self, name: str) -> bool:
        return name in self._tensors

    def __iter__(self) -> Iterator[str]:
        return iter(self._tensors)

    def __len__(self) -> int:
        return len(self._tensors)

    def names(self) -> list[str]:
        return list(self._tensors)

    def items(self):
        return self._tensors.items()

    def values(self):
        return self._tensors.values()

    def regularized(self) -> list[Tensor]:
        """Everything except the NA threshold."""
        return [t for name, t in self._tensors.items() if name != THRESHOLD]

    def zero_grad(self) -> None:
        for t in self._tensors.values():
            t.zero_grad()

    def copy(self) -> "ModelParams":
        return ModelParams({k: T.parameter(v.data.copy()) for k, v in self._tensors.items()})

    def arrays(self) -> dict[str, np.ndarray]:
        return {k: v.data for k, v in self._tensors.items()}

    # component views share the underlying tensors

    def tables(self) -> EmbeddingTables:
        return EmbeddingTables(self["word_emb"], self["pos1_emb"], self["pos2_emb"])

    def lstm(self) -> LstmParams:
        fw = LstmDirection(self["lstm_fw_W"], self["lstm_fw_U"], self["lstm_fw_b"])
        bw = LstmDirection(self["lstm_bw_W"], self["lstm_bw_U"], self["lstm_bw_b"])
        return LstmParams(fw, bw)

    def attention(self, cfg: ModelConfig) -> AttentionParams:
        return AttentionParams(
            self["W_q"] if "W_q" in self else None,
            self["W_k"], self["W_v"], self["W_o"],
            self["W_f1"], self["b_f1"], self["W_f2"], self["b_f2"],
            cfg.n_heads, cfg.energy_scale,
        )


def expected_shapes(cfg: ModelConfig, vocab_size: int, n_capsules: int) -> dict[str, tuple[int, ...]]:
    d, pos_rows = cfg.d, 2 * cfg.pos_clip + 1
    shapes = {
        "word_emb": (vocab_size, cfg.k),
        "pos1_emb": (pos_rows, cfg.p),
        "pos2_emb": (pos_rows, cfg.p),
    }
    for direction in ("fw", "bw"):
        shapes[f"lstm_{direction}_W"] = (cfg.in_dim, 4 * d)
        shapes[f"lstm_{direction}_U"] = (d, 4 * d)
        shapes[f"lstm_{direction}_b"] = (4 * d,)
    shapes["W_q" if cfg.relation_query else "q_const"] = (d, d) if cfg.relation_query else (d,)
    shapes.update({
        "W_k": (d, d), "W_v": (d, d), "W_o": (d, d),
        "W_f1": (d, d), "b_f1": (d,), "W_f2": (d, cfg.d_ffn), "b_f2": (cfg.d_ffn,),
        "W_h": (n_capsules, cfg.d_u, cfg.d_r),
        THRESHOLD: (),
    })
    return shapes


def init_params(cfg: TrainConfig, vocab_size: int, n_capsules: int, seed: int | None = None) -> ModelParams:
    mc = cfg.model
    rng = np.random.default_rng(cfg.seed if seed is None else seed)
    tables = EmbeddingTables.init(vocab_size, mc.k, mc.p, mc.pos_clip, rng)
    lstm = LstmParams.init(mc.in_dim, mc.d, rng)
    att = AttentionParams.init(mc.d, mc.d_ffn, mc.n_heads, rng, mc.energy_scale)
    bound = np.sqrt(6.0 / (mc.d_u + mc.d_r))
    tensors = {
        "word_emb": tables.word, "pos1_emb": tables.pos1, "pos2_emb": tables.pos2,
        "lstm_fw_W": lstm.fw.W, "lstm_fw_U": lstm.fw.U, "lstm_fw_b": lstm.fw.b,
        "lstm_bw_W": lstm.bw.W, "lstm_bw_U": lstm.bw.U, "lstm_bw_b": lstm.bw.b,
    }
    if mc.relation_query:
        tensors["W_q"] = att.W_q
    else:
        tensors["q_const"] = T.parameter(rng.uniform(-0.1, 0.1, mc.d))
    tensors.update({
        "W_k": att.W_k, "W_v": att.W_v, "W_o": att.W_o,
        "W_f1": att.W_f1, "b_f1": att.b_f1, "W_f2": att.W_f2, "b_f2": att.b_f2,
        "W_h": T.parameter(rng.uniform(-bound, bound, (n_capsules, mc.d_u, mc.d_r))),
        THRESHOLD: T.parameter(cfg.loss.s_init),
    })
    return ModelParams(tensors)


def check_inventory(params: ModelParams, cfg: ModelConfig, vocab_size: int, n_capsules: int) -> None:
    want = expected_shapes(cfg, vocab_size, n_capsules)
    if set(params.names()) != set(want):
        raise ConfigError(
            f"parameter names {sorted(params.names())} do not match architecture {sorted(want)}"
        )
    for name, shape in want.items():
        if params[name].shape != shape:
            raise ConfigError(f"parameter {name} has shape {params[name].shape}, expected {shape}")


def capsule_relations(n_relations: int, na_capsule: bool) -> list[int]:
    """Relation id represented by each capsule (relation 0 is NA)."""
    return list(range(n_relations)) if na_capsule else list(range(1, n_relations))


def label_vector(labels, relation_of_capsule: list[int]) -> np.ndarray:
    return np.array([1.0 if r in labels else 0.0 for r in relation_of_capsule])


@dataclass
class ForwardCache:
    H: Tensor
    attention: AttentionOutput
    low_capsules: Tensor  # t x d_u
    capsules: Tensor  # m x d_r
    routing: RoutingState


def forward(
    instance: Instance,
    params: ModelParams,
    cfg: TrainConfig,
    training: bool = False,
    rng: np.random.Generator | None = None,
) -> tuple[Tensor, Tensor, ForwardCache]:
    """Capsule lengths (m,), the disagreement term (0 outside training) and intermediates."""
    mc = cfg.model
    if len(instance.token_ids) > mc.max_len:
        raise ValueError(f"instance of length {len(instance.token_ids)} exceeds max_len {mc.max_len}")
    x = embed(instance, params.tables())
    H = blstm(x, params.lstm())
    if training and cfg.dropout > 0:
        if rng is None:
            raise ValueError("training-mode dropout needs an rng")
        keep = (rng.random(H.shape) >= cfg.dropout) / (1.0 - cfg.dropout)
        H = H * keep
    att_params = params.attention(mc)
    if mc.relation_query:
        q = relation_query(H, instance.ent1_pos, instance.ent2_pos, params["W_q"])
    else:
        q = params["q_const"]
    att = multi_head(H, q, att_params)
    u = form_low_capsules(att.H_r, _capsule_cfg(mc, params))
    r, state = dynamic_routing(u, params["W_h"], mc.routing_iters)
    norms = T.l2_norm(r, axis=-1)
    if training:
        D = disagreement(att.heads, u, cfg.reg)
    else:
        D = T.Tensor(0.0)
    return norms, D, ForwardCache(H, att, u, r, state)


def _capsule_cfg(mc: ModelConfig, params: ModelParams) -> CapsuleConfig:
    return CapsuleConfig(mc.t, mc.d_u, mc.d_r, params["W_h"].shape[0], mc.routing_iters)


@dataclass
class Objective:
    loss: Tensor
    margin: float
    disagreement: float
    l2: float


def instance_terms(instance, params, cfg, relation_of_capsule, training=True, rng=None):
    norms, D, cache = forward(instance, params, cfg, training=training, rng=rng)
    Y = label_vector(instance.labels, relation_of_capsule)
    margin = margin_loss(norms, Y, params[THRESHOLD], cfg.loss.gamma, cfg.loss.lam)
    return margin, D, norms


def batch_objective(instances, params, cfg, relation_of_capsule, rng=None, training=True) -> Objective:
    """Mean of per-instance ``margin + beta * D`` plus ``beta_l2 * |theta|^2`` (S excluded)."""
    margin_sum: Tensor = T.Tensor(0.0)
    d_sum: Tensor = T.Tensor(0.0)
    for inst in instances:
        margin, D, _ = instance_terms(inst, params, cfg, relation_of_capsule, training, rng)
        margin_sum = margin_sum + margin
        d_sum = d_sum + D
    n = float(len(instances))
    margin_mean = T.scale(margin_sum, 1.0 / n)
    d_mean = T.scale(d_sum, 1.0 / n)
    l2 = l2_penalty(params.regularized())
    loss = margin_mean
    if cfg.reg.beta and (cfg.reg.enable_head or cfg.reg.enable_capsule):
        loss = loss + T.scale(d_mean, cfg.reg.beta)
    if cfg.loss.beta_l2:
        loss = loss + T.scale(l2, cfg.loss.beta_l2)
    return Objective(loss, margin_mean.item(), d_mean.item(), l2.item())


class Model:
    """Trained network bundle: configuration, parameters, vocabulary and relation names."""

    def __init__(self, cfg: TrainConfig, params: ModelParams, vocab: Vocab, relations: list[str]):
        self.cfg = cfg
        self.params = params
        self.vocab = vocab
        self.relations = list(relations)
        self.relation_of_capsule = capsule_relations(len(relations), cfg.model.na_capsule)
        check_inventory(params, cfg.model, len(vocab), len(self.relation_of_capsule))

    @classmethod
    def create(cls, cfg: TrainConfig, vocab: Vocab, relations: list[str]) -> "Model":
        n_caps = len(capsule_relations(len(relations), cfg.model.na_capsule))
        return cls(cfg, init_params(cfg, len(vocab), n_caps), vocab, relations)

    @property
    def S(self) -> float:
        return float(self.params[THRESHOLD].data)

    def norms(self, instance: Instance) -> np.ndarray:
        with T.no_grad():
            norms, _, _ = forward(instance, self.params, self.cfg, training=False)
        return norms.data

    def inspect(self, instance: Instance) -> ForwardCache:
        with T.no_grad():
            _, _, cache = forward(instance, self.params, self.cfg, training=False)
        return cache

    def predict(self, instance: Instance) -> frozenset[int]:
        """Predicted relation ids; ``{0}`` (NA) when no capsule clears the threshold."""
        hits = predict(self.norms(instance), self.S, na=-1)
        rels = frozenset(self.relation_of_capsule[j] for j in hits if j >= 0)
        if len(rels) > 1:
            rels = rels - {0}
        return rels or frozenset({0})
