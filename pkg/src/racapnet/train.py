"""Adam, the training loop and the binary checkpoint format."""

from __future__ import annotations

import json
import logging
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

from . import tensor as T
from .config import TrainConfig
from .data import Corpus, bags
from .evaluation import gold_pairs, pr_curve, score_bags
from .features import Vocab
from .model import THRESHOLD, Model, ModelParams, batch_objective

log = logging.getLogger(__name__)

MAGIC = b"RACAPNET"
VERSION = 1


class TrainingError(RuntimeError):
    pass


class Adam:
    def __init__(self, lr: float, beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.m: dict[str, np.ndarray] = {}
        self.v: dict[str, np.ndarray] = {}

    def step(self, params: dict[str, np.ndarray], grads: dict[str, np.ndarray]) -> None:
        """Bias-corrected update of every array in ``params``, in place."""
        self.t += 1
        bc1 = 1.0 - self.beta1**self.t
        bc2 = 1.0 - self.beta2**self.t
        for name, value in params.items():
            g = grads[name]
            if name not in self.m:
                self.m[name] = np.zeros_like(value)
                self.v[name] = np.zeros_like(value)
            m = self.m[name] = self.beta1 * self.m[name] + (1.0 - self.beta1) * g
            v = self.v[name] = self.beta2 * self.v[name] + (1.0 - self.beta2) * g * g
            value -= self.lr * (m / bc1) / (np.sqrt(v / bc2) + self.eps)


def adam_step(params: ModelParams, opt: Adam, cfg: TrainConfig) -> None:
    opt.step(params.arrays(), {k: p.grad for k, p in params.items()})
    cfg.loss.clamp_threshold(params[THRESHOLD])


@dataclass
class TrainResult:
    model: Model
    history: list[dict] = field(default_factory=list)
    best_auc: float | None = None


def heldout_auc(model: Model, corpus: Corpus) -> float | None:
    grouped = bags(corpus)
    gold = gold_pairs(grouped)
    if not gold:
        return None
    preds = score_bags(model.norms, grouped, model.relation_of_capsule, model.cfg.aggregate)
    return pr_curve(preds, gold).area


def exact_match(model: Model, instances) -> float:
    """Share of instances whose predicted relation set equals their label set."""
    if not instances:
        return 0.0
    return sum(model.predict(i) == i.labels for i in instances) / len(instances)


def train(
    corpus: Corpus,
    cfg: TrainConfig,
    test: Corpus | None = None,
    out_dir: str | Path | None = None,
    on_epoch: Callable[[dict], None] | None = None,
    model: Model | None = None,
) -> TrainResult:
    """Seeded mini-batch Adam; writes ``metrics.jsonl`` and checkpoints when ``out_dir`` is set.

    ``on_epoch`` receives each epoch record; a truthy return ends training early.
    """
    if not corpus.instances:
        raise TrainingError("training corpus is empty")
    model = model or Model.create(cfg, corpus.vocab, corpus.relations)
    params = model.params
    opt = Adam(cfg.lr)
    order_rng = np.random.default_rng(cfg.seed + 1)
    dropout_rng = np.random.default_rng(cfg.seed + 2)
    out = Path(out_dir) if out_dir is not None else None
    metrics_fh = None
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
        metrics_fh = open(out / "metrics.jsonl", "w")
    result = TrainResult(model)
    n = len(corpus.instances)
    try:
        for epoch in range(1, cfg.epochs + 1):
            order = order_rng.permutation(n)
            sums = {"loss": 0.0, "margin": 0.0, "disagreement": 0.0, "l2": 0.0}
            n_batches = 0
            for start in range(0, n, cfg.batch_size):
                batch = [corpus.instances[i] for i in order[start : start + cfg.batch_size]]
                params.zero_grad()
                obj = batch_objective(batch, params, cfg, model.relation_of_capsule, rng=dropout_rng)
                value = obj.loss.item()
                if not np.isfinite(value):
                    raise TrainingError(
                        f"non-finite loss {value} in epoch {epoch}, batch {n_batches} "
                        f"(instances {start}..{start + len(batch) - 1} of the shuffled order)"
                    )
                T.backward(obj.loss)
                adam_step(params, opt, cfg)
                sums["loss"] += value
                sums["margin"] += obj.margin
                sums["disagreement"] += obj.disagreement
                sums["l2"] += obj.l2
                n_batches += 1
            record = {"epoch": epoch, **{k: v / n_batches for k, v in sums.items()}, "S": model.S}
            if test is not None and test.instances:
                auc = heldout_auc(model, test)
                record["heldout_auc"] = auc
                if auc is not None and (result.best_auc is None or auc > result.best_auc):
                    result.best_auc = auc
                    if out is not None:
                        save_checkpoint(model, out / "model_best.ckpt")
            result.history.append(record)
            if metrics_fh is not None:
                metrics_fh.write(json.dumps(record) + "\n")
                metrics_fh.flush()
            log.info("epoch %d loss %.5f", epoch, record["loss"])
            if on_epoch is not None and on_epoch(record):
                break
    finally:
        if metrics_fh is not None:
            metrics_fh.close()
    if out is not None:
        save_checkpoint(model, out / "model.ckpt")
    return result


# ---------------------------------------------------------------- checkpoints
#
# layout: MAGIC | u32 version | u64 header length | JSON header | raw blocks
# each block is the little-endian float64 data of one parameter, in header order


def save_checkpoint(model: Model, path: str | Path) -> None:
    header = {
        "version": VERSION,
        "config": model.cfg.to_dict(),
        "vocab": model.vocab.itos,
        "relations": model.relations,
        "params": [{"name": k, "shape": list(v.shape)} for k, v in model.params.items()],
    }
    blob = json.dumps(header).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<IQ", VERSION, len(blob)))
        fh.write(blob)
        for tensor in model.params.values():
            fh.write(np.ascontiguousarray(tensor.data, dtype="<f8").tobytes())


def load_checkpoint(path: str | Path) -> Model:
    raw = Path(path).read_bytes()
    if raw[: len(MAGIC)] != MAGIC:
        raise ValueError(f"{path}: not a checkpoint file")
    offset = len(MAGIC)
    version, hlen = struct.unpack_from("<IQ", raw, offset)
    if version != VERSION:
        raise ValueError(f"{path}: unsupported checkpoint version {version}")
    offset += struct.calcsize("<IQ")
    header = json.loads(raw[offset : offset + hlen].decode("utf-8"))
    offset += hlen
    tensors = {}
    for entry in header["params"]:
        shape = tuple(entry["shape"])
        count = int(np.prod(shape, dtype=np.int64))
        data = np.frombuffer(raw, dtype="<f8", count=count, offset=offset).reshape(shape)
        offset += 8 * count
        tensors[entry["name"]] = T.parameter(data.astype(np.float64))
    if offset != len(raw):
        raise ValueError(f"{path}: {len(raw) - offset} trailing bytes")
    cfg = TrainConfig.from_dict(header["config"])
    vocab = Vocab(header["vocab"][2:])
    return Model(cfg, ModelParams(tensors), vocab, header["relations"])
