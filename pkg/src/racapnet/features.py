"""Vocabulary, instances and the word + position embedding layer."""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable

import numpy as np

from . import tensor as T
from .tensor import Tensor

PAD, UNK = "<pad>", "<unk>"
PAD_ID, UNK_ID = 0, 1


class Vocab:
    """Token <-> id map with reserved padding and unknown ids."""

    def __init__(self, tokens: Iterable[str] = ()):
        self.itos: list[str] = [PAD, UNK]
        self.stoi: dict[str, int] = {PAD: PAD_ID, UNK: UNK_ID}
        for tok in tokens:
            self.add(tok)

    def add(self, token: str) -> int:
        idx = self.stoi.get(token)
        if idx is None:
            idx = len(self.itos)
            self.stoi[token] = idx
            self.itos.append(token)
        return idx

    def id(self, token: str) -> int:
        return self.stoi.get(token, UNK_ID)

    def encode(self, tokens: Iterable[str]) -> list[int]:
        return [self.stoi.get(t, UNK_ID) for t in tokens]

    def __len__(self) -> int:
        return len(self.itos)

    def __contains__(self, token: str) -> bool:
        return token in self.stoi

    def __eq__(self, other) -> bool:
        return isinstance(other, Vocab) and self.itos == other.itos


@dataclass
class Instance:
    tokens: list[str]
    ent1_pos: int
    ent2_pos: int
    labels: frozenset[int]
    bag_key: tuple[str, str]
    token_ids: list[int] = field(default_factory=list)

    def __post_init__(self):
        n = len(self.tokens)
        if not (0 <= self.ent1_pos < n and 0 <= self.ent2_pos < n):
            raise ValueError(f"entity positions {self.ent1_pos}, {self.ent2_pos} outside sentence of length {n}")
        if self.ent1_pos == self.ent2_pos:
            raise ValueError("entity positions coincide")
        if not self.labels:
            raise ValueError("instance needs at least one label (NA counts)")
        self.labels = frozenset(self.labels)

    def __len__(self) -> int:
        return len(self.tokens)


def position_feature(token_index: int, entity_index: int, max_len: int) -> int:
    """Relative distance clipped to [-max_len, max_len], shifted to a table row id."""
    dist = min(max(token_index - entity_index, -max_len), max_len)
    return dist + max_len


def position_ids(length: int, entity_index: int, max_len: int) -> np.ndarray:
    return np.clip(np.arange(length) - entity_index, -max_len, max_len) + max_len


@dataclass
class EmbeddingTables:
    word: Tensor
    pos1: Tensor
    pos2: Tensor

    @property
    def k(self) -> int:
        return self.word.shape[1]

    @property
    def p(self) -> int:
        return self.pos1.shape[1]

    @property
    def max_len(self) -> int:
        return (self.pos1.shape[0] - 1) // 2

    @classmethod
    def init(cls, vocab_size: int, k: int, p: int, max_len: int, rng: np.random.Generator) -> "EmbeddingTables":
        rows = 2 * max_len + 1
        return cls(
            T.parameter(rng.uniform(-0.1, 0.1, (vocab_size, k))),
            T.parameter(rng.uniform(-0.1, 0.1, (rows, p))),
            T.parameter(rng.uniform(-0.1, 0.1, (rows, p))),
        )


def embed(instance: Instance, tables: EmbeddingTables) -> Tensor:
    """Rows are ``[word; pos-to-entity-1; pos-to-entity-2]`` for each token, width k + 2p."""
    ids = instance.token_ids
    vocab_size = tables.word.shape[0]
    ids = [i if 0 <= i < vocab_size else UNK_ID for i in ids]
    n = len(ids)
    clip = tables.max_len
    w = T.take_rows(tables.word, ids)
    p1 = T.take_rows(tables.pos1, position_ids(n, instance.ent1_pos, clip))
    p2 = T.take_rows(tables.pos2, position_ids(n, instance.ent2_pos, clip))
    return T.concat([w, p1, p2], axis=1)


def load_pretrained(path: str | Path, vocab: Vocab, word_table: np.ndarray) -> int:
    """Overwrite rows of ``word_table`` for tokens found in a ``token v1 .. vk`` text file.

    Returns the number of rows replaced. Lines of the wrong width raise.
    """
    k = word_table.shape[1]
    hits = 0
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            parts = line.rstrip("\n").split(" ")
            if not parts or not parts[0]:
                continue
            if len(parts) != k + 1:
                raise ValueError(f"{path}:{lineno}: expected {k} values, got {len(parts) - 1}")
            if parts[0] in vocab:
                word_table[vocab.id(parts[0])] = np.array(parts[1:], dtype=np.float64)
                hits += 1
    return hits
