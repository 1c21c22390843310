"""Corpora: synthetic overlapped-relation generator, NYT-style line files, bags.

Line format (tab separated, one relation per line)::

    ent1_id  ent2_id  ent1_str  ent2_str  relation_name  sentence

Lines that repeat the same entity pair and sentence with different relations
are merged into one multi-label instance.
"""

from __future__ import annotations

import json
import logging
from collections import OrderedDict
from dataclasses import asdict, dataclass, fields
from pathlib import Path
from typing import Iterable, NamedTuple

import numpy as np

from .config import ConfigError
from .features import Instance, Vocab

log = logging.getLogger(__name__)

NA = "NA"


class FormatError(ValueError):
    pass


@dataclass
class Corpus:
    vocab: Vocab
    instances: list[Instance]
    relations: list[str]  # id -> name, id 0 is NA
    split: str = "train"
    rejected: int = 0
    unknown_relations: int = 0

    def __len__(self) -> int:
        return len(self.instances)

    @property
    def relation_ids(self) -> dict[str, int]:
        return {name: i for i, name in enumerate(self.relations)}

    def validate(self) -> None:
        for inst in self.instances:
            if not all(0 <= r < len(self.relations) for r in inst.labels):
                raise ValueError(f"instance of bag {inst.bag_key} has invalid labels {set(inst.labels)}")


class Bag(NamedTuple):
    instances: list[Instance]
    labels: frozenset[int]


def bags(corpus: Corpus | Iterable[Instance]) -> "OrderedDict[tuple[str, str], Bag]":
    """Group instances by ordered entity pair, keeping first-seen order."""
    instances = corpus.instances if isinstance(corpus, Corpus) else corpus
    grouped: OrderedDict[tuple[str, str], list[Instance]] = OrderedDict()
    for inst in instances:
        grouped.setdefault(inst.bag_key, []).append(inst)
    return OrderedDict(
        (key, Bag(members, frozenset().union(*(i.labels for i in members))))
        for key, members in grouped.items()
    )


# --------------------------------------------------------------- synthetic


@dataclass
class SynthSpec:
    n_relations: int = 5  # excluding NA
    patterns_per_relation: int = 2
    cue_length: int = 1
    n_entities: int = 400
    n_bags: int = 200
    sentences_per_bag: tuple[int, int] = (1, 1)
    noise_vocab: int = 60
    noise_rate: float = 0.5  # share of filler tokens in a sentence
    max_sentence_len: int = 16
    overlap_rate: float = 0.5  # P(bag carries >= 2 relations)
    max_labels: int = 2
    na_rate: float = 0.0  # share of bags labeled NA (no cues planted)
    test_fraction: float = 0.0
    seed: int = 0

    def __post_init__(self):
        self.sentences_per_bag = tuple(self.sentences_per_bag)
        if not 0.0 <= self.overlap_rate <= 1.0:
            raise ConfigError("overlap_rate must lie in [0, 1]")
        if not 0.0 <= self.noise_rate < 1.0:
            raise ConfigError("noise_rate must lie in [0, 1)")
        if not 0.0 <= self.na_rate <= 1.0 or not 0.0 <= self.test_fraction < 1.0:
            raise ConfigError("na_rate and test_fraction must be probabilities")
        if self.n_relations < 1 or self.patterns_per_relation < 1 or self.cue_length < 1:
            raise ConfigError("every relation needs at least one non-empty cue pattern")
        if not 1 <= self.max_labels <= self.n_relations:
            raise ConfigError("max_labels must lie in [1, n_relations]")
        if self.overlap_rate > 0 and self.max_labels < 2:
            raise ConfigError("overlap_rate > 0 needs max_labels >= 2")
        lo, hi = self.sentences_per_bag
        if not 1 <= lo <= hi:
            raise ConfigError("sentences_per_bag must be an increasing pair >= 1")
        need = self.max_labels * self.cue_length + 2
        if self.max_sentence_len < need:
            raise ConfigError(f"max_sentence_len {self.max_sentence_len} < cues + entities = {need}")
        if self.n_entities * (self.n_entities - 1) < self.n_bags:
            raise ConfigError("not enough entities for distinct entity pairs")

    @classmethod
    def from_dict(cls, raw: dict) -> "SynthSpec":
        known = {f.name for f in fields(cls)}
        unknown = set(raw) - known
        if unknown:
            raise ConfigError(f"unknown synthetic spec keys: {sorted(unknown)}")
        return cls(**raw)

    @classmethod
    def from_json(cls, path: str | Path) -> "SynthSpec":
        return cls.from_dict(json.loads(Path(path).read_text()))

    def to_dict(self) -> dict:
        out = asdict(self)
        out["sentences_per_bag"] = list(self.sentences_per_bag)
        return out


def cue_patterns(spec: SynthSpec) -> dict[int, list[tuple[str, ...]]]:
    """Relation id (1-based, 0 is NA) -> its planted token patterns."""
    return {
        r: [tuple(f"cue{r}_{p}_{k}" for k in range(spec.cue_length)) for p in range(spec.patterns_per_relation)]
        for r in range(1, spec.n_relations + 1)
    }


class Splits(NamedTuple):
    train: Corpus
    test: Corpus


def _draw_labels(spec: SynthSpec, rng: np.random.Generator) -> frozenset[int]:
    if spec.na_rate and rng.random() < spec.na_rate:
        return frozenset({0})
    count = 1
    if rng.random() < spec.overlap_rate:
        count = int(rng.integers(2, spec.max_labels + 1))
    chosen = rng.choice(spec.n_relations, size=count, replace=False) + 1
    return frozenset(int(r) for r in chosen)


def _sentence(spec: SynthSpec, e1: str, e2: str, labels: frozenset[int], patterns, rng) -> tuple[list[str], int, int]:
    chunks: list[tuple[str, ...]] = [(e1,), (e2,)]
    for r in sorted(labels):
        if r == 0:
            continue
        chunks.append(patterns[r][int(rng.integers(len(patterns[r])))])
    content = sum(len(c) for c in chunks)
    target = content * spec.noise_rate / (1.0 - spec.noise_rate)
    n_noise = int(np.floor(target + rng.random()))  # stochastic rounding
    n_noise = min(n_noise, spec.max_sentence_len - content)
    chunks.extend((f"w{int(i)}",) for i in rng.integers(spec.noise_vocab, size=n_noise))
    order = rng.permutation(len(chunks))
    tokens: list[str] = []
    e1_pos = e2_pos = -1
    for idx in order:
        if idx == 0:
            e1_pos = len(tokens)
        elif idx == 1:
            e2_pos = len(tokens)
        tokens.extend(chunks[idx])
    return tokens, e1_pos, e2_pos


def generate(spec: SynthSpec) -> Splits:
    """Deterministic corpus with planted cue patterns; test bags use unseen entity pairs."""
    rng = np.random.default_rng(spec.seed)
    patterns = cue_patterns(spec)
    relations = [NA] + [f"/synthetic/rel{r}" for r in range(1, spec.n_relations + 1)]

    pairs: list[tuple[int, int]] = []
    seen: set[tuple[int, int]] = set()
    while len(pairs) < spec.n_bags:
        a, b = (int(x) for x in rng.choice(spec.n_entities, size=2, replace=False))
        if (a, b) not in seen:
            seen.add((a, b))
            pairs.append((a, b))
    n_test = int(round(spec.n_bags * spec.test_fraction))
    test_idx = set(rng.choice(spec.n_bags, size=n_test, replace=False).tolist()) if n_test else set()

    lo, hi = spec.sentences_per_bag
    train_insts: list[Instance] = []
    test_insts: list[Instance] = []
    for idx, (a, b) in enumerate(pairs):
        e1, e2 = f"ent{a}", f"ent{b}"
        labels = _draw_labels(spec, rng)
        for _ in range(int(rng.integers(lo, hi + 1))):
            tokens, p1, p2 = _sentence(spec, e1, e2, labels, patterns, rng)
            inst = Instance(tokens, p1, p2, labels, (e1, e2))
            (test_insts if idx in test_idx else train_insts).append(inst)

    vocab = Vocab()
    for inst in train_insts:
        for tok in inst.tokens:
            vocab.add(tok)
    for inst in train_insts + test_insts:
        inst.token_ids = vocab.encode(inst.tokens)
    return Splits(
        Corpus(vocab, train_insts, list(relations), "train"),
        Corpus(vocab, test_insts, list(relations), "test"),
    )


# ------------------------------------------------------------- line files


def format_lines(corpus: Corpus) -> list[str]:
    """One line per (instance, relation); inverse of :func:`load_nyt` for joined entities."""
    lines = []
    for inst in corpus.instances:
        e1, e2 = inst.bag_key
        s1, s2 = inst.tokens[inst.ent1_pos], inst.tokens[inst.ent2_pos]
        sentence = " ".join(inst.tokens)
        for r in sorted(inst.labels):
            lines.append("\t".join((e1, e2, s1, s2, corpus.relations[r], sentence)))
    return lines


def _find_entity(tokens: list[str], words: list[str]) -> int:
    """Join the first occurrence of ``words`` into one token in place; -1 if absent."""
    joined = "_".join(words)
    for i, tok in enumerate(tokens):
        if tok == joined:
            return i
    n = len(words)
    for i in range(len(tokens) - n + 1):
        if tokens[i : i + n] == words:
            tokens[i : i + n] = [joined]
            return i
    return -1


def parse_lines(
    lines: Iterable[str],
    *,
    split: str = "train",
    relations: list[str] | None = None,
    vocab: Vocab | None = None,
    max_len: int = 100,
    source: str = "<lines>",
) -> Corpus:
    relations = list(relations) if relations is not None else [NA]
    rel_ids = {name: i for i, name in enumerate(relations)}
    grow_vocab = vocab is None
    vocab = Vocab() if vocab is None else vocab
    merged: OrderedDict[tuple, Instance] = OrderedDict()
    rejected = unknown = 0

    for lineno, raw in enumerate(lines, 1):
        line = raw.rstrip("\r\n")
        if not line.strip():
            continue
        parts = line.split("\t")
        if len(parts) != 6:
            raise FormatError(f"{source}:{lineno}: expected 6 tab-separated fields, got {len(parts)}")
        id1, id2, s1, s2, rel, sentence = parts
        if not id1 or not id2 or not s1.strip() or not s2.strip() or not rel:
            raise FormatError(f"{source}:{lineno}: empty field")
        tokens = sentence.split()
        w1, w2 = s1.split(), s2.split()
        p1 = _find_entity(tokens, w1)
        p2 = _find_entity(tokens, w2)
        if p1 >= 0:
            # joining the second entity may shift the first
            j1 = "_".join(w1)
            p1 = tokens.index(j1) if j1 in tokens else -1
        if p1 < 0 or p2 < 0 or p1 == p2:
            rejected += 1
            continue
        if len(tokens) > max_len:
            if max(p1, p2) >= max_len:
                rejected += 1
                continue
            tokens = tokens[:max_len]

        if rel not in rel_ids:
            if split == "train":
                rel_ids[rel] = len(relations)
                relations.append(rel)
            else:
                unknown += 1
                rel = NA
        label = rel_ids[rel]

        key = (id1, id2, tuple(tokens), p1, p2)
        prev = merged.get(key)
        labels = frozenset({label}) if prev is None else prev.labels | {label}
        merged[key] = Instance(tokens, p1, p2, labels, (id1, id2))

    instances = list(merged.values())
    for inst in instances:
        if len(inst.labels) > 1 and 0 in inst.labels:
            inst.labels = inst.labels - {0}
        if grow_vocab:
            for tok in inst.tokens:
                vocab.add(tok)
        inst.token_ids = vocab.encode(inst.tokens)
    if unknown:
        log.warning("%s: %d lines with relations unseen in training mapped to NA", source, unknown)
    return Corpus(vocab, instances, relations, split, rejected, unknown)


def load_nyt(
    path: str | Path,
    *,
    split: str = "train",
    relations: list[str] | None = None,
    vocab: Vocab | None = None,
    max_len: int = 100,
) -> Corpus:
    with open(path, encoding="utf-8") as fh:
        return parse_lines(fh, split=split, relations=relations, vocab=vocab, max_len=max_len, source=str(path))


def write_corpus(splits: Splits | Corpus, out_dir: str | Path) -> Path:
    """Write ``train.txt`` / ``test.txt`` and ``relations.json`` into ``out_dir``."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    corpora = [splits] if isinstance(splits, Corpus) else list(splits)
    for corpus in corpora:
        lines = format_lines(corpus)
        (out / f"{corpus.split}.txt").write_text("".join(l + "\n" for l in lines), encoding="utf-8")
    (out / "relations.json").write_text(json.dumps(corpora[0].relations, indent=1))
    return out


def read_corpus_dir(path: str | Path, max_len: int = 100) -> Splits:
    """Load ``train.txt`` (required) and ``test.txt`` (optional) sharing one vocab and relation map."""
    root = Path(path)
    rel_file = root / "relations.json"
    relations = json.loads(rel_file.read_text()) if rel_file.exists() else None
    train = load_nyt(root / "train.txt", split="train", relations=relations, max_len=max_len)
    test_path = root / "test.txt"
    if test_path.exists():
        test = load_nyt(test_path, split="test", relations=train.relations, vocab=train.vocab, max_len=max_len)
    else:
        test = Corpus(train.vocab, [], train.relations, "test")
    return Splits(train, test)


def encode_with(corpus: Corpus, vocab: Vocab) -> Corpus:
    """Re-encode token ids against another vocabulary (e.g. one stored in a checkpoint)."""
    for inst in corpus.instances:
        inst.token_ids = vocab.encode(inst.tokens)
    corpus.vocab = vocab
    return corpus
