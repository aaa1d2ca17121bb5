"""Sentence-pair corpora, vocabularies and frozen word embeddings.

Two on-disk corpus formats are read: the e-SNLI CSV release (highlights
encoded as ``*word*`` in per-annotator marked sentences) and a JSON-lines
format with explicit token lists and highlight indices, which is what the
rest of the package writes.
"""
from __future__ import annotations

import csv
import hashlib
import json
import logging
import re
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

log = logging.getLogger(__name__)

LABELS = ("entails", "contradicts", "neutral")
LABEL_INDEX = {name: i for i, name in enumerate(LABELS)}
NEUTRAL = LABEL_INDEX["neutral"]

_ESNLI_LABELS = {
    "entailment": "entails",
    "contradiction": "contradicts",
    "neutral": "neutral",
}

PAD, UNK = "<pad>", "<unk>"

_TOKEN_RE = re.compile(r"\w+|[^\w\s]")


class CorpusFormatError(ValueError):
    pass


@dataclass(frozen=True)
class SentencePairInstance:
    premise: tuple
    hypothesis: tuple
    label: str
    premise_highlights: frozenset = frozenset()
    hypothesis_highlights: frozenset = frozenset()

    def __post_init__(self):
        object.__setattr__(self, "premise", tuple(self.premise))
        object.__setattr__(self, "hypothesis", tuple(self.hypothesis))
        object.__setattr__(self, "premise_highlights", frozenset(self.premise_highlights))
        object.__setattr__(self, "hypothesis_highlights", frozenset(self.hypothesis_highlights))
        if self.label not in LABEL_INDEX:
            raise CorpusFormatError(f"unknown label {self.label!r}")
        if not self.premise or not self.hypothesis:
            raise CorpusFormatError("empty sentence")
        for side, toks, hl in (("premise", self.premise, self.premise_highlights),
                               ("hypothesis", self.hypothesis, self.hypothesis_highlights)):
            bad = [i for i in hl if not 0 <= i < len(toks)]
            if bad:
                raise CorpusFormatError(f"{side} highlight index {bad[0]} out of range")

    @property
    def label_index(self):
        return LABEL_INDEX[self.label]

    def side(self, name):
        return self.premise if name == "premise" else self.hypothesis

    def highlights(self, name):
        return self.premise_highlights if name == "premise" else self.hypothesis_highlights

    def to_record(self):
        return {
            "label": self.label,
            "premise": list(self.premise),
            "hypothesis": list(self.hypothesis),
            "premise_highlights": sorted(self.premise_highlights),
            "hypothesis_highlights": sorted(self.hypothesis_highlights),
        }

    @classmethod
    def from_record(cls, rec):
        return cls(rec["premise"], rec["hypothesis"], rec["label"],
                   rec.get("premise_highlights", ()), rec.get("hypothesis_highlights", ()))


def tokenize(text):
    """Lowercase, then split into word runs and single punctuation marks."""
    return _TOKEN_RE.findall(text.lower())


def union_annotations(sets):
    sets = list(sets)
    if not sets:
        raise ValueError("union_annotations needs at least one set")
    return frozenset().union(*sets)


def _marked_highlights(marked, tokens):
    """Indices of ``*word*`` spans in ``marked``, aligned to ``tokens``.

    Returns None when the marked sentence does not tokenize to ``tokens``.
    """
    toks, hl = [], set()
    for n, segment in enumerate(marked.split("*")):
        for tok in tokenize(segment):
            if n % 2 == 1:
                hl.add(len(toks))
            toks.append(tok)
    return hl if toks == list(tokens) else None


def load_esnli(path, stats=None):
    """Read an e-SNLI CSV file into instances.

    Rows labelled ``-`` are dropped; malformed or misaligned rows are skipped
    and counted in ``stats`` (if given) under ``"skipped"``.
    """
    path = Path(path)
    instances = []
    skipped = dropped = 0
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        fields = reader.fieldnames or []
        p_cols = sorted(c for c in fields if c.startswith("Sentence1_marked"))
        h_cols = sorted(c for c in fields if c.startswith("Sentence2_marked"))
        for lineno, row in enumerate(reader, start=2):
            gold = (row.get("gold_label") or "").strip()
            if gold == "-":
                dropped += 1
                continue
            try:
                label = _ESNLI_LABELS[gold]
                premise = tokenize(row["Sentence1"])
                hypothesis = tokenize(row["Sentence2"])
                p_sets, h_sets = [], []
                for cols, toks, acc in ((p_cols, premise, p_sets), (h_cols, hypothesis, h_sets)):
                    for col in cols:
                        marked = row.get(col)
                        if marked is None or not marked.strip():
                            continue
                        hl = _marked_highlights(marked, toks)
                        if hl is None:
                            raise CorpusFormatError(f"highlight alignment failed in {col}")
                        acc.append(hl)
                inst = SentencePairInstance(
                    premise, hypothesis, label,
                    union_annotations(p_sets) if p_sets else frozenset(),
                    union_annotations(h_sets) if h_sets else frozenset(),
                )
            except (KeyError, TypeError, CorpusFormatError) as err:
                skipped += 1
                log.debug("skipping %s line %d: %s", path.name, lineno, err)
                continue
            instances.append(inst)
    if skipped:
        log.warning("skipped %d malformed rows in %s", skipped, path)
    if stats is not None:
        stats.update(skipped=skipped, dropped=dropped, loaded=len(instances))
    return instances


def write_instances(instances, path):
    with Path(path).open("w", encoding="utf-8") as fh:
        for inst in instances:
            fh.write(json.dumps(inst.to_record()) + "\n")


def read_instances(path):
    out = []
    with Path(path).open(encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                out.append(SentencePairInstance.from_record(json.loads(line)))
            except (KeyError, json.JSONDecodeError) as err:
                raise CorpusFormatError(f"{path}:{lineno}: {err}") from err
    return out


def load_corpus(path):
    """Dispatch on extension: ``.csv`` is e-SNLI, anything else JSON lines."""
    path = Path(path)
    if path.suffix.lower() == ".csv":
        return load_esnli(path)
    return read_instances(path)


@dataclass
class Vocabulary:
    tokens: list = field(default_factory=lambda: [PAD, UNK])

    def __post_init__(self):
        self.index = {t: i for i, t in enumerate(self.tokens)}
        if self.tokens[:2] != [PAD, UNK] or len(self.index) != len(self.tokens):
            raise ValueError("vocabulary must start with pad, unk and have unique tokens")

    def __len__(self):
        return len(self.tokens)

    def __contains__(self, tok):
        return tok in self.index

    def add(self, tok):
        if tok not in self.index:
            self.index[tok] = len(self.tokens)
            self.tokens.append(tok)
        return self.index[tok]

    def encode(self, tokens):
        return np.array([self.index.get(t, 1) for t in tokens], dtype=np.int64)

    def digest(self):
        return hashlib.sha256("\n".join(self.tokens).encode("utf-8")).hexdigest()


def build_vocab(instances):
    vocab = Vocabulary()
    n = 0
    for inst in instances:
        n += 1
        for tok in inst.premise + inst.hypothesis:
            vocab.add(tok)
    if n == 0:
        raise ValueError("build_vocab needs at least one instance")
    return vocab


def load_embeddings(path, vocab, seed=42, oov_scale=0.1):
    """Frozen |V| x d matrix from a ``token v1 ... vd`` text file.

    Tokens missing from the file draw N(0, oov_scale^2) rows from a generator
    seeded with ``seed``; pad and unk rows are zero.
    """
    found = {}
    dim = None
    with Path(path).open(encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            parts = line.rstrip("\n").split(" ")
            if len(parts) < 2:
                continue
            if dim is None:
                dim = len(parts) - 1
            elif len(parts) - 1 != dim:
                raise CorpusFormatError(
                    f"{path}:{lineno}: expected {dim} values, found {len(parts) - 1}")
            if parts[0] in vocab.index:
                found[parts[0]] = np.array(parts[1:], dtype=np.float64)
    if dim is None:
        raise CorpusFormatError(f"{path}: no embedding vectors")
    table = np.zeros((len(vocab), dim))
    rng = np.random.default_rng(seed)
    for i, tok in enumerate(vocab.tokens[2:], start=2):
        vec = found.get(tok)
        table[i] = vec if vec is not None else rng.normal(0.0, oov_scale, dim)
    table.flags.writeable = False
    return table


def write_embeddings(table, tokens, path):
    with Path(path).open("w", encoding="utf-8") as fh:
        for tok, row in zip(tokens, table):
            fh.write(tok + " " + " ".join(repr(float(v)) for v in row) + "\n")
