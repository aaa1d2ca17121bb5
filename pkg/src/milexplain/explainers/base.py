from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from ..corpus import LABEL_INDEX
from ..model import ModelParams, predict, EncodedPair


@dataclass
class Explanation:
    premise: frozenset
    hypothesis: frozenset
    method: str
    seconds: float = 0.0
    premise_scores: dict = field(default_factory=dict)
    hypothesis_scores: dict = field(default_factory=dict)
    predicted: int | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.premise = frozenset(int(i) for i in self.premise)
        self.hypothesis = frozenset(int(i) for i in self.hypothesis)

    def to_record(self, index=None):
        rec = {
            "method": self.method,
            "premise": sorted(self.premise),
            "hypothesis": sorted(self.hypothesis),
            "premise_scores": {str(k): float(v) for k, v in sorted(self.premise_scores.items())},
            "hypothesis_scores": {str(k): float(v) for k, v in sorted(self.hypothesis_scores.items())},
            "seconds": self.seconds,
            "predicted": self.predicted,
        }
        if self.meta:
            rec["meta"] = self.meta
        if index is not None:
            rec = {"index": index, **rec}
        return rec

    @classmethod
    def from_record(cls, rec):
        return cls(rec["premise"], rec["hypothesis"], rec["method"], rec.get("seconds", 0.0),
                   {int(k): v for k, v in rec.get("premise_scores", {}).items()},
                   {int(k): v for k, v in rec.get("hypothesis_scores", {}).items()},
                   rec.get("predicted"), rec.get("meta", {}))


def write_explanations(explanations, path):
    with open(path, "w", encoding="utf-8") as fh:
        for n, e in enumerate(explanations):
            fh.write(json.dumps(e.to_record(n)) + "\n")


def read_explanations(path):
    with open(path, encoding="utf-8") as fh:
        return [Explanation.from_record(json.loads(line)) for line in fh if line.strip()]


class ModelHandle:
    """Black-box view of a trained model: token lists in, class distribution out.

    Holds only read-only parameters, so one handle may serve concurrent callers.
    """

    def __init__(self, params: ModelParams, vocab):
        self.params = params
        self.vocab = vocab

    def __call__(self, premise, hypothesis):
        pair = EncodedPair(self.vocab.encode(premise), self.vocab.encode(hypothesis), 0)
        return predict(self.params, pair).probs


class FunctionHandle:
    """Wrap a plain ``f(premise, hypothesis) -> probs`` callable."""

    def __init__(self, fn):
        self.fn = fn

    def __call__(self, premise, hypothesis):
        return np.asarray(self.fn(list(premise), list(hypothesis)), dtype=np.float64)


def label_probs(label, confidence=0.9):
    out = np.full(3, (1.0 - confidence) / 2)
    out[LABEL_INDEX[label] if isinstance(label, str) else label] = confidence
    return out
