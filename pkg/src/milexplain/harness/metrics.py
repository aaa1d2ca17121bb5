"""Token-level precision/recall/F1 of explanations against gold highlights."""
from __future__ import annotations

from dataclasses import asdict, dataclass

SIDES = ("premise", "hypothesis")


class ContractError(ValueError):
    pass


def prf_counts(predicted, gold):
    predicted, gold = set(predicted), set(gold)
    tp = len(predicted & gold)
    return tp, len(predicted) - tp, len(gold) - tp


def _prf(tp, fp, fn):
    p = tp / (tp + fp) if tp + fp else 0.0
    r = tp / (tp + fn) if tp + fn else 0.0
    f = 2 * p * r / (p + r) if p + r else 0.0
    return 100.0 * p, 100.0 * r, 100.0 * f


@dataclass
class SideScore:
    precision: float
    recall: float
    f1: float
    tp: int
    fp: int
    fn: int
    select_all_precision: float
    empty_gold: int


@dataclass
class TokenScoreReport:
    premise: SideScore
    hypothesis: SideScore
    instances: int
    average: str = "micro"

    def side(self, name):
        return getattr(self, name)

    def to_record(self):
        return asdict(self)


def _side_score(preds, golds, lengths, average):
    tp = fp = fn = 0
    gold_total = length_total = empty = 0
    per_p, per_r = [], []
    for pred, gold, n in zip(preds, golds, lengths):
        a, b, c = prf_counts(pred, gold)
        tp, fp, fn = tp + a, fp + b, fn + c
        gold_total += len(gold)
        length_total += n
        if not gold:
            empty += 1
        else:
            per_r.append(a / (a + c))
        if pred:
            per_p.append(a / (a + b))
    if average == "micro":
        p, r, f = _prf(tp, fp, fn)
    else:
        p = 100.0 * sum(per_p) / len(per_p) if per_p else 0.0
        r = 100.0 * sum(per_r) / len(per_r) if per_r else 0.0
        f = 2 * p * r / (p + r) if p + r else 0.0
    sel_all = 100.0 * gold_total / length_total if length_total else 0.0
    return SideScore(p, r, f, tp, fp, fn, sel_all, empty)


def token_prf(predicted, gold, average="micro"):
    """Score explanations (anything with ``premise``/``hypothesis`` index sets)
    against gold instances, pooling token counts across instances."""
    predicted, gold = list(predicted), list(gold)
    if len(predicted) != len(gold):
        raise ContractError(f"{len(predicted)} explanations for {len(gold)} instances")
    if average not in ("micro", "macro"):
        raise ValueError(f"unknown averaging {average!r}")
    sides = {}
    for side in SIDES:
        sides[side] = _side_score(
            [getattr(e, side) for e in predicted],
            [g.highlights(side) for g in gold],
            [len(g.side(side)) for g in gold],
            average,
        )
    return TokenScoreReport(sides["premise"], sides["hypothesis"], len(gold), average)
