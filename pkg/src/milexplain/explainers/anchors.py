"""Anchors for sentence pairs, one side at a time.

A candidate anchor fixes a set of tokens; every other token on that side is
independently replaced by a placeholder with probability ``p_sub``. Its
precision is the probability that the classifier's prediction is unchanged.
Anchors grow greedily one token per round. Within a round the candidates
compete in a small best-arm loop on Hoeffding bounds, and the winner is
sampled until its lower bound clears the target precision or its upper bound
drops below it.
"""
from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from .base import Explanation

SIDES = ("premise", "hypothesis")


@dataclass
class AnchorConfig:
    p_sub: float = 0.5
    precision_target: float = 0.95
    delta: float = 0.1
    tolerance: float = 0.05
    batch_size: int = 50
    max_samples: int = 8000
    placeholder: str = "<unk>"
    seed: int = 0


@dataclass
class AnchorRule:
    side: str
    indices: frozenset
    precision: float
    lower_bound: float
    coverage: float
    samples: int
    converged: bool
    delta: float
    tolerance: float
    order: list = field(default_factory=list)


class _Arm:
    __slots__ = ("anchor", "n", "hits")

    def __init__(self, anchor):
        self.anchor = anchor
        self.n = 0
        self.hits = 0

    @property
    def mean(self):
        return self.hits / self.n if self.n else 0.0


def hoeffding_radius(n, delta):
    return math.sqrt(math.log(1.0 / delta) / (2.0 * n)) if n else math.inf


class _Sampler:
    def __init__(self, handle, instance, side, target, config, rng):
        self.handle = handle
        self.tokens = list(instance.side(side))
        self.other = list(instance.hypothesis if side == "premise" else instance.premise)
        self.side = side
        self.target = target
        self.config = config
        self.rng = rng
        self.used = 0
        self.budget = config.max_samples

    @property
    def exhausted(self):
        return self.used >= self.budget

    def draw(self, arm, n):
        cfg = self.config
        n = min(n, self.budget - self.used)
        if n <= 0:
            return
        d = len(self.tokens)
        fixed = np.zeros(d, dtype=bool)
        fixed[list(arm.anchor)] = True
        for _ in range(n):
            swap = (self.rng.random(d) < cfg.p_sub) & ~fixed
            toks = [cfg.placeholder if s else t for t, s in zip(self.tokens, swap)]
            if self.side == "premise":
                probs = self.handle(toks, self.other)
            else:
                probs = self.handle(self.other, toks)
            arm.hits += int(np.argmax(probs) == self.target)
        arm.n += n
        self.used += n

    def lb(self, arm):
        return arm.mean - hoeffding_radius(arm.n, self.config.delta)

    def ub(self, arm):
        return arm.mean + hoeffding_radius(arm.n, self.config.delta)


def _verify(s, arm):
    """Sample ``arm`` until its bounds decide it against the target.

    Returns True (anchor accepted), False (rejected) or None (out of budget).
    """
    target = s.config.precision_target
    while True:
        if s.lb(arm) >= target:
            return True
        if s.ub(arm) < target:
            return False
        if s.exhausted:
            return None
        s.draw(arm, s.config.batch_size)


def _best_arm(s, arms):
    for arm in arms:
        if arm.n == 0:
            s.draw(arm, s.config.batch_size)
    while len(arms) > 1 and not s.exhausted:
        ranked = sorted(arms, key=lambda a: -a.mean)
        best = ranked[0]
        challenger = max(ranked[1:], key=s.ub)
        if s.lb(best) >= s.ub(challenger) - s.config.tolerance:
            break
        s.draw(best, s.config.batch_size)
        s.draw(challenger, s.config.batch_size)
    return max(arms, key=lambda a: (a.mean, -len(a.anchor)))


def _rule(s, arm, converged, order):
    cfg = s.config
    return AnchorRule(s.side, frozenset(arm.anchor), arm.mean, max(s.lb(arm), 0.0),
                      (1.0 - cfg.p_sub) ** len(arm.anchor), s.used, converged,
                      cfg.delta, cfg.tolerance, list(order))


def anchors_explain_side(handle, instance, side, config=None, rng=None, target=None):
    config = config or AnchorConfig()
    tokens = instance.side(side)
    if not tokens:
        raise ValueError(f"{side} is empty")
    if config.max_samples < 1 or config.batch_size < 1:
        raise ValueError("anchor search needs a positive sample budget and batch size")
    rng = rng if rng is not None else np.random.default_rng(config.seed)
    if target is None:
        target = int(np.argmax(handle(list(instance.premise), list(instance.hypothesis))))
    s = _Sampler(handle, instance, side, target, config, rng)
    current = _Arm(frozenset())
    order = []
    verdict = _verify(s, current)
    if verdict:
        return _rule(s, current, True, order)
    best_effort = current
    d = len(tokens)
    while verdict is False and len(current.anchor) < d and not s.exhausted:
        arms = [_Arm(current.anchor | {i}) for i in range(d) if i not in current.anchor]
        best = _best_arm(s, arms)
        order.append(next(iter(best.anchor - current.anchor)))
        current = best
        if best.mean >= best_effort.mean:
            best_effort = best
        if len(current.anchor) == d:
            # nothing left to perturb, so the prediction cannot change
            return AnchorRule(side, current.anchor, 1.0, 1.0, (1.0 - config.p_sub) ** d,
                              s.used, True, config.delta, config.tolerance, order)
        verdict = _verify(s, current)
        if verdict:
            return _rule(s, current, True, order)
    # budget spent before any anchor was accepted
    return _rule(s, best_effort, False, order)


def anchors_explain_pair(handle, instance, config=None):
    config = config or AnchorConfig()
    t0 = time.perf_counter()
    target = int(np.argmax(handle(list(instance.premise), list(instance.hypothesis))))
    rules = {}
    for n, side in enumerate(SIDES):
        rng = np.random.default_rng([config.seed, n])
        rules[side] = anchors_explain_side(handle, instance, side, config, rng, target)
    scores = {side: {i: rules[side].precision for i in rules[side].indices} for side in SIDES}
    meta = {side: {"precision": r.precision, "lower_bound": r.lower_bound,
                   "coverage": r.coverage, "samples": r.samples, "converged": r.converged}
            for side, r in rules.items()}
    return Explanation(rules["premise"].indices, rules["hypothesis"].indices, "anchors",
                       time.perf_counter() - t0, scores["premise"], scores["hypothesis"],
                       target, meta)
