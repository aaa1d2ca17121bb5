"""White-box explanations: threshold tanh-rescaled attention scores."""
from __future__ import annotations

import time

import numpy as np

from ..corpus import NEUTRAL
from ..model import predict
from .base import Explanation


def select_tokens(scores, tau):
    """Indices whose ``tanh(score) >= tau``; zero scores never qualify."""
    s = np.asarray(scores, dtype=np.float64)
    return {int(i) for i in np.flatnonzero((np.tanh(s) >= tau) & (s > 0))}


def threshold_attention(pred, tau, normalized=False):
    """Explanation from a prediction's attention.

    Raw scores (last column / last row of the score matrix) are used unless
    ``normalized`` is set. A neutral prediction selects nothing from the premise.
    """
    if not 0.0 <= tau < 1.0:
        raise ValueError("tau must lie in [0, 1)")
    att = pred.attention
    p_scores = (att.premise if normalized else att.premise_raw).data
    h_scores = (att.hypothesis if normalized else att.hypothesis_raw).data
    label = pred.label
    premise = set() if label == NEUTRAL else select_tokens(p_scores, tau)
    hypothesis = select_tokens(h_scores, tau)
    return Explanation(
        premise, hypothesis, "attention",
        premise_scores={i: float(np.tanh(p_scores[i])) for i in premise},
        hypothesis_scores={i: float(np.tanh(h_scores[i])) for i in hypothesis},
        predicted=label,
    )


def attention_explain(params, pair, tau, normalized=False):
    t0 = time.perf_counter()
    pred = predict(params, pair)
    exp = threshold_attention(pred, tau, normalized)
    exp.seconds = time.perf_counter() - t0
    return exp
