"""LIME for sentence pairs: token-deletion perturbations on one side at a time.

For the side being explained, binary masks decide which tokens survive; the
other sentence is left untouched. A ridge-regularised weighted linear model
maps mask bits to the classifier's probability for the originally predicted
class, with samples weighted by an exponential kernel on the cosine distance
between the mask and the all-ones mask.
"""
from __future__ import annotations

import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .base import Explanation

SIDES = ("premise", "hypothesis")


class ExplainerError(RuntimeError):
    pass


@dataclass
class LimeConfig:
    n_samples: int = 1000
    ridge: float = 1.0
    kernel_width: float = 0.25
    top_k: int = 10
    min_weight: float = 0.0
    seed: int = 0
    workers: int = 1


def weighted_ridge(X, y, w, lam):
    """Weighted ridge regression with an unpenalised intercept.

    Minimises sum_i w_i (y_i - b - x_i.beta)^2 + lam |beta|^2 and returns
    ``(beta, b)``.
    """
    w = np.asarray(w, dtype=np.float64)
    sw = w.sum()
    mx = w @ X / sw
    my = w @ y / sw
    Xc = X - mx
    yc = y - my
    A = Xc.T @ (Xc * w[:, None]) + lam * np.eye(X.shape[1])
    rhs = Xc.T @ (w * yc)
    beta = np.linalg.lstsq(A, rhs, rcond=None)[0] if lam == 0 else np.linalg.solve(A, rhs)
    return beta, float(my - mx @ beta)


def sample_masks(d, n, rng):
    """LIME text sampling: row 0 keeps everything; every other row removes a
    uniformly chosen number of tokens. Masks that would delete the whole
    sentence are redrawn, so a one-token sentence is never perturbed."""
    masks = np.ones((n, d), dtype=np.int8)
    if d == 1:
        return masks
    for r in range(1, n):
        while True:
            k = int(rng.integers(1, d + 1))
            drop = rng.choice(d, size=k, replace=False)
            masks[r] = 1
            masks[r, drop] = 0
            if masks[r].any():
                break
    return masks


def kernel_weights(masks, width):
    d = masks.shape[1]
    kept = masks.sum(axis=1)
    distance = 1.0 - np.sqrt(kept / d)
    return np.exp(-(distance ** 2) / width ** 2)


def _query(handle, instance, side, masks, workers):
    tokens = instance.side(side)
    other = instance.hypothesis if side == "premise" else instance.premise

    def run(r):
        kept = [t for t, keep in zip(tokens, masks[r]) if keep]
        try:
            if side == "premise":
                return handle(kept, list(other))
            return handle(list(other), kept)
        except Exception as err:  # noqa: BLE001 - re-raised with context
            raise ExplainerError(f"classifier failed on {side} sample {r}: {err}") from err

    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            return np.array(list(pool.map(run, range(len(masks)))))
    return np.array([run(r) for r in range(len(masks))])


def lime_explain_side(handle, instance, side, config=None, rng=None, target=None):
    """Signed per-token weights for ``side`` toward the predicted class.

    Returns ``(weights, target_class)``.
    """
    config = config or LimeConfig()
    tokens = instance.side(side)
    d = len(tokens)
    if d == 0:
        raise ValueError(f"{side} is empty")
    if config.n_samples < 2:
        raise ExplainerError(f"sample budget {config.n_samples} is too small to fit a model")
    rng = rng if rng is not None else np.random.default_rng(config.seed)
    masks = sample_masks(d, config.n_samples, rng)
    probs = _query(handle, instance, side, masks, config.workers)
    if target is None:
        target = int(np.argmax(probs[0]))
    y = probs[:, target]
    w = kernel_weights(masks, config.kernel_width)
    beta, _ = weighted_ridge(masks.astype(np.float64), y, w, config.ridge)
    return beta, target


def _select(weights, k, min_weight):
    pos = [i for i in np.argsort(-np.abs(weights), kind="stable") if weights[i] > min_weight]
    return pos[:k]


def lime_explain_pair(handle, instance, config=None):
    config = config or LimeConfig()
    t0 = time.perf_counter()
    base = np.asarray(handle(list(instance.premise), list(instance.hypothesis)))
    target = int(np.argmax(base))
    chosen, scores = {}, {}
    for n, side in enumerate(SIDES):
        rng = np.random.default_rng([config.seed, n])
        weights, _ = lime_explain_side(handle, instance, side, config, rng, target)
        sel = _select(weights, config.top_k, config.min_weight)
        chosen[side] = sel
        scores[side] = {int(i): float(weights[i]) for i in sel}
    return Explanation(chosen["premise"], chosen["hypothesis"], "lime",
                       time.perf_counter() - t0, scores["premise"], scores["hypothesis"],
                       target)
