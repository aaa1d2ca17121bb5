"""Fully supervised baseline: classifier plus per-side CRF highlight taggers.

The encoder and attention are those of :mod:`milexplain.model`. Each token's
CRF input is its hidden state scaled by its attention weight; a linear layer
maps that to two emission scores (not highlighted / highlighted) and a
linear-chain CRF with start and stop transitions scores whole tag sequences.
"""
from __future__ import annotations

import math
import time
from dataclasses import asdict, dataclass

import numpy as np

from . import kernels
from . import numerics as nx
from .model import (
    ModelConfig,
    ModelParams,
    TrainConfig,
    cross_entropy,
    encode_instances,
    fit,
    forward,
    init_arrays,
)

SIDES = ("premise", "hypothesis")
N_TAGS = 2


@dataclass
class CrfParams:
    trans: np.ndarray   # trans[j, k]: score of tag j followed by tag k
    start: np.ndarray
    stop: np.ndarray

    @classmethod
    def from_arrays(cls, arrays, side):
        return cls(arrays[f"crf_{side}.trans"], arrays[f"crf_{side}.start"],
                   arrays[f"crf_{side}.stop"])


@dataclass
class TaggerConfig:
    tag_weight: float = 1.0  # tagging total : classification

    def side_weight(self):
        return 0.5 * self.tag_weight


def init_tagger(embeddings, config=None):
    """Classifier arrays drawn exactly as ``ModelParams.initialize`` draws them,
    followed by the CRF blocks."""
    config = config or ModelConfig()
    rng = np.random.default_rng(config.init_seed)
    arrays = init_arrays(embeddings.shape[1], config, rng)
    H = config.hidden
    bound = math.sqrt(6.0 / (H + N_TAGS))
    for side in SIDES:
        arrays[f"crf_{side}.W"] = rng.uniform(-bound, bound, size=(N_TAGS, H))
        arrays[f"crf_{side}.b"] = np.zeros(N_TAGS)
        arrays[f"crf_{side}.trans"] = np.zeros((N_TAGS, N_TAGS))
        arrays[f"crf_{side}.start"] = np.zeros(N_TAGS)
        arrays[f"crf_{side}.stop"] = np.zeros(N_TAGS)
    return ModelParams(embeddings, config, arrays)


def sequence_score(em, tags, crf):
    tags = np.asarray(tags, dtype=np.int64)
    s = crf.start[tags[0]] + crf.stop[tags[-1]] + em[np.arange(len(tags)), tags].sum()
    return float(s + crf.trans[tags[:-1], tags[1:]].sum())


def crf_log_partition(em, crf):
    """log of the summed exp-scores of all tag sequences (forward algorithm)."""
    return kernels.crf_log_partition(em, crf.trans, crf.start, crf.stop)


def viterbi_decode(em, crf):
    """Highest-scoring tag sequence; ties go to tag 0 (not highlighted)."""
    path, _ = kernels.viterbi(em, crf.trans, crf.start, crf.stop)
    return path


def crf_nll(em, trans, start, stop, tags):
    """Tape op: log-partition minus the score of the gold ``tags``."""
    em, trans, start, stop = (nx.tensor.as_tensor(t) for t in (em, trans, start, stop))
    tags = np.asarray(tags, dtype=np.int64)
    log_z, unary, pairwise = kernels.crf_forward_backward(
        em.data, trans.data, start.data, stop.data)
    crf = CrfParams(trans.data, start.data, stop.data)
    value = log_z - sequence_score(em.data, tags, crf)

    def grad_fn(g):
        T = len(tags)
        onehot = np.zeros((T, N_TAGS))
        onehot[np.arange(T), tags] = 1.0
        counts = np.zeros((N_TAGS, N_TAGS))
        np.add.at(counts, (tags[:-1], tags[1:]), 1.0)
        d_start = unary[0] - onehot[0]
        d_stop = unary[-1] - onehot[-1]
        return (g * (unary - onehot), g * (pairwise - counts), g * d_start, g * d_stop)

    return nx.record(value, (em, trans, start, stop), grad_fn)


def crf_inputs(att, h_p, h_h):
    """Per-token features ``a_i * h_i`` for premise and hypothesis."""
    fp = nx.reshape(att.premise, (-1, 1)) * h_p
    fh = nx.reshape(att.hypothesis, (-1, 1)) * h_h
    return fp, fh


def emissions(features, leaves, side):
    W = leaves[f"crf_{side}.W"]
    WT = nx.record(W.data.T, (W,), lambda g: (g.T,))
    return nx.matmul(features, WT) + leaves[f"crf_{side}.b"]


def gold_tags(length, highlights):
    tags = np.zeros(length, dtype=np.int64)
    tags[sorted(highlights)] = 1
    return tags


def joint_loss(p_ids, h_ids, y, p_tags, h_tags, params, leaves=None, config=None):
    """Classification NLL plus weighted premise and hypothesis CRF NLLs."""
    config = config or TaggerConfig()
    leaves = leaves if leaves is not None else params.leaves()
    pred, h_p, h_h = forward(p_ids, h_ids, params, leaves)
    loss = cross_entropy(pred.log_probs, y)
    if config.tag_weight == 0:
        return loss
    feats = crf_inputs(pred.attention, h_p, h_h)
    for side, f, tags in zip(SIDES, feats, (p_tags, h_tags)):
        em = emissions(f, leaves, side)
        nll = crf_nll(em, leaves[f"crf_{side}.trans"], leaves[f"crf_{side}.start"],
                      leaves[f"crf_{side}.stop"], tags)
        loss = loss + config.side_weight() * nll
    return loss


@dataclass
class TaggedPair:
    premise: np.ndarray
    hypothesis: np.ndarray
    label: int
    premise_tags: np.ndarray
    hypothesis_tags: np.ndarray


def encode_tagged(instances, vocab):
    out = []
    for inst, enc in zip(instances, encode_instances(instances, vocab)):
        out.append(TaggedPair(enc.premise, enc.hypothesis, enc.label,
                              gold_tags(len(inst.premise), inst.premise_highlights),
                              gold_tags(len(inst.hypothesis), inst.hypothesis_highlights)))
    return out


def tag_pair(params, p_ids, h_ids):
    """Predicted label distribution plus Viterbi highlight sets for both sides."""
    leaves = params.leaves()
    pred, h_p, h_h = forward(p_ids, h_ids, params, leaves)
    sets = []
    for side, f in zip(SIDES, crf_inputs(pred.attention, h_p, h_h)):
        em = emissions(f, leaves, side).data
        path = viterbi_decode(em, CrfParams.from_arrays(params.arrays, side))
        sets.append({int(i) for i in np.flatnonzero(path)})
    return pred, sets[0], sets[1]


def tagger_explain(params, pair):
    from .explainers.base import Explanation

    t0 = time.perf_counter()
    pred, prem, hyp = tag_pair(params, pair.premise, pair.hypothesis)
    return Explanation(prem, hyp, "lstm-crf", time.perf_counter() - t0,
                       {i: 1.0 for i in prem}, {i: 1.0 for i in hyp}, pred.label)


def evaluate_tagger(params, pairs, gold):
    from .harness.metrics import prf_counts

    correct = tp = fp = fn = 0
    for pair, inst in zip(pairs, gold):
        pred, _, hyp = tag_pair(params, pair.premise, pair.hypothesis)
        correct += int(pred.label == pair.label)
        a, b, c = prf_counts(hyp, inst.hypothesis_highlights)
        tp, fp, fn = tp + a, fp + b, fn + c
    f1 = 0.0 if tp == 0 else 200.0 * tp / (2 * tp + fp + fn)
    return {"dev_accuracy": correct / max(len(pairs), 1), "dev_hypothesis_f1": f1}


def train_tagger(train_set, dev_set, vocab, embeddings, model_config=None, config=None,
                 tagger_config=None, on_epoch=None):
    config = config or TrainConfig()
    tagger_config = tagger_config or TaggerConfig()
    if not train_set or not dev_set:
        raise ValueError("train and dev splits must be non-empty")
    model_config = model_config or ModelConfig(init_seed=config.seed)
    params = init_tagger(embeddings, model_config)
    tr = encode_tagged(train_set, vocab)
    dv = encode_instances(dev_set, vocab)

    def batch_loss(batch, leaves, epoch):
        total = None
        for p in batch:
            term = joint_loss(p.premise, p.hypothesis, p.label, p.premise_tags,
                              p.hypothesis_tags, params, leaves, tagger_config)
            total = term if total is None else total + term
        return total

    best, log_ = fit(params, tr, batch_loss,
                     lambda p: evaluate_tagger(p, dv, dev_set), config, on_epoch)
    log_.update(config=asdict(config), model_config=asdict(model_config),
                tagger_config=asdict(tagger_config))
    return best, log_
