"""Sentence-pair entailment classifier with MIL-regularised attention.

Premise and hypothesis are encoded independently by one LSTM over frozen
embeddings. A ReLU projection of every hidden state feeds an inner-product
score matrix; its last column (premise side) and last row (hypothesis side)
are L1-normalised into attention distributions that pool the encodings for
a small feed-forward classifier. Training adds entropy, max and min penalties
on those distributions to the negative log-likelihood.
"""
from __future__ import annotations

import copy
import logging
import math
import time
from dataclasses import asdict, dataclass, field

import numpy as np

from . import numerics as nx
from .corpus import LABELS, NEUTRAL
from .numerics import Tensor

log = logging.getLogger(__name__)

NLL_FLOOR = 1e-12
MIN_EPS = 1e-8


class TrainingDivergedError(RuntimeError):
    pass


@dataclass
class ModelConfig:
    hidden: int = 200
    attend_dim: int = 200
    cls_hidden: tuple = (200, 200)
    pooling: str = "weighted"  # or "final": a_m * h_m only
    attend_bias: bool = True
    attention_eps: float = 0.0
    init_seed: int = 0

    def __post_init__(self):
        self.cls_hidden = tuple(self.cls_hidden)
        if self.pooling not in ("weighted", "final"):
            raise ValueError(f"unknown pooling {self.pooling!r}")


@dataclass
class RegularizerWeights:
    alpha: float = 0.0
    beta: float = 0.0
    gamma: float = 0.0
    tau: float = 0.5

    def __post_init__(self):
        if min(self.alpha, self.beta, self.gamma) < 0:
            raise ValueError("regularizer weights must be non-negative")
        if not 0.0 <= self.tau < 1.0:
            raise ValueError("tau must lie in [0, 1)")


def _glorot(rng, rows, cols):
    bound = math.sqrt(6.0 / (rows + cols))
    return rng.uniform(-bound, bound, size=(rows, cols))


def init_arrays(embed_dim, cfg, rng):
    H, A = cfg.hidden, cfg.attend_dim
    arrays = {
        "lstm.W": _glorot(rng, 4 * H, embed_dim),
        "lstm.U": _glorot(rng, 4 * H, H),
        "lstm.b": np.zeros(4 * H),
        "attend.W": _glorot(rng, A, H),
    }
    if cfg.attend_bias:
        arrays["attend.b"] = np.full(A, 0.01)
    arrays["lstm.b"][H:2 * H] = 1.0
    dims = (2 * H,) + cfg.cls_hidden + (len(LABELS),)
    for n, (d_in, d_out) in enumerate(zip(dims[:-1], dims[1:])):
        arrays[f"cls.W{n}"] = _glorot(rng, d_out, d_in)
        arrays[f"cls.b{n}"] = np.zeros(d_out)
    return arrays


@dataclass
class ModelParams:
    """Frozen embedding table plus every trainable array, keyed by name."""

    embeddings: np.ndarray
    config: ModelConfig
    arrays: dict

    @classmethod
    def initialize(cls, embeddings, config=None):
        config = config or ModelConfig()
        rng = np.random.default_rng(config.init_seed)
        return cls(embeddings, config, init_arrays(embeddings.shape[1], config, rng))

    def leaves(self, requires_grad=False):
        return {k: Tensor(v, requires_grad=requires_grad, name=k) for k, v in self.arrays.items()}

    def snapshot(self):
        return ModelParams(self.embeddings, copy.deepcopy(self.config),
                           {k: v.copy() for k, v in self.arrays.items()})

    @property
    def n_layers(self):
        return len(self.config.cls_hidden) + 1


@dataclass
class AttentionOutputs:
    scores: Tensor        # m x n, non-negative
    premise_raw: Tensor   # scores[:, n-1]
    hypothesis_raw: Tensor  # scores[m-1, :]
    premise: Tensor       # simplex over m
    hypothesis: Tensor    # simplex over n


@dataclass
class Prediction:
    log_probs: Tensor
    attention: AttentionOutputs

    @property
    def probs(self):
        return np.exp(self.log_probs.data)

    @property
    def label(self):
        return int(np.argmax(self.log_probs.data))


def _embed(ids, params):
    ids = np.asarray(ids, dtype=np.int64)
    if ids.size == 0:
        raise ValueError("cannot encode an empty sentence")
    if ids.min() < 0 or ids.max() >= params.embeddings.shape[0]:
        raise IndexError(f"token id out of range for vocabulary of {params.embeddings.shape[0]}")
    return Tensor(params.embeddings[ids])


def encode_sentence(ids, params, leaves):
    """Hidden states (len x H) of the shared LSTM over frozen embeddings."""
    return nx.lstm(_embed(ids, params), leaves["lstm.W"], leaves["lstm.U"], leaves["lstm.b"])


def _transpose(t):
    return nx.record(t.data.T, (t,), lambda g: (g.T,))


def _normalize(raw, eps):
    if eps > 0:
        return nx.l1_normalize(raw + eps)
    return nx.l1_normalize_or_uniform(raw)


def attend(h_p, h_h, leaves, eps=0.0):
    WT = _transpose(leaves["attend.W"])
    zu = nx.matmul(h_p, WT)
    zv = nx.matmul(h_h, WT)
    if "attend.b" in leaves:
        zu = zu + leaves["attend.b"]
        zv = zv + leaves["attend.b"]
    u = nx.relu(zu)
    v = nx.relu(zv)
    scores = nx.matmul(u, _transpose(v))
    m, n = scores.shape
    p_raw = nx.take(scores, (slice(None), n - 1))
    h_raw = nx.take(scores, (m - 1, slice(None)))
    return AttentionOutputs(scores, p_raw, h_raw, _normalize(p_raw, eps), _normalize(h_raw, eps))


def classify(att, h_p, h_h, params, leaves):
    if params.config.pooling == "weighted":
        c_p = nx.matmul(att.premise, h_p)
        c_h = nx.matmul(att.hypothesis, h_h)
    else:
        m, n = h_p.shape[0], h_h.shape[0]
        c_p = nx.take(att.premise, m - 1) * nx.take(h_p, m - 1)
        c_h = nx.take(att.hypothesis, n - 1) * nx.take(h_h, n - 1)
    x = nx.concat([c_p, c_h])
    last = params.n_layers - 1
    for k in range(params.n_layers):
        x = nx.matmul(leaves[f"cls.W{k}"], x) + leaves[f"cls.b{k}"]
        if k < last:
            x = nx.relu(x)
    return Prediction(nx.log_softmax(x), att)


def forward(p_ids, h_ids, params, leaves=None):
    """Encode, attend and classify one pair; returns ``(prediction, h_p, h_h)``."""
    leaves = leaves if leaves is not None else params.leaves()
    h_p = encode_sentence(p_ids, params, leaves)
    h_h = encode_sentence(h_ids, params, leaves)
    att = attend(h_p, h_h, leaves, params.config.attention_eps)
    return classify(att, h_p, h_h, params, leaves), h_p, h_h


def cross_entropy(log_probs, y):
    """Negative log-likelihood of gold class ``y``; ``y_hat[y]`` clamped at 1e-12."""
    lp = nx.take(log_probs, int(y))
    if lp.data < math.log(NLL_FLOOR):
        log.warning("predicted probability of gold class below %g; clamping", NLL_FLOOR)
        return Tensor(-math.log(NLL_FLOOR))
    return -lp


def r1_entropy(a_p, a_h):
    return nx.entropy(a_p) + nx.entropy(a_h)


def r2_max(a_p, a_h, y):
    target_p = 0.0 if int(y) == NEUTRAL else 1.0
    return nx.square(nx.max_entry(a_p) - target_p) + nx.square(nx.max_entry(a_h) - 1.0)


def r3_min(a_p, a_h, eps=MIN_EPS):
    return nx.square(nx.min_positive(a_p, eps)) + nx.square(nx.min_positive(a_h, eps))


def instance_loss(pred, y, weights):
    loss = cross_entropy(pred.log_probs, y)
    att = pred.attention
    if weights.alpha:
        loss = loss + weights.alpha * r1_entropy(att.premise, att.hypothesis)
    if weights.beta:
        loss = loss + weights.beta * r2_max(att.premise, att.hypothesis, y)
    if weights.gamma:
        loss = loss + weights.gamma * r3_min(att.premise, att.hypothesis)
    return loss


def total_loss(batch, params, weights, leaves=None):
    """Sum over ``batch`` of (p_ids, h_ids, y) of NLL + a R1 + b R2 + g R3."""
    if not batch:
        raise ValueError("empty batch")
    leaves = leaves if leaves is not None else params.leaves()
    total = None
    for p_ids, h_ids, y in batch:
        pred, _, _ = forward(p_ids, h_ids, params, leaves)
        term = instance_loss(pred, y, weights)
        total = term if total is None else total + term
    return total


def loss_and_grads(loss_fn, params):
    """Evaluate ``loss_fn(leaves)`` on a fresh tape; returns (loss, grads dict)."""
    leaves = params.leaves(requires_grad=True)
    names = list(leaves)
    with nx.Tape() as tape:
        loss = loss_fn(leaves)
    grads = nx.backward(tape, loss, [leaves[k] for k in names])
    return loss.item(), dict(zip(names, grads))


# ---------------------------------------------------------------- training


@dataclass
class TrainConfig:
    epochs: int = 20
    batch_size: int = 32
    lr: float = 0.05
    seed: int = 0
    weights: RegularizerWeights = field(default_factory=RegularizerWeights)
    tau_grid: tuple = tuple(round(0.05 * k, 2) for k in range(20))
    accuracy_margin: float = 0.02
    reference_accuracy: float | None = None
    warmup_epochs: int = 0

    def __post_init__(self):
        if isinstance(self.weights, dict):
            self.weights = RegularizerWeights(**self.weights)
        self.tau_grid = tuple(self.tau_grid)


@dataclass
class EncodedPair:
    premise: np.ndarray
    hypothesis: np.ndarray
    label: int


def encode_instances(instances, vocab):
    return [EncodedPair(vocab.encode(i.premise), vocab.encode(i.hypothesis), i.label_index)
            for i in instances]


def predict(params, pair):
    pred, _, _ = forward(pair.premise, pair.hypothesis, params)
    return pred


def attention_entropy(params, pairs, side="hypothesis"):
    vals = []
    for pair in pairs:
        att = predict(params, pair).attention
        vals.append(nx.entropy(getattr(att, side)).item())
    return float(np.mean(vals))


def evaluate_dev(params, pairs, gold, tau_grid, normalized=False):
    """Dev accuracy plus hypothesis-side F1 of thresholded attention per tau."""
    from .explainers.attention import select_tokens
    from .harness.metrics import prf_counts

    correct = 0
    f1_by_tau = {}
    counts = {tau: [0, 0, 0] for tau in tau_grid}
    for pair, inst in zip(pairs, gold):
        pred = predict(params, pair)
        correct += int(pred.label == pair.label)
        att = pred.attention
        scores = att.hypothesis.data if normalized else att.hypothesis_raw.data
        for tau in tau_grid:
            sel = select_tokens(scores, tau)
            tp, fp, fn = prf_counts(sel, inst.hypothesis_highlights)
            c = counts[tau]
            c[0] += tp
            c[1] += fp
            c[2] += fn
    for tau, (tp, fp, fn) in counts.items():
        f1_by_tau[tau] = 0.0 if tp == 0 else 200.0 * tp / (2 * tp + fp + fn)
    return correct / max(len(pairs), 1), f1_by_tau


def fit(params, pairs, batch_loss, evaluate, config, on_epoch=None):
    """Generic Adagrad loop shared by the classifier and the tagger.

    ``batch_loss(batch, leaves, epoch)`` builds the scalar loss for a list of
    encoded pairs; ``evaluate(params)`` returns a dict holding at least
    ``dev_accuracy`` and ``dev_hypothesis_f1``. Returns the selected snapshot
    and the training log.
    """
    rng = np.random.default_rng(config.seed)
    state = nx.AdagradState(lr=config.lr)
    history = []
    snapshots = []
    for epoch in range(1, config.epochs + 1):
        t0 = time.perf_counter()
        order = rng.permutation(len(pairs))
        epoch_loss = 0.0
        for start in range(0, len(order), config.batch_size):
            batch = [pairs[k] for k in order[start:start + config.batch_size]]
            loss, grads = loss_and_grads(lambda lv: batch_loss(batch, lv, epoch), params)
            if not math.isfinite(loss) or not all(np.isfinite(g).all() for g in grads.values()):
                raise TrainingDivergedError(
                    f"non-finite loss/gradient at epoch {epoch}, batch starting {start}: "
                    f"loss={loss}, previous epoch losses={[h['loss'] for h in history[-3:]]}")
            nx.adagrad_step(state, params.arrays, grads)
            epoch_loss += loss
        row = {"epoch": epoch, "loss": epoch_loss / len(pairs), **evaluate(params),
               "seconds": time.perf_counter() - t0}
        history.append(row)
        snapshots.append(params.snapshot())
        log.info("epoch %d loss %.4f dev acc %.3f hyp F1 %.2f", epoch, row["loss"],
                 row["dev_accuracy"], row["dev_hypothesis_f1"])
        if on_epoch is not None:
            on_epoch(row)
    chosen = select_epoch(history, config.accuracy_margin, config.reference_accuracy)
    return snapshots[chosen["epoch"] - 1], {"history": history, "selected": chosen}


def select_epoch(history, margin, reference=None):
    """Best dev hypothesis F1 among epochs whose accuracy stays within
    ``margin`` of ``reference`` (default: the best accuracy in ``history``)."""
    ref = reference if reference is not None else max(h["dev_accuracy"] for h in history)
    eligible = [h for h in history if h["dev_accuracy"] >= ref - margin]
    if not eligible:
        eligible = [max(history, key=lambda h: h["dev_accuracy"])]
    return max(eligible, key=lambda h: (h["dev_hypothesis_f1"], -h["epoch"]))


def train(train_set, dev_set, vocab, embeddings, model_config=None, config=None,
          on_epoch=None):
    """Train the attention classifier on the regularised loss.

    Regularizers are switched off for the first ``warmup_epochs`` epochs.
    Model selection uses dev hypothesis F1 of thresholded attention at the
    best tau on ``tau_grid``; the chosen tau is stored in the log.
    """
    config = config or TrainConfig()
    if not train_set or not dev_set:
        raise ValueError("train and dev splits must be non-empty")
    model_config = model_config or ModelConfig(init_seed=config.seed)
    params = ModelParams.initialize(embeddings, model_config)
    tr = encode_instances(train_set, vocab)
    dv = encode_instances(dev_set, vocab)
    off = RegularizerWeights(0.0, 0.0, 0.0, config.weights.tau)

    def batch_loss(batch, leaves, epoch):
        weights = off if epoch <= config.warmup_epochs else config.weights
        return total_loss([(p.premise, p.hypothesis, p.label) for p in batch],
                          params, weights, leaves)

    def evaluate(p):
        acc, f1s = evaluate_dev(p, dv, dev_set, config.tau_grid)
        tau = max(f1s, key=lambda t: (f1s[t], -t))
        return {"dev_accuracy": acc, "dev_hypothesis_f1": f1s[tau], "tau": tau}

    best, log_ = fit(params, tr, batch_loss, evaluate, config, on_epoch)
    log_.update(config=asdict(config), model_config=asdict(model_config))
    return best, log_
