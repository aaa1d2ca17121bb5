"""Acceptance suite: one test per criterion, each reporting a PASS/FAIL line.

Criteria 5-7 train on the synthetic corpus (5 seeds, about 20 minutes on one
core); the trained models are shared between them. Criterion 9 needs the
real e-SNLI data and runs only when ``MILEXPLAIN_ESNLI_CONFIG`` names an
experiment config for it.
"""
import itertools
import math
import os
import time

import numpy as np
import pytest

from milexplain.corpus import SentencePairInstance
from milexplain.explainers import (
    AnchorConfig,
    FunctionHandle,
    LimeConfig,
    anchors_explain_side,
    attention_explain,
    lime_explain_side,
)
from milexplain.harness import synth
from milexplain.harness.bench import benchmark
from milexplain.harness.config import ExperimentConfig
from milexplain.harness.experiment import (
    _model_config,
    _train_config,
    method_runner,
    variant_weights,
)
from milexplain.harness.metrics import token_prf
from milexplain.model import (
    RegularizerWeights,
    attention_entropy,
    encode_instances,
    r1_entropy,
    r2_max,
    r3_min,
    total_loss,
    train,
)
from milexplain.numerics import Tensor
from milexplain.tagger import CrfParams, crf_log_partition, init_tagger, joint_loss, viterbi_decode

from conftest import ACCEPTANCE, model_fd_error, random_ids, tiny_config, tiny_embeddings, tiny_params

SEEDS = (0, 1, 2, 3, 4)
ALPHAS = (0.0, 0.1, 1.0)


def verdict(n, ok, detail):
    line = f"criterion {n}: {'PASS' if ok else 'FAIL'} - {detail}"
    ACCEPTANCE.append(line)
    print(line)
    assert ok, line


# 1 -------------------------------------------------------------------------

def test_criterion_1_gradients():
    t0 = time.perf_counter()
    worst = {"entail_model": 0.0, "tagger": 0.0}
    n = 100
    for seed in range(n):
        r = np.random.default_rng(seed)
        pi, hi, y = random_ids(r, 20), random_ids(r, 20), int(r.integers(3))
        w = RegularizerWeights(*r.uniform(0.1, 2.0, size=3))
        p = tiny_params(seed)
        err = model_fd_error(lambda lv: total_loss([(pi, hi, y)], p, w, lv), p, r, per_array=10)
        worst["entail_model"] = max(worst["entail_model"], err)

        t = init_tagger(tiny_embeddings(r), tiny_config(seed))
        for v in t.arrays.values():
            v += r.normal(0, 0.1, size=v.shape)
        pt, ht = r.integers(0, 2, len(pi)), r.integers(0, 2, len(hi))
        err = model_fd_error(lambda lv: joint_loss(pi, hi, y, pt, ht, t, lv), t, r, per_array=10)
        worst["tagger"] = max(worst["tagger"], err)
    secs = time.perf_counter() - t0
    ok = max(worst.values()) < 1e-4 and secs < 60
    verdict(1, ok, f"{n} instances per model, max rel err entail_model "
                   f"{worst['entail_model']:.2e}, tagger {worst['tagger']:.2e}, {secs:.1f}s")


# 2 -------------------------------------------------------------------------

def test_criterion_2_regularizers():
    T = lambda v: Tensor(np.asarray(v, dtype=float))
    one = T([1.0])
    checks = {}
    for n in (2, 4, 8):
        checks[f"R1 uniform {n}"] = abs(r1_entropy(T(np.full(n, 1 / n)), one).item()
                                        - math.log(n)) <= 1e-9
    checks["R1 one-hot"] = r1_entropy(T([0.0, 1.0, 0.0]), one).item() == 0.0
    # y = contradicts, max a^p = 0.8, max a^h = 0.6
    checks["R2 example"] = r2_max(T([0.8, 0.2]), T([0.6, 0.4]), 1).item() == \
        (0.8 - 1.0) ** 2 + (0.6 - 1.0) ** 2
    checks["R3 example"] = r3_min(T([0.5, 0.5]), T([1.0])).item() == 1.25
    failed = [k for k, v in checks.items() if not v]
    verdict(2, not failed, "all hand values reproduced" if not failed else f"failed {failed}")


# 3 -------------------------------------------------------------------------

def test_criterion_3_crf_oracle():
    t0 = time.perf_counter()
    r = np.random.default_rng(2024)
    worst_z = worst_v = 0.0
    path_mismatch = 0
    for _ in range(200):
        crf = CrfParams(r.normal(size=(2, 2)) * 2, r.normal(size=2) * 2, r.normal(size=2) * 2)
        for T in range(1, 7):
            em = r.normal(size=(T, 2)) * 2
            scores = {}
            for seq in itertools.product((0, 1), repeat=T):
                s = crf.start[seq[0]] + crf.stop[seq[-1]]
                s += sum(em[t, k] for t, k in enumerate(seq))
                s += sum(crf.trans[seq[t - 1], seq[t]] for t in range(1, T))
                scores[seq] = s
            vals = np.array(list(scores.values()))
            log_z = vals.max() + math.log(np.exp(vals - vals.max()).sum())
            worst_z = max(worst_z, abs(crf_log_partition(em, crf) - log_z) / abs(log_z))
            best = max(scores, key=scores.get)
            path = tuple(int(k) for k in viterbi_decode(em, crf))
            worst_v = max(worst_v, abs(scores[path] - scores[best]) / abs(scores[best]))
            path_mismatch += path != best
    secs = time.perf_counter() - t0
    ok = worst_z < 1e-8 and worst_v < 1e-8 and path_mismatch == 0 and secs < 60
    verdict(3, ok, f"200 draws x lengths 1-6, log-partition rel err {worst_z:.1e}, "
                   f"Viterbi score rel err {worst_v:.1e}, {path_mismatch} path mismatches, "
                   f"{secs:.1f}s")


# 4 -------------------------------------------------------------------------

FILLERS = ["a", "man", "dog", "sits", "runs", "in", "the", "park", "street", "big", "red", "old"]


def trigger_trials(n=100):
    r = np.random.default_rng(44)
    for _ in range(n):
        toks = [FILLERS[i] for i in r.integers(len(FILLERS), size=int(r.integers(3, 12)))]
        pos = int(r.integers(len(toks) + 1))
        toks.insert(pos, "not")
        premise = [FILLERS[i] for i in r.integers(len(FILLERS), size=6)]
        yield SentencePairInstance(premise, toks, "contradicts"), pos


def single_trigger(premise, hypothesis):
    return np.array([0.05, 0.9, 0.05]) if "not" in hypothesis else np.array([0.9, 0.05, 0.05])


def test_criterion_4_planted_explainers():
    handle = FunctionHandle(single_trigger)
    lime_hits = anchor_hits = 0
    for k, (inst, pos) in enumerate(trigger_trials()):
        weights, _ = lime_explain_side(handle, inst, "hypothesis", LimeConfig(seed=k))
        lime_hits += int(np.argmax(np.abs(weights))) == pos
        rule = anchors_explain_side(handle, inst, "hypothesis", AnchorConfig(seed=k),
                                    np.random.default_rng(k))
        anchor_hits += pos in rule.indices and rule.precision >= 0.95
    ok = lime_hits >= 95 and anchor_hits >= 95
    verdict(4, ok, f"LIME trigger ranked first {lime_hits}/100, "
                   f"Anchors anchor with trigger and precision >= 0.95 {anchor_hits}/100")


# 5-7: trained synthetic models -----------------------------------------------

class Trained:
    """Train-once cache keyed by (seed, alpha, beta, gamma)."""

    def __init__(self):
        self.data = {}
        self.models = {}

    def corpus(self, seed):
        if seed not in self.data:
            data, vocab, table = synth.bundle(synth.SynthConfig(seed=seed))
            self.data[seed] = (data, vocab, table, encode_instances(data["test"], vocab))
        return self.data[seed]

    def get(self, seed, weights):
        key = (seed, weights.alpha, weights.beta, weights.gamma)
        if key not in self.models:
            data, vocab, table, _ = self.corpus(seed)
            cfg = ExperimentConfig(seed=seed)
            t0 = time.perf_counter()
            params, log = train(data["train"], data["dev"], vocab, table, _model_config(cfg),
                                _train_config(cfg, weights))
            self.models[key] = (params, log["selected"]["tau"], time.perf_counter() - t0)
        return self.models[key]


@pytest.fixture(scope="module")
def trained():
    return Trained()


def mil_weights():
    return variant_weights(ExperimentConfig(), "attention+mil")


def hyp_f1(trained, seed, weights):
    params, tau, _ = trained.get(seed, weights)
    data, _, _, test = trained.corpus(seed)
    exps = [attention_explain(params, pair, tau) for pair in test]
    return token_prf(exps, data["test"]).hypothesis.f1


@pytest.mark.slow
def test_criterion_5_regularizers_improve_f1(trained):
    base, mil, secs = [], [], []
    for seed in SEEDS:
        base.append(hyp_f1(trained, seed, RegularizerWeights()))
        mil.append(hyp_f1(trained, seed, mil_weights()))
        secs.append(trained.get(seed, RegularizerWeights())[2] + trained.get(seed, mil_weights())[2])
    data = trained.corpus(0)[0]
    gain = np.mean(mil) - np.mean(base)
    ok = gain >= 5.0 and max(secs) < 15 * 60 and len(data["train"]) >= 2000 \
        and len(data["test"]) >= 500
    verdict(5, ok, f"hypothesis F1 unregularized {np.mean(base):.2f} -> R1+R2+R3 "
                   f"{np.mean(mil):.2f} (+{gain:.2f}), per seed "
                   f"{[round(b, 1) for b in base]} -> {[round(m, 1) for m in mil]}, "
                   f"slowest seed {max(secs):.0f}s")


@pytest.mark.slow
def test_criterion_6_runtime_ordering(trained):
    params, tau, _ = trained.get(0, RegularizerWeights())
    data, vocab, _, _ = trained.corpus(0)
    cfg = ExperimentConfig(seed=0)
    assert cfg.lime.n_samples == 1000
    insts = data["test"][:5]
    mean = {}
    for method in ("attention", "anchors", "lime"):
        report, _ = benchmark(method_runner(cfg, method, params, tau, vocab), insts, name=method)
        assert report.threads == 1 and report.failures == 0
        mean[method] = report.mean
    ratio = mean["lime"] / mean["attention"]
    ok = mean["attention"] < mean["anchors"] and mean["attention"] < mean["lime"] and ratio >= 100
    verdict(6, ok, f"mean seconds per instance attention {mean['attention']:.5f}, "
                   f"anchors {mean['anchors']:.3f}, lime {mean['lime']:.3f}, "
                   f"lime/attention {ratio:.0f}x")


@pytest.mark.slow
def test_criterion_7_entropy_monotone(trained):
    # beta = gamma = 0 held fixed; alpha = 0 is the unregularized model above
    means = []
    for alpha in ALPHAS:
        ents = []
        for seed in SEEDS:
            params, _, _ = trained.get(seed, RegularizerWeights(alpha, 0.0, 0.0))
            ents.append(attention_entropy(params, trained.corpus(seed)[3]))
        means.append(float(np.mean(ents)))
    ok = all(a > b for a, b in zip(means, means[1:]))
    verdict(7, ok, "mean test hypothesis attention entropy "
            + ", ".join(f"alpha={a}: {m:.3f}" for a, m in zip(ALPHAS, means))
            + " (beta=gamma=0)")


# 8 -------------------------------------------------------------------------

def test_criterion_8_metrics():
    gold = SentencePairInstance(["a", "b", "c"], ["a", "b", "c"], "entails", {1, 2}, {1, 2})
    from milexplain.explainers import Explanation
    rep = token_prf([Explanation({0, 1}, {0, 1}, "m")], [gold])
    worked = all((s.precision, s.recall, s.f1) == (50.0, 50.0, 50.0)
                 for s in (rep.premise, rep.hypothesis))
    corpus = synth.generate(synth.SynthConfig(n_train=300, n_dev=1, n_test=1, seed=8))["train"]
    allsel = [Explanation(range(len(x.premise)), range(len(x.hypothesis)), "all") for x in corpus]
    r = token_prf(allsel, corpus)
    ok = worked and r.premise.recall == 100.0 and r.hypothesis.recall == 100.0
    verdict(8, ok, f"worked example P/R/F1 = {rep.hypothesis.precision}/{rep.hypothesis.recall}/"
                   f"{rep.hypothesis.f1}; select-all recall premise {r.premise.recall}, "
                   f"hypothesis {r.hypothesis.recall}")


# 9 -------------------------------------------------------------------------

ESNLI = os.environ.get("MILEXPLAIN_ESNLI_CONFIG")


@pytest.mark.skipif(not ESNLI, reason="set MILEXPLAIN_ESNLI_CONFIG to an e-SNLI experiment config")
def test_criterion_9_esnli():
    from milexplain.harness.config import load_config
    from milexplain.harness.experiment import load_data, obtain_model
    from milexplain.model import evaluate_dev

    cfg = load_config(ESNLI)
    data, vocab, table = load_data(cfg)
    test = encode_instances(data["test"], vocab)
    os.makedirs(os.path.join(cfg.out_dir, "checkpoints"), exist_ok=True)
    results = {}
    for variant, ref in (("attention", 39.89), ("attention+mil", 57.78)):
        params, tau = obtain_model(cfg, variant, data, vocab, table,
                                   os.path.join(cfg.out_dir, "checkpoints"))
        acc, f1 = evaluate_dev(params, test, data["test"], (tau,))
        results[variant] = (acc, f1[tau], ref)
    acc = results["attention"][0]
    ok = abs(100 * acc - 81) <= 2 and all(abs(f - ref) <= 5 for _, f, ref in results.values())
    verdict(9, ok, f"accuracy {100 * acc:.1f}; hypothesis F1 "
            + ", ".join(f"{v} {f:.2f} (ref {ref})" for v, (_, f, ref) in results.items()))
