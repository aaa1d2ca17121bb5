"""Attention classifier: forward pieces, regularizers, loss, gradients, training."""
import math

import numpy as np
import pytest

from milexplain import numerics as nx
from milexplain.corpus import LABEL_INDEX, NEUTRAL
from milexplain.model import (
    AttentionOutputs,
    ModelParams,
    Prediction,
    RegularizerWeights,
    TrainConfig,
    attend,
    attention_entropy,
    classify,
    cross_entropy,
    encode_instances,
    encode_sentence,
    forward,
    instance_loss,
    r1_entropy,
    r2_max,
    r3_min,
    select_epoch,
    total_loss,
    train,
)

from conftest import model_fd_error, random_ids, tiny_config, tiny_params

C, E = LABEL_INDEX["contradicts"], LABEL_INDEX["entails"]
T = nx.Tensor


def lstm_step(x, W, U, b, h, c):
    """One textbook LSTM cell step (gate order i, f, g, o)."""
    H = h.size
    z = W @ x + U @ h + b
    sig = lambda v: 1 / (1 + np.exp(-v))
    i, f, g, o = sig(z[:H]), sig(z[H:2 * H]), np.tanh(z[2 * H:3 * H]), sig(z[3 * H:])
    c = f * c + i * g
    return o * np.tanh(c), c


class TestEncoder:
    def test_zero_weights_give_zero_states(self):
        p = tiny_params(0)
        for k in ("lstm.W", "lstm.U", "lstm.b"):
            p.arrays[k][:] = 0.0
        h = encode_sentence([2, 3, 4], p, p.leaves())
        np.testing.assert_array_equal(h.data, 0.0)

    def test_matches_reference_recurrence(self):
        p = tiny_params(1)
        ids = [5, 2, 7, 3]
        h = encode_sentence(ids, p, p.leaves()).data
        W, U, b = p.arrays["lstm.W"], p.arrays["lstm.U"], p.arrays["lstm.b"]
        hs, cs = np.zeros(8), np.zeros(8)
        for t, i in enumerate(ids):
            hs, cs = lstm_step(p.embeddings[i], W, U, b, hs, cs)
            np.testing.assert_allclose(h[t], hs, rtol=1e-12, atol=1e-14)

    def test_single_token(self):
        p = tiny_params(2)
        h = encode_sentence([4], p, p.leaves()).data
        ref, _ = lstm_step(p.embeddings[4], p.arrays["lstm.W"], p.arrays["lstm.U"],
                           p.arrays["lstm.b"], np.zeros(8), np.zeros(8))
        assert h.shape == (1, 8)
        np.testing.assert_allclose(h[0], ref, rtol=1e-12)

    def test_unknown_id(self):
        p = tiny_params(0)
        with pytest.raises(IndexError):
            encode_sentence([2, 99], p, p.leaves())

    def test_lstm_gradient(self, rng):
        p = tiny_params(3)
        c = rng.normal(size=(4, 8))
        err = model_fd_error(lambda lv: nx.sum_(encode_sentence([2, 9, 4, 3], p, lv) * c), p)
        assert err < 1e-4


class TestAttention:
    def test_equal_projections_uniform(self):
        p = tiny_params(0)
        lv = p.leaves()
        h_p = T(np.tile(np.abs(np.arange(8.0)), (3, 1)))
        h_h = T(np.abs(np.random.default_rng(0).normal(size=(4, 8))))
        lv["attend.W"] = T(np.abs(lv["attend.W"].data))
        att = attend(h_p, h_h, lv)
        np.testing.assert_allclose(att.premise.data, [1 / 3] * 3, atol=1e-12)

    def test_definition(self, rng):
        p = tiny_params(4)
        lv = p.leaves()
        h_p, h_h = rng.normal(size=(4, 8)), rng.normal(size=(5, 8))
        att = attend(T(h_p), T(h_h), lv)
        W, b = p.arrays["attend.W"], p.arrays["attend.b"]
        u = np.maximum(h_p @ W.T + b, 0)
        v = np.maximum(h_h @ W.T + b, 0)
        A = u @ v.T
        np.testing.assert_allclose(att.scores.data, A, rtol=1e-12)
        np.testing.assert_allclose(att.premise_raw.data, A[:, -1])
        np.testing.assert_allclose(att.hypothesis_raw.data, A[-1, :])
        if A[:, -1].sum() > 0:
            np.testing.assert_allclose(att.premise.data, A[:, -1] / A[:, -1].sum(), rtol=1e-12)

    def test_column_example(self):
        # single hypothesis token: last column is u . v
        lv = {"attend.W": T(np.eye(2))}
        att = attend(T([[1.0, 0.0], [3.0, 0.0]]), T([[1.0, 5.0]]), lv)
        np.testing.assert_allclose(att.premise_raw.data, [1.0, 3.0])
        np.testing.assert_allclose(att.premise.data, [0.25, 0.75])

    def test_zero_column_falls_back_to_uniform(self):
        lv = {"attend.W": T(np.eye(2))}
        att = attend(T([[-1.0, -1.0], [-2.0, 0.0]]), T([[1.0, 1.0]]), lv)
        np.testing.assert_array_equal(att.premise.data, [0.5, 0.5])

    @pytest.mark.parametrize("seed", range(20))
    def test_random_simplex(self, seed):
        r = np.random.default_rng(seed)
        p = tiny_params(seed, attention_eps=0.0)
        att = attend(T(r.normal(size=(4, 8))), T(r.normal(size=(5, 8))), p.leaves())
        assert (att.scores.data >= 0).all()
        for a in (att.premise.data, att.hypothesis.data):
            assert (a >= 0).all()
            assert abs(a.sum() - 1) <= 1e-9


class TestClassify:
    def test_one_hot_pooling_selects(self, rng):
        p = tiny_params(5)
        lv = p.leaves()
        h_p, h_h = T(rng.normal(size=(3, 8))), T(rng.normal(size=(2, 8)))
        att = AttentionOutputs(None, None, None, T([0.0, 1.0, 0.0]), T([1.0, 0.0]))
        x = nx.concat([nx.matmul(att.premise, h_p), nx.matmul(att.hypothesis, h_h)]).data
        np.testing.assert_array_equal(x[:8], h_p.data[1])
        np.testing.assert_array_equal(x[8:], h_h.data[0])
        pred = classify(att, h_p, h_h, p, lv)
        assert abs(pred.probs.sum() - 1) < 1e-12

    def test_zero_final_layer_uniform(self, rng):
        p = tiny_params(5)
        last = p.n_layers - 1
        p.arrays[f"cls.W{last}"][:] = 0
        p.arrays[f"cls.b{last}"][:] = 0
        pred, _, _ = forward([2, 3], [4], p)
        np.testing.assert_allclose(pred.probs, [1 / 3] * 3, atol=1e-15)

    def test_final_pooling_mode(self):
        p = tiny_params(6, pooling="final")
        pred, _, _ = forward([2, 3, 4], [5, 6], p)
        assert pred.probs.shape == (3,)

    def test_end_to_end_gradient(self):
        p = tiny_params(7)
        err = model_fd_error(lambda lv: -nx.take(forward([2, 5, 3], [7, 4], p, lv)[0].log_probs, 1), p)
        assert err < 1e-4


class TestCrossEntropy:
    def test_uniform(self):
        assert cross_entropy(T(np.log([1 / 3] * 3)), 2).item() == pytest.approx(math.log(3))

    def test_perfect(self):
        assert cross_entropy(T([0.0, -50.0, -50.0]), 0).item() == 0.0

    def test_substitution(self):
        lp = T(np.log([0.25, 0.75, 1e-300]))
        assert cross_entropy(lp, 1).item() == pytest.approx(-math.log(0.75), abs=1e-12)

    def test_clamped(self, caplog):
        lp = T([0.0, -1e6, -1e6])
        assert cross_entropy(lp, 1).item() == pytest.approx(-math.log(1e-12))
        assert "clamping" in caplog.text


class TestRegularizers:
    @pytest.mark.parametrize("n", [2, 4, 8])
    def test_r1_uniform(self, n):
        u = T(np.full(n, 1.0 / n))
        one = T([1.0])
        assert abs(r1_entropy(u, one).item() - math.log(n)) <= 1e-9

    def test_r1_examples(self):
        assert r1_entropy(T([1.0, 0, 0]), T([0, 1.0])).item() == 0.0
        assert r1_entropy(T([0.25] * 4), T([0, 1.0, 0])).item() == pytest.approx(math.log(4), abs=1e-12)
        assert r1_entropy(T([0.5, 0.5]), T([0.5, 0.5])).item() == pytest.approx(2 * math.log(2), abs=1e-12)

    def test_r2_examples(self):
        assert r2_max(T([0.8, 0.2]), T([0.6, 0.4]), C).item() == pytest.approx(0.2, abs=1e-15)
        assert r2_max(T([0.3, 0.3, 0.4 - 0.1, 0.1]), T([1.0]), NEUTRAL).item() == pytest.approx(0.09, abs=1e-15)
        assert r2_max(T([0, 1.0]), T([1.0, 0]), E).item() == 0.0

    def test_r3_examples(self):
        assert r3_min(T([0.5, 0.5]), T([1.0])).item() == 1.25
        assert r3_min(T([0.7, 0.3, 0.0]), T([1.0, 0.0])).item() == pytest.approx(1.09, abs=1e-15)
        assert r3_min(T([0, 1.0, 0]), T([1.0, 0])).item() == 2.0
        assert r3_min(T([1e-9, 1e-9]), T([1.0])).item() == 1.0

    def test_non_negative(self, rng):
        for _ in range(50):
            a, b = rng.dirichlet(np.ones(4)), rng.dirichlet(np.ones(3))
            y = int(rng.integers(3))
            assert r1_entropy(T(a), T(b)).item() >= 0
            assert r2_max(T(a), T(b), y).item() >= 0
            assert r3_min(T(a), T(b)).item() >= 0


def handset_prediction():
    log_probs = T(np.log([0.25, 0.75, 1e-300]) - 0)  # class 1 = contradicts
    att = AttentionOutputs(None, None, None, T([0.8, 0.2]), T([0.6, 0.4]))
    return Prediction(log_probs, att)


class TestTotalLoss:
    def test_handset_terms(self):
        pred = handset_prediction()
        w = RegularizerWeights(alpha=0.5, beta=2.0, gamma=3.0)
        got = instance_loss(pred, C, w).item()
        h = lambda ps: -sum(q * math.log(q) for q in ps)
        expected = (-math.log(0.75) + 0.5 * (h([0.8, 0.2]) + h([0.6, 0.4]))
                    + 2.0 * (0.04 + 0.16) + 3.0 * (0.2 ** 2 + 0.4 ** 2))
        assert got == pytest.approx(expected, abs=1e-12)

    def test_zero_weights_is_plain_nll_bit_for_bit(self):
        p = tiny_params(8)
        batch = [([2, 3, 4], [5, 6], 0), ([7, 8], [9, 2, 3], 2)]
        got = total_loss(batch, p, RegularizerWeights()).item()
        nll = None
        for pi, hi, y in batch:
            term = -nx.take(forward(pi, hi, p)[0].log_probs, y)
            nll = term if nll is None else nll + term
        assert got == nll.item()

    def test_empty_batch(self):
        with pytest.raises(ValueError):
            total_loss([], tiny_params(0), RegularizerWeights())

    def test_two_instance_gradient(self):
        p = tiny_params(9)
        w = RegularizerWeights(0.7, 0.5, 0.3)
        batch = [([2, 3, 4, 5, 6], [7, 8, 9, 2, 3], 1), ([4, 5], [6], 2)]
        assert model_fd_error(lambda lv: total_loss(batch, p, w, lv), p) < 1e-4

    @pytest.mark.parametrize("seed", range(10))
    def test_random_gradient_all_regularizers(self, seed):
        r = np.random.default_rng(seed)
        p = tiny_params(seed + 100)
        batch = [(random_ids(r, 20), random_ids(r, 20), int(r.integers(3)))]
        w = RegularizerWeights(1.0, 1.0, 1.0)
        assert model_fd_error(lambda lv: total_loss(batch, p, w, lv), p, r, per_array=8) < 1e-4

    def test_weight_validation(self):
        with pytest.raises(ValueError):
            RegularizerWeights(alpha=-1)
        with pytest.raises(ValueError):
            RegularizerWeights(tau=1.0)


def test_select_epoch_respects_margin():
    hist = [{"epoch": 1, "dev_accuracy": 0.9, "dev_hypothesis_f1": 10},
            {"epoch": 2, "dev_accuracy": 0.7, "dev_hypothesis_f1": 90},
            {"epoch": 3, "dev_accuracy": 0.89, "dev_hypothesis_f1": 40}]
    assert select_epoch(hist, 0.02)["epoch"] == 3
    assert select_epoch(hist, 0.5)["epoch"] == 2
    assert select_epoch(hist, 0.02, reference=0.95)["epoch"] == 1


@pytest.fixture(scope="module")
def small_corpus():
    from milexplain.harness import synth
    # 200 training pairs generalise only on the reduced short-template corpus
    cfg = synth.SynthConfig(n_train=200, n_dev=100, n_test=100, seed=3, n_concepts=2,
                            templates="short")
    return synth.bundle(cfg)


def small_train(bundle, weights, epochs, seed=0, warmup=0):
    data, vocab, table = bundle
    mc = tiny_config(seed, hidden=16)
    tc = TrainConfig(epochs=epochs, batch_size=8, seed=seed, weights=weights,
                     warmup_epochs=warmup)
    return train(data["train"], data["dev"], vocab, table, mc, tc)


class TestTraining:
    def test_determinism(self, small_corpus):
        a, la = small_train(small_corpus, RegularizerWeights(0.1, 1, 1), 2)
        b, lb = small_train(small_corpus, RegularizerWeights(0.1, 1, 1), 2)
        for k in a.arrays:
            assert a.arrays[k].tobytes() == b.arrays[k].tobytes()
        strip = lambda log_: [{k: v for k, v in h.items() if k != "seconds"} for h in log_["history"]]
        assert strip(la) == strip(lb)

    def test_embeddings_frozen(self, small_corpus):
        data, vocab, table = small_corpus
        before = table.tobytes()
        p, _ = small_train(small_corpus, RegularizerWeights(), 1)
        assert p.embeddings.tobytes() == before

    @pytest.mark.slow
    def test_separable_corpus_learned(self, small_corpus):
        p, log_ = small_train(small_corpus, RegularizerWeights(), 20)
        assert log_["selected"]["dev_accuracy"] > 0.9

    @pytest.mark.slow
    def test_regularized_lower_entropy(self, small_corpus):
        data, vocab, _ = small_corpus
        dev = encode_instances(data["dev"], vocab)
        base, _ = small_train(small_corpus, RegularizerWeights(), 12)
        reg, _ = small_train(small_corpus, RegularizerWeights(1.0, 0, 0), 12, warmup=4)
        assert attention_entropy(reg, dev) < attention_entropy(base, dev)

    def test_empty_split(self, small_corpus):
        data, vocab, table = small_corpus
        with pytest.raises(ValueError):
            train([], data["dev"], vocab, table)
