import numpy as np
import pytest

from milexplain import numerics as nx
from milexplain.model import ModelConfig, ModelParams, loss_and_grads

# pass/fail lines from tests/test_acceptance.py, echoed in the terminal summary
ACCEPTANCE = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE:
            terminalreporter.write_line(line)


def tiny_config(seed=0, hidden=8, **kw):
    kw.setdefault("attention_eps", 1e-2)
    return ModelConfig(hidden=hidden, attend_dim=hidden, cls_hidden=(hidden, hidden),
                       init_seed=seed, **kw)


def tiny_embeddings(rng, n_words=20, dim=8):
    table = rng.normal(0.0, 1.0, size=(n_words, dim))
    table[:2] = 0.0
    table.flags.writeable = False
    return table


def tiny_params(seed=0, hidden=8, n_words=20, dim=8, **kw):
    rng = np.random.default_rng(seed + 1000)
    params = ModelParams.initialize(tiny_embeddings(rng, n_words, dim),
                                    tiny_config(seed, hidden, **kw))
    # move biases and output layer off their symmetric initial values
    for k, v in params.arrays.items():
        v += rng.normal(0.0, 0.1, size=v.shape)
    return params


def random_ids(rng, n_words, max_len=6):
    return rng.integers(2, n_words, size=int(rng.integers(1, max_len + 1)))


def sample_coords(params_arrays, rng, per_array):
    coords = []
    for a in params_arrays:
        k = min(per_array, a.size)
        coords.append(sorted(rng.choice(a.size, size=k, replace=False)))
    return coords


def model_fd_error(loss_fn, params, rng=None, per_array=None, h=1e-5):
    """Max relative error of tape gradients of ``loss_fn(leaves)`` against
    central differences, over all (or ``per_array`` sampled) coordinates."""
    _, grads = loss_and_grads(loss_fn, params)
    names = list(params.arrays)
    arrays = [params.arrays[k] for k in names]
    coords = None if per_array is None else sample_coords(arrays, rng, per_array)
    return nx.finite_diff_check(lambda: loss_fn(params.leaves()).item(), arrays,
                                [grads[k] for k in names], h=h, coords=coords)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
