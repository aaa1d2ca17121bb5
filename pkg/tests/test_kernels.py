"""Compiled and NumPy kernels agree; the active backend is reported."""
import numpy as np
import pytest

from milexplain import kernels

BACKENDS = kernels.backends()


def test_backend_name():
    assert kernels.BACKEND in ("cython", "numpy")
    assert "numpy" in BACKENDS


@pytest.mark.skipif("cython" not in BACKENDS, reason="compiled extension not built")
@pytest.mark.parametrize("seed", range(20))
def test_backends_agree(seed):
    r = np.random.default_rng(seed)
    T, D, H = int(r.integers(1, 8)), 5, 4
    x, W, U, b = r.normal(size=(T, D)), r.normal(size=(4 * H, D)), r.normal(size=(4 * H, H)), r.normal(size=4 * H)
    py, cy = BACKENDS["numpy"], BACKENDS["cython"]
    outs_py = py.lstm_forward(x, W, U, b)
    outs_cy = cy.lstm_forward(x, W, U, b)
    for a, c in zip(outs_py, outs_cy):
        np.testing.assert_allclose(np.asarray(c), a, rtol=1e-12, atol=1e-14)
    dh = r.normal(size=(T, H))
    for a, c in zip(py.lstm_backward(dh, x, W, U, *outs_py),
                    cy.lstm_backward(dh, x, W, U, *[np.asarray(o) for o in outs_cy])):
        np.testing.assert_allclose(np.asarray(c), a, rtol=1e-11, atol=1e-13)
    em, trans, start, stop = r.normal(size=(T, 2)), r.normal(size=(2, 2)), r.normal(size=2), r.normal(size=2)
    for a, c in zip(py.crf_forward_backward(em, trans, start, stop),
                    cy.crf_forward_backward(em, trans, start, stop)):
        np.testing.assert_allclose(np.asarray(c), a, rtol=1e-12, atol=1e-14)
    assert cy.crf_log_partition(em, trans, start, stop) == pytest.approx(
        py.crf_log_partition(em, trans, start, stop), rel=1e-13)
    pa, sa = py.viterbi(em, trans, start, stop)
    pc, sc = cy.viterbi(em, trans, start, stop)
    np.testing.assert_array_equal(np.asarray(pc), pa)
    assert sc == pytest.approx(sa, rel=1e-13)


def test_wrappers_accept_non_contiguous():
    r = np.random.default_rng(0)
    em = r.normal(size=(2, 5)).T  # Fortran-ordered view
    z = kernels.crf_log_partition(em, np.zeros((2, 2)), np.zeros(2), np.zeros(2))
    assert np.isfinite(z)


def test_benchmark_script_runs():
    import io
    import pathlib
    import runpy

    path = pathlib.Path(__file__).parent.parent / "benchmarks" / "bench_kernels.py"
    bench = runpy.run_path(str(path))
    out = io.StringIO()
    rows = bench["run"]([3], 4, 5, 1, out)
    assert len(rows) == 4 and "lstm_forward" in out.getvalue()
