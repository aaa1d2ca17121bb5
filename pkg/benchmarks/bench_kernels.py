"""Compare the compiled and NumPy kernel backends on one thread.

    python3 benchmarks/bench_kernels.py [--lengths 8 32 128] [--hidden 32] [--repeat 5]

Prints microseconds per call (best of ``--repeat`` runs) and the speed-up of
the compiled backend over NumPy.
"""
import argparse
import sys
import timeit

import numpy as np
from threadpoolctl import threadpool_limits

from milexplain.kernels import backends


def cases(T, H, D, rng):
    x = rng.normal(size=(T, D))
    W = rng.normal(0, 0.2, size=(4 * H, D))
    U = rng.normal(0, 0.2, size=(4 * H, H))
    b = np.zeros(4 * H)
    em = rng.normal(size=(T, 2))
    trans, start, stop = rng.normal(size=(2, 2)), rng.normal(size=2), rng.normal(size=2)
    dh = rng.normal(size=(T, H))

    def lstm_fwd(k):
        return lambda: k.lstm_forward(x, W, U, b)

    def lstm_bwd(k):
        h, c, gates = k.lstm_forward(x, W, U, b)
        return lambda: k.lstm_backward(dh, x, W, U, h, c, gates)

    return {
        "lstm_forward": lstm_fwd,
        "lstm_backward": lstm_bwd,
        "crf_forward_backward": lambda k: lambda: k.crf_forward_backward(em, trans, start, stop),
        "viterbi": lambda k: lambda: k.viterbi(em, trans, start, stop),
    }


def best_time(fn, repeat):
    timer = timeit.Timer(fn)
    number, _ = timer.autorange()
    return min(timer.repeat(repeat, number)) / number


def run(lengths, hidden, dim, repeat, out=sys.stdout):
    mods = backends()
    rng = np.random.default_rng(0)
    rows = []
    with threadpool_limits(limits=1):
        for T in lengths:
            for name, make in cases(T, hidden, dim, rng).items():
                t = {b: best_time(make(m), repeat) for b, m in mods.items()}
                rows.append((name, T, t))
    names = list(mods)
    head = f"{'kernel':<22}{'T':>5}" + "".join(f"{n + ' us':>14}" for n in names)
    if "cython" in mods:
        head += f"{'speed-up':>10}"
    print(head, file=out)
    for name, T, t in rows:
        line = f"{name:<22}{T:>5}" + "".join(f"{1e6 * t[n]:>14.1f}" for n in names)
        if "cython" in t:
            line += f"{t['numpy'] / t['cython']:>9.1f}x"
        print(line, file=out)
    if "cython" not in mods:
        print("compiled extension not built; only the NumPy backend was timed", file=out)
    return rows


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--lengths", type=int, nargs="+", default=[8, 32, 128])
    p.add_argument("--hidden", type=int, default=32)
    p.add_argument("--dim", type=int, default=50)
    p.add_argument("--repeat", type=int, default=5)
    args = p.parse_args(argv)
    run(args.lengths, args.hidden, args.dim, args.repeat)
    return 0


if __name__ == "__main__":
    sys.exit(main())
