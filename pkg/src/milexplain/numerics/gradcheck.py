from __future__ import annotations

import numpy as np


def numeric_grad(f, params, h=1e-5, coords=None):
    """Central differences of scalar ``f()`` w.r.t. arrays in ``params``.

    ``f`` reads the arrays in place, so they are perturbed and restored.
    ``coords`` optionally restricts each array to a list of flat indices;
    unlisted entries are returned as NaN.
    """
    out = []
    for n, p in enumerate(params):
        g = np.full(p.shape, np.nan)
        flat = p.reshape(-1)
        idxs = range(flat.size) if coords is None else coords[n]
        for k in idxs:
            orig = flat[k]
            flat[k] = orig + h
            fp = f()
            flat[k] = orig - h
            fm = f()
            flat[k] = orig
            g.flat[k] = (fp - fm) / (2.0 * h)
        out.append(g)
    return out


def relative_errors(analytic, numeric, floor=1e-8):
    a = np.asarray(analytic)
    n = np.asarray(numeric)
    return np.abs(a - n) / np.maximum(np.maximum(np.abs(a), np.abs(n)), floor)


def finite_diff_check(f, params, analytic, h=1e-5, coords=None, floor=1e-8):
    """Max relative error between ``analytic`` and central differences of ``f``.

    Relative error per entry is |a - n| / max(|a|, |n|, floor). Central
    differences carry round-off of about eps * |f| / h, so entries much smaller
    than that cannot be resolved; raise ``floor`` to compare those absolutely.
    """
    if h <= 0:
        raise ValueError("step must be positive")
    worst = 0.0
    for a, n in zip(analytic, numeric_grad(f, params, h, coords)):
        mask = ~np.isnan(n)
        if mask.any():
            worst = max(worst, float(relative_errors(a[mask], n[mask], floor).max()))
    return worst
