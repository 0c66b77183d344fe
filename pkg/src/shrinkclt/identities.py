"""Randomized battery of algebraic identities of the shrink operator."""

import numpy as np

from .shrink import _shrink_unchecked

__all__ = ["identity_suite"]


def _u(x, r):
    return _shrink_unchecked(np.asarray(x, dtype=float), r)


def identity_suite(trials=100_000, seed=0, atol=1e-12, x_scale=50.0, r_scale=20.0):
    """Check every operator identity on random (x, r, s) triples.

    Returns a mapping ``name -> {"passed": bool, "max_violation": float,
    "checked": int}``.  Exact checks report a violation of 0 or the largest
    absolute mismatch.
    """
    gen = np.random.Generator(np.random.Philox(seed))
    x = gen.uniform(-x_scale, x_scale, trials)
    r = gen.uniform(0, r_scale, trials)
    s = gen.uniform(0, r_scale, trials)
    t = gen.uniform(0, r_scale, trials) + 1e-3
    eps = gen.uniform(0, r_scale, trials) + 1e-3
    # a slice of exact boundary cases: |x| = r and r = 0
    k = trials // 10
    x[:k] = np.where(gen.random(k) < 0.5, r[:k], -r[:k])
    r0 = r.copy()
    r0[k:2 * k] = 0.0

    ur, us = _u(x, r), _u(x, s)
    results = {}

    def record(name, violation, mask=None):
        v = np.abs(violation) if mask is None else np.abs(violation[mask])
        worst = float(v.max()) if v.size else 0.0
        results[name] = {"passed": worst <= atol, "max_violation": worst,
                         "checked": int(v.size)}

    def record_exact(name, ok, mismatch):
        results[name] = {"passed": bool(np.all(ok)),
                         "max_violation": float(np.max(np.abs(mismatch))),
                         "checked": int(ok.size)}

    record("semigroup", _u(us, r) - _u(x, r + s))
    neg = _u(-x, r)
    record_exact("odd", neg == -ur, neg + ur)
    lo, hi = np.minimum(r, s), np.maximum(r, s)
    record("magnitude_nonincreasing", np.maximum(np.abs(_u(x, hi)) - np.abs(_u(x, lo)), 0))
    far = _u(x, np.abs(x))
    record_exact("vanishes_beyond_abs_x", far == 0.0, far)
    mag = np.maximum(np.abs(x) - r, 0.0)
    record_exact("magnitude_formula", np.abs(ur) == mag, np.abs(ur) - mag)
    record("contraction", np.maximum(np.abs(ur) - np.abs(x), 0))
    record("lipschitz_in_r", np.maximum(np.abs(us - ur) - np.abs(s - r), 0))
    record("distance_to_identity", np.maximum(np.abs(x - ur) - r, 0))
    record("triangle", np.maximum(np.abs(ur) - np.abs(s - r) - np.abs(us), 0))
    u_lo, u_hi = _u(x, lo), _u(x, hi)
    eq_mask = np.abs(x) >= hi
    record("triangle_equality", np.abs(u_lo) - (hi - lo) - np.abs(u_hi), eq_mask)

    left = np.abs(ur) >= t
    right = np.abs(x) >= r + t
    # skip draws within rounding of the threshold itself
    clear = np.abs(np.abs(x) - r - t) > atol
    mismatch = (left != right) & clear
    results["threshold_equivalence"] = {"passed": not bool(mismatch.any()),
                                        "max_violation": float(mismatch.sum()),
                                        "checked": int(clear.sum())}
    d_mask = np.abs(x) >= r + eps
    record("doubling", np.maximum(np.abs(ur) - 2 * np.abs(_u(x, r + eps / 2)), 0), d_mask)

    ub = _u(x[:k], r[:k])
    record_exact("boundary_abs_x_eq_r", ub == 0.0, ub)
    uz = _u(x[k:2 * k], r0[k:2 * k])
    record_exact("identity_at_r0", uz == x[k:2 * k], uz - x[k:2 * k])
    return results
