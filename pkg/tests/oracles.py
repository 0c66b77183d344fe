"""Independent reference computations used to freeze expected values.

None of these call into the code paths they check: closed forms instead of
quadrature, full event enumeration instead of the one-sided shortcut,
alternating conditional expectations instead of the SVD.
"""

import itertools
import math

import numpy as np
from scipy import special


def normal_shrunk_second_moment(r):
    """E[shrink(Z, r)^2] for Z ~ N(0, 1): 2[(1 + r^2) Q(r) - r phi(r)]."""
    q = 0.5 * special.erfc(r / math.sqrt(2))
    phi = math.exp(-r * r / 2) / math.sqrt(2 * math.pi)
    return 2 * ((1 + r * r) * q - r * phi)


def laplace_g(r, rate=1.0):
    """G(r) for the unit Laplace law: int_0^inf t e^{-(t+r)} dt = e^{-r}."""
    assert rate == 1.0
    return math.exp(-r)


def bisect(f, lo, hi, xtol=1e-13, max_iter=200):
    """Plain scalar bisection for a sign change of f on [lo, hi]."""
    f_lo = f(lo)
    assert f_lo * f(hi) < 0
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        f_mid = f(mid)
        if (f_mid > 0) == (f_lo > 0):
            lo, f_lo = mid, f_mid
        else:
            hi = mid
        if hi - lo < xtol:
            break
    return 0.5 * (lo + hi)


def normal_rn_oracle(n, target=1.0):
    """Root of n Var[shrink(Z, r)] = target**2 for Z ~ N(0, 1)."""
    return bisect(lambda r: n * normal_shrunk_second_moment(r) - target**2, 0.0, 40.0)


def alpha_brute_force(p):
    """sup |P(A n B) - P(A)P(B)| over all 2^a x 2^b event pairs."""
    p = np.asarray(p, dtype=float)
    a, b = p.shape
    pr, pc = p.sum(axis=1), p.sum(axis=0)
    best = 0.0
    for ma in itertools.product((0, 1), repeat=a):
        ia = np.array(ma, dtype=bool)
        for mb in itertools.product((0, 1), repeat=b):
            ib = np.array(mb, dtype=bool)
            val = abs(p[np.ix_(ia, ib)].sum() - pr[ia].sum() * pc[ib].sum())
            best = max(best, val)
    return best


def rho_ace(p, iters=200_000, tol=1e-15, seed=0):
    """Maximal correlation by alternating conditional expectations.

    Iterates f <- E[g(Y) | X], g <- E[f(X) | Y] with centering and unit
    variance; the fixed point correlation is the maximal correlation.
    """
    p = np.asarray(p, dtype=float)
    p = p[p.sum(axis=1) > 0][:, p.sum(axis=0) > 0]
    pr, pc = p.sum(axis=1), p.sum(axis=0)
    if min(p.shape) < 2:
        return 0.0
    cond_y_given_x = p / pr[:, None]
    cond_x_given_y = (p / pc[None, :]).T
    rng = np.random.default_rng(seed)
    f = rng.standard_normal(p.shape[0])

    def standardize(v, w):
        v = v - np.dot(w, v)
        sd = math.sqrt(np.dot(w, v * v))
        return v / sd if sd > 0 else v

    f = standardize(f, pr)
    corr = 0.0
    for _ in range(iters):
        g = standardize(cond_x_given_y @ f, pc)
        f_new = cond_y_given_x @ g
        new_corr = math.sqrt(max(np.dot(pr, (f_new - np.dot(pr, f_new)) ** 2), 0.0))
        f = standardize(f_new, pr)
        if abs(new_corr - corr) < tol:
            corr = new_corr
            break
        corr = new_corr
    # corr converges to rho**2 per double step; recover rho from E[f(X) g(Y)]
    g = standardize(cond_x_given_y @ f, pc)
    return float(abs(np.einsum("ij,i,j->", p, f, g)))
