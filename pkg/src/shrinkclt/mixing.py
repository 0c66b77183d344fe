"""Exact dependence coefficients for finite discrete joint laws.

For two finite-valued random variables with joint matrix ``p``:

* ``alpha = sup |P(A n B) - P(A) P(B)|`` over events of each coordinate,
* ``rho`` = maximal correlation, the largest singular value of
  ``(p_ij - p_i q_j) / sqrt(p_i q_j)``.

Chain helpers build the exact joint law of (V_0, V_n) for the three-state
cancellation chain from matrix powers.
"""

import csv
import itertools
import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .errors import AlphabetTooLargeError
from .processes import stationary_chain_dist, transition_matrix

__all__ = [
    "JointDistribution",
    "MixingReport",
    "alpha_coefficient",
    "rho_coefficient",
    "mixing_report",
    "chain_lagged_joint",
    "chain_one_step_joint",
    "chain_rho_decay",
    "RhoDecay",
    "cancellation_indicator_correlation",
    "prob_both_ends_in_state_one",
]

MAX_ENUM_SYMBOLS = 16
_MASS_TOL = 1e-12


class JointDistribution:
    """Joint law of two finite-valued random variables as an a-by-b matrix."""

    def __init__(self, p):
        p = np.array(p, dtype=float)
        if p.ndim != 2 or min(p.shape) < 1:
            raise ValueError("joint must be a non-empty 2-D matrix")
        if not np.all(np.isfinite(p)) or np.any(p < 0):
            raise ValueError("joint entries must be finite and nonnegative")
        if abs(p.sum() - 1.0) > _MASS_TOL:
            raise ValueError(f"joint mass is {p.sum()!r}, not 1")
        self.p = p

    @property
    def shape(self):
        return self.p.shape

    @property
    def row_marginal(self):
        return self.p.sum(axis=1)

    @property
    def col_marginal(self):
        return self.p.sum(axis=0)

    @classmethod
    def product(cls, u, v):
        u = np.asarray(u, dtype=float)
        v = np.asarray(v, dtype=float)
        return cls(np.outer(u / u.sum(), v / v.sum()))

    @classmethod
    def from_csv(cls, path):
        with open(path, newline="") as fh:
            rows = [[float(x) for x in row] for row in csv.reader(fh) if row]
        return cls(rows)

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            for row in self.p:
                w.writerow([repr(float(x)) for x in row])

    def dependence_matrix(self):
        """``p_ij - p_i q_j`` on the support, with rounding-level entries set to 0.

        Zero-mass rows and columns are dropped.
        """
        p = self.p
        p = p[p.sum(axis=1) > 0][:, p.sum(axis=0) > 0]
        pr = p.sum(axis=1)
        pc = p.sum(axis=0)
        outer = np.outer(pr, pc)
        d = p - outer
        # independence must come out exactly independent
        noise = 8 * np.finfo(float).eps * np.maximum(p, outer)
        d[np.abs(d) <= noise] = 0.0
        return d, pr, pc


def alpha_coefficient(joint):
    """Strong-mixing coefficient by exhaustive enumeration of the smaller side.

    For a fixed event ``A`` the best ``B`` collects either all columns with
    positive or all with negative ``P(A, j) - P(A) q_j``, so enumerating the
    ``2**min(a, b)`` events of one side is exact.
    """
    if not isinstance(joint, JointDistribution):
        joint = JointDistribution(joint)
    a, b = joint.shape
    if max(a, b) > MAX_ENUM_SYMBOLS:
        raise AlphabetTooLargeError(
            f"alphabet {a}x{b} exceeds {MAX_ENUM_SYMBOLS} symbols per side; "
            "use the bound 4*alpha <= rho instead")
    d, _, _ = joint.dependence_matrix()
    if d.shape[0] > d.shape[1]:
        d = d.T
    m = d.shape[0]
    # rows of `masks` index every subset A of the smaller side
    masks = np.array(list(itertools.product((0.0, 1.0), repeat=m)))
    col = masks @ d
    pos = np.where(col > 0, col, 0.0).sum(axis=1)
    neg = np.where(col < 0, -col, 0.0).sum(axis=1)
    return float(max(pos.max(), neg.max()))


def rho_coefficient(joint):
    """Maximal correlation of the two coordinates via singular values."""
    if not isinstance(joint, JointDistribution):
        joint = JointDistribution(joint)
    d, pr, pc = joint.dependence_matrix()
    if min(d.shape) < 2 or not np.any(d):
        return 0.0
    b = d / np.sqrt(np.outer(pr, pc))
    s = np.linalg.svd(b, compute_uv=False)
    return float(min(max(s[0], 0.0), 1.0))


@dataclass
class MixingReport:
    alpha: float
    rho: float
    lag: int | None = None
    notes: str = ""

    def to_dict(self):
        return {"alpha": self.alpha, "rho": self.rho, "lag": self.lag,
                "four_alpha_le_rho": 4 * self.alpha <= self.rho + 1e-12,
                "notes": self.notes}


def mixing_report(joint, lag=None, notes=""):
    alpha = alpha_coefficient(joint)
    rho = rho_coefficient(joint)
    return MixingReport(alpha, rho, lag,
                        notes or "alpha: exact event enumeration; rho: SVD of normalized joint")


def chain_lagged_joint(theta, n):
    """Exact joint law of (V_0, V_n): ``pi_i (P**n)_ij``."""
    if int(n) != n or n < 1:
        raise ValueError("lag must be a positive integer")
    pi = np.array(stationary_chain_dist(theta))
    pn = np.linalg.matrix_power(transition_matrix(theta), int(n))
    return JointDistribution(pi[:, None] * pn)


def chain_one_step_joint(theta):
    return chain_lagged_joint(theta, 1)


@dataclass
class RhoDecay:
    lags: list
    rho: list
    rate: float
    intercept: float
    r_squared: float
    fit_lags: tuple

    def to_dict(self):
        return {
            "rows": [[n, r] for n, r in zip(self.lags, self.rho)],
            "fitted_log_rate": self.rate,
            "fitted_intercept": self.intercept,
            "r_squared": self.r_squared,
            "fit_lags": list(self.fit_lags),
        }


def chain_rho_decay(theta, max_lag, fit_from=2):
    """rho(sigma(V_0), sigma(V_n)) for n = 1..max_lag with a log-linear fit.

    The fit regresses ``log rho`` on ``n`` over lags ``fit_from..max_lag``;
    ``rate`` is the slope (negative for geometric decay).
    """
    if max_lag < 1:
        raise ValueError("max_lag must be >= 1")
    lags = list(range(1, int(max_lag) + 1))
    rho = [rho_coefficient(chain_lagged_joint(theta, n)) for n in lags]
    fit = [(n, r) for n, r in zip(lags, rho) if n >= fit_from and r > 0]
    rate = intercept = r2 = math.nan
    if len(fit) >= 2:
        x = np.array([n for n, _ in fit], dtype=float)
        y = np.log([r for _, r in fit])
        rate, intercept = np.polyfit(x, y, 1)
        resid = y - (rate * x + intercept)
        ss_tot = float(np.sum((y - y.mean()) ** 2))
        r2 = 1.0 - float(np.sum(resid**2)) / ss_tot if ss_tot > 0 else 1.0
    return RhoDecay(lags, rho, float(rate), float(intercept), float(r2),
                    (fit_from, int(max_lag)))


def _exact_chain(lam):
    theta = Fraction(lam) / 4
    z = 1 + 2 * theta
    pi = {1: 1 / z, 2: theta / z, 3: theta / z}
    step = {(1, 1): 1 - theta, (1, 2): theta, (2, 3): Fraction(1), (3, 1): Fraction(1)}
    return pi, step


def cancellation_indicator_correlation(lam):
    """Correlation of 1{X_-1 = 0, X_0 != 0} and 1{X_1 != 0, X_2 = 0}.

    Computed in exact rational arithmetic over the window V_-1..V_2, using
    that X_k = 0 exactly when V_k = 1 (up to a null set).  The result is 1.
    """
    if not 0 < lam < 1:
        raise ValueError("lambda must lie in (0, 1)")
    pi, step = _exact_chain(lam)
    e1 = e2 = e12 = Fraction(0)
    for w in itertools.product((1, 2, 3), repeat=4):
        prob = pi[w[0]]
        for a, b in zip(w, w[1:]):
            prob *= step.get((a, b), Fraction(0))
        if prob == 0:
            continue
        i1 = w[0] == 1 and w[1] != 1
        i2 = w[2] != 1 and w[3] == 1
        e1 += prob * i1
        e2 += prob * i2
        e12 += prob * (i1 and i2)
    cov = e12 - e1 * e2
    var1 = e1 * (1 - e1)
    var2 = e2 * (1 - e2)
    # cov**2 / (var1 var2) is rational; exact 1 gives an exact float 1.0
    return math.copysign(math.sqrt(cov * cov / (var1 * var2)), cov)


def prob_both_ends_in_state_one(theta, n):
    """Exact ``P(V_1 = V_n = 1) = pi_1 (P**(n-1))_11``."""
    if n < 1:
        raise ValueError("n must be >= 1")
    pi1 = stationary_chain_dist(theta)[0]
    if n == 1:
        return pi1
    return float(pi1 * np.linalg.matrix_power(transition_matrix(theta), n - 1)[0, 0])
