"""Monte Carlo engine for central limit behaviour of shrunken partial sums.

For a stationary process X and radius r the centered shrunken variables are
``Y_k = shrink(X_k, r) - m_r`` with ``m_r = E[shrink(X_0, r)]``.  The
normalizing radius r(n) solves ``|| Y_1 + ... + Y_n ||_2 = 1``; it is found
by a bracketing root search on a fixed pool of replicate paths (common
random numbers), which makes the estimated norm a deterministic,
continuous function of r.

Reproducibility: replicate ``i`` of a pool is generated from its own
counter-based stream, pools are processed in fixed-size chunks, and every
per-replicate sum is accumulated sequentially in time order.  Results are
therefore bit-identical for any number of workers.
"""

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy import stats

from . import marginals
from .errors import (
    BelowThresholdError,
    ConvergenceError,
    InapplicableError,
    ShrinkCltError,
    UnsupportedDistributionError,
)
from .mixing import prob_both_ends_in_state_one
from .processes import CancellationChain, generate, x0_marginal
from .shrink import _shrink_unchecked, check_radius

__all__ = [
    "SigmaEstimate",
    "ReplicatePool",
    "RnSolveResult",
    "CltReport",
    "shrunken_mean_for",
    "estimate_sigma",
    "solve_rn",
    "standardized_sums",
    "ks_statistic",
    "lindeberg_profile",
    "variance_sandwich_check",
    "cancellation_demo",
    "clt_experiment",
]

CHUNK = 256
MC_MEAN_DRAWS = 10**6
# exceedance caches above this many stored values fall back to regeneration
CACHE_LIMIT = 20_000_000


def _chunks(reps):
    return [range(i, min(i + CHUNK, reps)) for i in range(0, reps, CHUNK)]


def _pmap(func, items, workers):
    if workers is None or workers <= 1 or len(items) <= 1:
        return [func(item) for item in items]
    with ThreadPoolExecutor(max_workers=workers) as ex:
        return list(ex.map(func, items))


def _exceedances(x, floor):
    """Row ids and values of entries with ``|x| > floor`` in row-major order."""
    rows, cols = np.nonzero(np.abs(x) > floor)
    return rows, x[rows, cols]


def _shrunken_row_sums(rows, vals, nrows, r):
    # bincount adds weights sequentially, so a +z, -z pair cancels exactly
    return np.bincount(rows, weights=_shrink_unchecked(vals, r), minlength=nrows)


@dataclass
class SigmaEstimate:
    """Estimate of ``|| sum_{k<=n} Y_k ||_2`` with a delta-method standard error."""

    value: float
    se: float
    second_moment: float
    second_moment_se: float
    mean_sum: float
    r: float
    m_r: float
    n: int
    reps: int

    def to_dict(self):
        return asdict(self)


class ReplicatePool:
    """A fixed set of replicate paths evaluated at arbitrary radii.

    Paths are regenerated from their streams whenever needed; after
    :meth:`cache_above` only entries with ``|x| > floor`` are kept, which is
    all that matters for radii at or above ``floor``.
    """

    def __init__(self, spec, n, reps, seed, purpose, workers=1):
        if reps < 1:
            raise ValueError("reps must be >= 1")
        self.spec = spec
        self.n = int(n)
        self.reps = int(reps)
        self.seed = int(seed)
        self.purpose = purpose
        self.workers = workers
        self._chunks = _chunks(self.reps)
        self._cache = None
        self._floor = None

    def _paths(self, chunk):
        return generate(self.spec, self.n, self.seed, chunk, self.purpose)

    def _chunk_exceedances(self, chunk, floor):
        return _exceedances(self._paths(chunk), floor)

    def cache_above(self, floor):
        floor = check_radius(floor)
        parts = _pmap(lambda c: self._chunk_exceedances(c, floor), self._chunks, self.workers)
        if sum(len(v) for _, v in parts) > CACHE_LIMIT:
            return False
        self._cache, self._floor = parts, floor
        return True

    def sums(self, r):
        """Per-replicate ``sum_k shrink(X_k, r)``."""
        r = check_radius(r)
        if self._cache is not None and r >= self._floor:
            parts = zip(self._chunks, self._cache)
            out = [_shrunken_row_sums(rows, vals, len(c), r) for c, (rows, vals) in parts]
        else:
            def one(chunk):
                rows, vals = self._chunk_exceedances(chunk, r)
                return _shrunken_row_sums(rows, vals, len(chunk), r)

            out = _pmap(one, self._chunks, self.workers)
        return np.concatenate(out)


def shrunken_mean_for(spec, r, seed=0, draws=MC_MEAN_DRAWS):
    """``m_r`` for a process: quadrature when the marginal is analytic.

    Returns ``(m_r, standard_error)``; the error is 0 for quadrature.
    Otherwise the mean is estimated from ``draws`` values of long paths
    drawn with a dedicated stream (fixed across radii).
    """
    try:
        dist = x0_marginal(spec)
    except UnsupportedDistributionError:
        dist = None
    if dist is not None:
        return marginals.shrunken_mean(dist, r), 0.0
    length = 10_000
    x = generate(spec, length, seed, range(max(1, draws // length)), "mean")
    u = _shrink_unchecked(x.ravel(), check_radius(r))
    return float(u.mean()), float(u.std(ddof=1) / math.sqrt(u.size))


def _sigma_from_sums(sums, r, m, m_se, n):
    s = sums - n * m
    sq = s * s
    reps = len(s)
    second = float(sq.mean())
    second_se = float(sq.std(ddof=1) / math.sqrt(reps)) if reps > 1 else 0.0
    value = math.sqrt(second)
    mean_sum = float(s.mean())
    if value > 0:
        se = math.hypot(second_se / (2 * value), n * abs(mean_sum) / value * m_se)
    else:
        se = 0.0
    return SigmaEstimate(value, se, second, second_se, mean_sum, r, m, n, reps)


def estimate_sigma(spec, r, n, reps=5000, seed=0, workers=1, purpose="sigma"):
    """Monte Carlo estimate of ``|| sum_{k=1}^n Y_{k,r} ||_2``."""
    if reps < 2:
        raise ValueError("reps must be >= 2")
    r = check_radius(r)
    m, m_se = shrunken_mean_for(spec, r, seed)
    pool = ReplicatePool(spec, n, reps, seed, f"{purpose}/n={int(n)}", workers)
    return _sigma_from_sums(pool.sums(r), r, m, m_se, int(n))


@dataclass
class RnSolveResult:
    n: int
    r_n: float
    sigma_hat: float
    sigma_se: float
    ci_low: float
    ci_high: float
    replicate_count: int
    tol: float
    converged: bool
    sigma_at_zero: float
    history: list = field(default_factory=list)

    def to_dict(self):
        return asdict(self)


class _Curve:
    """sigma-hat(r) on a fixed replicate pool; remembers every evaluation."""

    def __init__(self, spec, n, reps, seed, workers):
        self.spec = spec
        self.n = n
        self.seed = seed
        self.pool = ReplicatePool(spec, n, reps, seed, f"solve/n={n}", workers)
        self.history = []

    def __call__(self, r, step):
        m, m_se = shrunken_mean_for(self.spec, r, self.seed)
        est = _sigma_from_sums(self.pool.sums(r), r, m, m_se, self.n)
        self.history.append({"step": step, "r": r, "sigma_hat": est.value, "se": est.se})
        return est


def solve_rn(spec, n, tol=0.02, reps=5000, seed=0, workers=1, max_iter=200, z=1.96):
    """Find r(n) with ``|sigma_hat_n(r) - 1| <= tol`` on a fixed replicate pool.

    The bracket ``[lo, hi]`` keeps ``sigma_hat(lo) > 1 > sigma_hat(hi)``.
    Trial points come from false position on ``sigma_hat**2 - 1`` (piecewise
    quadratic in r) with the Illinois down-weighting, falling back to the
    midpoint when the interpolated point is within an eighth of the bracket
    width of either end.

    Raises
    ------
    BelowThresholdError
        If ``sigma_hat(0) <= 1 + tol``: no bracket exists for this n.
    ConvergenceError
        If ``max_iter`` trials do not reach the tolerance.
    """
    n = int(n)
    if n < 1:
        raise ValueError("n must be >= 1")
    if not 0 < tol < 1:
        raise ValueError("tol must lie in (0, 1)")
    curve = _Curve(spec, n, reps, seed, workers)

    def result(est):
        return RnSolveResult(
            n=n, r_n=est.r, sigma_hat=est.value, sigma_se=est.se,
            ci_low=est.value - z * est.se, ci_high=est.value + z * est.se,
            replicate_count=reps, tol=tol, converged=True,
            sigma_at_zero=s0.value, history=curve.history,
        )

    s0 = curve(0.0, "start")
    if s0.value <= 1 + tol:
        raise BelowThresholdError(
            f"sigma_hat_{n}(0) = {s0.value:.6g} <= 1 + tol; n is below the threshold "
            "where a normalizing radius exists")

    lo, f_lo = 0.0, s0.value**2 - 1
    hi = 1.0
    for _ in range(max_iter):
        est = curve(hi, "expand")
        if abs(est.value - 1) <= tol:
            return result(est)
        if est.value < 1:
            break
        lo, f_lo = hi, est.value**2 - 1
        hi *= 2
    else:
        raise ConvergenceError("could not bracket r(n)", curve.history)
    f_hi = est.value**2 - 1
    # every later trial lies above lo
    curve.pool.cache_above(lo)

    side = 0
    for _ in range(max_iter):
        width = hi - lo
        x, step = hi - f_hi * width / (f_hi - f_lo), "falsi"
        if not (lo < x < hi) or min(x - lo, hi - x) < width / 8:
            x, step = lo + width / 2, "bisect"
        est = curve(x, step)
        if abs(est.value - 1) <= tol:
            return result(est)
        f_x = est.value**2 - 1
        if f_x > 0:
            lo, f_lo = x, f_x
            if side == -1:
                f_hi /= 2
            side = -1
        else:
            hi, f_hi = x, f_x
            if side == 1:
                f_lo /= 2
            side = 1
    raise ConvergenceError(
        f"r({n}) not found within {max_iter} iterations; last bracket [{lo}, {hi}]",
        curve.history,
    )


def standardized_sums(spec, n, r, reps=5000, seed=0, workers=1):
    """``reps`` realizations of ``sum_{k=1}^n Y_{k,r}``.

    Uses a replicate key space disjoint from :func:`solve_rn`'s pool.
    """
    m, _ = shrunken_mean_for(spec, r, seed)
    pool = ReplicatePool(spec, n, reps, seed, f"sums/n={int(n)}", workers)
    return pool.sums(r) - int(n) * m


def ks_statistic(sample, reference_cdf=stats.norm.cdf):
    """Two-sided one-sample Kolmogorov-Smirnov distance."""
    sample = np.asarray(sample, dtype=float).ravel()
    if sample.size == 0:
        raise ValueError("KS statistic of an empty sample")
    return float(stats.kstest(sample, reference_cdf).statistic)


def _lindeberg_bound(dist, r, m, eps):
    # E[U^2; |U| >= e] <= 8 G(r + e/2); with |m| <= e/2 the centered tail is
    # at most 4 E[U^2; |U| >= e/2]
    if m == 0.0:
        return 8 * marginals.g_function(dist, r + eps / 2)
    if abs(m) <= eps / 2:
        return 32 * marginals.g_function(dist, r + eps / 4)
    return math.nan


def lindeberg_profile(spec, n_grid, eps_grid, reps=5000, seed=0, tol=0.02,
                      workers=1, r_of_n=None):
    """Table of ``n * E[Y_{0,r(n)}**2 ; |Y_{0,r(n)}| >= eps]``.

    ``r_of_n`` maps n to a pre-solved radius; missing entries are solved
    with :func:`solve_rn`.  Values use quadrature on the analytic marginal.
    """
    dist = x0_marginal(spec)
    r_of_n = dict(r_of_n or {})
    rows = []
    for n in n_grid:
        if n not in r_of_n:
            r_of_n[n] = solve_rn(spec, n, tol, reps, seed, workers).r_n
        r = r_of_n[n]
        m = marginals.shrunken_mean(dist, r)
        for eps in eps_grid:
            value = n * marginals.lindeberg_tail(dist, r, eps)
            bound = n * _lindeberg_bound(dist, r, m, eps)
            rows.append({"n": n, "r_n": r, "eps": eps, "value": value,
                         "bound": bound, "within_bound": bool(value <= bound)})
    trend = {}
    for eps in eps_grid:
        vals = [row["value"] for row in rows if row["eps"] == eps]
        trend[str(eps)] = all(b <= a for a, b in zip(vals, vals[1:]))
    return {"rows": rows, "non_increasing_in_n": trend}


def _declared_rho_star(spec, rho_star_1):
    known = spec.mixing.rho_star_1
    if known is not None and known >= 1:
        raise InapplicableError(
            f"{spec!r} has rho*(1) = 1; the two-sided variance bounds do not apply")
    value = rho_star_1 if rho_star_1 is not None else known
    if value is None:
        raise InapplicableError("no rho*(1) bound declared for this process")
    if not 0 <= value < 1:
        raise InapplicableError(f"declared rho*(1) = {value} is not in [0, 1)")
    return float(value)


def variance_sandwich_check(spec, rho_star_1=None, n_grid=(10, 100), reps=10_000,
                            seed=0, r=0.0, z=3.0, workers=1):
    """Compare ``E[(sum Y_k)^2]`` with ``n Var[Y_0] (1 -+ rho*)/(1 +- rho*)``.

    Each n passes when the Monte Carlo estimate lies inside the bounds
    widened by ``z`` standard errors.
    """
    c = _declared_rho_star(spec, rho_star_1)
    dist = x0_marginal(spec)
    m = marginals.shrunken_mean(dist, r)
    var_y = marginals.shrunken_second_moment(dist, r) - m * m
    lo_f = (1 - c) / (1 + c)
    hi_f = (1 + c) / (1 - c)
    rows = []
    for n in n_grid:
        est = estimate_sigma(spec, r, n, reps, seed, workers, purpose="sandwich")
        lower = n * lo_f * var_y
        upper = n * hi_f * var_y
        band = z * est.second_moment_se
        rows.append({
            "n": n, "second_moment": est.second_moment, "se": est.second_moment_se,
            "ratio_to_n_var": est.second_moment / (n * var_y),
            "lower": lower, "upper": upper,
            "inside": bool(lower - band <= est.second_moment <= upper + band),
        })
    return {"rho_star_1": c, "r": r, "var_y0": var_y, "z": z, "rows": rows,
            "all_inside": all(row["inside"] for row in rows)}


def cancellation_demo(lam, n, r, reps=10_000, seed=0, workers=1, z=3.0):
    """Frequency of exactly vanishing shrunken sums on the cancellation chain.

    On ``{V_1 = V_n = 1}`` the shrunken sum cancels pairwise; sums are
    accumulated sequentially so the cancellation is exact in floating point.
    """
    spec = CancellationChain(lam)
    r = check_radius(r)
    if not r > 0:
        raise ValueError("r must be positive")
    if n < 1:
        raise ValueError("n must be >= 1")

    def one(chunk):
        x, v = generate(spec, n, seed, chunk, f"cancel/n={n}", with_states=True)
        rows, vals = _exceedances(x, r)
        sums = _shrunken_row_sums(rows, vals, len(chunk), r)
        ends = (v[:, 1] == 1) & (v[:, n] == 1)
        return sums, ends

    parts = _pmap(one, _chunks(reps), workers)
    sums = np.concatenate([p[0] for p in parts])
    ends = np.concatenate([p[1] for p in parts])
    freq = float(np.mean(sums == 0.0))
    se = math.sqrt(freq * (1 - freq) / reps)
    exact = prob_both_ends_in_state_one(spec.theta, n)
    bound = 1 - lam
    return {
        "lambda": lam, "theta": spec.theta, "n": n, "r": r, "reps": reps,
        "zero_frequency": freq, "zero_frequency_se": se,
        "exact_prob_v1_vn_1": exact, "lower_bound_1_minus_lambda": bound,
        "ends_frequency": float(ends.mean()),
        "inclusion_holds": bool(np.all(sums[ends] == 0.0)),
        "empirical_ge_bound": bool(freq >= bound - z * se),
        "empirical_ge_exact": bool(freq >= exact - z * se),
        "exact_ge_bound": bool(exact >= bound),
    }


@dataclass
class CltReport:
    spec: dict
    n_grid: list
    reps: int
    seed: int
    tol: float
    eps_grid: list
    gate: dict
    rows: list = field(default_factory=list)
    ks_non_increasing: bool | None = None
    # n -> standardized-sum sample; kept out of the JSON report
    samples: dict = field(default_factory=dict, repr=False)

    def to_dict(self):
        d = asdict(self)
        d.pop("samples")
        return d


def _gate(spec, r_grid=(0, 1, 2, 3, 4, 5, 6), eps_grid=(0.5,)):
    dist = x0_marginal(spec)
    tails = marginals.check_tail_conditions(dist, r_grid, eps_grid)
    mix = spec.mixing
    gate = {"tails": tails.to_dict(), "mixing": mix.to_dict()}
    if not (tails.holds_2_10 and tails.holds_2_11):
        raise InapplicableError(f"tail conditions fail: {tails.diagnostics}")
    if not (mix.condition_i or mix.condition_ii):
        raise InapplicableError(
            f"declared dependence satisfies neither mixing condition: {mix.note}")
    return gate


def _staged(stage, func, *args, **kwargs):
    try:
        return func(*args, **kwargs)
    except ShrinkCltError as exc:
        exc.stage = stage
        raise


def clt_experiment(spec, n_grid, reps=5000, seed=0, tol=0.02,
                   eps_grid=(0.25, 0.5, 1.0), workers=1):
    """Solve r(n), draw normalized sums and report normality diagnostics per n.

    Raises :class:`InapplicableError` (``stage == "gate"``) when the marginal
    fails the tail checks or the declared mixing metadata meets neither
    dependence condition.
    """
    gate = _staged("gate", _gate, spec)
    dist = x0_marginal(spec)
    report = CltReport(spec.to_dict(), list(n_grid), reps, seed, tol, list(eps_grid), gate)
    for n in n_grid:
        sol = _staged("solve_rn", solve_rn, spec, n, tol, reps, seed, workers)
        r = sol.r_n
        s = _staged("standardized_sums", standardized_sums, spec, n, r, reps, seed, workers)
        m = marginals.shrunken_mean(dist, r)
        var_y = marginals.shrunken_second_moment(dist, r) - m * m
        mean = float(s.mean())
        var = float(s.var(ddof=1))
        report.samples[n] = s
        report.rows.append({
            "n": n,
            "r_n": r,
            "sigma_hat_solver": sol.sigma_hat,
            "ks": ks_statistic(s),
            "mean": mean,
            "mean_se": math.sqrt(var / len(s)),
            "variance": var,
            "variance_se": float(np.std((s - mean) ** 2, ddof=1) / math.sqrt(len(s))),
            "skewness": float(stats.skew(s)),
            "excess_kurtosis": float(stats.kurtosis(s)),
            "variance_ratio": float(np.mean(s * s)) / (n * var_y),
            "lindeberg": {str(e): n * marginals.lindeberg_tail(dist, r, e) for e in eps_grid},
        })
    ks = [row["ks"] for row in report.rows]
    report.ks_non_increasing = all(b <= a for a, b in zip(ks, ks[1:]))
    return report
