"""Seeded generators of strictly stationary sequences X_1, ..., X_n.

Four process kinds are supported: i.i.d. draws, a Gaussian AR(1) started in
its stationary law, a finite moving average, and the three-state
cancellation chain in which a Gaussian value entered in state 2 is repeated
with the opposite sign in state 3.

All randomness comes from :mod:`shrinkclt.rng`, keyed by
``(seed, purpose, replicate)``; row ``i`` of :func:`generate` depends only on
``replicates[i]`` and never on the batch it was generated in.
"""

import csv
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import signal, special

from . import rng
from .marginals import MarginalDistribution, Normal, StandardNormal, ZeroInflatedNormal
from .marginals import distribution_from_dict
from .errors import UnsupportedDistributionError

__all__ = [
    "MixingMetadata",
    "IID",
    "GaussianAR1",
    "MovingAverage",
    "CancellationChain",
    "TransitionMatrix",
    "SamplePath",
    "stationary_chain_dist",
    "transition_matrix",
    "x0_marginal",
    "generate",
    "sample_path",
    "process_from_dict",
]


@dataclass(frozen=True)
class MixingMetadata:
    """Declared dependence bounds, taken as facts about the process.

    ``rho_1`` and ``rho_star_1`` are upper bounds (``None`` when nothing is
    declared).  ``rho_bound(n)`` bounds rho(n) for n >= 1.
    """

    rho_1: float | None = None
    rho_star_1: float | None = None
    rho_summable_dyadic: bool = False
    alpha_to_zero: bool = False
    note: str = ""
    rho_decay: float | None = None

    def rho_bound(self, n):
        if self.rho_decay is None:
            return None
        return self.rho_decay**n

    @property
    def condition_i(self):
        """rho(1) < 1 and sum_n rho(2**n) < inf."""
        return self.rho_1 is not None and self.rho_1 < 1 and self.rho_summable_dyadic

    @property
    def condition_ii(self):
        """rho*(1) < 1 and alpha(n) -> 0."""
        return self.rho_star_1 is not None and self.rho_star_1 < 1 and self.alpha_to_zero

    def to_dict(self):
        return {
            "rho_1": self.rho_1,
            "rho_star_1": self.rho_star_1,
            "rho_summable_dyadic": self.rho_summable_dyadic,
            "alpha_to_zero": self.alpha_to_zero,
            "rho_decay": self.rho_decay,
            "condition_i": self.condition_i,
            "condition_ii": self.condition_ii,
            "note": self.note,
        }


@dataclass(frozen=True)
class IID:
    marginal: MarginalDistribution
    kind = "iid"

    @property
    def mixing(self):
        return MixingMetadata(0.0, 0.0, True, True, "independent sequence", 0.0)

    def to_dict(self):
        return {"process": self.kind, "marginal": self.marginal.to_dict()}


@dataclass(frozen=True)
class GaussianAR1:
    """``X_k = phi X_{k-1} + sqrt(1 - phi**2) e_k`` with N(0, 1) marginals."""

    phi: float
    kind = "ar1"

    def __post_init__(self):
        if not -1 < self.phi < 1:
            raise ValueError("AR(1) coefficient must satisfy |phi| < 1")

    @property
    def mixing(self):
        # Gaussian: rho(n) equals the past/future canonical correlation |phi|**n
        return MixingMetadata(
            rho_1=abs(self.phi), rho_star_1=None, rho_summable_dyadic=True,
            alpha_to_zero=True, rho_decay=abs(self.phi),
            note="declared rho(n) <= |phi|^n for the stationary Gaussian AR(1)",
        )

    def to_dict(self):
        return {"process": self.kind, "phi": self.phi}


@dataclass(frozen=True)
class MovingAverage:
    """``X_k = sum_j weights[j] * e_{k-j}`` with i.i.d. innovations.

    The process is ``(len(weights) - 1)``-dependent.  Maximal correlation
    bounds at short lags are not computed; pass them as declarations.
    """

    weights: tuple
    innovation: MarginalDistribution = field(default_factory=StandardNormal)
    declared_rho_1: float | None = None
    declared_rho_star_1: float | None = None
    kind = "ma"

    def __post_init__(self):
        w = tuple(float(x) for x in self.weights)
        if not w or not all(math.isfinite(x) for x in w):
            raise ValueError("moving-average weights must be finite and non-empty")
        object.__setattr__(self, "weights", w)

    @property
    def mixing(self):
        return MixingMetadata(
            rho_1=self.declared_rho_1, rho_star_1=self.declared_rho_star_1,
            rho_summable_dyadic=True, alpha_to_zero=True,
            note=f"{len(self.weights) - 1}-dependent; short-lag bounds user-declared",
        )

    def to_dict(self):
        return {
            "process": self.kind,
            "weights": list(self.weights),
            "innovation": self.innovation.to_dict(),
            "rho_1": self.declared_rho_1,
            "rho_star_1": self.declared_rho_star_1,
        }


@dataclass(frozen=True)
class CancellationChain:
    """Three-state chain with X = 0, Z_k, -Z_{k-1} in states 1, 2, 3.

    ``theta = lam / 4`` is the probability of leaving state 1.
    """

    lam: float
    kind = "cancellation"

    def __post_init__(self):
        if not 0 < self.lam < 1:
            raise ValueError("lambda must lie in (0, 1)")

    @property
    def theta(self):
        return self.lam / 4

    @property
    def mixing(self):
        return MixingMetadata(
            rho_1=1.0, rho_star_1=1.0, rho_summable_dyadic=True, alpha_to_zero=True,
            note="rho(1) = rho*(1) = 1: a state-2 value reappears negated at the next step",
        )

    def to_dict(self):
        return {"process": self.kind, "lambda": self.lam}


@dataclass(frozen=True)
class TransitionMatrix:
    theta: float

    def __post_init__(self):
        _check_theta(self.theta)

    @property
    def rows(self):
        t = self.theta
        return np.array([[1 - t, t, 0.0], [0.0, 0.0, 1.0], [1.0, 0.0, 0.0]])


def _check_theta(theta):
    if not 0 < theta < 0.25:
        raise ValueError(f"theta must lie in (0, 1/4), got {theta!r}")


def stationary_chain_dist(theta):
    """Invariant law ``(1, theta, theta) / (1 + 2 theta)`` of the chain."""
    _check_theta(theta)
    z = 1 + 2 * theta
    return (1 / z, theta / z, theta / z)


def transition_matrix(theta):
    return TransitionMatrix(theta).rows


def x0_marginal(spec):
    """Marginal law of X_0 for a process spec."""
    if isinstance(spec, IID):
        return spec.marginal
    if isinstance(spec, GaussianAR1):
        return StandardNormal()
    if isinstance(spec, CancellationChain):
        return ZeroInflatedNormal(stationary_chain_dist(spec.theta)[0])
    if isinstance(spec, MovingAverage):
        inn = spec.innovation
        if isinstance(inn, Normal):
            scale = math.sqrt(sum(w * w for w in spec.weights))
            return Normal(inn.mean * sum(spec.weights), inn.sd * scale)
        raise UnsupportedDistributionError(
            "moving average with non-normal innovations has no closed-form marginal")
    raise TypeError(f"unknown process spec {spec!r}")


@dataclass
class SamplePath:
    spec: object
    n: int
    seed: int
    values: np.ndarray
    aux: np.ndarray | None = None  # chain states V_0..V_n

    def write_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            if self.aux is None:
                w.writerow(["k", "X_k"])
                for k, x in enumerate(self.values, start=1):
                    w.writerow([k, repr(float(x))])
            else:
                w.writerow(["k", "X_k", "V_k"])
                w.writerow([0, "", int(self.aux[0])])
                for k, x in enumerate(self.values, start=1):
                    w.writerow([k, repr(float(x)), int(self.aux[k])])


def _uniform_rows(seed, purpose, replicates, stream, count):
    return rng.replicate_uniforms(seed, purpose, replicates, stream, 0, count)


def _chain_states(theta, u):
    """Walk the chain for each row; ``u[:, 0]`` draws V_0, ``u[:, k]`` moves to V_k."""
    p1, p2, _ = stationary_chain_dist(theta)
    v = np.empty(u.shape, dtype=np.int8)
    v[:, 0] = np.where(u[:, 0] < p1, 1, np.where(u[:, 0] < p1 + p2, 2, 3))
    for k in range(1, u.shape[1]):
        prev = v[:, k - 1]
        # 2 -> 3 and 3 -> 1 are forced, so every pair is (1,1), (1,2), (2,3) or (3,1)
        v[:, k] = np.where(prev == 1, np.where(u[:, k] < theta, 2, 1),
                           np.where(prev == 2, 3, 1))
    return v


def generate(spec, n, seed, replicates=(0,), purpose="path", with_states=False):
    """Generate a batch of paths, shape ``(len(replicates), n)``.

    With ``with_states=True`` a :class:`CancellationChain` also returns its
    hidden states ``V_0..V_n`` as a second array of shape ``(reps, n + 1)``.
    """
    n = int(n)
    if n < 1:
        raise ValueError("path length n must be >= 1")
    reps = list(replicates)
    states = None

    if isinstance(spec, IID):
        x = spec.marginal.quantile(_uniform_rows(seed, purpose, reps, "x", n))
    elif isinstance(spec, GaussianAR1):
        e = special.ndtri(_uniform_rows(seed, purpose, reps, "x", n))
        e[:, 1:] *= math.sqrt(1 - spec.phi**2)
        x = signal.lfilter([1.0], [1.0, -spec.phi], e, axis=1)
    elif isinstance(spec, MovingAverage):
        q = len(spec.weights)
        e = spec.innovation.quantile(_uniform_rows(seed, purpose, reps, "x", n + q - 1))
        x = signal.lfilter(list(spec.weights), [1.0], e, axis=1)[:, q - 1:]
    elif isinstance(spec, CancellationChain):
        states = _chain_states(spec.theta, _uniform_rows(seed, purpose, reps, "v", n + 1))
        # z[:, k] is Z_k for k = 0..n; the same stored value feeds states 2 and 3
        z = special.ndtri(_uniform_rows(seed, purpose, reps, "z", n + 1))
        v = states[:, 1:]
        x = np.where(v == 2, z[:, 1:], np.where(v == 3, -z[:, :-1], 0.0))
        x = x + 0.0
    else:
        raise TypeError(f"unknown process spec {spec!r}")

    x = np.ascontiguousarray(x, dtype=float)
    if with_states:
        return x, states
    return x


def sample_path(spec, n, seed, replicate=0, purpose="path"):
    """One seeded realization X_1..X_n (plus chain states where applicable)."""
    x, states = generate(spec, n, seed, (replicate,), purpose, with_states=True)
    return SamplePath(spec, int(n), int(seed), x[0],
                      None if states is None else states[0])


def process_from_dict(d):
    """Build a process spec from a config mapping."""
    kind = d.get("process")
    if kind == "iid":
        return IID(distribution_from_dict(d["marginal"]))
    if kind == "ar1":
        return GaussianAR1(float(d["phi"]))
    if kind == "ma":
        inn = distribution_from_dict(d.get("innovation", {"dist": "normal"}))
        return MovingAverage(tuple(d["weights"]), inn, d.get("rho_1"), d.get("rho_star_1"))
    if kind == "cancellation":
        return CancellationChain(float(d["lambda"]))
    raise ValueError(f"unknown process kind {kind!r}")
