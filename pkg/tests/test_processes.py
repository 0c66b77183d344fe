import csv
import math

import numpy as np
import pytest

from shrinkclt import marginals as mg
from shrinkclt import processes as pr
from shrinkclt.errors import UnsupportedDistributionError

SPECS = [
    pr.IID(mg.StandardNormal()), pr.IID(mg.Laplace(1.0)), pr.GaussianAR1(0.5),
    pr.MovingAverage((1.0, 0.5)), pr.CancellationChain(0.4),
]


@pytest.mark.parametrize("spec", SPECS, ids=repr)
def test_same_seed_same_path(spec):
    a = pr.generate(spec, 50, seed=7, replicates=range(4))
    b = pr.generate(spec, 50, seed=7, replicates=range(4))
    c = pr.generate(spec, 50, seed=8, replicates=range(4))
    np.testing.assert_array_equal(a, b)
    assert not np.array_equal(a, c)
    assert a.shape == (4, 50)


@pytest.mark.parametrize("spec", SPECS, ids=repr)
def test_replicate_is_independent_of_batch(spec):
    batch = pr.generate(spec, 30, seed=2, replicates=[0, 5, 9])
    single = pr.generate(spec, 30, seed=2, replicates=[5])
    np.testing.assert_array_equal(batch[1], single[0])


@pytest.mark.parametrize("spec", SPECS, ids=repr)
def test_prefix_consistency(spec):
    short = pr.generate(spec, 20, seed=4, replicates=range(3))
    long = pr.generate(spec, 40, seed=4, replicates=range(3))
    np.testing.assert_array_equal(short, long[:, :20])


@pytest.mark.parametrize("spec", SPECS, ids=repr)
def test_stationarity_smoke(spec):
    x = pr.generate(spec, 18, seed=1, replicates=range(20_000))
    for stat in (lambda v: v, lambda v: v * v, lambda v: np.abs(v) > 1):
        a, b = stat(x[:, 0]).astype(float), stat(x[:, 17]).astype(float)
        se = math.sqrt(a.var() / a.size + b.var() / b.size)
        assert abs(a.mean() - b.mean()) <= 4 * se


@pytest.mark.parametrize("spec", SPECS, ids=repr)
def test_marginal_matches_x0_law(spec):
    law = pr.x0_marginal(spec)
    x = pr.generate(spec, 5, seed=3, replicates=range(40_000))[:, 2]
    for t in (0.5, 1.5):
        p = float(law.tail(t))
        assert abs(np.mean(np.abs(x) > t) - p) <= 4 * math.sqrt(p * (1 - p) / x.size)


def test_x0_marginal_rejects_non_normal_ma():
    with pytest.raises(UnsupportedDistributionError):
        pr.x0_marginal(pr.MovingAverage((1.0, 1.0), mg.Laplace(1.0)))


def test_stationary_law_and_transition():
    theta = 0.1
    pi = np.array(pr.stationary_chain_dist(theta))
    p = pr.transition_matrix(theta)
    np.testing.assert_allclose(pi @ p, pi, atol=1e-15)
    np.testing.assert_allclose(p.sum(axis=1), 1.0)
    assert pi == pytest.approx([1 / 1.2, 0.1 / 1.2, 0.1 / 1.2])
    with pytest.raises(ValueError):
        pr.stationary_chain_dist(0.25)


def test_chain_path_invariants():
    spec = pr.CancellationChain(0.4)
    x, v = pr.generate(spec, 200, seed=0, replicates=range(200), with_states=True)
    assert v.shape == (200, 201)
    prev, cur = v[:, :-1], v[:, 1:]
    assert np.all((prev != 2) | (cur == 3))
    assert np.all((prev != 3) | (cur == 1))
    assert np.all((cur != 2) | (prev == 1))
    assert np.all(x[cur == 1] == 0.0)
    # the value entered in state 2 comes back negated in the next step
    two = np.argwhere(cur[:, :-1] == 2)
    assert two.size
    np.testing.assert_array_equal(x[two[:, 0], two[:, 1] + 1], -x[two[:, 0], two[:, 1]])
    # Gaussian draws are never exactly zero
    assert np.all(x[cur == 2] != 0.0)


def test_chain_state_frequencies():
    spec = pr.CancellationChain(0.4)
    _, v = pr.generate(spec, 500, seed=5, replicates=range(100), with_states=True)
    pi = pr.stationary_chain_dist(spec.theta)
    for state, p in zip((1, 2, 3), pi):
        freq = np.mean(v == state)
        assert abs(freq - p) < 0.01


def test_chain_cancels_pairs_exactly():
    spec = pr.CancellationChain(0.4)
    x, v = pr.generate(spec, 101, seed=9, replicates=range(500), with_states=True)
    # when V_0 is not 2 and V_n is not 2 a left-to-right sum is exactly zero
    clean = (v[:, 0] != 2) & (v[:, -1] != 2)
    assert clean.sum() > 300
    assert np.all(np.cumsum(x[clean], axis=1)[:, -1] == 0.0)


def test_ar1_correlation_decay():
    phi = 0.6
    x = pr.generate(pr.GaussianAR1(phi), 12, seed=0, replicates=range(50_000))
    for lag in (1, 2, 5):
        c = np.corrcoef(x[:, 0], x[:, lag])[0, 1]
        assert abs(c - phi**lag) <= 4 / math.sqrt(x.shape[0])
        assert abs(c) <= phi**lag + 4 / math.sqrt(x.shape[0])


def test_ar1_rejects_unit_root():
    with pytest.raises(ValueError):
        pr.GaussianAR1(1.0)


def test_ma_is_finitely_dependent():
    x = pr.generate(pr.MovingAverage((1.0, 1.0, 1.0)), 8, seed=0, replicates=range(50_000))
    assert abs(np.corrcoef(x[:, 0], x[:, 2])[0, 1] - 1 / 3) < 0.02
    assert abs(np.corrcoef(x[:, 0], x[:, 3])[0, 1]) < 0.02


def test_metadata_conditions():
    assert pr.GaussianAR1(0.5).mixing.condition_i
    assert not pr.CancellationChain(0.4).mixing.condition_i
    assert not pr.CancellationChain(0.4).mixing.condition_ii
    assert pr.IID(mg.StandardNormal()).mixing.rho_bound(3) == 0.0
    ma = pr.MovingAverage((1.0, 1.0), declared_rho_star_1=0.5)
    assert ma.mixing.condition_ii and not ma.mixing.condition_i


def test_process_from_dict_roundtrip():
    for spec in SPECS:
        assert pr.process_from_dict(spec.to_dict()) == spec
    with pytest.raises(ValueError):
        pr.process_from_dict({"process": "garch"})


def test_sample_path_csv(tmp_path):
    path = pr.sample_path(pr.CancellationChain(0.4), 10, seed=3)
    out = tmp_path / "p.csv"
    path.write_csv(out)
    rows = list(csv.reader(out.open()))
    assert rows[0] == ["k", "X_k", "V_k"]
    assert len(rows) == 12
    assert [float(r[1]) for r in rows[2:]] == path.values.tolist()

    iid = pr.sample_path(pr.IID(mg.StandardNormal()), 4, seed=3)
    iid.write_csv(out)
    rows = list(csv.reader(out.open()))
    assert rows[0] == ["k", "X_k"] and len(rows) == 5


def test_bad_length():
    with pytest.raises(ValueError):
        pr.generate(SPECS[0], 0, seed=0)
