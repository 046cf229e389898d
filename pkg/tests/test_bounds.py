import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import stats

from macropeaks.bounds import (
    BorellParams,
    borell_tis_bound,
    calibrate_lopes,
    cube_mesh,
    empirical_max_lower_tail,
    estimate_mu,
    lopes_bound,
    lopes_constants,
    lopes_level,
    lower_tail_table,
    sample_cube_maxima,
    tail_frequency,
)
from macropeaks.errors import DomainError, RangeError, SizeCapExceeded
from macropeaks.spectral import Exponential


def exp_corr(r):
    return np.exp(-np.asarray(r, dtype=float))


def white(r):
    return (np.asarray(r, dtype=float) == 0).astype(float)


def test_borell_examples():
    assert borell_tis_bound(0.0, BorellParams(0.0)) == 1.0
    assert borell_tis_bound(3.0, BorellParams(0.0)) == pytest.approx(2 * math.exp(-4.5), rel=1e-15)
    assert borell_tis_bound(3.0, BorellParams(0.0)) == pytest.approx(0.02222, abs=1e-5)
    with pytest.raises(RangeError):
        borell_tis_bound(1.0, BorellParams(2.0))


def test_mu_of_two_independent_points():
    params = estimate_mu(white, [0.0], mesh=2, replicates=100_000, seed=1)
    assert abs(params.mu - 1 / math.sqrt(math.pi)) <= 3 * params.stderr


def test_mu_single_point():
    params = estimate_mu(exp_corr, [0.0], mesh=1, replicates=100_000, seed=2)
    assert abs(params.mu) <= 3 * params.stderr


def test_mu_stationary_across_anchors():
    a = estimate_mu(exp_corr, [5.0], mesh=9, replicates=50_000, seed=3)
    b = estimate_mu(exp_corr, [40.0], mesh=9, replicates=50_000, seed=4)
    assert abs(a.mu - b.mu) <= 3 * math.hypot(a.stderr, b.stderr)


def test_cube_mesh_shape():
    assert cube_mesh([1.0, 2.0], 3).shape == (9, 2)
    assert cube_mesh([1.0], 1).tolist() == [[1.0]]
    with pytest.raises(DomainError):
        cube_mesh([0.0], 0)


@pytest.mark.parametrize("model", [exp_corr, Exponential(d=1, lam=3.0)])
def test_borell_dominates_tail_frequencies(model):
    params = estimate_mu(model, [5.0], replicates=20_000, seed=10)
    maxima = sample_cube_maxima(model, [5.0], 17, 20_000, seed=11)
    upper = params.mu + 3 * params.stderr
    for shift in (0.5, 1.0, 2.0, 3.0):
        x = upper + shift
        p, se = tail_frequency(maxima, x)
        assert p <= borell_tis_bound(x, upper) + 3 * max(se, 1 / maxima.size)


def test_lopes_constants_examples():
    par = lopes_constants(0.5, 0.25)
    assert par.alpha0 == pytest.approx(0.25, rel=1e-15)
    assert par.beta0 == pytest.approx(0.5, rel=1e-15)
    assert lopes_constants(1 - 1e-9, 0.25).alpha0 < 1e-8
    near = lopes_constants(0.5, 1 - 1e-9)
    assert near.alpha0 < 1e-9 and near.beta0 < 1e-8
    with pytest.raises(DomainError):
        lopes_constants(1.0, 0.25)
    with pytest.raises(DomainError):
        lopes_constants(0.3, 0.0)


@given(st.floats(0.01, 0.99), st.floats(0.01, 0.99))
def test_lopes_constants_relation(rho0, gamma0):
    par = lopes_constants(rho0, gamma0)
    assert par.alpha0 == par.beta0 * (1 - math.sqrt(gamma0))
    assert par.alpha0 > 0 and par.beta0 > 0


def test_lopes_bound_examples():
    par = lopes_constants(0.5, 0.25)
    assert lopes_bound(math.e**2, par) == pytest.approx(math.exp(-0.5) * 2**-0.25, rel=1e-14)
    assert lopes_bound(100, par, 2.0) == pytest.approx(2 * lopes_bound(100, par), rel=1e-15)
    vals = [lopes_bound(2.0**k, par) for k in range(10, 200, 20)]
    assert all(b < a for a, b in zip(vals, vals[1:]))
    assert vals[-1] < 1e-9
    with pytest.raises(DomainError):
        lopes_bound(1, par)


def test_calibration():
    par = lopes_constants(0.3, 0.25)
    c = calibrate_lopes(256, 0.1, par)
    assert lopes_bound(256, par, c) == pytest.approx(0.1, rel=1e-14)


@pytest.mark.parametrize("n", [16, 256, 4096])
def test_independent_limit_matches_product_of_cdfs(n):
    gamma0 = 0.25
    est = empirical_max_lower_tail(n, 0.0, gamma0, replicates=100_000, seed=5)
    exact = stats.norm.cdf(math.sqrt(2 * gamma0 * math.log(n))) ** n
    assert abs(est.probability - exact) <= 3 * math.sqrt(exact * (1 - exact) / est.replicates)


def test_single_variable_is_half():
    est = empirical_max_lower_tail(1, 0.3, 0.25, replicates=100_000, seed=6)
    assert abs(est.probability - 0.5) <= 3 * math.sqrt(0.25 / est.replicates)


def test_exact_and_direct_samplers_agree():
    a = empirical_max_lower_tail(64, 0.3, 0.25, replicates=40_000, seed=7, method="exact")
    b = empirical_max_lower_tail(64, 0.3, 0.25, replicates=40_000, seed=8, method="direct")
    assert abs(a.probability - b.probability) <= 3 * math.hypot(a.stderr, b.stderr)


def test_lower_tail_monotone_in_n():
    table = lower_tail_table([2**k for k in range(4, 14)], 0.3, 0.25, 50_000, seed=9)
    for a, b in zip(table, table[1:]):
        assert b.probability <= a.probability + 3 * math.hypot(a.stderr, b.stderr)


def test_lopes_level_and_cap():
    assert lopes_level(1, 0.3, 0.25) == 0.0
    with pytest.raises(SizeCapExceeded):
        empirical_max_lower_tail(10**9, 0.3, 0.25, replicates=10)


def test_lower_tail_deterministic():
    a = empirical_max_lower_tail(512, 0.3, 0.25, replicates=5000, seed=3)
    b = empirical_max_lower_tail(512, 0.3, 0.25, replicates=5000, seed=3)
    assert a == b
