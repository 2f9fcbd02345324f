import json
from pathlib import Path

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from conftest import make_sample
from fdmcar.errors import DegenerateError
from fdmcar.estimators import (
    covariance_kernel_hat,
    ecdf_surface,
    estimate_nu,
    group_mean,
    mean_difference,
    rho_hat,
)
from fdmcar.mcar import stat_cvm, stat_l2, stat_sup
from fdmcar.partition import GroupLabels
from fdmcar.sample import FunctionalSample, Grid, SubdomainIndex

FIXTURES = json.loads((Path(__file__).parent / "fixtures" / "micro.json").read_text())
RTOL = 1e-12


def _build(fx):
    vals = np.array([[np.nan if v is None else v for v in row] for row in fx["values"]])
    mask = np.array(fx["mask"], dtype=bool)
    sample = FunctionalSample(Grid.equispaced(vals.shape[1]), np.nan_to_num(vals), mask)
    labels = GroupLabels.from_strings(fx["labels"])
    return sample, labels, SubdomainIndex.full(vals.shape[1])


def _close(got, want):
    np.testing.assert_allclose(np.asarray(got, dtype=float), np.asarray(want, dtype=float), rtol=RTOL, atol=1e-15)


@pytest.mark.parametrize("fx", FIXTURES, ids=[f["name"] for f in FIXTURES])
def test_matches_frozen_oracle(fx):
    sample, labels, sub = _build(fx)
    exp = fx["expected"]
    for g in "AB":
        m = group_mean(sample, labels, sub, g)
        _close(m.mu, exp[f"mu_{g}"])
        _close(m.p_hat, exp[f"p_hat_{g}"])
        _close(ecdf_surface(sample, labels, sub, g, fx["z_stat"]).F, exp[f"F_{g}"])
    _close(covariance_kernel_hat(sample, labels, sub).k, exp["k"])
    _close(rho_hat(sample, labels, sub, points=(fx["t_pos"], fx["z_rho"])).rho, exp["rho"])
    nu = estimate_nu(sample, sub)
    _close([nu.theta, nu.tau2], exp["nu"])
    _close(stat_l2(sample, labels, sub), exp["l2"])
    _close(stat_sup(sample, labels, sub), exp["sup"])
    _close(stat_cvm(sample, labels, sub, z=fx["z_stat"]), exp["cvm"])


@pytest.mark.parametrize("fx", FIXTURES, ids=[f["name"] for f in FIXTURES])
def test_frozen_values_still_match_live_oracle(fx):
    vals = [[0.0 if v is None else v for v in row] for row in fx["values"]]
    cols = list(range(len(vals[0])))
    _close(oracles.kernel(vals, fx["mask"], fx["labels"], cols), fx["expected"]["k"])
    _close(oracles.rho(vals, fx["mask"], fx["labels"], cols, fx["t_pos"], fx["z_rho"]), fx["expected"]["rho"])


def test_fixture_hand_values(four_curves):
    sample, labels, sub = four_curves
    a, b = group_mean(sample, labels, sub, "A"), group_mean(sample, labels, sub, "B")
    assert a.p_hat.tolist() == [0.5, 0.5] and a.mu.tolist() == [2.0, 3.0]
    assert b.p_hat.tolist() == [0.5, 0.25] and b.mu.tolist() == [6.0, 8.0]
    assert ecdf_surface(sample, labels, sub, "B", [6.0]).F[0, 0] == 0.5


def test_ecdf_extremes(four_curves):
    F = ecdf_surface(*four_curves, "A", [-100.0, 100.0]).F
    assert F[:, 0].tolist() == [0.0, 0.0] and F[:, 1].tolist() == [1.0, 1.0]


def test_default_z_grid_monotone(four_curves):
    est = ecdf_surface(*four_curves, "B")
    assert est.z_grid.size == 101
    assert np.all(np.diff(est.F, axis=1) >= 0)


def test_identical_curves_equal_means():
    s = make_sample([[1.0, 2.0, 3.0]] * 3 + [[1.0, 2.0, np.nan]])
    labels = GroupLabels(np.array([True, True, False, False]))
    sub = SubdomainIndex(np.array([0, 1]), 0.1)
    assert np.all(mean_difference(s, labels, sub) == 0)


def test_kernel_zero_for_single_curves():
    s = make_sample([[1.0, 2.0], [3.0, 5.0]])
    k = covariance_kernel_hat(s, GroupLabels(np.array([True, False])), SubdomainIndex.full(2)).k
    assert np.all(k == 0)


def test_kernel_unchanged_by_duplication(four_curves):
    sample, labels, sub = four_curves
    rows = np.r_[np.arange(4), np.arange(4)]
    k1 = covariance_kernel_hat(sample, labels, sub).k
    k2 = covariance_kernel_hat(sample.take(rows), labels.take(rows), sub).k
    np.testing.assert_allclose(k1, k2, rtol=1e-14)


def test_rho_symmetric_and_finite_below_data(four_curves):
    rho = rho_hat(*four_curves, points=([0, 1, 0], [-50.0, -50.0, -50.0])).rho
    assert np.all(np.isfinite(rho)) and np.array_equal(rho, rho.T)


def test_rho_draws_are_reproducible(four_curves):
    r1 = rho_hat(*four_curves, K=7, rng=3)
    r2 = rho_hat(*four_curves, K=7, rng=3)
    assert np.array_equal(r1.rho, r2.rho) and np.array_equal(r1.t_pos, r2.t_pos)
    assert r1.K == 7 and r1.domain_length == 1.0


def test_nu_constant_curves_fail():
    s = make_sample([[2.0, 2.0]] * 3)
    with pytest.raises(DegenerateError):
        estimate_nu(s, SubdomainIndex.full(2))


def test_nu_needs_two_observations():
    s = make_sample([[1.0, 2.0], [3.0, np.nan]])
    with pytest.raises(DegenerateError):
        estimate_nu(s, SubdomainIndex.full(2))


def _random_case(seed, n=6, p=4):
    rng = np.random.default_rng(seed)
    vals = rng.standard_normal((n, p))
    mask = rng.random((n, p)) < 0.8
    mask[:2] = True
    mask[2:4] = True
    labels = GroupLabels(np.array([True, False] * (n // 2)))
    return FunctionalSample(Grid.equispaced(p), vals, mask), labels, SubdomainIndex.full(p)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**31), st.floats(-50, 50))
def test_translation(seed, c):
    s, labels, sub = _random_case(seed)
    shifted = s.with_values(s.values + c)
    np.testing.assert_allclose(
        group_mean(shifted, labels, sub, "A").mu, group_mean(s, labels, sub, "A").mu + c, atol=1e-9
    )
    np.testing.assert_allclose(mean_difference(shifted, labels, sub), mean_difference(s, labels, sub), atol=1e-9)
    n1, n2 = estimate_nu(s, sub), estimate_nu(shifted, sub)
    assert n2.theta == pytest.approx(n1.theta + c, abs=1e-9)
    assert n2.tau2 == pytest.approx(n1.tau2, rel=1e-8, abs=1e-9)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**31))
def test_ecdf_monotone_transform(seed):
    s, labels, sub = _random_case(seed)
    z = np.linspace(-2, 2, 9)
    f1 = ecdf_surface(s, labels, sub, "A", z).F
    f2 = ecdf_surface(s.with_values(np.exp(s.values)), labels, sub, "A", np.exp(z)).F
    assert np.array_equal(f1, f2)
    assert np.all(np.diff(f1, axis=1) >= 0) and f1.min() >= 0 and f1.max() <= 1


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**31))
def test_kernel_psd_when_complete(seed):
    rng = np.random.default_rng(seed)
    s = FunctionalSample(Grid.equispaced(5), rng.standard_normal((7, 5)), np.ones((7, 5), bool))
    labels = GroupLabels(np.array([1, 0, 1, 0, 1, 1, 0], bool))
    k = covariance_kernel_hat(s, labels, SubdomainIndex.full(5)).k
    assert np.array_equal(k, k.T)
    assert np.linalg.eigvalsh(k).min() >= -1e-10 * np.abs(k).max()
