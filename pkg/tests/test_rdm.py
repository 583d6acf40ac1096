import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from rbmscramble.oracle import thermal_means
from rbmscramble.rbm import RbmParams
from rbmscramble.rdm import (
    bound_curve,
    conventional_lb,
    eta,
    eta_from_otoc,
    exact_rdm_spectrum,
    full_enumeration_spectrum,
    gibbs_rdm_spectrum,
    ieta_scan,
    lower_bound,
    mutual_information,
    one_rdm,
    upper_bound,
)

# 1 - H2(1/4) in bits: lower bound at eta = 1/2
LB_HALF = 0.18872187554086717
# H2((1 + sqrt(1/2))/2) in bits: upper bound at eta = 1/2
UB_HALF = 0.6008760366928565

simplex = st.lists(st.floats(1e-6, 1.0), min_size=4, max_size=4).map(lambda x: np.array(x) / sum(x))


def test_bound_examples():
    assert lower_bound(0.5) == pytest.approx(LB_HALF, abs=1e-12)
    assert upper_bound(0.5) == pytest.approx(UB_HALF, abs=1e-12)
    assert lower_bound(0.0) == 0.0 and upper_bound(0.0) == 0.0
    assert lower_bound(1.0) == pytest.approx(1.0) and upper_bound(-1.0) == pytest.approx(1.0)
    assert lower_bound(0.5, base="nats") == pytest.approx(LB_HALF * math.log(2), abs=1e-12)
    assert conventional_lb(0.5) == 0.125
    with pytest.raises(ValueError):
        lower_bound(1.5)
    with pytest.raises(ValueError):
        upper_bound(-1.01)
    with pytest.raises(ValueError):
        mutual_information([0.25] * 4, base="dits")


def test_mi_examples():
    assert mutual_information([0.5, 0, 0, 0.5]) == pytest.approx(1.0)
    assert eta([0.5, 0, 0, 0.5]) == pytest.approx(1.0)
    prod = np.outer([0.3, 0.7], [0.6, 0.4]).reshape(-1)
    assert mutual_information(prod) == pytest.approx(0.0, abs=1e-12)
    assert eta(prod) == pytest.approx(0.0, abs=1e-15)
    vis, hid = one_rdm([0.1, 0.2, 0.3, 0.4])
    assert vis == pytest.approx((0.3, 0.7)) and hid == pytest.approx((0.4, 0.6))


@settings(max_examples=300, deadline=None)
@given(simplex)
def test_mi_between_bounds(lam):
    e = eta(lam)
    mi = mutual_information(lam)
    assert -1 <= e <= 1
    assert lower_bound(e) - 1e-12 <= mi <= upper_bound(e) + 1e-12


@settings(max_examples=100, deadline=None)
@given(simplex)
def test_relabelling_symmetry(lam):
    flipped_v = lam[[2, 3, 0, 1]]
    swapped = lam[[0, 2, 1, 3]]
    assert eta(flipped_v) == pytest.approx(-eta(lam), abs=1e-12)
    assert mutual_information(flipped_v) == pytest.approx(mutual_information(lam), abs=1e-12)
    assert eta(swapped) == pytest.approx(eta(lam), abs=1e-12)
    assert mutual_information(swapped) == pytest.approx(mutual_information(lam), abs=1e-12)


def test_bounds_even_and_ordered():
    curve = bound_curve(401)
    assert curve.shape == (401, 4)
    assert np.allclose(curve[:, 1], curve[::-1, 1], atol=1e-12)
    assert np.all(curve[:, 1] <= curve[:, 2] + 1e-12)
    assert np.all(np.diff(curve[200:, 1]) >= 0)


@pytest.mark.parametrize("seed", range(3))
def test_exact_spectrum_matches_full_enumeration(seed):
    X = RbmParams.random(5, 4, seed=seed, std=0.8)
    for k, m in [(0, 0), (3, 2), (4, 3)]:
        a = exact_rdm_spectrum(X, k, m).lambdas
        b = full_enumeration_spectrum(X, k, m).lambdas
        assert np.allclose(a, b, atol=1e-12)
        zv, zh, zz = thermal_means(X, k, m)
        assert eta(a) == pytest.approx(zz - zv * zh, abs=1e-12)


def test_zero_params_give_uniform_spectrum():
    X = RbmParams.zeros(4, 3)
    for spec in (exact_rdm_spectrum(X, 1, 2), gibbs_rdm_spectrum(X, 1, 2, 50, seed=0)):
        assert np.allclose(spec.lambdas, 0.25, atol=1e-15)
        assert mutual_information(spec) == 0.0


def test_gibbs_within_standard_error():
    X = RbmParams.random(6, 6, seed=7, std=0.6)
    exact = exact_rdm_spectrum(X, 2, 3).lambdas
    est = gibbs_rdm_spectrum(X, 2, 3, 100_000, seed=1)
    assert np.all(np.abs(est.lambdas - exact) <= np.maximum(3 * est.stderr, 0.01))
    again = gibbs_rdm_spectrum(X, 2, 3, 100_000, seed=1)
    assert np.array_equal(est.lambdas, again.lambdas)


def test_gibbs_error_decays():
    X = RbmParams.random(8, 4, seed=2, std=0.9)
    exact = exact_rdm_spectrum(X, 0, 1).lambdas
    errs = []
    sizes = [1_000, 16_000]
    for n in sizes:
        errs.append(np.mean([np.abs(gibbs_rdm_spectrum(X, 0, 1, n, seed=s).lambdas - exact).sum() for s in range(20)]))
    # 16x more samples: error shrinks by ~4
    assert 2.5 <= errs[0] / errs[1] <= 6.5


def test_gibbs_rejects_empty():
    with pytest.raises(ValueError):
        gibbs_rdm_spectrum(RbmParams.zeros(2, 2), 0, 0, 0)


def test_ieta_scan_order_and_containment():
    X = RbmParams.random(3, 2, seed=4, std=1.0)
    scan = ieta_scan(X, g_label=0.5)
    assert [p.pair for p in scan.points] == [(k, m) for k in range(3) for m in range(2)]
    assert scan.contained() and scan.median_lb_gap >= -1e-12
    with pytest.raises(ValueError):
        ieta_scan(X, mode="mcmc")
    nats = ieta_scan(X, base="nats")
    assert nats.points[0].mi == pytest.approx(scan.points[0].mi * math.log(2), abs=1e-12)
    g = ieta_scan(X, mode="gibbs", n_samples=2000, seed=3)
    assert g.points[0].stderr_eta is not None and g.points[0].stderr_eta > 0


@pytest.mark.parametrize("source", ["analytic", "brute"])
def test_eta_from_otoc_matches_rdm(source):
    X = RbmParams.random(3, 3, seed=6, std=0.7)
    for k, m in [(0, 0), (2, 1)]:
        assert eta_from_otoc(X, k, m, source) == pytest.approx(eta(exact_rdm_spectrum(X, k, m)), abs=1e-10)


def test_eta_from_otoc_weak_coupling():
    X = RbmParams([0.2, -0.1], [0.3], [[1e-6], [0.4]])
    assert eta_from_otoc(X, 0, 0) == pytest.approx(eta(exact_rdm_spectrum(X, 0, 0)), abs=1e-10)
    Z = RbmParams([0.2, -0.1], [0.3], [[0.0], [0.4]])
    with pytest.raises(ValueError):
        eta_from_otoc(Z, 0, 0)
    with pytest.raises(ValueError):
        eta_from_otoc(X, 1, 0, source="tables")
