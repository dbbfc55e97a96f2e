from __future__ import annotations

import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import random_dense
from lyzero.expsum import apply_quadratic_exponential, eval_expsum, expsum_from_measure
from lyzero.models import (
    HierarchySpec,
    ModelInstance,
    blume_capel_measure,
    coupling_chain,
    coupling_dense,
    coupling_hierarchical,
    ising_measure,
)
from lyzero.theorem import (
    BoundViolated,
    TwoSpinKernel,
    bound_condition_i,
    bound_condition_ii,
    bound_report,
    corollary_bounds,
    epsilon_pm,
    kernel_nonvanishing_margin,
    omega_pm,
    omega_pm_theta,
    pair_zero_locations,
    sharpness_scan,
    two_spin_kernel_value,
    verify_theorem1,
)

# 30-digit reference values computed with mpmath from the defining formulas
SQRT_COSH_1 = 1.2422079676186446754
SQRT_COSH_2 = 1.9396380309438231521
HALF_E_PLUS_1 = 1.3635031771981767618
HALF_E2_PLUS_1 = 2.0480546988460354873
OMEGA_PLUS_1 = 0.72808786609841844295
OMEGA_MINUS_1 = 0.18587767979410180154
EPS_MINUS = -0.75365521882841938287
DELTA_MAX_11 = 0.91003759580145890293


def two_site_threshold(kappa):
    """Largest theta for which the two-site quartic keeps its roots on the circle.

    With ``w = z + 1/z`` the quartic becomes ``e^k w^2 + 4 theta w + 4 theta^2 + 2e^-k - 2e^k``;
    both roots need to be real and in [-2, 2], which fails first through the
    discriminant ``16 theta^2 - 4 e^k (4 theta^2 + 2 e^-k - 2 e^k)``.
    """
    return math.sqrt((math.exp(kappa) + 1) / 2)


# ------------------------------------------------------------ bounds

def test_bound_values():
    assert bound_condition_i(0) == 1.0 and bound_condition_ii(0) == 1.0
    assert bound_condition_i(1) == pytest.approx(SQRT_COSH_1, rel=1e-15)
    assert round(bound_condition_i(1), 4) == 1.2422
    assert bound_condition_i(2) == pytest.approx(SQRT_COSH_2, rel=1e-15)
    assert bound_condition_ii(1) == pytest.approx(HALF_E_PLUS_1, rel=1e-15)
    assert round(bound_condition_ii(1), 4) == 1.3635
    assert bound_condition_ii(2) == pytest.approx(HALF_E2_PLUS_1, rel=1e-15)
    with pytest.raises(ValueError):
        bound_condition_i(-1)


@given(x=st.floats(1e-6, 50))
def test_bound_ordering(x):
    assert bound_condition_ii(x) >= bound_condition_i(x) >= 1.0
    if x < 30:  # beyond that the e^-x gap is below double resolution
        assert bound_condition_ii(x) > bound_condition_i(x)


def test_bound_report_branches():
    chain = coupling_chain(4, 1.0)
    assert bound_report(chain, 1.0, 0.9).applicable == "lieb_sokal"
    r = bound_report(chain, 1.0, 1.2)
    assert r.applicable == "i" and r.theta_bound_ii is None and r.kappa == 1.0
    hier = coupling_hierarchical(HierarchySpec((1.0, 1.0)))
    r = bound_report(hier, 1.0, 1.35)
    assert r.applicable == "ii" and r.theta_bound_ii == pytest.approx(HALF_E_PLUS_1)
    assert bound_report(hier, 1.0, 5.0).applicable is None
    assert bound_report(coupling_chain(3, 1.0), 1.0, 1.1).applicable is None


# ------------------------------------------------------------ two-spin kernel

def test_kernel_identity_at_zero_coupling():
    for theta in (0.3, 1.0, 2.5):
        assert two_spin_kernel_value(TwoSpinKernel(0.0, theta), 0, 0) == pytest.approx(1.0, abs=1e-15)


@settings(max_examples=50, deadline=None)
@given(kappa=st.floats(0.0, 4.0), theta=st.floats(0.05, 4.0),
       xr=st.floats(-3, 3), xi=st.floats(-7, 7), yr=st.floats(-3, 3), yi=st.floats(-7, 7))
def test_kernel_matches_operator_route(kappa, theta, xr, xi, yr, yi):
    s = apply_quadratic_exponential(expsum_from_measure(blume_capel_measure(theta), 2),
                                    np.array([[0, kappa], [kappa, 0]]), 1.0)
    point = [complex(xr, xi), complex(yr, yi)]
    scale = sum(abs(c * np.exp(np.dot(a, point))) for c, a in s.terms())
    got = two_spin_kernel_value(TwoSpinKernel(kappa, theta), *point)
    assert abs(got - eval_expsum(s, point)) <= 1e-13 * scale


@given(kappa=st.floats(0.0, 4.0), theta=st.floats(0.05, 4.0), y=st.floats(-3, 3))
def test_kernel_diagonal(kappa, theta, y):
    k = TwoSpinKernel(kappa, theta)
    assert k.diagonal(y) == pytest.approx(k(y, y).real, rel=1e-12)
    expected = (math.exp(kappa) * math.cosh(y) ** 2 + 2 * theta * math.cosh(y) + theta**2
                - math.sinh(kappa)) / (1 + theta) ** 2
    assert k.diagonal(y) == pytest.approx(expected, rel=1e-13)


def test_kernel_validation():
    with pytest.raises(ValueError):
        TwoSpinKernel(-1.0, 1.0)
    with pytest.raises(ValueError):
        TwoSpinKernel(1.0, 0.0)


@pytest.mark.parametrize("kappa", [0.1, 1.0, 3.0])
def test_kernel_nonvanishing(kappa):
    assert kernel_nonvanishing_margin(kappa, samples=2000, seed=1) > 0


# ------------------------------------------------------------ omega and epsilon

def test_omega_values():
    wm, wp = omega_pm(1.0)
    assert wp == pytest.approx(OMEGA_PLUS_1, rel=1e-14) and wm == pytest.approx(OMEGA_MINUS_1, rel=1e-14)
    wm, wp = omega_pm(1e-8)
    assert wm == pytest.approx(1.0, abs=1e-4) and wp == pytest.approx(1.0, abs=1e-4)
    with pytest.raises(ValueError):
        omega_pm(0.0)


@given(kappa=st.floats(1e-3, 10))
def test_omega_forms_agree(kappa):
    wm, wp = omega_pm(kappa)
    assert 0 < wm <= wp < 1
    am, ap = omega_pm_theta(kappa, math.sqrt(math.cosh(kappa)))
    assert (wm, wp) == pytest.approx((am, ap), rel=1e-9, abs=1e-14)


@given(a=st.floats(1e-3, 10), b=st.floats(1e-3, 10))
def test_omega_plus_decreasing(a, b):
    if abs(a - b) > 1e-6:
        lo, hi = min(a, b), max(a, b)
        assert omega_pm(lo)[1] > omega_pm(hi)[1]


def test_epsilon_example():
    em, ep = epsilon_pm(1.0, 1.2)
    assert em == pytest.approx(EPS_MINUS, rel=1e-14)
    assert abs(ep) <= abs(em) < 1


def test_epsilon_boundary_double_root():
    theta = math.sqrt((math.e + 1) / 2)
    em, ep = epsilon_pm(1.0, theta)
    assert em == pytest.approx(ep, abs=1e-7)
    assert em == pytest.approx(-theta / math.e, rel=1e-7)
    with pytest.raises(BoundViolated):
        epsilon_pm(1.0, theta + 1e-3)


@given(K=st.floats(0.01, 8), frac=st.floats(0.0, 1.0))
def test_epsilon_magnitudes(K, frac):
    theta = 0.05 + frac * (math.sqrt((math.exp(K) + 1) / 2) - 0.05)
    em, ep = epsilon_pm(K, theta)
    assert abs(ep) <= abs(em) < 1
    ys = pair_zero_locations(K, theta)
    assert np.all(ys.real == 0)
    assert np.cosh(ys).real == pytest.approx([em, ep], abs=1e-12)


# ------------------------------------------------------------ corollaries

def test_corollary_values():
    c = corollary_bounds(1.0, 1.0)
    assert c.delta_max == pytest.approx(DELTA_MAX_11, rel=1e-14)
    assert c.delta_max_exceeds_half_kappa  # the comparison with kappa/2 goes the other way
    t = SQRT_COSH_1
    assert c.q_max == pytest.approx(t / (1 + t), rel=1e-14)
    assert corollary_bounds(1.0, 1e-9).q_max == pytest.approx(0.5, abs=1e-9)


@given(beta=st.floats(0.05, 1e4), kappa=st.floats(0.05, 5))
def test_delta_max_above_half_kappa(beta, kappa):
    c = corollary_bounds(beta, kappa)
    assert c.delta_max > c.half_kappa
    # the excess is (ln 2 + ln(1 + e^{-2 beta kappa})) / (2 beta) -> 0 as beta grows
    assert c.delta_max - c.half_kappa <= math.log(4) / (2 * beta) + 1e-12


# ------------------------------------------------------------ theorem verification

def test_verify_chain_branch_i():
    rec = verify_theorem1(ModelInstance(blume_capel_measure(1.2), coupling_chain(4, 1.0), 1.0))
    assert rec.branch == "i" and rec.predicted is True and rec.observed is True and rec.consistent
    assert rec.bound_used == pytest.approx(SQRT_COSH_1)


def test_verify_hierarchy_branch_ii():
    m = ModelInstance(blume_capel_measure(1.35), coupling_hierarchical(HierarchySpec((1.0, 1.0))), 1.0)
    rec = verify_theorem1(m)
    assert rec.branch == "ii" and rec.predicted and rec.observed


def test_verify_silent():
    m = ModelInstance(blume_capel_measure(5.0), coupling_chain(4, 1.0), 1.0)
    rec = verify_theorem1(m)
    assert rec.predicted is None and rec.consistent
    assert rec.to_dict()["predicted"] == "theorem silent"
    assert rec.observed is False


@settings(max_examples=15, deadline=None)
@given(n=st.sampled_from([2, 4, 6, 8, 10]), seed=st.integers(0, 2**31), frac=st.floats(0, 1),
       beta=st.floats(0.1, 2.0))
def test_verify_dense_predicted_implies_observed(n, seed, frac, beta):
    rng = np.random.default_rng(seed)
    K = coupling_dense(random_dense(rng, n, density=0.8))
    rep = bound_report(K, beta)
    theta = 0.05 + frac * (rep.best_bound - 0.05)
    rec = verify_theorem1(ModelInstance(blume_capel_measure(theta), K, beta))
    assert rec.predicted is True and rec.observed is True


@settings(max_examples=15, deadline=None)
@given(levels=st.lists(st.floats(0.1, 2.0), min_size=1, max_size=4), frac=st.floats(0, 1))
def test_verify_hierarchy_predicted_implies_observed(levels, frac):
    K = coupling_hierarchical(HierarchySpec(tuple(levels)))
    rep = bound_report(K, 1.0)
    theta = 0.05 + frac * (rep.best_bound - 0.05)
    rec = verify_theorem1(ModelInstance(blume_capel_measure(theta), K, 1.0))
    assert rec.predicted is True and rec.observed is True


def test_verify_ising_measure():
    rec = verify_theorem1(ModelInstance(ising_measure(), coupling_chain(5, 1.0), 1.0))
    assert rec.branch == "lieb_sokal" and rec.observed


# ------------------------------------------------------------ sharpness

def pair_family(kappa, beta=1.0):
    return lambda t: ModelInstance(blume_capel_measure(t), coupling_chain(2, kappa), beta)


def test_sharpness_pair_kappa_one():
    res = sharpness_scan(pair_family(1.0), np.linspace(1.0, 1.6, 13))
    crit = two_site_threshold(1.0)
    assert res.theta_lo <= crit <= res.theta_hi
    assert res.width <= 1e-4 and res.monotone and res.consistent
    assert res.theta_bound == pytest.approx(HALF_E_PLUS_1)
    # branch (i) sits strictly below the exact threshold
    res_i = sharpness_scan(pair_family(1.0), np.linspace(1.0, 1.6, 13), theta_bound=SQRT_COSH_1)
    assert res_i.bound_below_bracket
    assert res_i.gap == pytest.approx(crit - SQRT_COSH_1, abs=1e-4)


def test_two_site_threshold_oracle():
    # independent check of the discriminant formula with numpy's companion-matrix roots
    kappa = 1.0
    for theta, on in ((two_site_threshold(kappa) - 1e-3, True), (two_site_threshold(kappa) + 1e-3, False)):
        c = [math.exp(kappa), 4 * theta, 4 * theta**2 + 2 * math.exp(-kappa), 4 * theta, math.exp(kappa)]
        assert (np.max(np.abs(np.abs(np.roots(c)) - 1)) < 1e-6) == on


def test_sharpness_weak_coupling_tends_to_one():
    res = sharpness_scan(pair_family(0.01), np.linspace(0.9, 1.2, 7))
    assert res.theta_lo == pytest.approx(1.0, abs=5e-3)


def test_sharpness_hierarchy():
    spec = HierarchySpec((1.0, 0.5))
    fam = lambda t: ModelInstance(blume_capel_measure(t), coupling_hierarchical(spec), 1.0)
    res = sharpness_scan(fam, np.linspace(1.0, 2.0, 11))
    assert res.theta_lo >= bound_condition_ii(min(spec.levels))
    assert res.consistent


def test_sharpness_reports_non_monotone():
    base = ModelInstance(blume_capel_measure(1.0), coupling_chain(2, 1.0), 1.0)
    fam = lambda t: base.with_theta(0.5 if t in (1.0, 3.0) else 3.0)
    res = sharpness_scan(fam, [1.0, 2.0, 3.0], theta_bound=1.0)
    assert not res.monotone and res.holds == [True, False, True]
    d = res.to_dict()
    assert d["monotone"] is False and "theta_crit_interval" in d


def test_sharpness_extended_bisection_is_exact():
    # the bisection runs in extended precision; the bracket must contain the analytic value
    with mpmath.workdps(30):
        crit = float(mpmath.sqrt((mpmath.e ** 2 + 1) / 2))
    res = sharpness_scan(pair_family(2.0), np.linspace(1.8, 2.3, 6))
    assert res.theta_lo <= crit <= res.theta_hi
