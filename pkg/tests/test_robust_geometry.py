import numpy as np
import pytest

from conftest import random_mdp, random_s_rect, random_sa_rect, routing_rmdp
from rvgeom.fixtures import load_fixture
from rvgeom.games import maximin_row_mix
from rvgeom.geometry import value_space_contains
from rvgeom.mdp import DimensionError, Mdp, evaluate_policy, random_policies, value_box
from rvgeom.robust import (
    SRectangularSet,
    robust_evaluate_policies,
    robust_evaluate_policy,
    robust_optimal_value,
    sa_to_s_rectangular,
    singleton_set,
)
from rvgeom.robust_geometry import (
    APEX_TOL,
    axis_line_interval,
    conic_membership,
    conic_region,
    conic_surface_mix,
    region_bounds,
    region_bounds_batch,
    robust_space_contains,
    robust_space_membership,
    robust_value_at_cone_intersection,
    state_payoff,
)


def test_singleton_region_is_one_hyperplane(fig2):
    u = singleton_set(fig2.mdp)
    reg = conic_region(fig2.mdp, u, 0, fig2.policy[0])
    assert len(reg.hyperplanes) == 1
    v = evaluate_policy(fig2.mdp, fig2.policy)
    assert conic_membership(reg, v).on_surface


def test_zero_reward_apex_is_origin(rng):
    m, u = random_s_rect(rng, 3, 2)
    m0 = Mdp(np.zeros((3, 2)), m.kernel, m.gamma)
    assert np.array_equal(conic_region(m0, u, 1, [0.3, 0.7]).apex, np.zeros(3))


def test_conic_fixture_apex(conic):
    reg = conic_region(conic.mdp, conic.uncertainty, 0, [0.45, 0.55])
    assert len(reg.hyperplanes) == 4
    assert np.abs(reg.residuals(reg.apex)).max() <= APEX_TOL


def test_conic_membership_translations(conic):
    m = conic.mdp
    reg = conic_region(m, conic.uncertainty, 0, [0.45, 0.55])
    assert conic_membership(reg, reg.apex).on_surface
    below = conic_membership(reg, reg.apex - 1.0)
    assert below.inside_minus and not below.on_surface and not below.inside_plus
    assert np.allclose(reg.residuals(reg.apex - 1.0), -(1 - m.gamma))
    with pytest.raises(DimensionError):
        conic_membership(reg, [0.0])


def test_agreeing_values_on_surface():
    inst = load_fixture("rmdp_agreement")
    m, u, row = inst.mdp, inst.uncertainty, inst.policy[0]
    rng = np.random.default_rng(5)
    pis = random_policies(rng, 1000, 2, 2)
    pis[:, 0, :] = row
    V, _ = robust_evaluate_policies(m, u, pis)
    reg = conic_region(m, u, 0, row)
    tops = np.array([conic_membership(reg, v, 1e-8).max_residual for v in V])
    assert np.abs(tops).max() <= 1e-8


def test_cone_intersection_cases(fig2, rng):
    rep = robust_value_at_cone_intersection(fig2.mdp, singleton_set(fig2.mdp), fig2.policy)
    assert rep.passed and np.allclose(rep.value, evaluate_policy(fig2.mdp, fig2.policy))
    m, u = routing_rmdp()
    rep = robust_value_at_cone_intersection(m, u, np.ones((2, 1)))
    assert rep.passed and np.allclose(rep.value, [1.0, 0.0])
    for _ in range(50):
        S, A = int(rng.integers(1, 4)), int(rng.integers(1, 4))
        m, u = random_s_rect(rng, S, A)
        assert robust_value_at_cone_intersection(m, u, random_policies(rng, 1, S, A)[0]).passed


def test_robust_membership_values_and_realization(srect, rng):
    m, u = srect.mdp, srect.uncertainty
    V, _ = robust_evaluate_policies(m, u, random_policies(rng, 2000, 2, 2))
    assert robust_space_contains(m, u, V, 1e-8).all()
    for v in V[:30]:
        rep = robust_space_membership(m, u, v, 1e-8)
        assert rep.verdict
        assert np.abs(robust_evaluate_policy(m, u, rep.policy()).value - v).max() <= 1e-8
    v_opt, _ = robust_optimal_value(m, u)
    rep = robust_space_membership(m, u, v_opt + 1.0)
    assert not rep.verdict and rep.violated_states == [0, 1]


def test_sa_input_matches_converted(sarect, rng):
    m = sarect.mdp
    lo, hi = value_box(m)
    X = rng.uniform(lo, hi, (500, 2))
    a = robust_space_contains(m, sarect.uncertainty, X)
    b = robust_space_contains(m, sa_to_s_rectangular(sarect.uncertainty), X)
    assert np.array_equal(a, b)
    rep = robust_space_membership(m, sarect.uncertainty, X[0])
    assert rep.verdict == a[0]


def test_singleton_robust_space_is_value_space(fig2, rng):
    m = fig2.mdp
    lo, hi = value_box(m)
    X = rng.uniform(lo, hi, (3000, 2))
    assert np.array_equal(robust_space_contains(m, singleton_set(m), X), value_space_contains(m, X))


def _min_lambda_mix(q, xs, pi_plus, pi_minus):
    """The surface mix with the smallest crossing instead of the largest."""
    alpha = xs - pi_plus @ q
    beta = pi_minus @ q - xs
    if beta.min() <= 0.0:
        return pi_minus.copy()
    pick = alpha >= 0.0
    lam = float((alpha[pick] / (alpha[pick] + beta[pick])).min())
    return (1.0 - lam) * pi_plus + lam * pi_minus


def test_surface_mix_needs_largest_crossing(srect):
    m, u = srect.mdp, srect.uncertainty
    x = robust_evaluate_policy(m, u, srect.policy).value
    good, bad = np.zeros((2, 2)), np.zeros((2, 2))
    for s in range(2):
        q = state_payoff(m, u, s, x)
        a = np.unravel_index(int(np.argmin(q)), q.shape)[0]
        plus = np.eye(2)[a]
        minus, _ = maximin_row_mix(q)
        good[s] = conic_surface_mix(m, u, s, x, plus, minus)
        bad[s] = _min_lambda_mix(q, x[s], plus, minus)
    assert np.abs(robust_evaluate_policy(m, u, good).value - x).max() <= 1e-8
    # the smallest crossing leaves another kernel's hyperplane above x
    assert np.abs(robust_evaluate_policy(m, u, bad).value - x).max() > 1e-2


def test_region_bounds_chain_and_gap(srect, rng):
    m, u = srect.mdp, srect.uncertainty
    lo, hi = value_box(m)
    g = np.linspace(lo, hi, 200)
    X = np.array(np.meshgrid(g, g)).reshape(2, -1).T
    gap = 0
    for s in range(2):
        qmin, lower, exact, upper = region_bounds_batch(m, u, X, s)
        assert (lower <= exact + 1e-12).all() and (exact <= upper + 1e-12).all()
        member = robust_space_contains(m, u, X)
        gap += int((member & (X[:, s] > lower + 1e-6)).sum())
    assert gap > 0
    for x in X[rng.choice(len(X), 200, replace=False)]:
        for s in range(2):
            rep = region_bounds(m, u, x, s)
            assert rep.lower <= rep.exact + 1e-12 <= rep.upper + 2e-12


def test_region_bounds_sa_and_singleton(rng):
    for _ in range(5):
        m, u = random_sa_rect(rng, 2, 3)
        conv = sa_to_s_rectangular(u)
        lo, hi = value_box(m)
        X = rng.uniform(lo, hi, (2000, 2))
        for s in range(2):
            _, lower, exact, _ = region_bounds_batch(m, conv, X, s)
            assert np.abs(lower - exact).max() <= 1e-9
    m = random_mdp(rng, 2, 3)
    rep = region_bounds(m, singleton_set(m), [1.0, 2.0], 0)
    assert rep.lower == pytest.approx(rep.exact) == pytest.approx(rep.upper)


def test_batch_matches_scalar_reports(srect, rng):
    m, u = srect.mdp, srect.uncertainty
    X = rng.uniform(*value_box(m), (50, 2))
    qmin, lower, exact, upper = region_bounds_batch(m, u, X, 1)
    for i, x in enumerate(X):
        rep = region_bounds(m, u, x, 1)
        assert rep.lower == pytest.approx(lower[i], abs=1e-12)
        assert rep.exact == pytest.approx(exact[i], abs=1e-10)
        assert rep.upper == pytest.approx(upper[i], abs=1e-12)
        assert robust_space_membership(m, u, x).verdict == robust_space_contains(m, u, x)[0]


def test_axis_line_cases(rng):
    m = random_mdp(rng, 2, 1)
    u = singleton_set(m)
    v = evaluate_policy(m, np.ones((2, 1)))
    iv = axis_line_interval(m, u, v, 0)
    assert not iv.empty and abs(iv.lo) <= 1e-6 and abs(iv.hi) <= 1e-6
    far = np.full(2, 1e3)
    assert axis_line_interval(m, u, far, 0).empty
    for _ in range(20):
        m, u = random_s_rect(rng, 2, 2)
        v, _ = robust_evaluate_policies(m, u, random_policies(rng, 1, 2, 2))
        iv = axis_line_interval(m, u, v[0], int(rng.integers(2)))
        assert not iv.empty and iv.contiguous and iv.lo <= 1e-6 and iv.hi >= -1e-6


def test_axis_line_scan_validation(srect):
    with pytest.raises(ValueError):
        axis_line_interval(srect.mdp, srect.uncertainty, [1.0, 1.0], 0, scan=(0.0, 1.0, 1))


def test_membership_tol_validation(srect):
    with pytest.raises(ValueError):
        robust_space_membership(srect.mdp, srect.uncertainty, [1.0, 1.0], tol=-1.0)
    with pytest.raises(DimensionError):
        robust_space_membership(srect.mdp, srect.uncertainty, [1.0, 1.0, 1.0])
    u3 = SRectangularSet(tuple(np.full((1, 2, 3), 1 / 3) for _ in range(3)))
    with pytest.raises(DimensionError):
        robust_space_membership(srect.mdp, u3, [1.0, 1.0])
