import numpy as np
import pytest

from conftest import random_mdp, random_s_rect, routing_rmdp
from rvgeom.geometry import action_values
from rvgeom.mdp import DimensionError, Mdp, evaluate_policy, random_policies
from rvgeom.robust import (
    CapExceeded,
    SARectangularSet,
    SRectangularSet,
    action_rows,
    brute_force_robust_value,
    robust_bellman_apply,
    robust_evaluate_policies,
    robust_evaluate_policy,
    robust_optimal_value,
    sa_to_s_rectangular,
    singleton_set,
)


def test_sa_conversion_products(sarect):
    u = sa_to_s_rectangular(sarect.uncertainty)
    assert list(u.counts) == [4, 4]
    # lexicographic in the per-action row indices: (0,0), (0,1), (1,0), (1,1)
    per_a = sarect.uncertainty.per_state_action[0]
    assert np.array_equal(u.per_state[0][1], np.stack([per_a[0][0], per_a[1][1]]))
    with pytest.raises(CapExceeded):
        sa_to_s_rectangular(sarect.uncertainty, cap=2)


def test_sa_conversion_singletons(rng):
    m = random_mdp(rng, 3, 2)
    u = SARectangularSet(tuple(tuple(m.kernel[s, a][None] for a in range(2)) for s in range(3)))
    conv = sa_to_s_rectangular(u)
    assert list(conv.counts) == [1, 1, 1]
    assert np.array_equal(conv.kernel([0, 0, 0]), m.kernel)


def test_action_rows_round_trip(sarect):
    u = sa_to_s_rectangular(sarect.uncertainty)
    back = action_rows(u)
    for s in range(2):
        for a in range(2):
            assert np.array_equal(back.per_state_action[s][a], sarect.uncertainty.per_state_action[s][a])


def test_bellman_apply_cases(rng):
    m, u = random_s_rect(rng, 3, 2)
    pi = random_policies(rng, 1, 3, 2)[0]
    r_pi = (pi * m.rewards).sum(axis=1)
    assert np.allclose(robust_bellman_apply(m, u, pi, np.zeros(3)), r_pi)
    v = rng.normal(size=3)
    single = robust_bellman_apply(m, singleton_set(m), pi, v)
    assert np.allclose(single, r_pi + m.gamma * np.einsum("sa,saj,j->s", pi, m.kernel, v))
    # a candidate that is elementwise smaller in <P[a], v> for every action is the one chosen
    lo = np.zeros((2, 3))
    lo[:, np.argmin(v)] = 1.0
    hi = np.zeros((2, 3))
    hi[:, np.argmax(v)] = 1.0
    u2 = SRectangularSet((np.stack([hi, lo]), m.kernel[1][None], m.kernel[2][None]))
    out = robust_bellman_apply(m, u2, pi, v)
    assert out[0] == pytest.approx(r_pi[0] + m.gamma * v.min())


def test_routing_example():
    m, u = routing_rmdp()
    pi = np.ones((2, 1))
    res = robust_evaluate_policy(m, u, pi)
    assert np.allclose(res.value, [1.0, 0.0], atol=1e-12)
    assert res.worst_kernel == (1, 0)
    bf = brute_force_robust_value(m, u, pi)
    assert np.allclose(bf.value, [1.0, 0.0]) and bf.worst_kernel == (1, 0)


def test_singleton_equals_plain(rng):
    for _ in range(20):
        m = random_mdp(rng, 3, 3)
        pi = random_policies(rng, 1, 3, 3)[0]
        res = robust_evaluate_policy(m, singleton_set(m), pi)
        assert np.abs(res.value - evaluate_policy(m, pi)).max() <= 1e-12
        assert brute_force_robust_value(m, singleton_set(m), pi).worst_kernel == (0, 0, 0)


def test_fixture_matches_brute_force(srect):
    m, u, pi = srect.mdp, srect.uncertainty, srect.policy
    res = robust_evaluate_policy(m, u, pi)
    bf = brute_force_robust_value(m, u, pi)
    assert np.abs(res.value - bf.value).max() <= 1e-8
    assert res.worst_kernel == bf.worst_kernel
    assert res.residual <= 1e-9


def test_random_against_brute_force(rng):
    for _ in range(100):
        S, A = int(rng.integers(1, 4)), int(rng.integers(1, 4))
        m, u = random_s_rect(rng, S, A)
        pi = random_policies(rng, 1, S, A)[0]
        res = robust_evaluate_policy(m, u, pi, tol=1e-10)
        bf = brute_force_robust_value(m, u, pi)
        assert np.abs(res.value - bf.value).max() <= 1e-8
        assert res.residual <= 10 * 1e-10


def test_brute_force_cap(rng):
    m, u = random_s_rect(rng, 3, 2, k_max=3)
    u = SRectangularSet(tuple(np.concatenate([k, k, k]) for k in u.per_state))
    with pytest.raises(CapExceeded):
        brute_force_robust_value(m, u, np.full((3, 2), 0.5), cap=10)


def test_batched_equals_single(rng):
    m, u = random_s_rect(rng, 3, 3)
    pis = random_policies(rng, 30, 3, 3)
    V, W = robust_evaluate_policies(m, u, pis)
    for p, v, w in zip(pis, V, W):
        res = robust_evaluate_policy(m, u, p)
        assert np.abs(v - res.value).max() <= 1e-10
        assert tuple(w) == res.worst_kernel


def test_shape_errors(rng):
    m, u = random_s_rect(rng, 3, 2)
    m2 = random_mdp(rng, 2, 2)
    with pytest.raises(DimensionError):
        robust_evaluate_policy(m2, u, np.full((2, 2), 0.5))
    with pytest.raises(DimensionError):
        robust_bellman_apply(m, u, np.full((3, 2), 0.5), np.zeros(2))
    with pytest.raises(ValueError):
        robust_evaluate_policy(m, u, np.full((3, 2), 0.5), tol=0)


def test_optimal_value_cases(rng, srect):
    m = random_mdp(rng, 3, 1)
    v, _ = robust_optimal_value(m, singleton_set(m))
    assert np.allclose(v, evaluate_policy(m, np.ones((3, 1))), atol=1e-9)
    # per-action singletons: robust sa-mode is ordinary value iteration
    m = random_mdp(rng, 3, 3)
    v_sa, pol = robust_optimal_value(m, singleton_set(m), mode="sa_rect")
    v_plain = np.zeros(3)
    for _ in range(2000):
        v_plain = action_values(m, v_plain).max(axis=1)
    assert np.allclose(v_sa, v_plain, atol=1e-8)
    assert np.allclose(evaluate_policy(m, pol), v_plain, atol=1e-8)
    # optimal value dominates sampled policies
    m, u = srect.mdp, srect.uncertainty
    v_opt, _ = robust_optimal_value(m, u)
    V, _ = robust_evaluate_policies(m, u, random_policies(rng, 10_000, 2, 2))
    assert (V <= v_opt + 1e-6).all()
    with pytest.raises(ValueError):
        robust_optimal_value(m, u, mode="bogus")


def test_set_validation():
    with pytest.raises(DimensionError):
        SRectangularSet((np.zeros((1, 2, 2)), np.zeros((1, 3, 2))))
    u = SRectangularSet((np.array([[[0.5, 0.4]]]), np.array([[[0.0, 1.0]]])))
    assert any("row sum" in v for v in u.violations())
    m = Mdp([[0.0], [0.0]], [[[1.0, 0.0]], [[0.0, 1.0]]], 0.5)
    assert singleton_set(m).violations() == []
