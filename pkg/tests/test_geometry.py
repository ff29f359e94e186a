import numpy as np
import pytest
from scipy.optimize import linprog

from conftest import random_mdp
from rvgeom.geometry import (
    action_values,
    agreement_slice_sample,
    hyperplane_mix,
    intersect_policy_hyperplanes,
    l_vector,
    value_space_contains,
    value_space_membership,
)
from rvgeom.mdp import DimensionError, Mdp, deterministic_policy, evaluate_policies, evaluate_policy, random_policies, value_box


def lp_realizable(m, x):
    """Independent oracle: for fixed x each state's condition is linear in pi_s, so ask an LP."""
    q = action_values(m, x)
    for s in range(m.num_states):
        A = m.num_actions
        res = linprog(np.zeros(A), A_eq=np.vstack([q[s], np.ones(A)]), b_eq=[x[s], 1.0], bounds=[(0, None)] * A, method="highs")
        if res.status != 0:
            return False
    return True


def test_l_vector_self_loop_and_zero_discount(rng):
    m = Mdp([[0.7, 0.1]], [[[1.0], [1.0]]], 0.9)
    lv = l_vector(m, 0, [1.0, 0.0])
    assert np.allclose(lv.normal, [0.1]) and lv.offset == 0.7
    m2 = Mdp([[0.7, 0.0], [0.0, 0.0]], [[[1.0, 0.0], [0.0, 1.0]], [[1.0, 0.0], [1.0, 0.0]]], 0.9)
    lv = l_vector(m2, 0, [1.0, 0.0])
    assert np.allclose(lv.normal, [0.1, 0.0])
    m0 = random_mdp(rng, 3, 2, gamma=0.0)
    assert np.array_equal(l_vector(m0, 1, [0.5, 0.5]).normal, [0.0, 1.0, 0.0])


def test_l_vector_conic_instance(conic):
    m = conic.mdp
    P = conic.uncertainty.per_state[0][0]
    expected = np.array([1.0, 0.0]) - 0.9 * (0.45 * P[0] + 0.55 * P[1])
    assert np.allclose(l_vector(m.with_kernel(conic.uncertainty.kernel([0, 0])), 0, [0.45, 0.55]).normal, expected, atol=1e-15)


def test_intersection_equals_evaluation(rng):
    worst = 0.0
    for _ in range(200):
        S, A = int(rng.integers(1, 6)), int(rng.integers(1, 5))
        m = random_mdp(rng, S, A)
        pi = random_policies(rng, 1, S, A)[0]
        worst = max(worst, np.abs(intersect_policy_hyperplanes(m, pi) - evaluate_policy(m, pi)).max())
    assert worst <= 1e-9
    m = Mdp(np.zeros((2, 2)), np.full((2, 2, 2), 0.5), 0.5)
    assert np.array_equal(intersect_policy_hyperplanes(m, np.full((2, 2), 0.5)), [0.0, 0.0])


def test_policy_values_are_members(fig2, rng):
    V = evaluate_policies(fig2.mdp, random_policies(rng, 2000, 2, 3))
    assert value_space_contains(fig2.mdp, V).all()
    assert value_space_membership(fig2.mdp, evaluate_policy(fig2.mdp, fig2.policy)).verdict


def test_single_action_space_is_one_point(rng):
    m = random_mdp(rng, 3, 1)
    v = evaluate_policy(m, np.ones((3, 1)))
    rep = value_space_membership(m, v + np.array([1.0, 0.0, 0.0]))
    assert not rep.verdict
    assert 0 in rep.violated_states


def test_membership_agrees_with_lp_oracle_and_realizes(fig2, rng):
    m = fig2.mdp
    lo, hi = value_box(m)
    X = rng.uniform(lo, hi, (400, 2))
    # bias half of the points toward the value cloud so both verdicts occur
    V = evaluate_policies(m, random_policies(rng, 200, 2, 3))
    X[:200] = V + rng.normal(0, 0.05, V.shape)
    verdicts = value_space_contains(m, X)
    assert 20 < verdicts.sum() < len(X) - 20
    for x, ok in zip(X, verdicts):
        rep = value_space_membership(m, x)
        assert rep.verdict == ok
        assert lp_realizable(m, x) == ok
        if ok:
            assert np.abs(evaluate_policy(m, rep.policy()) - x).max() <= 1e-9


def test_membership_report_dict(fig2):
    rep = value_space_membership(fig2.mdp, [100.0, 100.0])
    d = rep.to_dict()
    assert d["verdict"] is False and d["violated_states"] == [0, 1]
    with pytest.raises(DimensionError):
        value_space_membership(fig2.mdp, [1.0, 2.0, 3.0])
    with pytest.raises(ValueError):
        value_space_membership(fig2.mdp, [1.0, 2.0], tol=0.0)


def test_hyperplane_mix_zeroes_residual(fig2, rng):
    m = fig2.mdp
    for _ in range(100):
        pi = random_policies(rng, 1, 2, 3)[0]
        x = evaluate_policy(m, pi)
        q = action_values(m, x)[0]
        plus = deterministic_policy(m, [int(np.argmin(q))] * 2)[0]
        minus = deterministic_policy(m, [int(np.argmax(q))] * 2)[0]
        mix = hyperplane_mix(m, 0, x, plus, minus)
        assert abs(l_vector(m, 0, mix).residual(x)) <= 1e-12
    # far above the space every row's residual is positive, so no lower-side row exists
    with pytest.raises(ValueError):
        hyperplane_mix(m, 0, [100.0, 100.0], plus, minus)


def test_agreement_slices(fig2):
    m = fig2.mdp
    V, _ = agreement_slice_sample(m, {0: fig2.policy[0], 1: fig2.policy[1]}, 5, seed=1)
    assert np.allclose(V, evaluate_policy(m, fig2.policy), atol=1e-12)
    V, _ = agreement_slice_sample(m, {}, 500, seed=1)
    assert value_space_contains(m, V).all()
    V, _ = agreement_slice_sample(m, {0: fig2.policy[0]}, 500, seed=2)
    lv = l_vector(m, 0, fig2.policy[0])
    assert np.abs(V @ lv.normal - lv.offset).max() <= 1e-9
    with pytest.raises(ValueError):
        agreement_slice_sample(m, {}, 0, seed=0)
    with pytest.raises(ValueError):
        agreement_slice_sample(m, {5: [1, 0, 0]}, 3, seed=0)
