import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import random_mdp
from rvgeom.mdp import (
    DimensionError,
    Mdp,
    check_policy,
    deterministic_policy,
    evaluate_policies,
    evaluate_policy,
    policy_reward,
    policy_transition,
    random_policies,
    validate_mdp,
    value_box,
)


def neumann_value(m, pi, steps=1_000_000):
    """Truncated series sum_t (gamma P)^t r, summed by repeated squaring of the partial sums."""
    P = policy_transition(m, pi)
    r = policy_reward(m, pi)
    # partial sum of 2^j terms: S_{2n} = S_n + (gamma P)^n S_n
    power = m.gamma * P
    total = r.copy()
    n = 1
    while n < steps:
        total = total + power @ total
        power = power @ power
        n *= 2
    return total


def test_validate_fig2_instance_is_clean(fig2):
    assert validate_mdp(fig2.mdp) == []


def test_validate_reports_row_sum():
    m = Mdp([[0.0]], [[[0.5]]], 0.9)
    m2 = Mdp([[0.0], [0.0]], [[[0.5, 0.4]], [[0.0, 1.0]]], 0.9)
    assert any("row sum" in p for p in validate_mdp(m))
    assert validate_mdp(m2) == ["row sum 0.9 ≠ 1 at (s1,a1)"]


def test_validate_reports_gamma_and_negative():
    m = Mdp([[0.0, 0.0]], [[[1.0], [1.0]]], 1.0)
    assert validate_mdp(m) == ["gamma 1.0 not in [0,1)"]
    m = Mdp([[np.inf]], [[[1.0]]], 0.5)
    assert any("not finite" in p for p in validate_mdp(m))
    m = Mdp([[0.0], [0.0]], [[[1.5, -0.5]], [[0.0, 1.0]]], 0.5)
    assert any("negative" in p for p in validate_mdp(m))


def test_shape_mismatch_raises():
    with pytest.raises(DimensionError):
        Mdp(np.zeros((2, 3)), np.zeros((2, 2, 2)), 0.9)
    m = random_mdp(np.random.default_rng(0), 2, 3)
    with pytest.raises(DimensionError):
        check_policy(m, np.full((2, 2), 0.5))
    with pytest.raises(ValueError):
        check_policy(m, np.full((2, 3), 0.5))


def test_arrays_are_read_only(fig2):
    with pytest.raises(ValueError):
        fig2.mdp.kernel[0, 0, 0] = 1.0


def test_policy_transition_single_action_and_deterministic(rng):
    m = random_mdp(rng, 3, 1)
    assert np.array_equal(policy_transition(m, np.ones((3, 1))), m.kernel[:, 0, :])
    m = random_mdp(rng, 3, 4)
    acts = [2, 0, 3]
    P = policy_transition(m, deterministic_policy(m, acts))
    assert np.array_equal(P, m.kernel[np.arange(3), acts])


def test_policy_transition_fig2_row(fig2):
    m, pi = fig2.mdp, fig2.policy
    expected = 0.2 * m.kernel[0, 0] + 0.3 * m.kernel[0, 1] + 0.5 * m.kernel[0, 2]
    assert np.allclose(policy_transition(m, pi)[0], expected, atol=1e-15)


def test_policy_reward_cases(rng, conic):
    m = random_mdp(rng, 2, 3)
    zero = Mdp(np.zeros((2, 3)), m.kernel, 0.9)
    assert np.array_equal(policy_reward(zero, np.full((2, 3), 1 / 3)), np.zeros(2))
    pi = deterministic_policy(m, [1, 2])
    assert np.array_equal(policy_reward(m, pi), [m.rewards[0, 1], m.rewards[1, 2]])
    assert policy_reward(conic.mdp, conic.policy)[0] == pytest.approx(0.555, abs=1e-15)


def test_evaluate_zero_rewards_and_self_loops():
    m = Mdp(np.zeros((2, 2)), np.full((2, 2, 2), 0.5), 0.9)
    assert np.array_equal(evaluate_policy(m, np.full((2, 2), 0.5)), np.zeros(2))
    m = Mdp([[1.0], [0.0]], [[[1.0, 0.0]], [[0.0, 1.0]]], 0.9)
    assert np.allclose(evaluate_policy(m, np.ones((2, 1))), [10.0, 0.0], atol=1e-12)


def test_evaluate_fig2_matches_series(fig2):
    v = evaluate_policy(fig2.mdp, fig2.policy)
    assert np.abs(v - neumann_value(fig2.mdp, fig2.policy)).max() <= 1e-8


def test_evaluate_policies_matches_single(rng):
    m = random_mdp(rng, 4, 3)
    pis = random_policies(rng, 50, 4, 3)
    V = evaluate_policies(m, pis)
    assert np.abs(V - np.array([evaluate_policy(m, p) for p in pis])).max() <= 1e-12


@settings(max_examples=60, deadline=None)
@given(
    seed=st.integers(0, 2**32 - 1),
    S=st.integers(1, 5),
    A=st.integers(1, 4),
    gamma=st.floats(0.0, 0.99),
)
def test_value_is_bellman_fixed_point_and_in_box(seed, S, A, gamma):
    rng = np.random.default_rng(seed)
    m = random_mdp(rng, S, A, gamma)
    pi = random_policies(rng, 1, S, A)[0]
    v = evaluate_policy(m, pi)
    bellman = policy_reward(m, pi) + gamma * policy_transition(m, pi) @ v
    assert np.abs(bellman - v).max() <= 1e-10 * max(1.0, np.abs(v).max())
    lo, hi = value_box(m)
    assert lo - 1e-9 <= v.min() and v.max() <= hi + 1e-9


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), shift=st.floats(-5.0, 5.0))
def test_reward_shift_moves_value_along_ones(seed, shift):
    rng = np.random.default_rng(seed)
    m = random_mdp(rng, 3, 2)
    pi = random_policies(rng, 1, 3, 2)[0]
    shifted = Mdp(m.rewards + shift, m.kernel, m.gamma)
    diff = evaluate_policy(shifted, pi) - evaluate_policy(m, pi)
    assert np.allclose(diff, shift / (1 - m.gamma), atol=1e-9)
