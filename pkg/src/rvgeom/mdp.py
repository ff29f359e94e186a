"""Finite MDP model, validation and exact policy evaluation.

Policies are plain ``(S, A)`` float arrays whose rows are distributions over
actions; a deterministic row is a one-hot vector.
"""

from dataclasses import dataclass

import numpy as np

STOCH_TOL = 1e-12


class DimensionError(ValueError):
    """Raised when array shapes of cooperating objects disagree."""


def _frozen(arr, ndim, name):
    arr = np.array(arr, dtype=float)
    if arr.ndim != ndim:
        raise DimensionError(f"{name} must have {ndim} dimensions, got shape {arr.shape}")
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True, eq=False)
class Mdp:
    """Finite MDP ``(S, A, P, r, gamma)``.

    Parameters
    ----------
    rewards : array_like, shape (S, A)
        Immediate reward ``r[s, a]``.
    kernel : array_like, shape (S, A, S)
        Transition rows ``P[s, a]``.
    gamma : float
        Discount factor in ``[0, 1)``.

    Construction checks shapes only.  Value constraints (stochastic rows,
    discount range, finite rewards) are reported by :func:`validate_mdp`.
    """

    rewards: np.ndarray
    kernel: np.ndarray
    gamma: float

    def __post_init__(self):
        r = _frozen(self.rewards, 2, "rewards")
        P = _frozen(self.kernel, 3, "kernel")
        S, A = r.shape
        if P.shape != (S, A, S):
            raise DimensionError(f"kernel shape {P.shape} does not match rewards {r.shape}; expected {(S, A, S)}")
        object.__setattr__(self, "rewards", r)
        object.__setattr__(self, "kernel", P)
        object.__setattr__(self, "gamma", float(self.gamma))

    @property
    def num_states(self):
        return self.rewards.shape[0]

    @property
    def num_actions(self):
        return self.rewards.shape[1]

    def with_kernel(self, kernel):
        return Mdp(self.rewards, kernel, self.gamma)


def validate_mdp(m):
    """Return a list of human-readable invariant violations (empty if valid)."""
    problems = []
    if not (0.0 <= m.gamma < 1.0):
        problems.append(f"gamma {m.gamma!r} not in [0,1)")
    bad = np.argwhere(~np.isfinite(m.rewards))
    for s, a in bad:
        problems.append(f"reward not finite at (s{s + 1},a{a + 1})")
    S, A = m.rewards.shape
    for s in range(S):
        for a in range(A):
            row = m.kernel[s, a]
            if not np.all(np.isfinite(row)):
                problems.append(f"kernel row not finite at (s{s + 1},a{a + 1})")
                continue
            if row.min() < 0.0:
                problems.append(f"negative probability {row.min():.6g} at (s{s + 1},a{a + 1})")
            total = row.sum()
            if abs(total - 1.0) > STOCH_TOL:
                problems.append(f"row sum {total:.6g} ≠ 1 at (s{s + 1},a{a + 1})")
    return problems


def check_policy(m, pi):
    """Coerce ``pi`` to an ``(S, A)`` array and check it is stochastic."""
    pi = np.asarray(pi, dtype=float)
    if pi.shape != (m.num_states, m.num_actions):
        raise DimensionError(f"policy shape {pi.shape} does not match MDP ({m.num_states}, {m.num_actions})")
    check_distribution(pi, "policy")
    return pi


def check_distribution(rows, what="row"):
    rows = np.asarray(rows, dtype=float)
    if rows.size and (rows.min() < -STOCH_TOL or np.abs(rows.sum(axis=-1) - 1.0).max() > STOCH_TOL):
        raise ValueError(f"{what} is not a probability distribution")
    return rows


def policy_transition(m, pi):
    """State-to-state matrix whose row s is ``sum_a pi[s, a] P[s, a]``."""
    pi = check_policy(m, pi)
    return np.einsum("sa,saj->sj", pi, m.kernel)


def policy_reward(m, pi):
    """Expected immediate reward vector ``r_pi[s] = sum_a pi[s, a] r[s, a]``."""
    pi = check_policy(m, pi)
    return np.einsum("sa,sa->s", pi, m.rewards)


def evaluate_policy(m, pi):
    """Exact value of ``pi``: the solution of ``(I - gamma P_pi) V = r_pi``."""
    P = policy_transition(m, pi)
    r = policy_reward(m, pi)
    return np.linalg.solve(np.eye(m.num_states) - m.gamma * P, r)


def evaluate_policies(m, policies):
    """Values of a stack of policies, shape ``(N, S)``."""
    policies = np.asarray(policies, dtype=float)
    P = np.einsum("nsa,saj->nsj", policies, m.kernel)
    r = np.einsum("nsa,sa->ns", policies, m.rewards)
    return np.linalg.solve(np.eye(m.num_states) - m.gamma * P, r[..., None])[..., 0]


def deterministic_policy(m, actions):
    """One-hot policy selecting ``actions[s]`` at each state."""
    pi = np.zeros((m.num_states, m.num_actions))
    pi[np.arange(m.num_states), np.asarray(actions)] = 1.0
    return pi


def random_simplex(rng, shape):
    """Uniform draws from the simplex along the last axis.

    Normalized unit-exponential variates; ``shape[-1]`` is the simplex size.
    """
    e = rng.exponential(1.0, size=shape)
    return e / e.sum(axis=-1, keepdims=True)


def random_policies(rng, n, num_states, num_actions):
    return random_simplex(rng, (n, num_states, num_actions))


def value_box(m):
    """A-priori bounds ``[min r / (1 - gamma), max r / (1 - gamma)]`` on every value entry."""
    scale = 1.0 / (1.0 - m.gamma)
    return float(m.rewards.min() * scale), float(m.rewards.max() * scale)
