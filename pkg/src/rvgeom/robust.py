"""Rectangular uncertainty sets and robust policy evaluation.

Uncertainty sets are finite.  A convex polyhedral set enters through its
vertex list, which loses nothing: the adversary's one-step objective is
linear in the kernel, so its minimum over the hull is attained at a vertex.
"""

import itertools
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from . import _kernels
from .games import maximin_row_mix
from .mdp import STOCH_TOL, DimensionError, check_policy, evaluate_policy

DEFAULT_CAP = 4096
DEFAULT_TOL = 1e-10


class CapExceeded(ValueError):
    """An enumeration would exceed its configured size cap."""


class NoMinimalCombination(AssertionError):
    """No candidate combination is elementwise minimal (rectangularity broken)."""


@dataclass(frozen=True, eq=False)
class SRectangularSet:
    """Per-state candidate kernels; ``per_state[s]`` has shape ``(K_s, A, S)``."""

    per_state: tuple

    def __post_init__(self):
        arrs = []
        for s, ks in enumerate(self.per_state):
            ks = np.array(ks, dtype=float)
            if ks.ndim != 3:
                raise DimensionError(f"candidates at state {s} must be a (K, A, S) stack, got shape {ks.shape}")
            ks.flags.writeable = False
            arrs.append(ks)
        S = len(arrs)
        shapes = {k.shape[1:] for k in arrs}
        if S and (len(shapes) != 1 or next(iter(shapes))[1] != S):
            raise DimensionError(f"candidate kernels must all be (A, {S}); got {sorted(shapes)}")
        object.__setattr__(self, "per_state", tuple(arrs))

    @property
    def num_states(self):
        return len(self.per_state)

    @property
    def num_actions(self):
        return self.per_state[0].shape[1]

    @property
    def counts(self):
        return np.array([k.shape[0] for k in self.per_state], dtype=np.int64)

    @cached_property
    def padded(self):
        """``(cand, counts)`` with ``cand`` of shape ``(S, Kmax, A, S)``, zero padded."""
        counts = self.counts
        S, A = self.num_states, self.num_actions
        cand = np.zeros((S, max(int(counts.max()), 1), A, S))
        for s, ks in enumerate(self.per_state):
            cand[s, : len(ks)] = ks
        return cand, counts

    def violations(self):
        out = []
        for s, ks in enumerate(self.per_state):
            if len(ks) == 0:
                out.append(f"empty candidate list at s{s + 1}")
                continue
            if ks.min() < 0:
                out.append(f"negative probability in candidates at s{s + 1}")
            dev = np.abs(ks.sum(axis=2) - 1.0)
            for k, a in np.argwhere(dev > STOCH_TOL):
                out.append(f"row sum {ks[k, a].sum():.6g} ≠ 1 in candidate {k + 1} at (s{s + 1},a{a + 1})")
        return out

    def kernel(self, choice):
        """Assemble the full ``(S, A, S)`` kernel picking ``choice[s]`` at each state."""
        return np.stack([self.per_state[s][k] for s, k in enumerate(choice)])

    def num_combinations(self):
        return int(np.prod([len(k) for k in self.per_state], dtype=object))


@dataclass(frozen=True, eq=False)
class SARectangularSet:
    """Per state-action candidate rows; ``per_state_action[s][a]`` has shape ``(K_sa, S)``."""

    per_state_action: tuple

    def __post_init__(self):
        rows = []
        S = len(self.per_state_action)
        for s, per_a in enumerate(self.per_state_action):
            row = []
            for a, cands in enumerate(per_a):
                c = np.array(cands, dtype=float)
                if c.ndim != 2 or (c.size and c.shape[1] != S):
                    raise DimensionError(f"candidates at (s{s + 1},a{a + 1}) must be (K, {S}), got shape {c.shape}")
                c.flags.writeable = False
                row.append(c)
            rows.append(tuple(row))
        if len({len(r) for r in rows}) > 1:
            raise DimensionError("every state needs the same number of actions")
        object.__setattr__(self, "per_state_action", tuple(rows))

    @property
    def num_states(self):
        return len(self.per_state_action)

    @property
    def num_actions(self):
        return len(self.per_state_action[0])

    def violations(self):
        out = []
        for s, per_a in enumerate(self.per_state_action):
            for a, c in enumerate(per_a):
                if len(c) == 0:
                    out.append(f"empty candidate list at (s{s + 1},a{a + 1})")
                    continue
                if c.min() < 0:
                    out.append(f"negative probability at (s{s + 1},a{a + 1})")
                for k in np.flatnonzero(np.abs(c.sum(axis=1) - 1.0) > STOCH_TOL):
                    out.append(f"row sum {c[k].sum():.6g} ≠ 1 in candidate {k + 1} at (s{s + 1},a{a + 1})")
        return out


@dataclass
class RobustEvalResult:
    value: np.ndarray
    worst_kernel: tuple
    iterations: int
    residual: float


def singleton_set(m):
    """The uncertainty set containing only the MDP's own kernel."""
    return SRectangularSet(tuple(m.kernel[s][None] for s in range(m.num_states)))


def sa_to_s_rectangular(u, cap=DEFAULT_CAP):
    """Expand per state-action rows into per-state kernels (Cartesian product over actions).

    Kernels are listed in lexicographic order of the per-action row indices.
    """
    per_state = []
    for s, per_a in enumerate(u.per_state_action):
        n = int(np.prod([len(c) for c in per_a], dtype=object))
        if n > cap:
            raise CapExceeded(f"state s{s + 1} expands to {n} kernels, cap is {cap}")
        kernels = [np.stack([per_a[a][k] for a, k in enumerate(ks)]) for ks in itertools.product(*(range(len(c)) for c in per_a))]
        S = u.num_states
        per_state.append(np.array(kernels).reshape(len(kernels), len(per_a), S))
    return SRectangularSet(tuple(per_state))


def action_rows(u):
    """Per state-action row lists of an s-rectangular set (its rectangular relaxation).

    Duplicate rows are dropped, keeping first occurrences.
    """
    per_sa = []
    for ks in u.per_state:
        per_a = []
        for a in range(ks.shape[1]):
            _, first = np.unique(ks[:, a, :], axis=0, return_index=True)
            per_a.append(ks[np.sort(first), a, :])
        per_sa.append(tuple(per_a))
    return SARectangularSet(tuple(per_sa))


def _check_set(m, u):
    if u.num_states != m.num_states or u.num_actions != m.num_actions:
        raise DimensionError(f"uncertainty set is {u.num_states}x{u.num_actions}, MDP is {m.num_states}x{m.num_actions}")
    for s, ks in enumerate(u.per_state):
        if len(ks) == 0:
            raise ValueError(f"empty candidate list at state s{s + 1}")


def _state_scores(m, u, pi, v):
    """``scores[s][k] = r_pi[s] + gamma <P_s^(k) pi_s, v>`` for every candidate."""
    out = []
    for s, ks in enumerate(u.per_state):
        rows = np.einsum("a,kaj->kj", pi[s], ks)
        out.append(pi[s] @ m.rewards[s] + m.gamma * rows @ v)
    return out


def robust_bellman_apply(m, u, pi, v):
    """One application of the robust evaluation operator for policy ``pi``."""
    _check_set(m, u)
    pi = check_policy(m, pi)
    v = np.asarray(v, dtype=float)
    if v.shape != (m.num_states,):
        raise DimensionError(f"value has shape {v.shape}, expected ({m.num_states},)")
    return np.array([sc.min() for sc in _state_scores(m, u, pi, v)])


def _argmin_lowest(scores, v):
    eps = 1e-12 * (1.0 + np.abs(v).max())
    return tuple(int(np.flatnonzero(sc <= sc.min() + eps)[0]) for sc in scores)


def robust_evaluate_policy(m, u, pi, tol=DEFAULT_TOL, max_iter=1_000_000):
    """Robust value of ``pi`` by fixed-point iteration from zero.

    Iterates until the sup-norm step is at most ``tol * (1 - gamma) / gamma``
    (so the iterate is within ``tol`` of the fixed point), extracts the
    lowest-index minimizing kernel at each state and evaluates that kernel
    exactly.  Adversary policy iteration then polishes the choice, so the
    returned value solves the robust fixed-point equation to machine
    precision; ``residual`` is its sup-norm robust Bellman residual and
    ``iterations`` counts the fixed-point sweeps.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    _check_set(m, u)
    pi = check_policy(m, pi)
    g = m.gamma
    stop = tol * (1.0 - g) / g if g > 0 else np.inf
    cand, counts = u.padded
    rows = np.einsum("sa,skaj->skj", pi, cand)
    r_pi = np.einsum("sa,sa->s", pi, m.rewards)
    pad = np.arange(cand.shape[1])[None, :] >= counts[:, None]
    v = np.zeros(m.num_states)
    it = 0
    while True:
        it += 1
        scores = r_pi[:, None] + g * (rows @ v)
        scores[pad] = np.inf
        nv = scores.min(axis=1)
        step = np.abs(nv - v).max()
        v = nv
        if step <= stop or it >= max_iter:
            break
    choice = _argmin_lowest(_state_scores(m, u, pi, v), v)
    exact = evaluate_policy(m.with_kernel(u.kernel(choice)), pi)
    # near-ties at the stopping point can leave a suboptimal choice; adversary
    # policy iteration (strictly improving switches only) repairs it
    for _ in range(10_000):
        scores = _state_scores(m, u, pi, exact)
        eps = 1e-13 * (1.0 + np.abs(exact).max())
        changed = False
        new = list(choice)
        for s, sc in enumerate(scores):
            if sc[choice[s]] > sc.min() + eps:
                new[s] = int(np.flatnonzero(sc <= sc.min() + eps)[0])
                changed = True
        if not changed:
            break
        choice = tuple(new)
        exact = evaluate_policy(m.with_kernel(u.kernel(choice)), pi)
    lowest = _argmin_lowest(_state_scores(m, u, pi, exact), exact)
    if lowest != choice:
        choice = lowest
        exact = evaluate_policy(m.with_kernel(u.kernel(choice)), pi)
    residual = float(np.abs(robust_bellman_apply(m, u, pi, exact) - exact).max())
    return RobustEvalResult(exact, choice, it, residual)


def robust_evaluate_policies(m, u, policies, use=None):
    """Robust values of a stack of policies via the batched kernel.

    Returns
    -------
    values : ndarray, shape (N, S)
    worst : ndarray of int, shape (N, S)
    """
    _check_set(m, u)
    policies = np.asarray(policies, dtype=float)
    if policies.ndim != 3 or policies.shape[1:] != (m.num_states, m.num_actions):
        raise DimensionError(f"policies must be (N, {m.num_states}, {m.num_actions}), got {policies.shape}")
    cand, counts = u.padded
    return _kernels.robust_values_batch(m.rewards, cand, counts, m.gamma, policies, use=use)


def brute_force_robust_value(m, u, pi, cap=DEFAULT_CAP):
    """Robust value by enumerating every kernel combination.

    Picks the first combination (lexicographic order) whose value is
    elementwise no larger than every other's; under s-rectangularity one
    always exists.
    """
    _check_set(m, u)
    pi = check_policy(m, pi)
    n = u.num_combinations()
    if n > cap:
        raise CapExceeded(f"{n} kernel combinations exceed cap {cap}")
    combos = list(itertools.product(*(range(len(k)) for k in u.per_state)))
    kernels = np.stack([u.kernel(c) for c in combos])
    P = np.einsum("sa,nsaj->nsj", pi, kernels)
    r = np.einsum("sa,sa->s", pi, m.rewards)
    rhs = np.broadcast_to(r, (len(combos), m.num_states))[..., None]
    values = np.linalg.solve(np.eye(m.num_states) - m.gamma * P, rhs)[..., 0]
    floor = values.min(axis=0)
    slack = 1e-10 * (1.0 + np.abs(floor).max())
    minimal = np.flatnonzero((values <= floor + slack).all(axis=1))
    if len(minimal) == 0:
        raise NoMinimalCombination("no elementwise-minimal combination")
    i = int(minimal[0])
    return RobustEvalResult(values[i], tuple(int(k) for k in combos[i]), len(combos), float(np.abs(values[i] - floor).max()))


def _as_sa(u):
    return u if isinstance(u, SARectangularSet) else action_rows(u)


def robust_optimal_value(m, u, tol=DEFAULT_TOL, mode="s_rect", max_iter=1_000_000):
    """Optimal robust value by value iteration, with a greedy policy.

    ``mode="s_rect"`` maximizes over action mixes against the per-state
    adversary (the greedy policy can be stochastic).  ``mode="sa_rect"``
    lets the adversary pick each action's row independently, so the update
    is ``max_a min_k`` and the greedy policy is deterministic.  An
    s-rectangular set given with ``mode="sa_rect"`` is replaced by its
    per-action row lists.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    if mode not in ("s_rect", "sa_rect"):
        raise ValueError(f"mode must be 's_rect' or 'sa_rect', got {mode!r}")
    if isinstance(u, SARectangularSet) and mode == "s_rect":
        u = sa_to_s_rectangular(u)
    S, A, g = m.num_states, m.num_actions, m.gamma
    if mode == "s_rect":
        _check_set(m, u)
    else:
        u = _as_sa(u)

    def payoffs(v):
        if mode == "s_rect":
            return [m.rewards[s][:, None] + g * np.einsum("kaj,j->ak", ks, v) for s, ks in enumerate(u.per_state)]
        return [[m.rewards[s, a] + g * rows @ v for a, rows in enumerate(per_a)] for s, per_a in enumerate(u.per_state_action)]

    def greedy(v):
        vals, pol = np.empty(S), np.zeros((S, A))
        for s, q in enumerate(payoffs(v)):
            if mode == "s_rect":
                mix, vals[s] = maximin_row_mix(q)
                pol[s] = mix
            else:
                worst = np.array([row.min() for row in q])
                a = int(np.argmax(worst))
                vals[s] = worst[a]
                pol[s, a] = 1.0
        return vals, pol

    stop = tol * (1.0 - g) / g if g > 0 else np.inf
    v = np.zeros(S)
    for _ in range(max_iter):
        nv, pol = greedy(v)
        step = np.abs(nv - v).max()
        v = nv
        if step <= stop:
            break
    return v, pol
