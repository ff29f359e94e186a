"""Non-robust value-space geometry.

Each state ``s`` and action row ``pi_s`` define the hyperplane
``{x : <x, L> = r_pi_s}`` with ``L = e_s - gamma * P_s pi_s``.  Values of
policies that agree on ``s`` lie on it, and the value space is the
state-wise intersection of the bands between the per-action hyperplanes.
"""

from dataclasses import dataclass, field

import numpy as np

from .mdp import DimensionError, check_distribution, check_policy, evaluate_policies, random_simplex

DEFAULT_TOL = 1e-9


@dataclass(frozen=True, eq=False)
class LVector:
    """Row ``s`` of ``I - gamma P_pi`` together with the offset ``r_pi_s``."""

    state: int
    normal: np.ndarray
    offset: float

    def residual(self, x):
        """``<x, normal> - offset``; positive on the upper half-space."""
        return np.asarray(x, dtype=float) @ self.normal - self.offset


@dataclass(frozen=True, eq=False)
class Hyperplane:
    lvec: LVector

    def residual(self, x):
        return self.lvec.residual(x)

    def contains(self, x, side="=", tol=DEFAULT_TOL):
        """Test ``x`` against the hyperplane (``"="``) or a closed half-space (``"+"``, ``"-"``)."""
        res = self.residual(x)
        if side == "+":
            return res >= -tol
        if side == "-":
            return res <= tol
        if side == "=":
            return np.abs(res) <= tol
        raise ValueError(f"side must be '+', '-' or '=', got {side!r}")


@dataclass
class StateCertificate:
    """Per-state evidence behind a membership verdict.

    ``x_s >= plus_bound - tol`` certifies the upper (``+``) side and
    ``x_s <= minus_bound + tol`` the lower (``-``) side.  ``mix`` is an
    action row that places ``x`` on a surface through this state, when one
    exists.
    """

    state: int
    coordinate: float
    plus_bound: float
    minus_bound: float
    plus_witness: tuple
    minus_witness: object
    plus_ok: bool
    minus_ok: bool
    mix: np.ndarray | None = None

    @property
    def ok(self):
        return self.plus_ok and self.minus_ok

    def to_dict(self):
        mw = self.minus_witness
        return {
            "state": self.state,
            "coordinate": self.coordinate,
            "plus_bound": self.plus_bound,
            "minus_bound": self.minus_bound,
            "plus_residual": self.coordinate - self.plus_bound,
            "minus_residual": self.minus_bound - self.coordinate,
            "plus_witness": list(self.plus_witness),
            "minus_witness": mw.tolist() if isinstance(mw, np.ndarray) else list(mw),
            "plus_ok": self.plus_ok,
            "minus_ok": self.minus_ok,
            "mix": None if self.mix is None else self.mix.tolist(),
        }


@dataclass
class MembershipReport:
    verdict: bool
    tol: float
    per_state: list = field(default_factory=list)

    @property
    def violated_states(self):
        return [c.state for c in self.per_state if not c.ok]

    def policy(self):
        """Stack the per-state ``mix`` rows into a policy, or None if any is missing."""
        if not self.verdict or any(c.mix is None for c in self.per_state):
            return None
        return np.stack([c.mix for c in self.per_state])

    def to_dict(self):
        return {
            "verdict": self.verdict,
            "tol": self.tol,
            "violated_states": self.violated_states,
            "per_state": [c.to_dict() for c in self.per_state],
        }


def l_vector(m, s, pi_s):
    """Normal ``e_s - gamma * sum_a pi_s[a] P[s, a]`` and offset ``r_s @ pi_s``."""
    return l_vector_from_rows(m.rewards[s], m.kernel[s], m.gamma, s, pi_s)


def l_vector_from_rows(rewards_s, kernel_s, gamma, s, pi_s):
    """Same as :func:`l_vector` for an explicit ``(A, S)`` kernel at state ``s``."""
    pi_s = check_distribution(pi_s, "pi_s")
    kernel_s = np.asarray(kernel_s, dtype=float)
    if pi_s.shape != (kernel_s.shape[0],):
        raise DimensionError(f"pi_s has shape {pi_s.shape}, expected ({kernel_s.shape[0]},)")
    normal = -gamma * (pi_s @ kernel_s)
    normal[s] += 1.0
    normal.flags.writeable = False
    return LVector(state=int(s), normal=normal, offset=float(pi_s @ rewards_s))


def hyperplane(m, s, pi_s):
    return Hyperplane(l_vector(m, s, pi_s))


def intersect_policy_hyperplanes(m, pi):
    """Solve the stacked hyperplane system; its unique solution is the value of ``pi``."""
    pi = check_policy(m, pi)
    rows = [l_vector(m, s, pi[s]) for s in range(m.num_states)]
    L = np.stack([lv.normal for lv in rows])
    r = np.array([lv.offset for lv in rows])
    return np.linalg.solve(L, r)


def _check_point(m, x):
    x = np.asarray(x, dtype=float)
    if x.shape != (m.num_states,):
        raise DimensionError(f"point has length {x.shape}, MDP has {m.num_states} states")
    return x


def action_values(m, x):
    """``q[s, a] = r[s, a] + gamma <P[s, a], x>`` for a point ``x`` (or a stack)."""
    x = np.asarray(x, dtype=float)
    return m.rewards + m.gamma * np.einsum("saj,...j->...sa", m.kernel, x)


def value_space_membership(m, x, tol=DEFAULT_TOL):
    """Decide whether ``x`` is the value of some policy.

    At every state ``x_s`` must lie between the smallest and the largest
    one-step action value computed from ``x`` itself.  The report carries the
    extreme actions and, for members, the mixing row that realizes ``x``.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    x = _check_point(m, x)
    q = action_values(m, x)
    certs = []
    for s in range(m.num_states):
        lo_a = int(np.argmin(q[s]))
        hi_a = int(np.argmax(q[s]))
        lo, hi = float(q[s, lo_a]), float(q[s, hi_a])
        plus_ok = bool(x[s] >= lo - tol)
        minus_ok = bool(x[s] <= hi + tol)
        mix = None
        if plus_ok and minus_ok:
            w = 0.0 if hi <= lo else float(np.clip((x[s] - lo) / (hi - lo), 0.0, 1.0))
            mix = np.zeros(m.num_actions)
            mix[lo_a] += 1.0 - w
            mix[hi_a] += w
        certs.append(StateCertificate(s, float(x[s]), lo, hi, (lo_a,), (hi_a,), plus_ok, minus_ok, mix))
    return MembershipReport(all(c.ok for c in certs), tol, certs)


def value_space_contains(m, X, tol=DEFAULT_TOL):
    """Vectorized verdicts of :func:`value_space_membership` for rows of ``X``."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    q = action_values(m, X)
    return ((X >= q.min(axis=-1) - tol) & (X <= q.max(axis=-1) + tol)).all(axis=-1)


def hyperplane_mix(m, s, x, pi_plus, pi_minus):
    """Mix two rows so the resulting hyperplane at ``s`` passes through ``x``.

    Requires ``x`` on the upper side for ``pi_plus`` (residual ``alpha >= 0``)
    and on the lower side for ``pi_minus`` (residual ``-beta <= 0``).  The mix
    ``(beta * pi_plus + alpha * pi_minus) / (alpha + beta)`` zeroes the
    residual because residuals are affine in the row.
    """
    pi_plus = np.asarray(pi_plus, dtype=float)
    pi_minus = np.asarray(pi_minus, dtype=float)
    alpha = float(l_vector(m, s, pi_plus).residual(x))
    beta = -float(l_vector(m, s, pi_minus).residual(x))
    if alpha < 0 or beta < 0:
        raise ValueError("x must lie in the upper half-space of pi_plus and the lower one of pi_minus")
    if alpha + beta == 0.0:
        return pi_plus.copy()
    return (beta * pi_plus + alpha * pi_minus) / (alpha + beta)


def agreement_slice_sample(m, fixed, n, seed):
    """Sample values of policies that agree with ``fixed`` on its states.

    Parameters
    ----------
    fixed : dict
        Maps a state index to the action row it is pinned to.
    n : int
        Number of policies.
    seed : int or numpy.random.Generator

    Returns
    -------
    values : ndarray, shape (n, S)
    policies : ndarray, shape (n, S, A)
    """
    if n <= 0:
        raise ValueError("n must be positive")
    S, A = m.num_states, m.num_actions
    for s, row in fixed.items():
        if not 0 <= s < S:
            raise ValueError(f"state {s} out of range for {S} states")
        row = check_distribution(row, f"fixed row at state {s}")
        if row.shape != (A,):
            raise DimensionError(f"fixed row at state {s} has shape {row.shape}")
    rng = np.random.default_rng(seed)
    policies = random_simplex(rng, (n, S, A))
    for s, row in fixed.items():
        policies[:, s, :] = row
    return evaluate_policies(m, policies), policies


__all__ = [
    "DEFAULT_TOL",
    "Hyperplane",
    "LVector",
    "MembershipReport",
    "StateCertificate",
    "action_values",
    "agreement_slice_sample",
    "hyperplane",
    "hyperplane_mix",
    "intersect_policy_hyperplanes",
    "l_vector",
    "l_vector_from_rows",
    "value_space_contains",
    "value_space_membership",
]
