"""Robust value-space geometry: conic regions and the state-wise membership test.

For a state ``s`` and row ``pi_s`` every candidate kernel gives a hyperplane;
all of them pass through ``r_pi_s / (1 - gamma) * 1``, so their lower
half-spaces intersect in a cone.  Robust values of policies agreeing on
``s`` lie on that cone's surface.

Membership residuals are written through the one-step payoff
``q[a, k] = r[s, a] + gamma <P_s^(k)[a], x>``: the residual of ``x`` against
the hyperplane of row ``pi_s`` and kernel ``k`` is ``x_s - pi_s @ q[:, k]``.
"""

from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .games import maximin_row_mix
from .geometry import DEFAULT_TOL, Hyperplane, MembershipReport, StateCertificate, l_vector_from_rows
from .mdp import DimensionError, check_distribution, check_policy, value_box
from .robust import SARectangularSet, robust_evaluate_policy, sa_to_s_rectangular

APEX_TOL = 1e-10


def _s_rect(u):
    return sa_to_s_rectangular(u) if isinstance(u, SARectangularSet) else u


def _check(m, u, x):
    x = np.asarray(x, dtype=float)
    if x.shape != (m.num_states,):
        raise DimensionError(f"point has length {x.shape}, MDP has {m.num_states} states")
    if u.num_states != m.num_states or u.num_actions != m.num_actions:
        raise DimensionError("uncertainty set does not match the MDP")
    return x


@dataclass(frozen=True, eq=False)
class ConicRegion:
    state: int
    pi_s: np.ndarray
    hyperplanes: tuple
    apex: np.ndarray

    def residuals(self, x):
        """Residual of ``x`` against every member hyperplane."""
        x = np.asarray(x, dtype=float)
        return np.array([h.residual(x) for h in self.hyperplanes])


@dataclass(frozen=True)
class ConicMembership:
    inside_minus: bool
    inside_plus: bool
    on_surface: bool
    max_residual: float


def conic_region(m, u, s, pi_s):
    """Build the cone at state ``s`` for row ``pi_s`` and verify its apex."""
    u = _s_rect(u)
    ks = u.per_state[s]
    if len(ks) == 0:
        raise ValueError(f"empty candidate list at state s{s + 1}")
    pi_s = check_distribution(pi_s, "pi_s")
    planes = tuple(Hyperplane(l_vector_from_rows(m.rewards[s], k, m.gamma, s, pi_s)) for k in ks)
    apex = np.full(m.num_states, planes[0].lvec.offset / (1.0 - m.gamma))
    worst = max(abs(h.residual(apex)) for h in planes)
    if worst > APEX_TOL * max(1.0, abs(apex[0])):
        raise AssertionError(f"apex residual {worst:.3g} exceeds {APEX_TOL}")
    return ConicRegion(int(s), pi_s, planes, apex)


def conic_membership(region, x, tol=DEFAULT_TOL):
    """Classify ``x`` against the lower cone, the upper union and the cone surface."""
    if tol <= 0:
        raise ValueError("tol must be positive")
    x = np.asarray(x, dtype=float)
    if x.shape != region.apex.shape:
        raise DimensionError(f"point has length {x.shape}, region lives in {region.apex.shape}")
    top = float(region.residuals(x).max())
    return ConicMembership(top <= tol, top >= -tol, abs(top) <= tol, top)


def state_payoff(m, u, s, x):
    """``q[a, k] = r[s, a] + gamma <P_s^(k)[a], x>`` for the candidates at ``s``."""
    u = _s_rect(u)
    return m.rewards[s][:, None] + m.gamma * np.einsum("kaj,j->ak", u.per_state[s], np.asarray(x, dtype=float))


def surface_mix_from_payoff(q, xs, pi_plus, pi_minus):
    """Row on whose cone surface ``x`` lies, mixed from two given rows.

    ``pi_plus`` must put ``x`` in the upper union (some residual ``>= 0``) and
    ``pi_minus`` in the lower cone (all residuals ``<= 0``).  With
    ``alpha_k`` and ``-beta_k`` their residuals, the mix
    ``(1 - lam) pi_plus + lam pi_minus`` has residuals
    ``(1 - lam) alpha_k - lam beta_k``.  Each crosses zero at
    ``alpha_k / (alpha_k + beta_k)``, so taking ``lam`` as the largest such
    crossing over kernels with ``alpha_k >= 0, beta_k > 0`` keeps every
    residual ``<= 0`` and zeroes the one attaining it.
    """
    pi_plus = np.asarray(pi_plus, dtype=float)
    pi_minus = np.asarray(pi_minus, dtype=float)
    alpha = xs - pi_plus @ q
    beta = pi_minus @ q - xs
    if beta.min() <= 0.0:
        return pi_minus.copy()
    pick = alpha >= 0.0
    if not pick.any():
        return pi_plus.copy()
    lam = float((alpha[pick] / (alpha[pick] + beta[pick])).max())
    return (1.0 - lam) * pi_plus + lam * pi_minus


def conic_surface_mix(m, u, s, x, pi_plus, pi_minus):
    """:func:`surface_mix_from_payoff` for state ``s`` of an RMDP."""
    x = np.asarray(x, dtype=float)
    return surface_mix_from_payoff(state_payoff(m, u, s, x), x[s], pi_plus, pi_minus)


def robust_space_membership(m, u, x, tol=DEFAULT_TOL):
    """Decide whether ``x`` is the robust value of some policy.

    At each state the upper side needs ``x_s >= min_{a,k} q[a, k]`` (some
    deterministic row reaches ``x`` for some kernel) and the lower side needs
    ``x_s <= max_mix min_k mix @ q[:, k]`` (some row keeps ``x`` below every
    kernel's hyperplane).  For members, each certificate's ``mix`` places
    ``x`` on the cone surface at that state, so the stacked policy has robust
    value ``x``.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    u = _s_rect(u)
    x = _check(m, u, x)
    certs = []
    for s in range(m.num_states):
        q = state_payoff(m, u, s, x)
        a, k = np.unravel_index(int(np.argmin(q)), q.shape)
        lo = float(q[a, k])
        mix_minus, hi = maximin_row_mix(q)
        plus_ok = bool(x[s] >= lo - tol)
        minus_ok = bool(x[s] <= hi + tol)
        mix = None
        if plus_ok and minus_ok:
            d = np.zeros(m.num_actions)
            d[a] = 1.0
            mix = surface_mix_from_payoff(q, x[s], d, mix_minus)
        certs.append(StateCertificate(s, float(x[s]), lo, hi, (int(a), int(k)), mix_minus, plus_ok, minus_ok, mix))
    return MembershipReport(all(c.ok for c in certs), tol, certs)


def robust_space_contains(m, u, X, tol=DEFAULT_TOL, use=None):
    """Vectorized verdicts of :func:`robust_space_membership` for rows of ``X``."""
    u = _s_rect(u)
    cand, counts = u.padded
    X = np.atleast_2d(np.asarray(X, dtype=float))
    return _kernels.robust_membership_batch(m.rewards, cand, counts, m.gamma, X, tol, use=use)


@dataclass
class CheckReport:
    passed: bool
    value: np.ndarray
    max_residuals: np.ndarray
    probes: list = field(default_factory=list)
    message: str = ""


def robust_value_at_cone_intersection(m, u, pi, tol=1e-8):
    """Check that the robust value of ``pi`` is the unique point on all its cone surfaces.

    Every state's surface must contain the robust value.  Then each axis is
    probed: moving ``x_j`` by ``±10 tol / (1 - gamma)`` shifts the residuals
    at state ``j`` by at least ``10 tol`` in one direction, so the probe must
    leave at least one surface.
    """
    u = _s_rect(u)
    pi = check_policy(m, pi)
    v = robust_evaluate_policy(m, u, pi).value
    regions = [conic_region(m, u, s, pi[s]) for s in range(m.num_states)]
    tops = np.array([conic_membership(r, v, tol).max_residual for r in regions])
    on_all = bool(np.all(np.abs(tops) <= tol))
    step = 10.0 * tol / (1.0 - m.gamma)
    probes = []
    for j in range(m.num_states):
        for sign in (1.0, -1.0):
            y = v.copy()
            y[j] += sign * step
            left = any(not conic_membership(r, y, tol).on_surface for r in regions)
            probes.append((j, sign, left))
    unique = all(p[2] for p in probes)
    msg = "" if on_all else "robust value is off a cone surface"
    if on_all and not unique:
        msg = "a perturbed point stayed on every surface"
    return CheckReport(on_all and unique, v, tops, probes, msg)


@dataclass
class RegionBoundsReport:
    """Lower-side bounds at one state.

    ``lower <= exact <= upper`` are ``max_a min_k q``, the maximin value and
    ``min_k max_a q``; the flags test ``x_s`` against each with ``tol``.
    """

    state: int
    in_lower_bound: bool
    in_exact: bool
    in_upper_bound: bool
    lower: float
    exact: float
    upper: float
    best_action: int
    maximin_mix: np.ndarray


def region_bounds(m, u, x, s, tol=DEFAULT_TOL):
    """Compare ``x`` with the deterministic inner bound, the exact lower-side test and the outer bound."""
    if tol <= 0:
        raise ValueError("tol must be positive")
    u = _s_rect(u)
    x = _check(m, u, x)
    q = state_payoff(m, u, s, x)
    row_min = q.min(axis=1)
    best_a = int(np.argmax(row_min))
    lower = float(row_min[best_a])
    mix, exact = maximin_row_mix(q)
    upper = float(q.max(axis=0).min())
    rep = RegionBoundsReport(
        int(s), bool(x[s] <= lower + tol), bool(x[s] <= exact + tol), bool(x[s] <= upper + tol), lower, exact, upper, best_a, mix
    )
    if (rep.in_lower_bound and not rep.in_exact) or (rep.in_exact and not rep.in_upper_bound):
        raise AssertionError(f"bound chain broken at state {s}: {lower} <= {exact} <= {upper} fails")
    return rep


def region_bounds_batch(m, u, X, s, use=None):
    """Arrays ``(qmin, lower, exact, upper)`` at state ``s`` for every row of ``X``."""
    u = _s_rect(u)
    cand, counts = u.padded
    X = np.atleast_2d(np.asarray(X, dtype=float))
    return _kernels.state_bounds_batch(m.rewards, cand, counts[s], m.gamma, s, X, use=use)


@dataclass
class AxisInterval:
    """Membership of the line ``base + t e_axis``; ``lo``/``hi`` are ``t`` values."""

    empty: bool
    lo: float = np.nan
    hi: float = np.nan
    contiguous: bool = True
    runs: int = 0


def _bisect(pred, inside, outside, width):
    while abs(outside - inside) > width:
        mid = 0.5 * (inside + outside)
        if pred(mid):
            inside = mid
        else:
            outside = mid
    return inside


def axis_line_interval(m, u, base, axis, scan=None, tol=DEFAULT_TOL, width=1e-6):
    """Intersect the robust value space with an axis-parallel line.

    Parameters
    ----------
    base : array_like, shape (S,)
        A point of the line.
    axis : int
        State whose coordinate varies.
    scan : tuple (t_min, t_max, steps), optional
        Scan range for ``t``.  Defaults to the value bounding box with 2001
        steps.

    Membership is evaluated on the scan grid.  One run of members is refined
    by bisection to ``width``; several runs are reported as non-contiguous.
    When no scan point is a member, the interval is located from the
    per-state conditions, each of which is monotone in ``t``; this finds
    degenerate (single-point) intersections the scan steps over.
    """
    u = _s_rect(u)
    base = _check(m, u, base)
    if scan is None:
        lo, hi = value_box(m)
        pad = 1e-6 * max(hi - lo, 1.0)
        scan = (lo - pad - base[axis], hi + pad - base[axis], 2001)
    t_min, t_max, steps = scan
    if steps < 2:
        raise ValueError("scan needs at least 2 steps")
    ts = np.linspace(t_min, t_max, int(steps))
    X = np.repeat(base[None], len(ts), axis=0)
    X[:, axis] += ts
    inside = robust_space_contains(m, u, X, tol)

    def member(t):
        y = base.copy()
        y[axis] += t
        return bool(robust_space_contains(m, u, y[None], tol)[0])

    if not inside.any():
        return _threshold_interval(m, u, base, axis, t_min, t_max, tol, member)
    edges = np.diff(inside.astype(np.int8))
    runs = int((edges == 1).sum() + inside[0])
    first = int(np.argmax(inside))
    last = len(ts) - 1 - int(np.argmax(inside[::-1]))
    lo = ts[first] if first == 0 else _bisect(member, ts[first], ts[first - 1], width)
    hi = ts[last] if last == len(ts) - 1 else _bisect(member, ts[last], ts[last + 1], width)
    return AxisInterval(False, float(lo), float(hi), runs == 1, runs)


def _threshold_interval(m, u, base, axis, t_min, t_max, tol, member):
    cand, counts = u.padded

    def bounds(s, t):
        y = base.copy()
        y[axis] += t
        qmin, _, exact, _ = _kernels.state_bounds_batch(m.rewards, cand, counts[s], m.gamma, s, y[None])
        return y[s], qmin[0], exact[0]

    def edge(ok, rising):
        # threshold of a monotone condition; rising means it holds for large t
        a, b = ok(t_min), ok(t_max)
        if a and b:
            return -np.inf if rising else np.inf
        if not a and not b:
            return None
        lo, hi = (t_max, t_min) if rising else (t_min, t_max)
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            if ok(mid):
                lo = mid
            else:
                hi = mid
            if abs(hi - lo) <= 1e-13 * max(1.0, abs(mid)):
                break
        return lo

    lower, upper = t_min, t_max
    for s in range(m.num_states):
        on_axis = s == axis
        plus = edge(lambda t, s=s: (lambda b: b[0] >= b[1] - tol)(bounds(s, t)), rising=on_axis)
        minus = edge(lambda t, s=s: (lambda b: b[0] <= b[2] + tol)(bounds(s, t)), rising=not on_axis)
        if plus is None or minus is None:
            return AxisInterval(True)
        if on_axis:
            lower, upper = max(lower, plus), min(upper, minus)
        else:
            lower, upper = max(lower, minus), min(upper, plus)
    if lower > upper or not member(0.5 * (lower + upper)):
        return AxisInterval(True)
    return AxisInterval(False, float(lower), float(upper), True, 1)
