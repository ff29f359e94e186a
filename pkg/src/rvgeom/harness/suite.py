"""Property-based verification suite.

Every check runs on each generated instance and returns ``(ok, residual,
detail)``; ``residual`` is the worst violation measure the check observed
(0 when nothing is measured).  Each check draws from its own random stream
seeded by the instance seed and the check's position in :data:`CHECKS`, so
results do not depend on which other checks are enabled.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

from ..geometry import (
    action_values,
    agreement_slice_sample,
    hyperplane_mix,
    intersect_policy_hyperplanes,
    l_vector,
    value_space_contains,
    value_space_membership,
)
from ..instance import from_dict
from ..mdp import evaluate_policies, evaluate_policy, policy_transition, random_policies, random_simplex, value_box
from ..reduction import reduce_uncertainty
from ..robust import (
    NoMinimalCombination,
    SRectangularSet,
    action_rows,
    brute_force_robust_value,
    robust_bellman_apply,
    robust_evaluate_policies,
    robust_evaluate_policy,
    robust_optimal_value,
    sa_to_s_rectangular,
)
from ..robust_geometry import (
    axis_line_interval,
    conic_membership,
    conic_region,
    region_bounds_batch,
    robust_space_contains,
    robust_space_membership,
    robust_value_at_cone_intersection,
    state_payoff,
    surface_mix_from_payoff,
)
from .generate import SuiteConfig, generate_instance, instance_seed

KIND_CYCLE = ("s_rect", "s_rect", "sa_rect", "s_rect", "mdp")


@dataclass
class Context:
    inst: object
    cfg: SuiteConfig
    rng: np.random.Generator

    @property
    def m(self):
        return self.inst.mdp

    @property
    def u(self):
        return self.inst.s_rect

    def box_points(self, n):
        lo, hi = value_box(self.m)
        return self.rng.uniform(lo, hi, size=(n, self.m.num_states))

    def policies(self, n):
        return random_policies(self.rng, n, self.m.num_states, self.m.num_actions)


# ---------------------------------------------------------------- non-robust


def check_intersection(ctx):
    m = ctx.m
    worst = 0.0
    for pi in ctx.policies(ctx.cfg.policies):
        v = evaluate_policy(m, pi)
        worst = max(worst, np.abs(intersect_policy_hyperplanes(m, pi) - v).max())
        P = policy_transition(m, pi)
        fixed = np.abs(np.einsum("sa,sa->s", pi, m.rewards) + m.gamma * P @ v - v).max()
        if fixed > 1e-10 or np.abs(P.sum(axis=1) - 1.0).max() > 1e-12:
            return False, float(max(worst, fixed)), "evaluation is not a stochastic fixed point"
    return worst <= 1e-9, float(worst), ""


def check_reward_monotonicity(ctx):
    m = ctx.m
    pis = ctx.policies(ctx.cfg.policies)
    base = evaluate_policies(m, pis)
    worst = 0.0
    for i, pi in enumerate(pis):
        s, a = ctx.rng.integers(m.num_states), ctx.rng.integers(m.num_actions)
        r = m.rewards.copy()
        r[s, a] += ctx.rng.uniform(0.0, 1.0)
        bumped = evaluate_policy(type(m)(r, m.kernel, m.gamma), pi)
        worst = max(worst, float((base[i] - bumped).max()))
    return worst <= 1e-12, max(worst, 0.0), ""


def check_statewise_decomposition(ctx):
    m, tol = ctx.m, ctx.cfg.membership_tol
    values = evaluate_policies(m, ctx.policies(ctx.cfg.points))
    q = action_values(m, values)
    gap = np.maximum(q.min(axis=-1) - values, values - q.max(axis=-1)).max()
    if not value_space_contains(m, values, tol).all():
        return False, float(gap), "a policy value failed membership"
    X = ctx.box_points(ctx.cfg.points)
    out = X[~value_space_contains(m, X, tol)]
    if len(out):
        dist, _ = cKDTree(values).query(out, p=np.inf)
        if dist.min() <= tol:
            return False, float(gap), "a non-member lies on a sampled value"
    return True, float(max(gap, 0.0)), ""


def check_band_mix(ctx):
    m = ctx.m
    worst = 0.0
    for x in ctx.box_points(ctx.cfg.points // 10):
        s = int(ctx.rng.integers(m.num_states))
        rows = random_simplex(ctx.rng, (64, m.num_actions))
        res = x[s] - rows @ action_values(m, x)[s]
        plus, minus = np.flatnonzero(res >= 0), np.flatnonzero(res <= 0)
        if len(plus) == 0 or len(minus) == 0:
            continue
        mix = hyperplane_mix(m, s, x, rows[plus[0]], rows[minus[0]])
        worst = max(worst, abs(float(l_vector(m, s, mix).residual(x))))
    return worst <= 1e-9, worst, ""


def check_deterministic_cover(ctx):
    m = ctx.m
    n = ctx.cfg.points
    X = ctx.box_points(n)
    s = ctx.rng.integers(m.num_states, size=n)
    rows = random_simplex(ctx.rng, (n, m.num_actions))
    q = action_values(m, X)[np.arange(n), s]
    xs = X[np.arange(n), s]
    res = xs - np.einsum("na,na->n", rows, q)
    bad_plus = (res >= 0) & ~(xs - q.min(axis=1) >= 0)
    bad_minus = (res <= 0) & ~(xs - q.max(axis=1) <= 0)
    bad = int(bad_plus.sum() + bad_minus.sum())
    return bad == 0, float(bad), ""


def check_value_space_realization(ctx):
    m = ctx.m
    worst = 0.0
    for x in ctx.box_points(ctx.cfg.points // 4):
        rep = value_space_membership(m, x, ctx.cfg.membership_tol)
        if rep.verdict:
            worst = max(worst, float(np.abs(evaluate_policy(m, rep.policy()) - x).max()))
    # values of policies agreeing on a random subset lie on those states' hyperplanes
    fixed_states = np.flatnonzero(ctx.rng.random(m.num_states) < 0.5)
    fixed = {int(s): random_simplex(ctx.rng, (m.num_actions,)) for s in fixed_states}
    values, _ = agreement_slice_sample(m, fixed, ctx.cfg.policies, ctx.rng)
    for s, row in fixed.items():
        lv = l_vector(m, s, row)
        if np.abs(values @ lv.normal - lv.offset).max() > 1e-9:
            return False, worst, f"agreement slice left the hyperplane of state {s}"
    return worst <= 1e-8, worst, ""


# ---------------------------------------------------------------- robust evaluation


def check_worst_kernel(ctx):
    m, u = ctx.m, ctx.u
    pis = ctx.policies(ctx.cfg.exact_policies)
    batch, _ = robust_evaluate_policies(m, u, pis)
    worst = 0.0
    for pi, vb in zip(pis, batch):
        try:
            brute = brute_force_robust_value(m, u, pi)
        except NoMinimalCombination:
            return False, worst, "no elementwise-minimal kernel combination"
        fp = robust_evaluate_policy(m, u, pi, tol=ctx.cfg.tol)
        worst = max(worst, float(np.abs(fp.value - brute.value).max()), float(np.abs(vb - brute.value).max()))
    return worst <= ctx.cfg.tol, worst, ""


def check_contraction_monotonicity(ctx):
    m, u = ctx.m, ctx.u
    lo, hi = value_box(m)
    worst = 0.0
    for pi in ctx.policies(5):
        V, W = ctx.rng.uniform(lo, hi, size=(2, m.num_states))
        lhs = np.abs(robust_bellman_apply(m, u, pi, V) - robust_bellman_apply(m, u, pi, W)).max()
        worst = max(worst, float(lhs - m.gamma * np.abs(V - W).max()))
    if worst > 1e-12:
        return False, worst, "robust operator is not a contraction"
    s = int(ctx.rng.integers(m.num_states))
    extra = random_simplex(ctx.rng, (1, m.num_actions, m.num_states))
    bigger = SRectangularSet(tuple(np.concatenate([ks, extra]) if i == s else ks for i, ks in enumerate(u.per_state)))
    pis = ctx.policies(ctx.cfg.policies)
    before, _ = robust_evaluate_policies(m, u, pis)
    after, _ = robust_evaluate_policies(m, bigger, pis)
    rise = float((after - before).max())
    return rise <= 1e-10, max(worst, rise, 0.0), ""


# ---------------------------------------------------------------- conic geometry


def _cone_tops(m, u, values, pis):
    """max_k residual of each robust value against each state's cone, shape (N, S)."""
    out = np.empty(values.shape)
    for s, ks in enumerate(u.per_state):
        q = m.rewards[s][None, :, None] + m.gamma * np.einsum("kaj,nj->nak", ks, values)
        out[:, s] = (values[:, s][:, None] - np.einsum("na,nak->nk", pis[:, s], q)).max(axis=1)
    return out


def check_conic_containment(ctx):
    m, u = ctx.m, ctx.u
    pis = ctx.policies(ctx.cfg.policies)
    values, _ = robust_evaluate_policies(m, u, pis)
    tops = _cone_tops(m, u, values, pis)
    worst = float(np.abs(tops).max())
    return worst <= ctx.cfg.tol, worst, ""


def check_apex(ctx):
    m, u = ctx.m, ctx.u
    worst = 0.0
    for s in range(m.num_states):
        for row in random_simplex(ctx.rng, (ctx.cfg.policies, m.num_actions)):
            try:
                region = conic_region(m, u, s, row)
            except AssertionError as exc:
                return False, worst, str(exc)
            worst = max(worst, float(np.abs(region.residuals(region.apex)).max()))
            for h in region.hyperplanes:
                if abs(h.lvec.normal.sum() - (1.0 - m.gamma)) > 1e-12:
                    return False, worst, "normal does not sum to 1 - gamma"
    return worst <= 1e-10, worst, ""


def check_conic_surface(ctx):
    m, u = ctx.m, ctx.u
    s = int(ctx.rng.integers(m.num_states))
    row = random_simplex(ctx.rng, (m.num_actions,))
    pis = ctx.policies(ctx.cfg.policies)
    pis[:, s] = row
    values, _ = robust_evaluate_policies(m, u, pis)
    region = conic_region(m, u, s, row)
    worst = 0.0
    for v in values:
        cm = conic_membership(region, v, ctx.cfg.tol)
        worst = max(worst, abs(cm.max_residual))
        if not cm.on_surface:
            return False, worst, f"robust value off the cone surface at state {s}"
    return True, worst, ""


def check_cone_intersection(ctx):
    worst = 0.0
    for pi in ctx.policies(ctx.cfg.exact_policies):
        rep = robust_value_at_cone_intersection(ctx.m, ctx.u, pi, ctx.cfg.tol)
        worst = max(worst, float(np.abs(rep.max_residuals).max()))
        if not rep.passed:
            return False, worst, rep.message
    return True, worst, ""


def check_surface_mix(ctx):
    m, u = ctx.m, ctx.u
    worst = 0.0
    for x in ctx.box_points(ctx.cfg.points // 10):
        s = int(ctx.rng.integers(m.num_states))
        q = state_payoff(m, u, s, x)
        rows = np.concatenate([random_simplex(ctx.rng, (64, m.num_actions)), np.eye(m.num_actions)])
        tops = (x[s] - rows @ q).max(axis=1)
        plus, minus = np.flatnonzero(tops >= 0), np.flatnonzero(tops <= 0)
        if len(plus) == 0 or len(minus) == 0:
            continue
        pi_p = rows[plus[ctx.rng.integers(len(plus))]]
        pi_m = rows[minus[ctx.rng.integers(len(minus))]]
        mix = surface_mix_from_payoff(q, x[s], pi_p, pi_m)
        worst = max(worst, abs(float((x[s] - mix @ q).max())))
        if mix.min() < -1e-15 or abs(mix.sum() - 1.0) > 1e-12:
            return False, worst, "mix left the simplex"
    return worst <= 1e-8, worst, ""


def check_plus_side(ctx):
    m, u = ctx.m, ctx.u
    bad = 0
    X = ctx.box_points(ctx.cfg.points)
    rows = random_simplex(ctx.rng, (len(X), m.num_actions))
    for x, row in zip(X, rows):
        s = int(ctx.rng.integers(m.num_states))
        q = state_payoff(m, u, s, x)
        mixed = (x[s] - row @ q).max() >= 0
        det = (x[s] - q).max(axis=1) >= 0
        bad += int(mixed and not det.any())
        # a deterministic witness is itself a row in the mixed union
        a = int(np.argmax(det)) if det.any() else None
        bad += int(a is not None and (x[s] - q[a]).max() < 0)
    return bad == 0, float(bad), ""


def check_minus_side(ctx):
    m, u = ctx.m, ctx.u
    X = ctx.box_points(ctx.cfg.points)
    worst = 0.0
    for s in range(m.num_states):
        _, lower, exact, upper = region_bounds_batch(m, u, X, s)
        worst = max(worst, float((lower - exact).max()), float((exact - upper).max()))
    if worst > 1e-12:
        return False, worst, "bound chain broken"
    sa = sa_to_s_rectangular(action_rows(u))
    Y = X[: max(ctx.cfg.points // 10, 1)]
    gap = 0.0
    for s in range(m.num_states):
        _, lower, exact, _ = region_bounds_batch(m, sa, Y, s)
        gap = max(gap, float(np.abs(exact - lower).max()))
    return gap <= 1e-9, max(worst, gap, 0.0), ""


def check_robust_space(ctx):
    m, u, tol = ctx.m, ctx.u, ctx.cfg.membership_tol
    values, _ = robust_evaluate_policies(m, u, ctx.policies(ctx.cfg.policies))
    if not robust_space_contains(m, u, values, tol).all():
        return False, 0.0, "a robust value failed membership"
    X = ctx.box_points(ctx.cfg.points)
    members = X[robust_space_contains(m, u, X, tol)][:3]
    worst = 0.0
    for x in members:
        rep = robust_space_membership(m, u, x, tol)
        worst = max(worst, float(np.abs(robust_evaluate_policy(m, u, rep.policy()).value - x).max()))
    vstar, _ = robust_optimal_value(m, u)
    if robust_space_contains(m, u, (vstar + 1.0)[None], tol)[0]:
        return False, worst, "point above the optimal value classified as member"
    if (values - vstar).max() > 1e-6:
        return False, worst, "a policy beats the robust optimal value"
    return worst <= 1e-7, worst, ""


# ---------------------------------------------------------------- active subsets


def _augment(ctx, u):
    """Inject one random convex combination per state (appended last)."""
    per_state = []
    for ks in u.per_state:
        w = random_simplex(ctx.rng, (len(ks),))
        per_state.append(np.concatenate([ks, np.einsum("k,kaj->aj", w, ks)[None]]))
    return SRectangularSet(tuple(per_state))


def check_polar_cone(ctx):
    m = ctx.m
    full = _augment(ctx, ctx.u)
    reduced, _ = reduce_uncertainty(full)
    worst = 0.0
    for x in ctx.box_points(ctx.cfg.points // 4):
        s = int(ctx.rng.integers(m.num_states))
        row = random_simplex(ctx.rng, (m.num_actions,))
        a = (x[s] - row @ state_payoff(m, full, s, x)).max()
        b = (x[s] - row @ state_payoff(m, reduced, s, x)).max()
        worst = max(worst, abs(float(a - b)))
    return worst <= 1e-9, worst, ""


def check_active_subset(ctx):
    m, u = ctx.m, ctx.u
    full = _augment(ctx, u)
    reduced, report = reduce_uncertainty(full)
    for s, rem in enumerate(report.removed):
        injected = len(full.per_state[s]) - 1
        if injected not in [r.index for r in rem]:
            return False, 0.0, f"injected combination kept at state {s}"
        if any(r.residual > 1e-9 for r in rem):
            return False, 0.0, "removal certificate does not reconstruct its point"
    pis = ctx.policies(ctx.cfg.policies)
    a, _ = robust_evaluate_policies(m, full, pis)
    b, _ = robust_evaluate_policies(m, reduced, pis)
    worst = float(np.abs(a - b).max())
    X = ctx.box_points(ctx.cfg.points)
    tol = ctx.cfg.membership_tol
    differ = robust_space_contains(m, full, X, tol) != robust_space_contains(m, reduced, X, tol)
    band = robust_space_contains(m, full, X, 1e-6) & ~robust_space_contains(m, full, X, 1e-12)
    if (differ & ~band).any():
        return False, worst, "membership changed after reduction"
    if reduce_uncertainty(reduced)[1].num_removed:
        return False, worst, "reduction is not idempotent"
    return worst <= ctx.cfg.tol, worst, ""


def check_axis_segments(ctx):
    m, u = ctx.m, ctx.u
    worst = 0.0
    for base in ctx.box_points(ctx.cfg.axis_lines):
        axis = int(ctx.rng.integers(m.num_states))
        iv = axis_line_interval(m, u, base, axis, tol=ctx.cfg.membership_tol)
        worst = max(worst, float(max(iv.runs - 1, 0)))
        if not iv.contiguous:
            return False, worst, f"axis line through state {axis} meets the space in {iv.runs} pieces"
    return True, worst, ""


# name, anchor, function
CHECKS = (
    ("intersection", "Lemma 1", check_intersection),
    ("reward_monotonicity", "Lemma 1", check_reward_monotonicity),
    ("statewise_decomposition", "Lemma 2", check_statewise_decomposition),
    ("band_mix", "Lemma 3", check_band_mix),
    ("deterministic_cover", "Lemma 4", check_deterministic_cover),
    ("value_space_realization", "Theorem 1", check_value_space_realization),
    ("worst_kernel", "Eq. 9", check_worst_kernel),
    ("contraction_monotonicity", "Eq. 9", check_contraction_monotonicity),
    ("conic_containment", "Lemma 5", check_conic_containment),
    ("apex", "Lemma 6", check_apex),
    ("conic_surface", "Corollary 1", check_conic_surface),
    ("cone_intersection", "Lemma 7", check_cone_intersection),
    ("surface_mix", "Lemma 8", check_surface_mix),
    ("plus_side", "Lemma 9", check_plus_side),
    ("minus_side", "Lemma 10", check_minus_side),
    ("robust_space", "Theorem 2", check_robust_space),
    ("polar_cone", "Lemma 11", check_polar_cone),
    ("active_subset", "Theorem 3", check_active_subset),
    ("axis_segments", "Corollary 2", check_axis_segments),
)
CHECK_NAMES = tuple(c[0] for c in CHECKS)


@dataclass
class CheckStats:
    anchor: str
    passed: int = 0
    failed: int = 0
    worst_residual: float = 0.0

    def to_dict(self):
        return {
            "anchor": self.anchor,
            "passed": self.passed,
            "failed": self.failed,
            "total": self.passed + self.failed,
            "worst_residual": self.worst_residual,
        }


@dataclass
class SuiteReport:
    config: dict
    checks: dict = field(default_factory=dict)
    failures: list = field(default_factory=list)
    instances: int = 0

    @property
    def all_passed(self):
        return not self.failures

    def to_dict(self):
        return {
            "config": self.config,
            "instances": self.instances,
            "all_passed": self.all_passed,
            "checks": {name: st.to_dict() for name, st in self.checks.items()},
            "failures": self.failures,
        }


def _jobs(cfg):
    if cfg.replay:
        for rec in cfg.replay:
            yield rec["instance_index"], rec["seed"], from_dict(rec["instance"])
        return
    for i in range(cfg.num_instances):
        seed = instance_seed(cfg.seed, i)
        yield i, seed, generate_instance(cfg, KIND_CYCLE[i % len(KIND_CYCLE)], seed)


def run_suite(cfg):
    """Run the enabled checks over the configured (or replayed) instances.

    Failures are data: each one records the check, its anchor, the residual
    and the serialized instance with its seed, so feeding the records back
    as ``cfg.replay`` reproduces them exactly.
    """
    enabled = CHECK_NAMES if cfg.checks is None else tuple(cfg.checks)
    named = set(enabled) | ({cfg.inject_failure} if cfg.inject_failure is not None else set())
    unknown = sorted(named - set(CHECK_NAMES))
    if unknown:
        raise ValueError(f"unknown check(s): {unknown}")
    report = SuiteReport(cfg.to_dict(), {name: CheckStats(anchor) for name, anchor, _ in CHECKS if name in enabled})
    for index, seed, inst in _jobs(cfg):
        report.instances += 1
        for pos, (name, anchor, fn) in enumerate(CHECKS):
            if name not in enabled:
                continue
            ctx = Context(inst, cfg, np.random.default_rng([seed, pos]))
            ok, residual, detail = fn(ctx)
            if name == cfg.inject_failure:
                ok, detail = False, "injected failure"
            st = report.checks[name]
            st.worst_residual = max(st.worst_residual, float(residual))
            if ok:
                st.passed += 1
            else:
                st.failed += 1
                report.failures.append(
                    {
                        "check": name,
                        "anchor": anchor,
                        "instance_index": index,
                        "seed": seed,
                        "residual": float(residual),
                        "detail": detail,
                        "instance": inst.to_dict(),
                    }
                )
    return report
