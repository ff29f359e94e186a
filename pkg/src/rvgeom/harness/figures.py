"""Planar figure data: sampled values, line primitives, region grids and SVG.

Every figure writes into ``out_dir``:

``<id>_points.csv``
    ``V(s1),V(s2),policy-id``; the id is ``<series>-<index>``.
``<id>_primitives.csv``
    ``kind,label,x1,y1,x2,y2``: hyperplane traces and cone rays clipped to
    the value box, plus marked points (``x2, y2`` repeat ``x1, y1``).
``<id>_region.csv``
    Membership flags on a square grid over the value box (figures that show
    a region).
``<id>.svg``
    Scatter and primitives, SVG 1.1 with the view box set to the value box.

Numbers use ``%.12g`` and lines end in LF, so output is byte-stable for a
fixed seed.
"""

import csv
import itertools
import os

import numpy as np

from ..geometry import l_vector, l_vector_from_rows, value_space_contains
from ..mdp import DimensionError, deterministic_policy, evaluate_policies, random_policies, value_box
from ..robust import SRectangularSet, robust_evaluate_policies
from ..robust_geometry import axis_line_interval, conic_region, region_bounds_batch, robust_space_contains

FIGURES = {
    "fig2": "hyperplanes of one policy meeting at its value",
    "fig3": "value space with deterministic-action hyperplanes",
    "fig4": "agreeing policies under each kernel and robustly",
    "fig5": "hyperplanes of one state sharing an apex; conic surface",
    "fig6": "robust value space and the conic surfaces of one policy",
    "fig7": "robust value space with deterministic conic surfaces",
    "fig8": "lower-side bounds: inner, exact and outer regions",
    "fig9": "cone of one row for a kernel pair and its segment",
    "fig10": "values of policies agreeing on state subsets",
    "fig11": "axis-parallel sections and a non-star witness",
    "fig12": "robust value space of a random instance",
}
# shipped instance each figure is drawn from by default
FIGURE_FIXTURES = {
    "fig2": "mdp_2s3a",
    "fig3": "mdp_2s3a",
    "fig4": "rmdp_agreement",
    "fig5": "rmdp_conic",
    "fig6": "rmdp_srect",
    "fig7": "rmdp_srect",
    "fig8": "rmdp_srect",
    "fig9": "rmdp_srect",
    "fig10": "rmdp_agreement",
    "fig11": "rmdp_nonstar",
    "fig12": "rmdp_nonstar",
}
PALETTE = ("#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf")


def _g(v):
    return "%.12g" % float(v)


class _Figure:
    def __init__(self, inst, seed, samples, grid):
        self.inst = inst
        self.m = inst.mdp
        self.u = inst.s_rect
        self.robust = inst.kind != "mdp"
        self.rng = np.random.default_rng(seed)
        self.samples = samples
        self.grid = grid
        self.lo, self.hi = value_box(self.m)
        self.points = []  # (x, y, id)
        self.prims = []  # (kind, label, x1, y1, x2, y2)
        self.region = None  # (header, rows)
        pol = inst.policy
        self.pi = pol if pol is not None else np.full((2, self.m.num_actions), 1.0 / self.m.num_actions)

    # -- sampling helpers
    def values(self, pis, kernel_set=None):
        if kernel_set is None and not self.robust:
            return evaluate_policies(self.m, pis)
        return robust_evaluate_policies(self.m, kernel_set or self.u, pis)[0]

    def scatter(self, series, values):
        for i, v in enumerate(values):
            self.points.append((v[0], v[1], f"{series}-{i}"))

    def agreeing(self, fixed_states, n):
        pis = random_policies(self.rng, n, 2, self.m.num_actions)
        for s in fixed_states:
            pis[:, s] = self.pi[s]
        return pis

    # -- primitives
    def mark(self, label, p):
        self.prims.append(("point", label, p[0], p[1], p[0], p[1]))

    def line(self, label, normal, offset):
        seg = clip_line(normal, offset, self.lo, self.hi)
        if seg is not None:
            self.prims.append(("hyperplane", label, *seg[0], *seg[1]))

    def cone_rays(self, label, region):
        """Boundary rays of the lower cone of ``region`` (2-D)."""
        apex = region.apex
        for h in region.hyperplanes:
            n = h.lvec.normal
            d = np.array([-n[1], n[0]])
            for sign in (1.0, -1.0):
                probe = apex + sign * d
                if region.residuals(probe).max() <= 1e-12 * (1.0 + np.abs(probe).max()):
                    end = ray_exit(apex, sign * d, self.lo, self.hi)
                    if end is not None:
                        self.prims.append(("cone_ray", label, apex[0], apex[1], end[0], end[1]))

    # -- region grid
    def grid_points(self):
        g = np.linspace(self.lo, self.hi, self.grid)
        xx, yy = np.meshgrid(g, g)
        return np.column_stack([xx.ravel(), yy.ravel()])

    def membership_grid(self):
        X = self.grid_points()
        if self.robust:
            inside = robust_space_contains(self.m, self.u, X)
        else:
            inside = value_space_contains(self.m, X)
        self.region = (("V(s1)", "V(s2)", "inside"), [(x, y, int(b)) for (x, y), b in zip(X, inside)])


def clip_line(normal, offset, lo, hi):
    """Segment of ``{x : <x, normal> = offset}`` inside ``[lo, hi]^2``, or None."""
    n = np.asarray(normal, dtype=float)
    pts = []
    for axis in (0, 1):
        other = 1 - axis
        if abs(n[other]) < 1e-15:
            continue
        for fixed in (lo, hi):
            val = (offset - n[axis] * fixed) / n[other]
            if lo - 1e-12 <= val <= hi + 1e-12:
                p = [0.0, 0.0]
                p[axis], p[other] = fixed, min(max(val, lo), hi)
                pts.append(tuple(p))
    pts = sorted(set(pts))
    if len(pts) < 2:
        return None
    return pts[0], pts[-1]


def ray_exit(origin, direction, lo, hi):
    """Where ``origin + t direction`` (t >= 0) leaves the box, or None if it never enters."""
    t_enter, t_exit = 0.0, np.inf
    for o, d in zip(origin, direction):
        if abs(d) < 1e-15:
            if not lo <= o <= hi:
                return None
            continue
        t0, t1 = sorted(((lo - o) / d, (hi - o) / d))
        t_enter, t_exit = max(t_enter, t0), min(t_exit, t1)
    if t_enter > t_exit or not np.isfinite(t_exit):
        return None
    return origin + t_exit * np.asarray(direction)


# ---------------------------------------------------------------- figure builders


def _fig2(f):
    v = evaluate_policies(f.m, f.pi[None])[0]
    for s in (0, 1):
        f.scatter(f"agree_s{s + 1}", evaluate_policies(f.m, f.agreeing([s], f.samples // 2)))
        lv = l_vector(f.m, s, f.pi[s])
        f.line(f"s{s + 1}", lv.normal, lv.offset)
    f.mark("value", v)


def _fig3(f):
    f.scatter("random", evaluate_policies(f.m, random_policies(f.rng, f.samples, 2, f.m.num_actions)))
    det = [deterministic_policy(f.m, a) for a in itertools.product(range(f.m.num_actions), repeat=2)]
    f.scatter("deterministic", evaluate_policies(f.m, np.array(det)))
    for s in range(2):
        for a in range(f.m.num_actions):
            lv = l_vector(f.m, s, np.eye(f.m.num_actions)[a])
            f.line(f"s{s + 1},a{a + 1}", lv.normal, lv.offset)
    f.membership_grid()


def _fig4(f):
    pis = f.agreeing([0], f.samples)
    for combo in itertools.product(*(range(len(k)) for k in f.u.per_state)):
        single = SRectangularSet(tuple(f.u.per_state[s][[k]] for s, k in enumerate(combo)))
        f.scatter("P" + "".join(str(k + 1) for k in combo), f.values(pis, single))
    f.scatter("robust", f.values(pis))
    for k, ks in enumerate(f.u.per_state[0]):
        lv = l_vector_from_rows(f.m.rewards[0], ks, f.m.gamma, 0, f.pi[0])
        f.line(f"s1,P{k + 1}", lv.normal, lv.offset)


def _fig5(f):
    region = conic_region(f.m, f.u, 0, f.pi[0])
    for k, h in enumerate(region.hyperplanes):
        f.line(f"s1,P{k + 1}", h.lvec.normal, h.lvec.offset)
    f.cone_rays("s1", region)
    f.mark("apex", region.apex)
    f.scatter("robust_agree_s1", f.values(f.agreeing([0], f.samples)))


def _fig6(f):
    f.scatter("random", f.values(random_policies(f.rng, f.samples, 2, f.m.num_actions)))
    for s in (0, 1):
        f.cone_rays(f"s{s + 1}", conic_region(f.m, f.u, s, f.pi[s]))
    f.mark("value", f.values(f.pi[None])[0])
    f.membership_grid()


def _fig7(f):
    f.scatter("random", f.values(random_policies(f.rng, f.samples, 2, f.m.num_actions)))
    for s in (0, 1):
        for a in range(f.m.num_actions):
            f.cone_rays(f"s{s + 1},a{a + 1}", conic_region(f.m, f.u, s, np.eye(f.m.num_actions)[a]))
    f.membership_grid()


def _fig8(f):
    f.scatter("random", f.values(random_policies(f.rng, f.samples, 2, f.m.num_actions)))
    for s in (0, 1):
        for a in range(f.m.num_actions):
            for k, ks in enumerate(f.u.per_state[s]):
                lv = l_vector_from_rows(f.m.rewards[s], ks, f.m.gamma, s, np.eye(f.m.num_actions)[a])
                f.line(f"s{s + 1},a{a + 1},P{k + 1}", lv.normal, lv.offset)
    X = f.grid_points()
    cols = [X[:, 0], X[:, 1]]
    header = ["V(s1)", "V(s2)"]
    for s in (0, 1):
        _, lower, exact, upper = region_bounds_batch(f.m, f.u, X, s)
        xs = X[:, s]
        tol = 1e-9
        cols += [(xs <= lower + tol).astype(int), (xs <= exact + tol).astype(int), (xs <= upper + tol).astype(int)]
        header += [f"s{s + 1}_inner", f"s{s + 1}_exact", f"s{s + 1}_outer"]
    f.region = (tuple(header), list(zip(*cols)))


def _fig9(f):
    ks = f.u.per_state[0]
    if len(ks) < 2:
        raise ValueError("fig9 needs at least two candidate kernels at state s1")
    p1, p2 = ks[0], ks[1]
    pair = SRectangularSet((ks[:2],) + f.u.per_state[1:])
    mus = np.linspace(0.0, 1.0, 11)
    segment = SRectangularSet((np.array([mu * p1 + (1 - mu) * p2 for mu in mus]),) + f.u.per_state[1:])
    for mu, P in zip(mus, segment.per_state[0]):
        lv = l_vector_from_rows(f.m.rewards[0], P, f.m.gamma, 0, f.pi[0])
        f.line(f"mu={mu:.1f}", lv.normal, lv.offset)
    f.cone_rays("pair", conic_region(f.m, pair, 0, f.pi[0]))
    pis = f.agreeing([0], f.samples)
    f.scatter("pair", f.values(pis, pair))
    f.scatter("segment", f.values(pis, segment))


def _fig10(f):
    for fixed in ((), (0,), (1,), (0, 1)):
        name = "free" if not fixed else "agree_" + "_".join(f"s{s + 1}" for s in fixed)
        pis = f.agreeing(fixed, f.samples // 4 if fixed != (0, 1) else 1)
        f.scatter(f"nominal_{name}", evaluate_policies(f.m, pis))
        if f.robust:
            f.scatter(f"robust_{name}", f.values(pis))


def _fig11(f):
    f.scatter("random", f.values(random_policies(f.rng, f.samples, 2, f.m.num_actions)))
    for base in f.rng.uniform(f.lo, f.hi, size=(6, 2)):
        for axis in (0, 1):
            iv = axis_line_interval(f.m, f.u, base, axis)
            if not iv.empty:
                a, b = base.copy(), base.copy()
                a[axis] += iv.lo
                b[axis] += iv.hi
                f.prims.append(("axis_segment", f"s{axis + 1}", a[0], a[1], b[0], b[1]))
    w = find_nonstar_witness(f.m, f.u, seed=0)
    if w is not None:
        f.mark("center", w["center"])
        f.mark("target", w["target"])
        f.mark("midpoint", w["midpoint"])
    f.membership_grid()


def _fig12(f):
    f.scatter("random", f.values(random_policies(f.rng, f.samples, 2, f.m.num_actions)))
    f.membership_grid()


_BUILDERS = {
    "fig2": _fig2,
    "fig3": _fig3,
    "fig4": _fig4,
    "fig5": _fig5,
    "fig6": _fig6,
    "fig7": _fig7,
    "fig8": _fig8,
    "fig9": _fig9,
    "fig10": _fig10,
    "fig11": _fig11,
    "fig12": _fig12,
}


# ---------------------------------------------------------------- non-star witness


def membership_margin(m, u, X):
    """Smallest tolerance at which each row of ``X`` would pass robust membership (0 for members)."""
    X = np.atleast_2d(X)
    margin = np.zeros(len(X))
    for s in range(m.num_states):
        qmin, _, exact, _ = region_bounds_batch(m, u, X, s)
        margin = np.maximum(margin, np.maximum(qmin - X[:, s], X[:, s] - exact))
    return margin


def find_nonstar_witness(m, u, seed=0, samples=2000, pairs=20000):
    """Two robust values whose midpoint lies outside the robust value space.

    Endpoints are robust values of sampled policies; among ``pairs`` random
    pairs the one whose midpoint misses the space by the largest margin is
    returned (None when every midpoint is a member).
    """
    rng = np.random.default_rng(seed)
    pis = random_policies(rng, samples, m.num_states, m.num_actions)
    values, _ = robust_evaluate_policies(m, u, pis)
    i = rng.integers(samples, size=pairs)
    j = rng.integers(samples, size=pairs)
    mids = 0.5 * (values[i] + values[j])
    margin = membership_margin(m, u, mids)
    best = int(np.argmax(margin))
    if margin[best] <= 1e-6:
        return None
    a, b = int(i[best]), int(j[best])
    return {
        "seed": seed,
        "center": values[a].tolist(),
        "target": values[b].tolist(),
        "midpoint": mids[best].tolist(),
        "margin": float(margin[best]),
        "center_policy": pis[a].tolist(),
        "target_policy": pis[b].tolist(),
    }


def star_center_count(m, u, grid=150, targets=300, steps=16, seed=0, slack=1e-3):
    """Count grid points of the robust value space that look like star centers.

    A member grid point counts when the segments to ``targets`` sampled
    robust values stay inside the space (membership at tolerance ``slack``)
    at ``steps - 2`` interior points each.  Returns ``(members, centers)``.
    """
    lo, hi = value_box(m)
    g = np.linspace(lo, hi, grid)
    X = np.array(np.meshgrid(g, g)).reshape(2, -1).T
    C = X[robust_space_contains(m, u, X)]
    T, _ = robust_evaluate_policies(m, u, random_policies(np.random.default_rng(seed), targets, 2, m.num_actions))
    ts = np.linspace(0.0, 1.0, steps)[1:-1]
    centers = 0
    for c in C:
        P = (c[None, None, :] * (1.0 - ts[None, :, None]) + T[:, None, :] * ts[None, :, None]).reshape(-1, 2)
        centers += int(robust_space_contains(m, u, P, slack).all())
    return len(C), centers


# ---------------------------------------------------------------- output


def _write_csv(path, header, rows):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows([v if isinstance(v, str) else _g(v) for v in row] for row in rows)


def _svg(f, title):
    lo, hi = f.lo, f.hi
    w = hi - lo
    r, sw = w / 400.0, w / 500.0
    series = sorted({pid.rsplit("-", 1)[0] for _, _, pid in f.points})
    color = {s: PALETTE[i % len(PALETTE)] for i, s in enumerate(series)}
    out = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        '<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="480" height="480" '
        f'viewBox="{_g(lo)} {_g(-hi)} {_g(w)} {_g(w)}">',
        f"<title>{title}</title>",
        f'<rect x="{_g(lo)}" y="{_g(-hi)}" width="{_g(w)}" height="{_g(w)}" fill="white" stroke="black" stroke-width="{_g(sw)}"/>',
    ]
    for x, y, pid in f.points:
        out.append(f'<circle cx="{_g(x)}" cy="{_g(-y)}" r="{_g(r)}" fill="{color[pid.rsplit("-", 1)[0]]}"/>')
    for kind, _, x1, y1, x2, y2 in f.prims:
        if kind == "point":
            out.append(f'<circle cx="{_g(x1)}" cy="{_g(-y1)}" r="{_g(3 * r)}" fill="black"/>')
        else:
            dash = ' stroke-dasharray="%s"' % _g(4 * sw) if kind == "hyperplane" else ""
            out.append(
                f'<line x1="{_g(x1)}" y1="{_g(-y1)}" x2="{_g(x2)}" y2="{_g(-y2)}" stroke="black" stroke-width="{_g(sw)}"{dash}/>'
            )
    out.append("</svg>")
    return "\n".join(out) + "\n"


def emit_figure_data(instance, figure_id, out_dir, seed=0, samples=2000, grid=101):
    """Write the data files and SVG for one planar figure.

    Parameters
    ----------
    instance : Instance
        Must have two states.  Robust figures use its uncertainty set (a
        plain MDP acts as a singleton set); the instance policy, or the
        uniform policy, is the reference policy.
    figure_id : str
        One of :data:`FIGURES`.
    out_dir : str or path
        Created if missing.

    Returns
    -------
    list of str
        Paths written, in a fixed order.
    """
    if figure_id not in _BUILDERS:
        raise ValueError(f"unknown figure {figure_id!r}; choose from {', '.join(FIGURES)}")
    if instance.mdp.num_states != 2:
        raise DimensionError(f"planar figure {figure_id} needs 2 states, instance has {instance.mdp.num_states}")
    if samples < 1 or grid < 2:
        raise ValueError("samples must be >= 1 and grid >= 2")
    f = _Figure(instance, seed, samples, grid)
    _BUILDERS[figure_id](f)
    os.makedirs(out_dir, exist_ok=True)
    paths = []
    p = os.path.join(out_dir, f"{figure_id}_points.csv")
    _write_csv(p, ("V(s1)", "V(s2)", "policy-id"), f.points)
    paths.append(p)
    p = os.path.join(out_dir, f"{figure_id}_primitives.csv")
    _write_csv(p, ("kind", "label", "x1", "y1", "x2", "y2"), f.prims)
    paths.append(p)
    if f.region is not None:
        p = os.path.join(out_dir, f"{figure_id}_region.csv")
        _write_csv(p, *f.region)
        paths.append(p)
    p = os.path.join(out_dir, f"{figure_id}.svg")
    with open(p, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(_svg(f, FIGURES[figure_id]))
    paths.append(p)
    return paths
