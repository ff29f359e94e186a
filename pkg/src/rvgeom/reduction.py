"""Extreme-point reduction of finite uncertainty sets.

Only the extreme points of each candidate list's convex hull matter for
robust values, so non-extreme candidates can be dropped.  Each removal comes
with a certificate: convex weights over retained candidates that reproduce
the removed one.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linprog

from .robust import SARectangularSet, SRectangularSet

HULL_TOL = 1e-9


@dataclass
class Removal:
    """A dropped candidate and its convex-combination certificate."""

    index: int
    weights: dict
    residual: float

    def to_dict(self):
        return {"index": self.index, "weights": {str(k): w for k, w in self.weights.items()}, "residual": self.residual}


@dataclass
class ReductionReport:
    """Per-group outcome; a group is a state (s-rectangular) or a state-action pair.

    ``labels[g]`` names the group, ``kept[g]`` lists retained candidate
    indices and ``removed[g]`` the :class:`Removal` records.
    """

    labels: list = field(default_factory=list)
    kept: list = field(default_factory=list)
    removed: list = field(default_factory=list)

    @property
    def num_removed(self):
        return sum(len(r) for r in self.removed)

    def to_dict(self):
        return {
            "groups": [
                {"group": lab, "kept": list(k), "removed": [r.to_dict() for r in rem]}
                for lab, k, rem in zip(self.labels, self.kept, self.removed)
            ],
            "num_removed": self.num_removed,
        }


def _hull_weights(target, others):
    """Convex weights over ``others`` best reproducing ``target`` (L1 fit).

    Returns ``(weights, max_abs_residual)``.
    """
    n, d = others.shape
    if n == 1:
        w = np.ones(1)
        return w, float(np.abs(others[0] - target).max())
    # variables: w (n), e_plus (d), e_minus (d); minimize sum of slacks
    c = np.concatenate([np.zeros(n), np.ones(2 * d)])
    A_eq = np.zeros((d + 1, n + 2 * d))
    A_eq[:d, :n] = others.T
    A_eq[:d, n : n + d] = np.eye(d)
    A_eq[:d, n + d :] = -np.eye(d)
    A_eq[d, :n] = 1.0
    b_eq = np.concatenate([target, [1.0]])
    res = linprog(
        c,
        A_eq=A_eq,
        b_eq=b_eq,
        bounds=[(0, None)] * (n + 2 * d),
        method="highs",
        options={"primal_feasibility_tolerance": 1e-10, "dual_feasibility_tolerance": 1e-10},
    )
    if res.status != 0:  # pragma: no cover - always feasible with slacks
        raise RuntimeError(f"hull LP failed: {res.message}")
    w = np.clip(res.x[:n], 0.0, None)
    w /= w.sum()
    return w, float(np.abs(w @ others - target).max())


def extreme_points(points, tol=HULL_TOL):
    """Indices of the points that are not convex combinations of the others.

    Parameters
    ----------
    points : array_like, shape (N, D)
    tol : float
        A point is dropped when some convex combination of the other points
        reproduces it within ``tol`` in every coordinate.

    Returns
    -------
    kept : list of int
        Increasing indices; among exact duplicates the lowest index survives.
    removed : list of Removal
        Certificates expressed over ``kept``.
    """
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    if pts.shape[0] == 0:
        raise ValueError("need at least one point")
    alive = list(range(len(pts)))
    # testing from the back means duplicates lose their higher indices
    for i in range(len(pts) - 1, -1, -1):
        others = [j for j in alive if j != i]
        if not others:
            continue
        _, resid = _hull_weights(pts[i], pts[others])
        if resid <= tol:
            alive.remove(i)
    kept = alive
    removed = []
    for i in range(len(pts)):
        if i in kept:
            continue
        w, resid = _hull_weights(pts[i], pts[kept])
        removed.append(Removal(i, {k: float(x) for k, x in zip(kept, w) if x > 0.0}, resid))
    return kept, removed


def reduce_uncertainty(u, tol=HULL_TOL):
    """Drop non-extreme candidates from an uncertainty set.

    s-rectangular kernels are compared as flattened ``(A * S)`` vectors
    (row-major, next states inner).  For an (s,a)-rectangular set each
    state-action row list is reduced on its own; the extreme points of a
    product of hulls are the products of extreme points, so this matches
    reducing the expanded per-state kernels.

    Returns
    -------
    reduced : same type as ``u``
    report : ReductionReport
    """
    report = ReductionReport()
    if isinstance(u, SARectangularSet):
        out = []
        for s, per_a in enumerate(u.per_state_action):
            rows = []
            for a, c in enumerate(per_a):
                kept, rem = extreme_points(c, tol)
                report.labels.append(f"s{s + 1},a{a + 1}")
                report.kept.append(kept)
                report.removed.append(rem)
                rows.append(c[kept])
            out.append(tuple(rows))
        return SARectangularSet(tuple(out)), report
    if not isinstance(u, SRectangularSet):
        raise TypeError(f"expected an uncertainty set, got {type(u).__name__}")
    per_state = []
    for s, ks in enumerate(u.per_state):
        kept, rem = extreme_points(ks.reshape(len(ks), -1), tol)
        report.labels.append(f"s{s + 1}")
        report.kept.append(kept)
        report.removed.append(rem)
        per_state.append(ks[kept])
    return SRectangularSet(tuple(per_state)), report
