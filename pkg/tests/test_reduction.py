import numpy as np
import pytest
from scipy.optimize import linprog

from conftest import random_s_rect, random_sa_rect
from rvgeom.mdp import random_policies, random_simplex
from rvgeom.reduction import extreme_points, reduce_uncertainty
from rvgeom.robust import SRectangularSet, robust_evaluate_policies


def in_hull(target, pts, tol=1e-9):
    """Feasibility oracle: is target a convex combination of pts (within tol per coordinate)?"""
    n, d = pts.shape
    A_ub = np.vstack([pts.T, -pts.T])
    b_ub = np.concatenate([target + tol, -(target - tol)])
    res = linprog(np.zeros(n), A_ub=A_ub, b_ub=b_ub, A_eq=np.ones((1, n)), b_eq=[1.0], bounds=[(0, None)] * n, method="highs")
    return res.status == 0


def test_midpoint_removed():
    p, q = np.array([1.0, 0.0, 0.0]), np.array([0.0, 1.0, 0.0])
    kept, removed = extreme_points([p, q, 0.5 * (p + q)])
    assert kept == [0, 1]
    assert removed[0].index == 2
    assert removed[0].weights == pytest.approx({0: 0.5, 1: 0.5})
    assert removed[0].residual <= 1e-12


def test_duplicates_keep_lowest_index():
    kept, removed = extreme_points(np.tile([0.2, 0.8], (4, 1)))
    assert kept == [0]
    assert [r.index for r in removed] == [1, 2, 3]
    assert all(r.weights == {0: 1.0} for r in removed)


def test_two_points_always_kept():
    kept, removed = extreme_points([[0.3, 0.7], [0.9, 0.1]])
    assert kept == [0, 1] and removed == []
    with pytest.raises(ValueError):
        extreme_points(np.zeros((0, 2)))


def test_random_sets_hull_preserved():
    rng = np.random.default_rng(8)
    for _ in range(1000):
        n, d = int(rng.integers(2, 8)), int(rng.integers(2, 5))
        pts = random_simplex(rng, (n, d))
        if rng.random() < 0.5:
            w = random_simplex(rng, (2, n))
            pts = np.vstack([pts, w @ pts])
        kept, removed = extreme_points(pts)
        for r in removed:
            assert in_hull(pts[r.index], pts[kept])
            combo = sum(w * pts[k] for k, w in r.weights.items())
            assert np.abs(combo - pts[r.index]).max() <= 1e-9
        for k in kept:
            others = [j for j in kept if j != k]
            assert not others or not in_hull(pts[k], pts[others])


def test_reduce_s_rect_removes_injected_and_keeps_values():
    rng = np.random.default_rng(9)
    for _ in range(20):
        m, u = random_s_rect(rng, 3, 2, k_max=3)
        u = SRectangularSet(tuple(random_simplex(rng, (3, 2, 3)) for _ in range(3)))
        aug = []
        for ks in u.per_state:
            w = random_simplex(rng, (2, len(ks)))
            aug.append(np.concatenate([ks, np.einsum("nk,kaj->naj", w, ks)]))
        big = SRectangularSet(tuple(aug))
        red, report = reduce_uncertainty(big)
        assert report.num_removed == 6
        for g in range(3):
            assert sorted(r.index for r in report.removed[g]) == [3, 4]
            assert report.kept[g] == [0, 1, 2]
        pis = random_policies(rng, 200, 3, 2)
        a, _ = robust_evaluate_policies(m, big, pis)
        b, _ = robust_evaluate_policies(m, red, pis)
        assert np.abs(a - b).max() <= 1e-8


def test_reduce_sa_rect_per_action():
    rng = np.random.default_rng(10)
    m, u = random_sa_rect(rng, 2, 2, k_max=1)
    rows = [[np.vstack([random_simplex(rng, (2, 2))]) for _ in range(2)] for _ in range(2)]
    rows[0][1] = np.vstack([rows[0][1], rows[0][1].mean(axis=0)])
    from rvgeom.robust import SARectangularSet

    red, report = reduce_uncertainty(SARectangularSet(tuple(tuple(r) for r in rows)))
    assert report.labels == ["s1,a1", "s1,a2", "s2,a1", "s2,a2"]
    assert report.num_removed == 1 and report.removed[1][0].index == 2
    assert len(red.per_state_action[0][1]) == 2
    d = report.to_dict()
    assert d["num_removed"] == 1 and d["groups"][1]["removed"][0]["weights"] == pytest.approx({"0": 0.5, "1": 0.5})


def test_reduce_rejects_other_types():
    with pytest.raises(TypeError):
        reduce_uncertainty([1, 2, 3])
