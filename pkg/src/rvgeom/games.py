"""Maximin mixes for small zero-sum matrix games."""

from math import comb

import numpy as np
from scipy.optimize import linprog

from . import _kernels

# Above this many LP vertex candidates the HiGHS solver is used instead.
ENUMERATION_CAP = 20_000


def maximin_row_mix(payoff):
    """Best row mix against an adversarial column.

    Parameters
    ----------
    payoff : array_like, shape (A, K)
        ``payoff[a, k]`` is the row player's gain for row ``a`` and column ``k``.

    Returns
    -------
    mix : ndarray, shape (A,)
        Maximizer of ``min_k mix @ payoff[:, k]`` over the simplex.
    value : float
        The attained maximin value.
    """
    q = np.asarray(payoff, dtype=float)
    if q.ndim != 2 or q.size == 0:
        raise ValueError("payoff must be a non-empty 2-D matrix")
    if not np.all(np.isfinite(q)):
        raise ValueError("payoff entries must be finite")
    A, K = q.shape
    if comb(A + K, A) <= ENUMERATION_CAP:
        mixes, values = _kernels.maximin_batch(q[None])
        return mixes[0], float(values[0])
    return _maximin_lp(q)


def _maximin_lp(q):
    A, K = q.shape
    # variables (mix, v); maximize v subject to v <= mix @ q[:, k]
    c = np.zeros(A + 1)
    c[-1] = -1.0
    A_ub = np.hstack([-q.T, np.ones((K, 1))])
    A_eq = np.zeros((1, A + 1))
    A_eq[0, :A] = 1.0
    res = linprog(
        c,
        A_ub=A_ub,
        b_ub=np.zeros(K),
        A_eq=A_eq,
        b_eq=[1.0],
        bounds=[(0, None)] * A + [(None, None)],
        method="highs",
        options={"primal_feasibility_tolerance": 1e-10, "dual_feasibility_tolerance": 1e-10},
    )
    if res.status != 0:  # pragma: no cover - the LP is always feasible and bounded
        raise RuntimeError(f"maximin LP failed: {res.message}")
    mix = np.clip(res.x[:A], 0.0, None)
    mix /= mix.sum()
    return mix, float((mix @ q).min())


def pure_maximin(payoff):
    """Best deterministic row: ``max_a min_k payoff[a, k]``."""
    q = np.asarray(payoff, dtype=float)
    row_min = q.min(axis=1)
    a = int(np.argmax(row_min))
    return a, float(row_min[a])
