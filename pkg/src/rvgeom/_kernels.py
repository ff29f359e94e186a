"""Hot numeric kernels with a numba path and a pure-numpy fallback.

The numba path is used when numba imports and ``RVGEOM_DISABLE_NUMBA`` is
unset (or set to ``0``).  Both paths compute the same quantities; the numpy
path vectorizes over the batch axis, the numba path loops.

Candidate kernels are passed padded: ``cand`` has shape ``(S, Kmax, A, S)``
and ``counts[s]`` gives the number of valid candidates at state ``s``.
"""

import os
from functools import lru_cache
from itertools import combinations

import numpy as np

try:
    from numba import njit

    _HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    _HAVE_NUMBA = False

_DISABLED = os.environ.get("RVGEOM_DISABLE_NUMBA", "0").lower() not in ("", "0", "false", "no")

# Pivot threshold relative to the largest entry of the system.
_PIVOT_EPS = 1e-13
# Simplex feasibility slack for candidate LP vertices.
_FEAS_EPS = 1e-10
# Relative slack for "strictly better" adversary switches.
_SWITCH_EPS = 1e-13
_MAX_PI_ITERS = 10_000

_backend = "numba" if (_HAVE_NUMBA and not _DISABLED) else "numpy"


def backend():
    """Name of the active backend, ``"numba"`` or ``"numpy"``."""
    return _backend


def set_backend(name):
    """Switch the active backend at runtime (used by tests and benchmarks)."""
    global _backend
    if name not in ("numba", "numpy"):
        raise ValueError(f"unknown backend {name!r}")
    if name == "numba" and not _HAVE_NUMBA:
        raise RuntimeError("numba is not importable")
    _backend = name


def _identity(fn=None, **kwargs):
    if fn is None:
        return lambda f: f
    return fn


jit = njit if _HAVE_NUMBA else _identity


# ---------------------------------------------------------------------------
# numba kernels
# ---------------------------------------------------------------------------


@jit(cache=True)
def _solve_small(M, b, out):
    """Gaussian elimination with partial pivoting; M and b are clobbered."""
    n = M.shape[0]
    scale = 0.0
    for i in range(n):
        for j in range(n):
            v = abs(M[i, j])
            if v > scale:
                scale = v
    if scale == 0.0:
        return False
    for col in range(n):
        piv = col
        best = abs(M[col, col])
        for r in range(col + 1, n):
            v = abs(M[r, col])
            if v > best:
                best = v
                piv = r
        if best <= _PIVOT_EPS * scale:
            return False
        if piv != col:
            for c in range(n):
                tmp = M[col, c]
                M[col, c] = M[piv, c]
                M[piv, c] = tmp
            tmp = b[col]
            b[col] = b[piv]
            b[piv] = tmp
        for r in range(col + 1, n):
            f = M[r, col] / M[col, col]
            if f != 0.0:
                for c in range(col, n):
                    M[r, c] -= f * M[col, c]
                b[r] -= f * b[col]
    for r in range(n - 1, -1, -1):
        acc = b[r]
        for c in range(r + 1, n):
            acc -= M[r, c] * out[c]
        out[r] = acc / M[r, r]
    return True


@jit(cache=True)
def _maximin_nb(q, K, mix_out):
    """Exact max over mixes of min_k mix @ q[:, k] by LP vertex enumeration.

    Variables are (mix, v).  Every vertex of {mix in simplex, v <= mix @ q_k}
    has A active inequalities among the K column constraints and the A sign
    constraints, so enumerating all A-subsets of the K + A inequalities hits
    the optimum.  Each candidate mix is scored by its true worst column, so
    inexact or spurious candidates can only under-report, never over-report.
    """
    A = q.shape[0]
    if A == 1:
        mix_out[0] = 1.0
        m = q[0, 0]
        for k in range(1, K):
            if q[0, k] < m:
                m = q[0, k]
        return m
    n = A + 1
    total = K + A
    M = np.empty((n, n))
    b = np.empty(n)
    sol = np.empty(n)
    cand = np.empty(A)
    c = np.arange(A)
    best = -np.inf
    while True:
        for j in range(n):
            M[0, j] = 1.0 if j < A else 0.0
            b[j] = 0.0
        b[0] = 1.0
        for i in range(A):
            idx = c[i]
            row = i + 1
            if idx < K:
                for a in range(A):
                    M[row, a] = q[a, idx]
                M[row, A] = -1.0
            else:
                for j in range(n):
                    M[row, j] = 0.0
                M[row, idx - K] = 1.0
        if _solve_small(M, b, sol):
            ok = True
            tot = 0.0
            for a in range(A):
                if sol[a] < -_FEAS_EPS:
                    ok = False
                    break
                cand[a] = sol[a] if sol[a] > 0.0 else 0.0
                tot += cand[a]
            if ok and tot > 0.0:
                for a in range(A):
                    cand[a] /= tot
                val = np.inf
                for k in range(K):
                    acc = 0.0
                    for a in range(A):
                        acc += cand[a] * q[a, k]
                    if acc < val:
                        val = acc
                if val > best:
                    best = val
                    for a in range(A):
                        mix_out[a] = cand[a]
        # next combination of A indices out of `total`
        i = A - 1
        while i >= 0 and c[i] == total - A + i:
            i -= 1
        if i < 0:
            break
        c[i] += 1
        for j in range(i + 1, A):
            c[j] = c[j - 1] + 1
    return best


@jit(cache=True)
def _maximin_batch_nb(Q, mixes, values):
    N, A, K = Q.shape
    for n in range(N):
        values[n] = _maximin_nb(Q[n], K, mixes[n])


@jit(cache=True)
def _robust_values_nb(rewards, cand, counts, gamma, policies, values, worst):
    N = policies.shape[0]
    S = cand.shape[0]
    Kmax = cand.shape[1]
    A = cand.shape[2]
    Ppi = np.zeros((S, Kmax, S))
    rpi = np.empty(S)
    M = np.empty((S, S))
    b = np.empty(S)
    V = np.empty(S)
    dots = np.empty(Kmax)
    idx = np.zeros(S, dtype=np.int64)
    for n in range(N):
        for s in range(S):
            acc = 0.0
            for a in range(A):
                acc += policies[n, s, a] * rewards[s, a]
            rpi[s] = acc
            for k in range(counts[s]):
                for j in range(S):
                    acc = 0.0
                    for a in range(A):
                        acc += policies[n, s, a] * cand[s, k, a, j]
                    Ppi[s, k, j] = acc
            idx[s] = 0
        # adversary policy iteration; ties resolved to the lowest index last
        for phase in range(2):
            for it in range(_MAX_PI_ITERS):
                for s in range(S):
                    for j in range(S):
                        M[s, j] = -gamma * Ppi[s, idx[s], j]
                    M[s, s] += 1.0
                    b[s] = rpi[s]
                _solve_small(M, b, V)
                vmax = 0.0
                for j in range(S):
                    if abs(V[j]) > vmax:
                        vmax = abs(V[j])
                eps = _SWITCH_EPS * (1.0 + vmax)
                changed = False
                for s in range(S):
                    m = np.inf
                    for k in range(counts[s]):
                        acc = 0.0
                        for j in range(S):
                            acc += Ppi[s, k, j] * V[j]
                        dots[k] = acc
                        if acc < m:
                            m = acc
                    if phase == 0:
                        if dots[idx[s]] > m + eps:
                            for k in range(counts[s]):
                                if dots[k] <= m + eps:
                                    idx[s] = k
                                    break
                            changed = True
                    else:
                        for k in range(counts[s]):
                            if dots[k] <= m + 10.0 * eps:
                                if k != idx[s]:
                                    idx[s] = k
                                    changed = True
                                break
                if not changed:
                    break
                if phase == 1:
                    # one re-solve with the tie-broken kernel
                    for s in range(S):
                        for j in range(S):
                            M[s, j] = -gamma * Ppi[s, idx[s], j]
                        M[s, s] += 1.0
                        b[s] = rpi[s]
                    _solve_small(M, b, V)
                    break
        for s in range(S):
            values[n, s] = V[s]
            worst[n, s] = idx[s]


@jit(cache=True)
def _state_q(rewards, cand, K, gamma, s, x, q):
    A = cand.shape[2]
    S = cand.shape[3]
    for a in range(A):
        for k in range(K):
            acc = 0.0
            for j in range(S):
                acc += cand[s, k, a, j] * x[j]
            q[a, k] = rewards[s, a] + gamma * acc


@jit(cache=True)
def _robust_membership_nb(rewards, cand, counts, gamma, X, tol, out):
    N, S = X.shape
    Kmax = cand.shape[1]
    A = cand.shape[2]
    q = np.empty((A, Kmax))
    mix = np.empty(A)
    for n in range(N):
        inside = True
        for s in range(S):
            K = counts[s]
            _state_q(rewards, cand, K, gamma, s, X[n], q)
            xs = X[n, s]
            qmin = np.inf
            lo = -np.inf
            for a in range(A):
                rmin = np.inf
                for k in range(K):
                    if q[a, k] < rmin:
                        rmin = q[a, k]
                if rmin < qmin:
                    qmin = rmin
                if rmin > lo:
                    lo = rmin
            if xs < qmin - tol:
                inside = False
                break
            if xs <= lo + tol:
                continue
            hi = np.inf
            for k in range(K):
                cmax = -np.inf
                for a in range(A):
                    if q[a, k] > cmax:
                        cmax = q[a, k]
                if cmax < hi:
                    hi = cmax
            if xs > hi + tol:
                inside = False
                break
            val = _maximin_nb(q[:, :K], K, mix)
            if xs > val + tol:
                inside = False
                break
        out[n] = inside


@jit(cache=True)
def _state_bounds_nb(rewards, cand, K, gamma, s, X, qmin, lower, exact, upper):
    N = X.shape[0]
    A = cand.shape[2]
    q = np.empty((A, K))
    mix = np.empty(A)
    for n in range(N):
        _state_q(rewards, cand, K, gamma, s, X[n], q)
        mn = np.inf
        lo = -np.inf
        for a in range(A):
            rmin = np.inf
            for k in range(K):
                if q[a, k] < rmin:
                    rmin = q[a, k]
            if rmin < mn:
                mn = rmin
            if rmin > lo:
                lo = rmin
        hi = np.inf
        for k in range(K):
            cmax = -np.inf
            for a in range(A):
                if q[a, k] > cmax:
                    cmax = q[a, k]
            if cmax < hi:
                hi = cmax
        qmin[n] = mn
        lower[n] = lo
        upper[n] = hi
        if hi - lo <= 0.0:
            exact[n] = lo
        else:
            exact[n] = _maximin_nb(q, K, mix)


# ---------------------------------------------------------------------------
# numpy fallbacks
# ---------------------------------------------------------------------------


@lru_cache(maxsize=None)
def _combos(A, K):
    return np.array(list(combinations(range(K + A), A)), dtype=np.int64)


def _maximin_batch_np(Q):
    Q = np.asarray(Q, dtype=float)
    N, A, K = Q.shape
    if A == 1:
        return np.ones((N, 1)), Q[:, 0, :].min(axis=1)
    n = A + 1
    best = np.full(N, -np.inf)
    best_mix = np.zeros((N, A))
    b = np.zeros((N, n, 1))
    b[:, 0, 0] = 1.0
    eye = np.eye(n)
    for combo in _combos(A, K):
        M = np.zeros((N, n, n))
        M[:, 0, :A] = 1.0
        for i, j in enumerate(combo):
            if j < K:
                M[:, i + 1, :A] = Q[:, :, j]
                M[:, i + 1, A] = -1.0
            else:
                M[:, i + 1, j - K] = 1.0
        scale = np.abs(M).max(axis=(1, 2))
        det = np.linalg.det(M / scale[:, None, None])
        ok = np.abs(det) > 1e-12
        M[~ok] = eye
        sol = np.linalg.solve(M, b)[:, :A, 0]
        ok &= (sol >= -_FEAS_EPS).all(axis=1)
        mix = np.clip(sol, 0.0, None)
        tot = mix.sum(axis=1)
        ok &= tot > 0.0
        mix = mix / np.where(tot > 0.0, tot, 1.0)[:, None]
        val = np.einsum("na,nak->nk", mix, Q).min(axis=1)
        better = ok & (val > best)
        best = np.where(better, val, best)
        best_mix[better] = mix[better]
    return best_mix, best


def _robust_values_np(rewards, cand, counts, gamma, policies):
    N, S, A = policies.shape
    Kmax = cand.shape[1]
    Ppi = np.einsum("nsa,skaj->nskj", policies, cand)
    rpi = np.einsum("nsa,sa->ns", policies, rewards)
    invalid = np.arange(Kmax)[None, :] >= counts[:, None]
    rows_n = np.arange(N)[:, None]
    rows_s = np.arange(S)[None, :]
    eye = np.eye(S)
    idx = np.zeros((N, S), dtype=np.int64)

    def solve(idx):
        P = Ppi[rows_n, rows_s, idx]
        return np.linalg.solve(eye - gamma * P, rpi[..., None])[..., 0]

    def scores(V):
        dots = np.einsum("nskj,nj->nsk", Ppi, V)
        dots[:, invalid] = np.inf
        eps = _SWITCH_EPS * (1.0 + np.abs(V).max(axis=1))
        return dots, dots.min(axis=2), eps[:, None]

    V = solve(idx)
    for _ in range(_MAX_PI_ITERS):
        dots, m, eps = scores(V)
        cur = np.take_along_axis(dots, idx[..., None], axis=2)[..., 0]
        need = cur > m + eps
        if not need.any():
            break
        lowest = np.argmax(dots <= (m + eps)[..., None], axis=2)
        idx = np.where(need, lowest, idx)
        V = solve(idx)
    dots, m, eps = scores(V)
    lowest = np.argmax(dots <= (m + 10.0 * eps)[..., None], axis=2)
    if (lowest != idx).any():
        idx = lowest
        V = solve(idx)
    return V, idx


def _state_q_np(rewards, cand, K, gamma, s, X):
    # (N, A, K)
    return rewards[s][None, :, None] + gamma * np.einsum("kaj,nj->nak", cand[s, :K], X)


def _state_bounds_np(rewards, cand, K, gamma, s, X):
    Q = _state_q_np(rewards, cand, K, gamma, s, X)
    qmin = Q.min(axis=(1, 2))
    lower = Q.min(axis=2).max(axis=1)
    upper = Q.max(axis=1).min(axis=1)
    exact = lower.copy()
    gap = upper - lower > 0.0
    if gap.any():
        exact[gap] = _maximin_batch_np(Q[gap])[1]
    return qmin, lower, exact, upper


def _robust_membership_np(rewards, cand, counts, gamma, X, tol):
    N, S = X.shape
    out = np.ones(N, dtype=bool)
    for s in range(S):
        Q = _state_q_np(rewards, cand, counts[s], gamma, s, X)
        xs = X[:, s]
        out &= xs >= Q.min(axis=(1, 2)) - tol
        lower = Q.min(axis=2).max(axis=1)
        upper = Q.max(axis=1).min(axis=1)
        ok = xs <= lower + tol
        gap = out & ~ok & (xs <= upper + tol)
        if gap.any():
            ok[gap] = xs[gap] <= _maximin_batch_np(Q[gap])[1] + tol
        out &= ok
    return out


# ---------------------------------------------------------------------------
# dispatch
# ---------------------------------------------------------------------------


def maximin_batch(Q, use=None):
    """Exact maximin value and mix for each (A, K) payoff in a stack."""
    Q = np.ascontiguousarray(Q, dtype=float)
    if (use or _backend) == "numba":
        N, A, _ = Q.shape
        mixes = np.zeros((N, A))
        values = np.empty(N)
        _maximin_batch_nb(Q, mixes, values)
        return mixes, values
    return _maximin_batch_np(Q)


def robust_values_batch(rewards, cand, counts, gamma, policies, use=None):
    """Robust values and lowest-index worst kernels for a stack of policies."""
    policies = np.ascontiguousarray(policies, dtype=float)
    counts = np.asarray(counts, dtype=np.int64)
    if (use or _backend) == "numba":
        N, S, _ = policies.shape
        values = np.empty((N, S))
        worst = np.empty((N, S), dtype=np.int64)
        _robust_values_nb(rewards, cand, counts, float(gamma), policies, values, worst)
        return values, worst
    return _robust_values_np(rewards, cand, counts, gamma, policies)


def robust_membership_batch(rewards, cand, counts, gamma, X, tol, use=None):
    """Verdict of the state-wise robust value space test for each row of X."""
    X = np.ascontiguousarray(X, dtype=float)
    counts = np.asarray(counts, dtype=np.int64)
    if (use or _backend) == "numba":
        out = np.empty(X.shape[0], dtype=np.bool_)
        _robust_membership_nb(rewards, cand, counts, float(gamma), X, float(tol), out)
        return out
    return _robust_membership_np(rewards, cand, counts, gamma, X, tol)


def state_bounds_batch(rewards, cand, K, gamma, s, X, use=None):
    """Per-point (min q, max_a min_k q, maximin, min_k max_a q) at state s."""
    X = np.ascontiguousarray(X, dtype=float)
    if (use or _backend) == "numba":
        N = X.shape[0]
        arrs = [np.empty(N) for _ in range(4)]
        _state_bounds_nb(rewards, cand, int(K), float(gamma), int(s), X, *arrs)
        return tuple(arrs)
    return _state_bounds_np(rewards, cand, int(K), gamma, int(s), X)
