"""Time the compiled kernels against their numpy fallbacks.

Usage::

    python3 benchmarks/bench_kernels.py [--repeat 5] [--size 2000]

Each kernel is run once per backend to warm up (numba compiles on first
call, or loads its cache), then timed ``--repeat`` times; the best time is
reported.  Outputs of the two backends are compared so a speedup never
hides a disagreement.
"""

import argparse
import time

import numpy as np

from rvgeom import _kernels
from rvgeom.mdp import Mdp, random_policies, random_simplex, value_box
from rvgeom.robust import SRectangularSet


def _instance(rng, S, A, K):
    m = Mdp(rng.uniform(0.0, 1.0, (S, A)), random_simplex(rng, (S, A, S)), 0.9)
    u = SRectangularSet(tuple(random_simplex(rng, (K, A, S)) for _ in range(S)))
    return m, u


def _best(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t0)
    return min(times), out


def _same(a, b):
    if isinstance(a, tuple):
        return all(_same(x, y) for x, y in zip(a, b))
    if a.dtype == bool or np.issubdtype(a.dtype, np.integer):
        return bool(np.array_equal(a, b))
    return bool(np.allclose(a, b, atol=1e-9, rtol=0))


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--repeat", type=int, default=5)
    p.add_argument("--size", type=int, default=2000, help="policies / points per call")
    p.add_argument("--seed", type=int, default=0)
    args = p.parse_args(argv)

    rng = np.random.default_rng(args.seed)
    m, u = _instance(rng, 3, 3, 3)
    cand, counts = u.padded
    pis = random_policies(rng, args.size, 3, 3)
    X = rng.uniform(*value_box(m), (args.size * 10, 3))
    Q = rng.normal(size=(args.size * 10, 3, 3))

    cases = {
        "maximin_batch": lambda use: _kernels.maximin_batch(Q, use=use),
        "robust_values_batch": lambda use: _kernels.robust_values_batch(m.rewards, cand, counts, m.gamma, pis, use=use),
        "robust_membership_batch": lambda use: _kernels.robust_membership_batch(m.rewards, cand, counts, m.gamma, X, 1e-9, use=use),
        "state_bounds_batch": lambda use: _kernels.state_bounds_batch(m.rewards, cand, counts[0], m.gamma, 0, X, use=use),
    }
    print(f"{'kernel':26s} {'numba [ms]':>11s} {'numpy [ms]':>11s} {'speedup':>8s}  agree")
    for name, fn in cases.items():
        fn("numba")
        fn("numpy")
        t_nb, out_nb = _best(lambda: fn("numba"), args.repeat)
        t_np, out_np = _best(lambda: fn("numpy"), args.repeat)
        print(f"{name:26s} {1e3 * t_nb:11.2f} {1e3 * t_np:11.2f} {t_np / t_nb:8.1f}x  {_same(out_nb, out_np)}")


if __name__ == "__main__":
    main()
