"""Random instance generation for the verification suite."""

from dataclasses import asdict, dataclass, field

import numpy as np

from ..instance import Instance
from ..mdp import Mdp, random_simplex
from ..robust import DEFAULT_CAP, SARectangularSet, SRectangularSet

KINDS = ("mdp", "s_rect", "sa_rect")


@dataclass
class SuiteConfig:
    """Parameters of a verification run.

    Size ranges are inclusive ``(low, high)`` pairs.  ``checks`` restricts
    the run to the named checks (``None`` runs all).  ``replay`` holds
    failure records from an earlier report; when given, those instances are
    re-checked instead of generating new ones.  ``inject_failure`` names a
    check whose outcome is forced to fail (a test hook for the failure path).
    """

    seed: int = 0
    num_instances: int = 200
    states: tuple = (2, 3)
    actions: tuple = (2, 3)
    candidates: tuple = (1, 3)
    gamma: float = 0.9
    tol: float = 1e-8
    membership_tol: float = 1e-9
    policies: int = 20
    exact_policies: int = 2
    points: int = 200
    axis_lines: int = 2
    checks: tuple = None
    replay: list = field(default_factory=list)
    inject_failure: str = None

    def __post_init__(self):
        for name in ("states", "actions", "candidates"):
            lo, hi = getattr(self, name)
            if not 1 <= lo <= hi:
                raise ValueError(f"{name} range {lo, hi} is invalid")
        if self.candidates[1] ** self.states[1] > DEFAULT_CAP:
            raise ValueError("candidate and state ranges exceed the brute-force cap")
        if self.num_instances < 0:
            raise ValueError("num_instances must be nonnegative")
        if not 0.0 <= self.gamma < 1.0:
            raise ValueError("gamma must be in [0, 1)")

    def to_dict(self):
        d = asdict(self)
        d["replay"] = len(self.replay)
        return d


def instance_seed(seed, index):
    """Deterministic 63-bit seed for instance ``index`` of a run seeded with ``seed``."""
    return int(np.random.SeedSequence([seed, index]).generate_state(1, np.uint64)[0] >> np.uint64(1))


def generate_instance(cfg, kind, seed):
    """Random instance of the given kind.

    Rewards are uniform on ``[0, 1]``; every probability row is uniform on
    the simplex.  ``kind="mdp"`` yields a plain MDP, ``"s_rect"`` per-state
    candidate kernels and ``"sa_rect"`` per state-action candidate rows.
    """
    if kind not in KINDS:
        raise ValueError(f"kind must be one of {KINDS}, got {kind!r}")
    rng = np.random.default_rng(seed)
    S = int(rng.integers(cfg.states[0], cfg.states[1] + 1))
    A = int(rng.integers(cfg.actions[0], cfg.actions[1] + 1))
    rewards = rng.uniform(0.0, 1.0, size=(S, A))
    k_lo, k_hi = cfg.candidates
    if kind == "mdp":
        kernel = random_simplex(rng, (S, A, S))
        return Instance(Mdp(rewards, kernel, cfg.gamma), "mdp")
    if kind == "s_rect":
        per_state = tuple(random_simplex(rng, (int(rng.integers(k_lo, k_hi + 1)), A, S)) for _ in range(S))
        u = SRectangularSet(per_state)
        kernel = np.stack([ks[0] for ks in per_state])
    else:
        # keep each state's product of row counts within the candidate range
        per_sa = []
        for _ in range(S):
            budget = int(rng.integers(k_lo, k_hi + 1))
            counts = np.ones(A, dtype=int)
            for a in rng.permutation(A):
                while counts.prod() * (counts[a] + 1) // counts[a] <= max(budget, 1) and rng.random() < 0.5:
                    counts[a] += 1
            per_sa.append(tuple(random_simplex(rng, (int(c), S)) for c in counts))
        u = SARectangularSet(tuple(per_sa))
        kernel = np.array([[rows[0] for rows in per_a] for per_a in per_sa])
    return Instance(Mdp(rewards, kernel, cfg.gamma), kind, u)
