"""JSON instance files: parsing, validation and lossless serialization.

An instance holds ``states``, ``actions``, ``gamma``, ``rewards`` and exactly
one of ``kernel`` (plain MDP), ``s_rect`` (per-state candidate kernels) or
``sa_rect`` (per state-action candidate rows), plus optional ``policy`` and
``p0``.  ``p0`` is carried through but nothing uses it.  See
``docs/instance-format.md``.
"""

import json
import math
from dataclasses import dataclass

import numpy as np

from .mdp import STOCH_TOL, DimensionError, Mdp, validate_mdp
from .robust import SARectangularSet, SRectangularSet, sa_to_s_rectangular, singleton_set

KINDS = ("kernel", "s_rect", "sa_rect")
REQUIRED = ("states", "actions", "gamma", "rewards")
OPTIONAL = ("policy", "p0")


class InstanceError(ValueError):
    """Malformed instance: bad JSON, missing/unknown key, wrong type or invalid value."""

    def __init__(self, message, field=None, line=None):
        where = []
        if line is not None:
            where.append(f"line {line}")
        if field is not None:
            where.append(f"field '{field}'")
        super().__init__(f"{', '.join(where)}: {message}" if where else message)
        self.field = field
        self.line = line


class InstanceShapeError(DimensionError):
    """Well-formed instance whose arrays disagree in shape."""


@dataclass(frozen=True, eq=False)
class Instance:
    """A parsed instance.

    ``kind`` is ``"mdp"``, ``"s_rect"`` or ``"sa_rect"``.  For uncertain
    instances ``mdp.kernel`` is the nominal kernel made of each list's first
    candidate; robust routines read only its rewards and discount.
    """

    mdp: Mdp
    kind: str
    uncertainty: object = None
    policy: np.ndarray = None
    p0: np.ndarray = None

    @property
    def s_rect(self):
        """The uncertainty as an s-rectangular set (a singleton for plain MDPs)."""
        if self.kind == "mdp":
            return singleton_set(self.mdp)
        if self.kind == "sa_rect":
            return sa_to_s_rectangular(self.uncertainty)
        return self.uncertainty

    def with_uncertainty(self, u):
        kind = "sa_rect" if isinstance(u, SARectangularSet) else "s_rect"
        return Instance(self.mdp, kind, u, self.policy, self.p0)

    def to_dict(self):
        m = self.mdp
        d = {"states": m.num_states, "actions": m.num_actions, "gamma": m.gamma, "rewards": m.rewards.tolist()}
        if self.kind == "mdp":
            d["kernel"] = m.kernel.tolist()
        elif self.kind == "s_rect":
            d["s_rect"] = [ks.tolist() for ks in self.uncertainty.per_state]
        else:
            d["sa_rect"] = [[c.tolist() for c in per_a] for per_a in self.uncertainty.per_state_action]
        if self.policy is not None:
            d["policy"] = self.policy.tolist()
        if self.p0 is not None:
            d["p0"] = self.p0.tolist()
        return d


def _array(value, field, depth):
    """Nested list of numbers -> float array with ``depth`` dimensions."""
    try:
        arr = np.array(value, dtype=float)
    except (TypeError, ValueError) as exc:
        if "inhomogeneous" in str(exc) or "sequence" in str(exc):
            raise InstanceShapeError(f"field '{field}': ragged array, expected {depth}-D") from None
        raise InstanceError(f"expected a {depth}-D numeric array ({exc})", field) from None
    if arr.dtype == object or arr.ndim != depth:
        raise InstanceShapeError(f"field '{field}': expected a {depth}-D array, got shape {arr.shape}")
    if isinstance(value, bool) or any(isinstance(v, bool) for v in np.ravel(np.array(value, dtype=object))):
        raise InstanceError("booleans are not numbers", field)
    return arr


def _int(d, key):
    v = d[key]
    if isinstance(v, bool) or not isinstance(v, int) or v < 1:
        raise InstanceError(f"expected a positive integer, got {v!r}", key)
    return v


def _stochastic(arr, field):
    if not np.all(np.isfinite(arr)):
        raise InstanceError("entries must be finite", field)
    if arr.size and (arr.min() < 0.0 or np.abs(arr.sum(axis=-1) - 1.0).max() > STOCH_TOL):
        raise InstanceError(f"rows must be probability vectors (tolerance {STOCH_TOL})", field)


def from_dict(d):
    """Build an :class:`Instance` from a decoded JSON object."""
    if not isinstance(d, dict):
        raise InstanceError("top level must be a JSON object")
    unknown = sorted(set(d) - set(REQUIRED) - set(KINDS) - set(OPTIONAL))
    if unknown:
        raise InstanceError(f"unknown key(s) {unknown}", unknown[0])
    for key in REQUIRED:
        if key not in d:
            raise InstanceError("missing required key", key)
    present = [k for k in KINDS if k in d]
    if len(present) != 1:
        raise InstanceError(f"exactly one of {list(KINDS)} is required, got {present}", "/".join(KINDS))
    S, A = _int(d, "states"), _int(d, "actions")
    gamma = d["gamma"]
    if isinstance(gamma, bool) or not isinstance(gamma, (int, float)) or not math.isfinite(gamma):
        raise InstanceError(f"expected a number, got {gamma!r}", "gamma")
    if not 0.0 <= gamma < 1.0:
        raise InstanceError(f"gamma {gamma!r} not in [0,1)", "gamma")
    rewards = _array(d["rewards"], "rewards", 2)
    if rewards.shape != (S, A):
        raise InstanceShapeError(f"field 'rewards': shape {rewards.shape}, expected {(S, A)}")
    if not np.all(np.isfinite(rewards)):
        raise InstanceError("entries must be finite", "rewards")

    kind = present[0]
    u = None
    if kind == "kernel":
        kernel = _array(d["kernel"], "kernel", 3)
        if kernel.shape != (S, A, S):
            raise InstanceShapeError(f"field 'kernel': shape {kernel.shape}, expected {(S, A, S)}")
        _stochastic(kernel, "kernel")
        kind = "mdp"
    elif kind == "s_rect":
        raw = d["s_rect"]
        if not isinstance(raw, list) or len(raw) != S:
            raise InstanceShapeError(f"field 's_rect': expected {S} per-state candidate lists")
        per_state = []
        for s, ks in enumerate(raw):
            field = f"s_rect[{s}]"
            arr = _array(ks, field, 3)
            if arr.shape[0] == 0 or arr.shape[1:] != (A, S):
                raise InstanceShapeError(f"field '{field}': shape {arr.shape}, expected (K>=1, {A}, {S})")
            _stochastic(arr, field)
            per_state.append(arr)
        u = SRectangularSet(tuple(per_state))
        kernel = np.stack([ks[0] for ks in per_state])
    else:
        raw = d["sa_rect"]
        if not isinstance(raw, list) or len(raw) != S:
            raise InstanceShapeError(f"field 'sa_rect': expected {S} per-state lists")
        rows = []
        for s, per_a in enumerate(raw):
            if not isinstance(per_a, list) or len(per_a) != A:
                raise InstanceShapeError(f"field 'sa_rect[{s}]': expected {A} per-action lists")
            row = []
            for a, cands in enumerate(per_a):
                field = f"sa_rect[{s}][{a}]"
                arr = _array(cands, field, 2)
                if arr.shape[0] == 0 or arr.shape[1] != S:
                    raise InstanceShapeError(f"field '{field}': shape {arr.shape}, expected (K>=1, {S})")
                _stochastic(arr, field)
                row.append(arr)
            rows.append(tuple(row))
        u = SARectangularSet(tuple(rows))
        kernel = np.array([[per_a[a][0] for a in range(A)] for per_a in rows])

    m = Mdp(rewards, kernel, float(gamma))
    problems = validate_mdp(m)
    if problems:  # pragma: no cover - every constraint is checked above
        raise InstanceError("; ".join(problems))

    policy = p0 = None
    if "policy" in d:
        policy = _array(d["policy"], "policy", 2)
        if policy.shape != (S, A):
            raise InstanceShapeError(f"field 'policy': shape {policy.shape}, expected {(S, A)}")
        _stochastic(policy, "policy")
    if "p0" in d:
        p0 = _array(d["p0"], "p0", 1)
        if p0.shape != (S,):
            raise InstanceShapeError(f"field 'p0': shape {p0.shape}, expected ({S},)")
        _stochastic(p0, "p0")
    return Instance(m, kind, u, policy, p0)


def loads(text):
    """Parse instance JSON text."""
    try:
        d = json.loads(text)
    except json.JSONDecodeError as exc:
        raise InstanceError(exc.msg, line=exc.lineno) from None
    return from_dict(d)


def load(path):
    with open(path, encoding="utf-8") as fh:
        return loads(fh.read())


def format_json(obj, indent=2, shortest=False):
    """Serialize ``obj`` as JSON with every float at 17 significant digits.

    ``shortest=True`` writes the shortest text that reads back to the same
    double instead (also lossless, easier on human readers).  Lists of
    scalars stay on one line; non-finite floats become ``null``.
    """
    return _fmt(obj, indent, 0, shortest) + "\n"


def _scalar(v, shortest=False):
    if v is None:
        return "null"
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        v = float(v)
        if not math.isfinite(v):
            return "null"
        text = repr(v) if shortest else "%.17g" % v
        # keep a float marker so integers-valued floats stay floats on re-read
        return text if any(c in text for c in ".en") else text + ".0"
    if isinstance(v, str):
        return json.dumps(v, ensure_ascii=False)
    raise TypeError(f"cannot serialize {type(v).__name__}")


def _fmt(obj, indent, level, shortest=False):
    pad = " " * (indent * (level + 1))
    end = " " * (indent * level)
    if isinstance(obj, np.ndarray):
        obj = obj.tolist()
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad}{json.dumps(str(k))}: {_fmt(v, indent, level + 1, shortest)}" for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        if all(not isinstance(v, (dict, list, tuple, np.ndarray)) for v in obj):
            return "[" + ", ".join(_scalar(v, shortest) for v in obj) + "]"
        return "[\n" + ",\n".join(pad + _fmt(v, indent, level + 1, shortest) for v in obj) + "\n" + end + "]"
    return _scalar(obj, shortest)


def dumps(instance, shortest=False):
    """Instance JSON text; ``loads(dumps(x))`` reproduces ``x`` exactly."""
    return format_json(instance.to_dict(), shortest=shortest)


def dump(instance, path, shortest=False):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(dumps(instance, shortest))
