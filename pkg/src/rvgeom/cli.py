"""Command-line entry point.

Exit codes: 0 success, 1 verification failure, 2 unreadable or malformed
input, 3 usage or shape error.  JSON results go to stdout, diagnostics to
stderr.
"""

import argparse
import json
import sys

import numpy as np

from .geometry import DEFAULT_TOL, value_space_membership
from .harness.figures import FIGURES, emit_figure_data
from .harness.generate import SuiteConfig
from .harness.suite import CHECK_NAMES, run_suite
from .instance import InstanceError, dump, format_json, load
from .mdp import DimensionError, check_policy, evaluate_policy
from .reduction import reduce_uncertainty
from .robust import CapExceeded, robust_bellman_apply, robust_evaluate_policy, singleton_set
from .robust_geometry import robust_space_membership

EXIT_OK, EXIT_FAIL, EXIT_PARSE, EXIT_USAGE = 0, 1, 2, 3

SUITES = {
    "default": {},
    "quick": {"num_instances": 20, "policies": 10, "points": 100},
}


class UsageError(Exception):
    """Bad flags or flag values."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _emit(obj):
    sys.stdout.write(format_json(obj))
    sys.stdout.flush()


def _load(path):
    try:
        return load(path)
    except OSError as exc:
        raise InstanceError(f"cannot read instance: {exc.strerror}", field="--instance") from None


def _load_policy(path, inst):
    if path is None:
        if inst.policy is None:
            raise UsageError("no policy: the instance has none and --policy was not given")
        return inst.policy
    try:
        with open(path, encoding="utf-8") as fh:
            data = json.load(fh)
    except OSError as exc:
        raise InstanceError(f"cannot read policy file: {exc.strerror}", field="--policy") from None
    except json.JSONDecodeError as exc:
        raise InstanceError(f"policy file: {exc.msg}", field="--policy", line=exc.lineno) from None
    if isinstance(data, dict):
        data = data.get("policy")
    try:
        return check_policy(inst.mdp, data)
    except DimensionError:
        raise
    except (TypeError, ValueError) as exc:
        raise InstanceError(str(exc), field="--policy") from None


def _parse_point(text, num_states):
    try:
        x = np.array([float(v) for v in text.split(",")])
    except ValueError:
        raise UsageError(f"--point must be comma-separated numbers, got {text!r}") from None
    if x.shape != (num_states,):
        raise DimensionError(f"--point has {len(x)} entries, instance has {num_states} states")
    return x


def cmd_evaluate(args):
    inst = _load(args.instance)
    pi = _load_policy(args.policy, inst)
    m = inst.mdp
    u = inst.s_rect
    if all(len(ks) == 1 for ks in u.per_state):
        # no adversary: the exact linear solve is the answer
        value = evaluate_policy(m, pi)
        worst, iterations = [0] * m.num_states, 0
    else:
        res = robust_evaluate_policy(m, u, pi, tol=args.tol)
        value, worst, iterations = res.value, list(res.worst_kernel), res.iterations
    residual = float(np.abs(robust_bellman_apply(m, u if inst.kind != "mdp" else singleton_set(m), pi, value) - value).max())
    _emit({"value": value.tolist(), "worst_kernel": worst, "iterations": iterations, "residual": residual})
    return EXIT_OK


def cmd_membership(args):
    inst = _load(args.instance)
    x = _parse_point(args.point, inst.mdp.num_states)
    if inst.kind == "mdp":
        rep = value_space_membership(inst.mdp, x, args.tol)
    else:
        rep = robust_space_membership(inst.mdp, inst.uncertainty, x, args.tol)
    _emit({"kind": inst.kind, **rep.to_dict()})
    return EXIT_OK


def cmd_reduce(args):
    inst = _load(args.instance)
    if inst.kind == "mdp":
        raise UsageError("reduce needs an instance with 's_rect' or 'sa_rect'")
    reduced, report = reduce_uncertainty(inst.uncertainty)
    dump(inst.with_uncertainty(reduced), args.out)
    _emit({"out": args.out, **report.to_dict()})
    return EXIT_OK


def cmd_verify(args):
    if args.suite not in SUITES:
        raise UsageError(f"unknown suite {args.suite!r}; choose from {', '.join(SUITES)}")
    kw = dict(SUITES[args.suite])
    if args.instances is not None:
        kw["num_instances"] = args.instances
    replay = []
    if args.replay:
        try:
            with open(args.replay, encoding="utf-8") as fh:
                replay = json.load(fh)["failures"]
        except (OSError, json.JSONDecodeError, KeyError, TypeError) as exc:
            raise InstanceError(f"cannot read replay report: {exc}", field="--replay") from None
    if args.inject_failure is not None and args.inject_failure not in CHECK_NAMES:
        raise UsageError(f"unknown check {args.inject_failure!r}")
    cfg = SuiteConfig(seed=args.seed, replay=replay, inject_failure=args.inject_failure, **kw)
    report = run_suite(cfg)
    out = report.to_dict()
    out["suite"] = args.suite
    _emit(out)
    for name, st in report.checks.items():
        print(f"{'PASS' if not st.failed else 'FAIL'} {name} [{st.anchor}] {st.passed}/{st.passed + st.failed}", file=sys.stderr)
    return EXIT_OK if report.all_passed else EXIT_FAIL


def cmd_render(args):
    inst = _load(args.instance)
    paths = emit_figure_data(inst, args.figure, args.out, seed=args.seed, samples=args.samples, grid=args.grid)
    _emit({"figure": args.figure, "files": paths})
    return EXIT_OK


def build_parser():
    p = _Parser(prog="rvgeom", description="Value-space geometry of finite MDPs and rectangular robust MDPs.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    e = sub.add_parser("evaluate", help="(robust) value of a policy")
    e.add_argument("--instance", required=True, help="instance JSON file")
    e.add_argument("--policy", help="policy JSON file (S x A array or {'policy': ...}); defaults to the instance's")
    e.add_argument("--tol", type=float, default=1e-10, help="fixed-point tolerance for robust evaluation")
    e.set_defaults(func=cmd_evaluate)

    mem = sub.add_parser("membership", help="is a point the (robust) value of some policy?")
    mem.add_argument("--instance", required=True)
    mem.add_argument("--point", required=True, help="comma-separated coordinates, e.g. '1.5,2.0'")
    mem.add_argument("--tol", type=float, default=DEFAULT_TOL)
    mem.set_defaults(func=cmd_membership)

    r = sub.add_parser("reduce", help="drop non-extreme candidates from the uncertainty set")
    r.add_argument("--instance", required=True)
    r.add_argument("--out", required=True, help="path for the reduced instance")
    r.set_defaults(func=cmd_reduce)

    v = sub.add_parser("verify", help="run the property-verification suite")
    v.add_argument("--suite", default="default", help=f"one of: {', '.join(SUITES)}")
    v.add_argument("--seed", type=int, default=0)
    v.add_argument("--instances", type=int, help="number of random instances (overrides the suite)")
    v.add_argument("--replay", help="re-run the failures recorded in a previous report")
    v.add_argument("--inject-failure", help=argparse.SUPPRESS)
    v.set_defaults(func=cmd_verify)

    d = sub.add_parser("render", help="write CSV/SVG data for a planar figure")
    d.add_argument("--instance", required=True)
    d.add_argument("--figure", required=True, choices=sorted(FIGURES, key=lambda k: int(k[3:])))
    d.add_argument("--out", required=True, help="output directory")
    d.add_argument("--seed", type=int, default=0)
    d.add_argument("--samples", type=int, default=2000)
    d.add_argument("--grid", type=int, default=101, help="region grid points per axis")
    d.set_defaults(func=cmd_render)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    for name in ("tol",):
        if getattr(args, name, 1.0) <= 0:
            print(f"rvgeom: error: --{name} must be positive", file=sys.stderr)
            return EXIT_USAGE
    try:
        return args.func(args)
    except InstanceError as exc:
        print(f"rvgeom: parse error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except OSError as exc:
        print(f"rvgeom: cannot write output: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DimensionError, CapExceeded, UsageError) as exc:
        print(f"rvgeom: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ValueError as exc:
        print(f"rvgeom: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
