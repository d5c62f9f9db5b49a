"""Command-line front end.

Exit codes: 0 pass, 1 check failure, 2 parse error, 3 ultrametric violation,
4 invalid input, 5 internal verification failure.
"""

from __future__ import annotations

import argparse
import dataclasses
import math
import random
import sys

from ._rational import format_rational
from .boundary import (JumpProcessSpec, SigmaError, j_matrix, generator_matrix,
                       semigroup_operator, standardize)
from .duality import (ReconstructionError, Report, check_base_point_invariance,
                      check_doob_naim, check_j_equals_theta, process_to_walk,
                      random_boundary_functions, walk_to_process)
from .io import (ParseError, dump_json, load_json, mu_from_json, phi_from_json,
                 sigma_from_json, space_from_json, tree_from_json, walk_from_json)
from .simulate import SimConfig, simulate_jump_chain, simulate_walk
from .tree import TreeError, UltrametricError, tree_from_ultrametric
from .walk import WalkError, check_kernel_identities, compute_kernels

EXIT_OK, EXIT_CHECK, EXIT_PARSE, EXIT_METRIC, EXIT_INVALID, EXIT_INTERNAL = range(6)


class CommandError(Exception):
    def __init__(self, code: int, message: str):
        super().__init__(message)
        self.code = code


def _emit(obj, args) -> None:
    if getattr(args, "pretty", False):
        _print_pretty(obj)
    else:
        text = dump_json(obj, getattr(args, "out", None))
        if getattr(args, "out", None) is None:
            print(text)


def _print_pretty(obj, indent: int = 0) -> None:
    pad = "  " * indent
    if isinstance(obj, dict):
        for k, v in obj.items():
            if isinstance(v, (dict, list)) and v:
                print(f"{pad}{k}:")
                _print_pretty(v, indent + 1)
            else:
                print(f"{pad}{k}: {v}")
    elif isinstance(obj, list):
        for v in obj:
            if isinstance(v, (dict, list)):
                _print_pretty(v, indent + 1)
                print()
            else:
                print(f"{pad}- {v}")
    else:
        print(f"{pad}{obj}")


def _load_tree(path):
    return tree_from_json(load_json(path))


def _load_walk(tree, path):
    obj = load_json(path)
    try:
        return walk_from_json(tree, obj)
    except WalkError:
        raise
    except (KeyError, IndexError) as exc:
        raise WalkError(f"walk does not match tree: {exc}") from None


# ---------------------------------------------------------------------------
# subcommands


def cmd_build_from_metric(args) -> int:
    space = space_from_json(load_json(args.space))
    tree, phi, labels = tree_from_ultrametric(space)
    dump_json(tree.to_json(), args.tree_out)
    dump_json(phi.to_json(), args.phi_out)
    _emit({"labels": {str(v): lab for v, lab in sorted(labels.items())},
           "tree": args.tree_out, "phi": args.phi_out}, args)
    return EXIT_OK


def cmd_analyze(args) -> int:
    tree = _load_tree(args.tree)
    walk = _load_walk(tree, args.walk)
    kernels = compute_kernels(walk)
    checks = check_kernel_identities(kernels)
    failures = [c.to_json() for c in checks if not c.passed]
    out = kernels.to_json()
    out["identities"] = {"checked": len(checks), "failures": failures}
    _emit(out, args)
    return EXIT_OK if not failures else EXIT_CHECK


def cmd_dualize(args) -> int:
    tree = _load_tree(args.tree)
    if args.direction == "walk-to-process":
        if not args.walk:
            raise CommandError(EXIT_INVALID, "walk-to-process needs --walk")
        kernels = compute_kernels(_load_walk(tree, args.walk))
        res = walk_to_process(kernels)
        out = res.to_json()
        if args.phi_out:
            dump_json(out["phi"], args.phi_out)
        if args.mu_out:
            dump_json(out["mu"], args.mu_out)
        _emit(out, args)
        return EXIT_OK
    if not (args.phi and args.mu):
        raise CommandError(EXIT_INVALID, "process-to-walk needs --phi and --mu")
    phi = phi_from_json(tree, load_json(args.phi))
    mu = mu_from_json(tree, load_json(args.mu))
    trace = process_to_walk(phi, mu)
    walk_json = trace.walk.to_json()
    if args.walk_out:
        dump_json(walk_json, args.walk_out)
    _emit({"direction": "process-to-walk", "C": format_rational(trace.C), "walk": walk_json}, args)
    return EXIT_OK


def _corrupt(kernels):
    bad = dict(kernels.G_diag)
    bad[kernels.tree.root] = bad[kernels.tree.root] * 2
    return dataclasses.replace(kernels, G_diag=bad)


def cmd_check(args) -> int:
    tree = _load_tree(args.tree)
    kernels = compute_kernels(_load_walk(tree, args.walk))
    if args.debug_corrupt_g:
        kernels = _corrupt(kernels)
    suites = ["identities", "doob-naim", "j-theta", "invariance"] if args.suite == "all" else [args.suite]
    reports = []
    for s in suites:
        if s == "identities":
            rep = Report("identities", instances=1)
            rep.add(check_kernel_identities(kernels))
        elif s == "doob-naim":
            funcs = random_boundary_functions(tree, random.Random(args.seed), args.random_functions)
            rep = check_doob_naim(kernels, funcs)
        elif s == "j-theta":
            rep = check_j_equals_theta(kernels)
        else:
            rep = check_base_point_invariance(kernels)
        reports.append(rep)
    _emit({"reports": [r.to_json() for r in reports],
           "pass": all(r.passed for r in reports)}, args)
    return EXIT_OK if all(r.passed for r in reports) else EXIT_CHECK


def cmd_semigroup(args) -> int:
    tree = _load_tree(args.tree)
    phi = phi_from_json(tree, load_json(args.phi))
    mu = mu_from_json(tree, load_json(args.mu))
    sigma = sigma_from_json(load_json(args.sigma))
    spec = JumpProcessSpec(phi, mu, sigma)
    ts = args.t
    if any(not t > 0 for t in ts):
        raise CommandError(EXIT_INVALID, "all t values must be positive")
    mats = {t: semigroup_operator(spec, t) for t in ts}
    out = {"leaves": list(tree.leaves), "operators": []}
    for t in ts:
        P = mats[t]
        out["operators"].append({"t": t, "matrix": P.matrix.tolist(),
                                 "row_sum_error": float(abs(P.row_sums() - 1).max())})
    residuals = []
    for s, t in zip(ts, ts[1:]):
        prod = mats[s].matrix @ mats[t].matrix
        st = semigroup_operator(spec, s + t).matrix
        residuals.append({"s": s, "t": t, "residual": float(abs(prod - st).max())})
    for t in ts:
        # P^t P^t against P^{2t}
        sq = mats[t].matrix @ mats[t].matrix
        residuals.append({"s": t, "t": t,
                          "residual": float(abs(sq - semigroup_operator(spec, 2 * t).matrix).max())})
    out["semigroup_residuals"] = residuals
    if args.expm_diagnostic:
        from scipy.linalg import expm
        phi_star = standardize(phi, sigma)
        J = j_matrix(tree, phi_star, {l: float(v) for l, v in spec.mu.items()})
        L = generator_matrix(J, {l: float(v) for l, v in spec.mu.items()}, tree.leaves).astype(float)
        out["expm_diagnostic"] = [
            {"t": t, "max_abs_difference": float(abs(mats[t].matrix - expm(-t * L)).max())}
            for t in ts]
    _emit(out, args)
    return EXIT_OK


def cmd_simulate(args) -> int:
    if args.trials < 1:
        raise CommandError(EXIT_INVALID, "trials must be at least 1")
    tree = _load_tree(args.tree)
    if args.kind == "walk":
        if not args.walk:
            raise CommandError(EXIT_INVALID, "simulate walk needs --walk")
        walk = _load_walk(tree, args.walk)
        start = tree.root if args.start is None else args.start
        stats = simulate_walk(walk, SimConfig(args.seed, args.trials, start, args.max_steps))
    else:
        if not (args.phi and args.mu and args.sigma):
            raise CommandError(EXIT_INVALID, "simulate jump needs --phi, --mu and --sigma")
        phi = phi_from_json(tree, load_json(args.phi))
        mu = mu_from_json(tree, load_json(args.mu))
        sigma = sigma_from_json(load_json(args.sigma))
        spec = JumpProcessSpec(phi, mu, sigma, strict=False)
        start = tree.leaves[0] if args.start is None else args.start
        stats = simulate_jump_chain(spec, SimConfig(args.seed, args.trials, start), steps=args.steps)
    k = len(tree.leaves)
    bound = 4.5 * math.sqrt(k / (4 * args.trials))
    stats["tv_bound"] = bound
    stats["pass"] = stats["tv"] <= bound
    stats["empirical"] = {str(l): v for l, v in stats["empirical"].items()}
    stats["exact"] = {str(l): v for l, v in stats["exact"].items()}
    stats["stderr"] = {str(l): v for l, v in stats["stderr"].items()}
    _emit(stats, args)
    return EXIT_OK if stats["pass"] else EXIT_CHECK


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ultraduality",
                                     description="Random walks on trees and jump processes on their boundary.")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--out", help="write the JSON report here instead of stdout")
        p.add_argument("--pretty", action="store_true", help="human-readable output")

    p = sub.add_parser("build-from-metric", help="tree and phi from an ultrametric distance matrix")
    p.add_argument("space")
    p.add_argument("--tree-out", required=True)
    p.add_argument("--phi-out", required=True)
    common(p)
    p.set_defaults(func=cmd_build_from_metric)

    p = sub.add_parser("analyze", help="kernels F, G, m, a, nu and identity checks")
    p.add_argument("tree")
    p.add_argument("walk")
    common(p)
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("dualize", help="walk <-> (phi, mu)")
    p.add_argument("direction", choices=["walk-to-process", "process-to-walk"])
    p.add_argument("--tree", required=True)
    p.add_argument("--walk")
    p.add_argument("--phi")
    p.add_argument("--mu")
    p.add_argument("--phi-out")
    p.add_argument("--mu-out")
    p.add_argument("--walk-out")
    common(p)
    p.set_defaults(func=cmd_dualize)

    p = sub.add_parser("check", help="exact verification suites")
    p.add_argument("tree")
    p.add_argument("walk")
    p.add_argument("--suite", default="all",
                   choices=["all", "doob-naim", "j-theta", "invariance", "identities"])
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--random-functions", type=int, default=20)
    p.add_argument("--debug-corrupt-g", action="store_true", help=argparse.SUPPRESS)
    common(p)
    p.set_defaults(func=cmd_check)

    p = sub.add_parser("semigroup", help="P^t matrices and semigroup residuals")
    p.add_argument("--tree", required=True)
    p.add_argument("--phi", required=True)
    p.add_argument("--mu", required=True)
    p.add_argument("--sigma", required=True)
    p.add_argument("--t", type=float, nargs="+", default=[1.0])
    p.add_argument("--expm-diagnostic", action="store_true",
                   help="report max |P^t - exp(-t Lambda)| (informational)")
    common(p)
    p.set_defaults(func=cmd_semigroup)

    p = sub.add_parser("simulate", help="Monte Carlo against exact quantities")
    p.add_argument("kind", choices=["walk", "jump"])
    p.add_argument("--tree", required=True)
    p.add_argument("--walk")
    p.add_argument("--phi")
    p.add_argument("--mu")
    p.add_argument("--sigma")
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--trials", type=int, default=100_000)
    p.add_argument("--start", type=int)
    p.add_argument("--steps", type=int, default=1)
    p.add_argument("--max-steps", type=int, default=100_000)
    common(p)
    p.set_defaults(func=cmd_simulate)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except CommandError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code
    except ParseError as exc:
        print(f"parse error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except UltrametricError as exc:
        msg = f"ultrametric violation: {exc}"
        if exc.triple:
            msg += f" (triple {list(exc.triple)})"
        print(msg, file=sys.stderr)
        return EXIT_METRIC if args.command == "build-from-metric" else EXIT_INVALID
    except ReconstructionError as exc:
        print(f"internal verification failure: {exc}", file=sys.stderr)
        return EXIT_INTERNAL
    except (TreeError, WalkError, SigmaError, ValueError) as exc:
        print(f"invalid input: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
