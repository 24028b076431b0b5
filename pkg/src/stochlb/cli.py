"""Command-line interface: ``stochlb <command> ...``.

Exit status is 0 on success, 1 on validation errors or infeasibility and 2
when an internal limit (support cap, pivot or round limit, brute-force cap)
is hit.
"""
from __future__ import annotations

import argparse
import math
import os
import sys

from .balance import SolverConfig, solve
from .dist import check_p
from .errors import ConvergenceError, InfeasibleError, LimitError, SupportCapError
from .evaluate import brute_force_opt, evaluate_assignment
from .instance import (
    InstanceError,
    instance_to_dict,
    load_instance,
    parse_assignment,
    parse_distribution,
    random_instance,
    read_json,
    write_json,
)
from .subset import RegionError, SelectionInstance, oracle_from_region, p_moment, select
from . import verify

CONFIG_ENV = "STOCHLB_CONFIG"
EXIT_OK, EXIT_INVALID, EXIT_LIMIT = 0, 1, 2


def _load_config(path: str | None) -> SolverConfig:
    path = path or os.environ.get(CONFIG_ENV)
    if not path:
        return SolverConfig()
    doc = read_json(path)
    if not isinstance(doc, dict):
        raise InstanceError(f"{path}: config must be a JSON object")
    try:
        return SolverConfig.from_dict(doc)
    except (TypeError, ValueError) as exc:
        raise InstanceError(f"{path}: {exc}") from exc


def _emit(doc, out: str | None) -> None:
    text = write_json(doc, out)
    if out is None:
        print(text)


def _p_override(raw: str | None, default: float) -> float:
    if raw is None:
        return default
    return math.inf if raw.lower() == "inf" else float(raw)


def cmd_solve(args) -> int:
    inst, p = load_instance(args.instance)
    p = _p_override(args.p, p)
    if math.isinf(p):
        raise InstanceError("$.p: solve supports finite p only")
    cfg = _load_config(args.config)
    _, report = solve(inst, p, cfg)
    _emit(report.as_dict(), args.out)
    return EXIT_OK


def cmd_evaluate(args) -> int:
    inst, p = load_instance(args.instance)
    p = _p_override(args.p, p)
    machine_of = parse_assignment(read_json(args.assignment), inst)
    val = evaluate_assignment(inst, machine_of, p, mc_samples=args.mc_samples, seed=args.seed)
    _emit({"p": "inf" if math.isinf(p) else p, "assignment": list(machine_of), "norm": val.as_dict()}, args.out)
    return EXIT_OK


def cmd_brute_force(args) -> int:
    inst, p = load_instance(args.instance)
    p = _p_override(args.p, p)
    res = brute_force_opt(inst, p, seed=args.seed)
    _emit(
        {
            "p": "inf" if math.isinf(p) else p,
            "assignment": list(res.assignment.machine_of),
            "value": res.value,
            "exact": res.exact,
            "evaluated": res.evaluated,
        },
        args.out,
    )
    return EXIT_OK


def cmd_verify_bounds(args) -> int:
    ps = tuple(float(x) for x in args.p.split(",")) if args.p else verify.DEFAULT_PS
    results = verify.run_all(args.families, args.seed, ps)
    for r in results:
        print(f"{'PASS' if r.passed else 'FAIL'} {r.name}: {r.checked} checks, {r.violations} violations", file=sys.stderr)
    if args.out:
        write_json([r.as_dict() for r in results], args.out)
    return EXIT_OK if all(r.passed for r in results) else EXIT_INVALID


def _load_selection(path) -> tuple[SelectionInstance, float]:
    doc = read_json(path)
    if not isinstance(doc, dict) or "p" not in doc:
        raise InstanceError("$: selection instance must be an object with keys p and items")
    p = check_p(float(doc["p"]))
    if "items" in doc:
        raw = doc["items"]
        if not isinstance(raw, list) or not raw:
            raise InstanceError("$.items: expected a non-empty array of distributions")
        V = [parse_distribution(d, f"$.items[{j}]") for j, d in enumerate(raw)]
    else:
        inst, _ = load_instance(path)
        if inst.m != 1:
            raise InstanceError("$.m: a load-balancing file used for selection must have m = 1")
        V = list(inst.Y[0])
    return SelectionInstance(tuple(V)), p


def cmd_subset_select(args) -> int:
    sel, p = _load_selection(args.instance)
    region = read_json(args.region)
    if not isinstance(region, dict):
        raise InstanceError("$: region must be a JSON object")
    oracle = oracle_from_region(sel.n, region)
    x, report = select(sel, p, oracle)
    doc = report.as_dict()
    doc["moment"] = p_moment(sel.V, x, p) ** (1.0 / p)
    _emit(doc, args.out)
    return EXIT_OK


def cmd_gen_random(args) -> int:
    inst = random_instance(args.m, args.n, args.support, args.seed, args.vmax)
    p = _p_override(args.p, 2.0)
    _emit(instance_to_dict(inst, p), args.out)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="stochlb", description="Stochastic lp load balancing and subset selection.")
    sub = ap.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("solve", help="run the LP-rounding solver on an instance")
    sp.add_argument("instance")
    sp.add_argument("--config", help=f"solver config JSON (default: ${CONFIG_ENV})")
    sp.add_argument("--p", help="override the instance's p")
    sp.add_argument("--out")
    sp.set_defaults(func=cmd_solve)

    sp = sub.add_parser("evaluate", help="expected lp norm of an assignment")
    sp.add_argument("instance")
    sp.add_argument("assignment", help="JSON list, {\"assignment\": [...]} or a solve report")
    sp.add_argument("--p")
    sp.add_argument("--mc-samples", type=int, default=200_000)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--out")
    sp.set_defaults(func=cmd_evaluate)

    sp = sub.add_parser("brute-force", help="exact optimum over all m^n assignments (m^n <= 1e6)")
    sp.add_argument("instance")
    sp.add_argument("--p")
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--out")
    sp.set_defaults(func=cmd_brute_force)

    sp = sub.add_parser("verify-bounds", help="check the moment inequalities on random families")
    sp.add_argument("--families", type=int, default=200)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--p", help="comma-separated exponents, e.g. 1.5,2,3,7")
    sp.add_argument("--out")
    sp.set_defaults(func=cmd_verify_bounds)

    sp = sub.add_parser("subset-select", help="p-moment subset selection")
    sp.add_argument("instance", help="{\"p\": .., \"items\": [dist, ..]} or an m=1 instance file")
    sp.add_argument("region", help="region descriptor JSON (explicit, cardinality or partition)")
    sp.add_argument("--out")
    sp.set_defaults(func=cmd_subset_select)

    sp = sub.add_parser("gen-random", help="write a random instance")
    sp.add_argument("--m", type=int, required=True)
    sp.add_argument("--n", type=int, required=True)
    sp.add_argument("--p", default="2")
    sp.add_argument("--support", type=int, default=3)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--vmax", type=float, default=10.0)
    sp.add_argument("--out")
    sp.set_defaults(func=cmd_gen_random)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (SupportCapError, LimitError, ConvergenceError) as exc:
        print(f"limit: {exc}", file=sys.stderr)
        return EXIT_LIMIT
    except (InstanceError, RegionError, InfeasibleError, ValueError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
