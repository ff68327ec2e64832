"""Command-line front end: generate instances, solve, benchmark, export the
compact MILP files and validate solution files.

Exit codes: 0 success/optimal, 2 bad arguments or invalid input, 3 limit hit
with an incumbent, 4 no incumbent found.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace
from pathlib import Path

from . import model
from .compact import emit_model, write_model
from .reports import BenchReport, render_figures
from .routing import POLICIES, route_cost, stops_of_order, validate_assignment
from .search import SolverConfig, Solver, round_bound

EXIT_OK, EXIT_USAGE, EXIT_LIMIT, EXIT_NO_INCUMBENT = 0, 2, 3, 4


def _write_json(path, payload) -> None:
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _load_instance(path: str):
    try:
        return model.load_instance(path)
    except (OSError, ValueError, KeyError) as exc:
        print(f"error: cannot load instance {path}: {exc}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def _parse_config_file(path: str) -> dict:
    out = {}
    with open(path) as fh:
        for line in fh:
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"bad config line: {line!r}")
            key, value = (part.strip() for part in line.split("=", 1))
            out[key] = value
    return out


def _solver_config(args) -> SolverConfig:
    cfg = SolverConfig()
    if getattr(args, "config", None):
        raw = _parse_config_file(args.config)
        casts = {
            "policy": str,
            "branching": str,
            "symmetry": lambda v: v.lower() in ("1", "true", "on", "yes"),
            "sl1": lambda v: v.lower() in ("1", "true", "on", "yes"),
            "sl_cuts": lambda v: v.lower() in ("1", "true", "on", "yes"),
            "time_limit": float,
            "seed": int,
            "emission_cap": int,
            "lp_backend": str,
        }
        fields = {}
        for key, value in raw.items():
            if key not in casts:
                raise SystemExit(f"unknown config key {key!r}")
            fields[key] = casts[key](value)
        cfg = replace(cfg, **fields)
    overrides = {}
    for key in ("policy", "branching", "time_limit", "seed", "emission_cap"):
        value = getattr(args, key, None)
        if value is not None:
            overrides[key] = value
    if getattr(args, "no_symmetry", False):
        overrides["symmetry"] = False
    if getattr(args, "no_sl_cuts", False):
        overrides["sl_cuts"] = False
    if getattr(args, "no_sl1", False):
        overrides["sl1"] = False
    return replace(cfg, **overrides)


# ---------------------------------------------------------------------------
# generate


def cmd_generate(args) -> int:
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    if args.scheme == "silva":
        inst = model.generate_silva_instance(
            args.aisles, args.bays, args.orders, args.order_size, args.seed
        )
    elif args.scheme == "guo":
        inst = model.generate_guo_instance(
            args.alpha, args.orders, args.seed, args.skus, args.bays_per_block
        )
    else:
        inst = model.generate_random_instance(
            args.aisles,
            args.bays,
            args.capacity,
            args.skus,
            args.orders,
            args.order_size,
            args.seed,
            kind=args.layout,
            n_fixed=args.fixed,
        )
    errs = model.validate_instance(inst)
    if errs:
        print("generated an invalid instance: " + "; ".join(errs), file=sys.stderr)
        return EXIT_USAGE
    path = out_dir / f"{inst.name}.json"
    model.save_instance(inst, path)
    manifest = {
        "file": str(path),
        "sha256": model.instance_sha(inst),
        "skus": inst.num_skus,
        "orders": inst.num_orders,
        "locations": inst.layout.num_locations,
        "free_skus": len(inst.free_skus()),
    }
    print(json.dumps(manifest, indent=2, sort_keys=True))
    return EXIT_OK


# ---------------------------------------------------------------------------
# solve


def _solution_payload(inst, inc, stats, policy: str) -> dict:
    from .oracle import trace_policy_path  # noqa: F401  (kept local: no cycle)

    routes = []
    for o, stops in enumerate(inc.routes):
        seq = []
        for l in sorted(stops):
            seq.extend([l] * stops[l])
        routes.append(seq)
    return {
        "instance": inst.name,
        "instance_sha256": model.instance_sha(inst),
        "policy": policy,
        "total": inc.objective,
        "assignment": {str(s): l for s, l in sorted(inc.assignment.items())},
        "routes": routes,
        "per_order_costs": [rc.total for rc in inc.per_order],
        "stats": {
            "optimal": stats.optimal,
            "lower_bound": stats.lower_bound,
            "gap_percent": stats.gap,
            "time_s": stats.time_sec,
            "nodes": stats.nodes,
            "cuts": stats.cuts,
            "columns": stats.columns,
            "branching": stats.branching,
            "symmetry": stats.symmetry,
            "seed": None,
        },
    }


def _stats_line(stats) -> str:
    return (
        f"{stats.instance}  policy={stats.policy}  opt={int(stats.optimal)}  "
        f"lb={stats.lower_bound}  ub={stats.objective}  gap={stats.gap:.2f}%  "
        f"time={stats.time_sec:.2f}s  nodes={stats.nodes}  cuts={stats.cuts}"
    )


def cmd_solve(args) -> int:
    inst = _load_instance(args.instance)
    cfg = _solver_config(args)
    if cfg.policy is None:
        cfg = replace(cfg, policy=inst.default_policy())
    solver = Solver(inst, cfg)
    inc, stats = solver.solve()
    print(_stats_line(stats))
    if inc is None:
        return EXIT_NO_INCUMBENT
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    payload = _solution_payload(inst, inc, stats, cfg.policy)
    payload["stats"]["seed"] = cfg.seed
    path = out_dir / f"{inst.name}.{cfg.policy}.solution.json"
    _write_json(path, payload)
    print(f"solution written to {path}")
    return EXIT_OK if stats.optimal else EXIT_LIMIT


# ---------------------------------------------------------------------------
# bench


def cmd_bench(args) -> int:
    paths = []
    for entry in args.instances:
        p = Path(entry)
        if p.is_dir():
            paths.extend(sorted(p.glob("*.json")))
        else:
            paths.append(p)
    if not paths:
        print("no instances found", file=sys.stderr)
        return EXIT_USAGE
    policies = args.policies.split(",")
    for p in policies:
        if p not in POLICIES:
            print(f"unknown policy {p!r}", file=sys.stderr)
            return EXIT_USAGE
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    report = BenchReport()
    cfg = _solver_config(args)
    for path in paths:
        inst = _load_instance(str(path))
        sha = model.instance_sha(inst)
        for policy in policies:
            try:
                solver = Solver(inst, replace(cfg, policy=policy))
                inc, stats = solver.solve()
                report.add_stats(sha, stats)
                print(_stats_line(stats))
            except Exception as exc:  # keep the run going, record the row
                report.add_error(inst.name, sha, policy, str(exc))
                print(f"{inst.name} policy={policy} failed: {exc}", file=sys.stderr)
        if args.bound_report:
            report.bound_rows.append(_bound_row(inst, sha))
    report.write_csv(out_dir / "bench.csv")
    report.write_markdown(out_dir / "bench.md")
    if args.bound_report:
        report.write_bounds_csv(out_dir / "bench_bounds.csv")
    if not args.no_figures:
        for fig in render_figures(report, out_dir):
            print(f"figure written to {fig}")
    print(f"report written to {out_dir / 'bench.csv'} and {out_dir / 'bench.md'}")
    return EXIT_OK


def _bound_row(inst, sha: str) -> dict:
    from .compact import emit_compact_mcf, emit_compact_mtz, lp_relaxation_value
    from .oracle import enumerate_slaprp
    from .search import root_bound

    opt = enumerate_slaprp(inst, "optimal").objective
    return {
        "instance": inst.name,
        "sha": sha[:12],
        "lp_mtz": round(lp_relaxation_value(emit_compact_mtz(inst)), 6),
        "lp_mcf": round(lp_relaxation_value(emit_compact_mcf(inst)), 6),
        "dw": round(root_bound(inst, "optimal", sl1=False, sl_cuts=False), 6),
        "dw_sl1": round(root_bound(inst, "optimal", sl1=True, sl_cuts=False), 6),
        "dw_sl": round(root_bound(inst, "optimal", sl1=True, sl_cuts=True), 6),
        "optimum": opt,
    }


# ---------------------------------------------------------------------------
# export


def cmd_export(args) -> int:
    inst = _load_instance(args.instance)
    try:
        mip = emit_model(inst, args.formulation)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    ext = "lp" if args.format == "lp_text" else "mps"
    path = out_dir / f"{inst.name}.{args.formulation}.{ext}"
    write_model(mip, path, args.format, big_m=args.big_m)
    manifest_path = out_dir / f"{inst.name}.{args.formulation}.manifest.json"
    _write_json(
        manifest_path,
        {
            "instance": inst.name,
            "instance_sha256": model.instance_sha(inst),
            "formulation": args.formulation,
            "format": args.format,
            "big_m": bool(args.big_m),
            "variables": mip.manifest(),
        },
    )
    print(f"model written to {path}\nmanifest written to {manifest_path}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# validate


def cmd_validate(args) -> int:
    inst = _load_instance(args.instance)
    try:
        with open(args.solution) as fh:
            sol = json.load(fh)
    except (OSError, ValueError) as exc:
        print(f"error: cannot read solution: {exc}", file=sys.stderr)
        return EXIT_USAGE
    problems = []
    sha = model.instance_sha(inst)
    if sol.get("instance_sha256") not in (None, sha):
        problems.append("instance hash mismatch")
    assignment = {int(s): l for s, l in sol["assignment"].items()}
    problems.extend(validate_assignment(inst, assignment))
    policy = sol.get("policy", inst.default_policy())
    total = 0
    for o, order in enumerate(inst.orders):
        try:
            stops = stops_of_order(order, assignment)
            cost = route_cost(stops, inst.layout, policy).total
        except (KeyError, ValueError) as exc:
            problems.append(f"order {o}: route cannot be recomputed ({exc})")
            continue
        claimed = sol["per_order_costs"][o]
        if cost != claimed:
            problems.append(f"order {o}: recomputed cost {cost} != claimed {claimed}")
        declared = {}
        for l in sol["routes"][o]:
            declared[l] = declared.get(l, 0) + 1
        if declared != stops:
            problems.append(f"order {o}: route stops do not match the assignment")
        total += cost
    if total != sol["total"]:
        problems.append(f"total mismatch: recomputed {total} != claimed {sol['total']}")
    if problems:
        for p in problems:
            print(f"FAIL: {p}")
        return 1
    print(f"ok: total {total} verified under policy {policy}")
    return EXIT_OK


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="slaprp", description=__doc__)
    sub = ap.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("generate", help="generate benchmark instances")
    gsub = gen.add_subparsers(dest="scheme", required=True)
    g1 = gsub.add_parser("silva", help="single-block benchmark family")
    g1.add_argument("--aisles", type=int, required=True)
    g1.add_argument("--bays", type=int, required=True)
    g1.add_argument("--orders", type=int, required=True)
    g1.add_argument("--order-size", dest="order_size", type=int, required=True)
    g2 = gsub.add_parser("guo", help="double-block replenishment family")
    g2.add_argument("--alpha", type=float, required=True)
    g2.add_argument("--orders", type=int, required=True)
    g2.add_argument("--skus", type=int, default=80)
    g2.add_argument("--bays-per-block", dest="bays_per_block", type=int, default=5)
    g3 = gsub.add_parser("random", help="free-form random instance")
    g3.add_argument("--aisles", type=int, required=True)
    g3.add_argument("--bays", type=int, required=True)
    g3.add_argument("--capacity", type=int, default=1)
    g3.add_argument("--skus", type=int, required=True)
    g3.add_argument("--orders", type=int, required=True)
    g3.add_argument("--order-size", dest="order_size", type=int, default=3)
    g3.add_argument("--fixed", type=int, default=0)
    g3.add_argument("--layout", choices=[model.SINGLE_BLOCK, model.TWO_BLOCK], default=model.SINGLE_BLOCK)
    for g in (g1, g2, g3):
        g.add_argument("--seed", type=int, required=True)
        g.add_argument("--out", default=".")

    sv = sub.add_parser("solve", help="run the branch-cut-and-price solver")
    sv.add_argument("instance")
    sv.add_argument("--policy", choices=POLICIES)
    sv.add_argument("--branching", choices=["combined", "location"])
    sv.add_argument("--no-symmetry", action="store_true")
    sv.add_argument("--no-sl-cuts", action="store_true")
    sv.add_argument("--no-sl1", action="store_true")
    sv.add_argument("--time-limit", dest="time_limit", type=float)
    sv.add_argument("--seed", type=int)
    sv.add_argument("--emission-cap", dest="emission_cap", type=int)
    sv.add_argument("--config", help="key = value config file")
    sv.add_argument("--out", default=".")

    bn = sub.add_parser("bench", help="solve a set of instances and report")
    bn.add_argument("instances", nargs="+", help="instance files or directories")
    bn.add_argument("--policies", default="optimal")
    bn.add_argument("--branching", choices=["combined", "location"])
    bn.add_argument("--no-symmetry", action="store_true")
    bn.add_argument("--no-sl-cuts", action="store_true")
    bn.add_argument("--no-sl1", action="store_true")
    bn.add_argument("--time-limit", dest="time_limit", type=float)
    bn.add_argument("--seed", type=int)
    bn.add_argument("--config", help="key = value config file")
    bn.add_argument("--bound-report", action="store_true", help="add formulation bound columns (small instances only)")
    bn.add_argument("--no-figures", action="store_true")
    bn.add_argument("--out", default="bench_out")

    ex = sub.add_parser("export", help="write a compact MILP model file")
    ex.add_argument("instance")
    ex.add_argument("--formulation", required=True, choices=["mtz", "mcf", "return", "sshape", "midpoint", "largestgap"])
    ex.add_argument("--format", default="lp_text", choices=["lp_text", "mps_text"])
    ex.add_argument("--big-m", dest="big_m", action="store_true", help="rewrite indicator constraints with big-M rows")
    ex.add_argument("--out", default=".")

    va = sub.add_parser("validate", help="re-check a solution file")
    va.add_argument("instance")
    va.add_argument("solution")
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        # argparse exits 2 on usage errors already
        return int(exc.code or 0)
    handlers = {
        "generate": cmd_generate,
        "solve": cmd_solve,
        "bench": cmd_bench,
        "export": cmd_export,
        "validate": cmd_validate,
    }
    try:
        return handlers[args.command](args)
    except SystemExit as exc:
        return int(exc.code or 0)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
