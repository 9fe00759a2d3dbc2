"""Command-line front end: ``ddesplit run | probe | list-scenarios``.

Exit codes: 0 success, 1 gate failure, 2 config error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from pathlib import Path

from . import __version__
from .analysis import (EXACT_TOL, contraction_probe, convergence_study, local_error_probe,
                       pairwise_orders)
from .errors import NumericalError
from .reference import ReferenceConfig
from .scenarios import ConfigError, Registry, load_config

EXIT_OK, EXIT_GATE, EXIT_CONFIG, EXIT_NUMERIC = 0, 1, 2, 3
CSV_COLUMNS = ("scenario", "scheme", "h", "n_steps", "err_head", "err_history", "err_E", "order_so_far")


def _fmt(x):
    return format(float(x), ".17g")


def report_csv(reports) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for rep in reports:
        orders = pairwise_orders([(r.h, r.err_E) for r in rep.rows])
        for row, order in zip(rep.rows, orders):
            if row.err_head <= EXACT_TOL:
                mark = "exact"
            else:
                mark = "" if order is None else _fmt(order)
            w.writerow([rep.scenario_id, rep.scheme, _fmt(row.h), row.n_steps,
                        _fmt(row.err_head), _fmt(row.err_history), _fmt(row.err_E), mark])
    return buf.getvalue()


def _finite(obj, where="summary"):
    if isinstance(obj, float) and not math.isfinite(obj):
        raise NumericalError(f"non-finite value in {where}")
    if isinstance(obj, dict):
        for k, v in obj.items():
            _finite(v, f"{where}.{k}")
    elif isinstance(obj, (list, tuple)):
        for i, v in enumerate(obj):
            _finite(v, f"{where}[{i}]")
    return obj


def run_probes(plan):
    """Run the probes enabled in the plan; returns a JSON-ready dict."""
    sc = plan.scenario
    out = {"dissipativity_estimate": plan.dissipativity, "alpha": sc.generator.alpha,
           "gamma": plan.gamma}
    cp = plan.probes.get("contraction")
    if cp is not None:
        rep = contraction_probe(sc.generator, sc.kernel, sc.p, sc.generator.alpha, cp["h_list"],
                                cp["trials"], cp["m"], seed=plan.seed, grid_weight=sc.grid_weight)
        out["contraction"] = {
            "gamma": rep.gamma, "pairs": rep.pairs, "skipped": rep.skipped,
            "max_ratio": rep.max_ratio, "violations": rep.violations,
            "max_ratio_unshifted": {_fmt(h): v for h, v in rep.max_ratio_unshifted.items()},
            "bound_unshifted": {_fmt(h): v for h, v in rep.bounds_unshifted.items()},
        }
    lp = plan.probes.get("local_error")
    if lp is not None:
        defects = local_error_probe(sc.initial_state, sc.generator, sc.kernel, lp["h_list"],
                                    ReferenceConfig(plan.refine), substeps=plan.substeps)
        out["local_error"] = [
            {"h": d.h, "defect": d.defect, "ratio": d.ratio, "head_defect": d.head_defect,
             "head_ratio": d.head_ratio, "history_defect": d.history_defect,
             "ratio_over_d_norm": d.ratio_d} for d in defects]
    return out


def _spread(values):
    vals = [v for v in values if v > 0]
    return max(vals) / min(vals) if vals else float("inf")


def evaluate_gates(gates, reports, probes):
    results = []
    by_scheme = {r.scheme: r for r in reports}
    for g in gates:
        targets = [by_scheme[g.scheme]] if g.scheme else reports
        ok, detail = True, []
        if g.kind == "order":
            for r in targets:
                if r.fitted_order is None:
                    ok = False
                    detail.append(f"{r.scheme}: no order fit ({'; '.join(r.notes)})")
                    continue
                good = g.lo <= r.fitted_order <= g.hi
                if g.r2_min is not None:
                    good = good and r.r_squared >= g.r2_min
                ok &= good
                detail.append(f"{r.scheme}: order {r.fitted_order:.4f} in [{g.lo}, {g.hi}]"
                              + (f", r2 {r.r_squared:.4f} >= {g.r2_min}" if g.r2_min is not None else ""))
        elif g.kind == "max_error":
            for r in targets:
                worst = max(getattr(row, g.quantity) for row in r.rows)
                ok &= worst <= g.hi
                detail.append(f"{r.scheme}: max {g.quantity} {worst:.3e} <= {g.hi:g}")
        elif g.kind == "decreasing":
            for r in targets:
                vals = [getattr(row, g.quantity) for row in r.rows]
                good = all(b < a for a, b in zip(vals, vals[1:]))
                ok &= good
                detail.append(f"{r.scheme}: {g.quantity} strictly decreasing = {good}")
        elif g.kind == "contraction":
            c = probes["contraction"]
            ok = c["violations"] == 0
            detail.append(f"max shifted ratio {c['max_ratio']:.6f}, violations {c['violations']}")
        elif g.kind == "local_ratio_spread":
            key = "head_ratio" if g.quantity == "head" else "ratio"
            s = _spread([d[key] for d in probes["local_error"]])
            ok = s <= g.hi
            detail.append(f"{key} spread {s:.4f} <= {g.hi:g}")
        results.append({"name": g.name, "kind": g.kind, "passed": bool(ok), "detail": "; ".join(detail)})
    return results


def run_study(plan, out_dir, quiet=False):
    """Run the plan, write ``<scenario>.csv`` and ``<scenario>.json``; return the exit code."""
    sc = plan.scenario
    reports = convergence_study(sc, plan.schemes, plan.h_list, plan.t_final,
                                ReferenceConfig(plan.refine), plan.substeps, plan.workers, plan.m)
    probes = run_probes(plan)
    gates = evaluate_gates(plan.gates, reports, probes)
    summary = {
        "version": __version__, "seed": plan.seed, "scenario": sc.describe(),
        "plan": plan.describe(), "reports": [r.to_dict() for r in reports],
        "probes": probes, "gates": gates,
        "passed": all(g["passed"] for g in gates),
    }
    _finite(summary)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / f"{sc.id}.csv").write_text(report_csv(reports))
    (out / f"{sc.id}.json").write_text(
        json.dumps(summary, sort_keys=True, indent=2, allow_nan=False) + "\n")
    if not quiet:
        for r in reports:
            order = "exact" if r.exact else (
                "n/a" if r.fitted_order is None else f"{r.fitted_order:.4f} (r2 {r.r_squared:.4f})")
            print(f"{sc.id} {r.scheme}: order {order}")
        for g in gates:
            print(f"gate {g['name']}: {'PASS' if g['passed'] else 'FAIL'}  {g['detail']}")
    return EXIT_OK if summary["passed"] else EXIT_GATE


def _cmd_run(args):
    plan = load_config(args.config, seed=args.seed, refine=args.refine)
    return run_study(plan, args.out_dir, args.quiet)


def _cmd_probe(args):
    plan = load_config(args.config, seed=args.seed, refine=args.refine)
    probes = run_probes(plan)
    probe_gates = [g for g in plan.gates if g.kind in ("contraction", "local_ratio_spread")]
    gates = evaluate_gates(probe_gates, [], probes)
    summary = {"version": __version__, "seed": plan.seed, "scenario": plan.scenario.id,
               "probes": probes, "gates": gates}
    _finite(summary)
    text = json.dumps(summary, sort_keys=True, indent=2, allow_nan=False) + "\n"
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / f"{plan.scenario.id}.probe.json").write_text(text)
    if not args.quiet:
        print(text, end="")
    return EXIT_OK if all(g["passed"] for g in gates) else EXIT_GATE


def _cmd_list(args):
    reg = Registry()
    for path in args.registry or []:
        reg.load_file(path)
    if args.config:
        load_config(args.config, registry=reg)
    print(reg.table())
    return EXIT_OK


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=None, help="PRNG seed for probes (overrides config)")
    common.add_argument("--out-dir", default="ddesplit-out", help="directory for CSV/JSON outputs")
    common.add_argument("--refine", type=int, default=None, help="reference substep multiplier (>= 4)")
    common.add_argument("--quiet", action="store_true", help="suppress console output")

    parser = argparse.ArgumentParser(prog="ddesplit", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    p = sub.add_parser("run", parents=[common], help="convergence study with gates")
    p.add_argument("config")
    p.set_defaults(func=_cmd_run)
    p = sub.add_parser("probe", parents=[common], help="pre-flight probes without a convergence study")
    p.add_argument("config")
    p.set_defaults(func=_cmd_probe)
    p = sub.add_parser("list-scenarios", help="print the scenario registry")
    p.add_argument("--registry", action="append", help="YAML file of custom scenarios (repeatable)")
    p.add_argument("--config", help="also register the custom scenario of this run plan")
    p.set_defaults(func=_cmd_list)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
