"""Compare the compiled and pure-Python inner loops.

Times each kernel in isolation and two end-to-end runs that lean on them
(the reference integrator with a density kernel, and the resolvent-based
Lie splitting). Run with ``python3 benchmarks/bench_core.py [--repeat N]``.
"""

import argparse
import json
import timeit

import numpy as np

from ddesplit import _backend
from ddesplit.generator import LinearGenerator
from ddesplit.reference import ReferenceConfig, reference_solve
from ddesplit.scenarios import builtin
from ddesplit.splitting import lie_split


def kernel_cases(rng):
    g = np.ascontiguousarray(rng.standard_normal((161, 50)))
    n = 50
    off = np.full(n, -3.0)
    diag = np.full(n, 7.0)
    rhs = np.ascontiguousarray(rng.standard_normal((n, 161)))
    U = np.ascontiguousarray(rng.standard_normal((2000, 50)))
    D = np.ascontiguousarray(rng.standard_normal((2000, 50)))
    W = np.ascontiguousarray(rng.random(640))
    return {
        "exp_recursion (161 x 50)": lambda c: c.exp_recursion(g, 0.8, 0.1, 0.1),
        "thomas (50, 161 rhs)": lambda c: c.thomas(off, diag, off, rhs),
        "hermite_midpoint_sum (640 cells)": lambda c: c.hermite_midpoint_sum(U, D, W, 700, 1e-3, 1000),
    }


def end_to_end_cases():
    nl = builtin("intro-nonlinear")
    heat = builtin("heat-point-delay")
    x_nl = nl.initial_state(40)
    x_heat = heat.initial_state(80)
    return {
        "reference_solve intro-nonlinear (m=40, refine=8, t=1)":
            lambda: reference_solve(x_nl, nl.generator, nl.kernel, 1.0, ReferenceConfig(8)),
        "lie_split heat-point-delay (m=80, n=160)":
            lambda: lie_split(x_heat, heat.generator, heat.kernel, 2.0, 160),
    }


def best_of(fn, repeat, number=1):
    return min(timeit.repeat(fn, repeat=repeat, number=number)) / number


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--json", action="store_true", help="print results as JSON")
    args = ap.parse_args(argv)

    backends = _backend.available()
    rng = np.random.default_rng(0)
    results = []
    for name, fn in kernel_cases(rng).items():
        row = {"case": name}
        for b in backends:
            core = _backend._BACKENDS[b]
            row[b] = best_of(lambda: fn(core), args.repeat, number=5)
        results.append(row)
    for name, fn in end_to_end_cases().items():
        row = {"case": name}
        for b in backends:
            with _backend.use_backend(b):
                row[b] = best_of(fn, max(1, args.repeat // 2))
        results.append(row)

    if args.json:
        print(json.dumps(results, indent=2))
        return
    if "compiled" not in backends:
        print("compiled extension not built; timing the pure-Python backend only")
    width = max(len(r["case"]) for r in results)
    header = f"{'case':<{width}}  " + "  ".join(f"{b:>12}" for b in backends)
    if "compiled" in backends:
        header += f"  {'speedup':>8}"
    print(header)
    for r in results:
        line = f"{r['case']:<{width}}  " + "  ".join(f"{r[b] * 1e3:>10.3f}ms" for b in backends)
        if "compiled" in backends:
            line += f"  {r['python'] / r['compiled']:>7.1f}x"
        print(line)


if __name__ == "__main__":
    main()
