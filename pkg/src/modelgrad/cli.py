"""Command line entry points.

Four subcommands: `solve` writes a single-run trace, `table1` reproduces
the iteration-grid benchmark table, `compare` pairs adaptive against
frozen-estimate runs, and `check` exercises oracle conformance and
gradient consistency.  Settings come from an optional config file with
flag overrides on top.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import fields

import numpy as np

from .core import check_oracle_conformance
from .harness import (
    ConfigError,
    ExperimentSpec,
    compare_adaptive_nonadaptive,
    finite_diff_check,
    parse_config,
    parse_grid,
    run_experiment,
    run_single,
    write_csv,
)
from .problems import (
    L1Penalty,
    NoisyOracle,
    composite_oracle,
    generate_task1,
    generate_task2,
    pl_quadratic_make,
)

__all__ = ["main", "build_parser"]


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="modelgrad",
        description="Adaptive model-based gradient methods with inexact data",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p):
        p.add_argument("--config", help="config file (key = value lines)")
        p.add_argument("--task", choices=("task1", "task2", "pl-quadratic", "composite"))
        p.add_argument("--n", type=int, help="problem dimension")
        p.add_argument("--m", type=int, help="number of centers / rows")
        p.add_argument("--iters", help="iteration grid, e.g. 200,400 or 200..1000")
        p.add_argument("--reps", type=int, help="replications per grid cell")
        p.add_argument("--seed", type=int, help="base seed")
        p.add_argument("--solver", choices=("algo1", "nonsmooth", "algo2"))
        p.add_argument("--Delta", type=float, help="gradient noise level")
        p.add_argument("--delta", type=float, help="value noise level")
        p.add_argument("--epsilon", type=float, help="target accuracy")
        p.add_argument("--out", help="output CSV path")

    p_solve = sub.add_parser("solve", help="single run, write the trace CSV")
    add_common(p_solve)
    p_table = sub.add_parser("table1", help="iteration-grid benchmark table")
    add_common(p_table)
    p_cmp = sub.add_parser("compare", help="adaptive vs nonadaptive pairing")
    add_common(p_cmp)
    p_check = sub.add_parser("check", help="oracle conformance and gradients")
    add_common(p_check)
    return parser


def _build_spec(args, *, default_task=None, force_solver=None) -> ExperimentSpec:
    values = {}
    if args.config:
        base = parse_config(args.config)
        values = {f.name: getattr(base, f.name) for f in fields(ExperimentSpec)}
    overrides = {
        "task": args.task,
        "n": args.n,
        "m": args.m,
        "replications": args.reps,
        "seed": args.seed,
        "solver": args.solver,
        "Delta": args.Delta,
        "delta": args.delta,
        "epsilon": args.epsilon,
    }
    if args.iters:
        overrides["iteration_grid"] = parse_grid(args.iters)
    for key, val in overrides.items():
        if val is not None:
            values[key] = val
    if "task" not in values or values["task"] is None:
        if default_task is None:
            raise ConfigError("a task is required (--task or config file)")
        values["task"] = default_task
    if force_solver is not None:
        values["solver"] = force_solver
    return ExperimentSpec(**values)


def _cmd_solve(args) -> int:
    spec = _build_spec(args)
    trace, _ = run_single(spec)
    out = args.out or "trace.csv"
    write_csv(trace, out)
    last_f = trace.f_values[-1] if len(trace.f_values) else trace.f0
    print(
        f"solved {spec.task} (n={spec.n}, m={spec.m}, solver={spec.solver}): "
        f"{len(trace.f_values)} iterations, final f = {last_f:.6g}, trace -> {out}"
    )
    return 0


def _cmd_table1(args) -> int:
    spec = _build_spec(args, default_task="task1")
    if spec.task not in ("task1", "task2"):
        print("table1 runs the geometric tasks (task1 or task2)", file=sys.stderr)
        return 2
    table = run_experiment(spec)
    out = args.out or "table1.csv"
    write_csv(table, out)
    print(f"{spec.task}: n={spec.n}, m={spec.m}, solver={spec.solver}, "
          f"reps={spec.replications}")
    print(f"{'iters':>8} {'mean_estimate':>16} {'std':>12} {'time_ms':>10}")
    for i, n_iters in enumerate(table.iters):
        print(
            f"{n_iters:>8} {table.mean_estimate[i]:>16.6g} "
            f"{table.std_estimate[i]:>12.4g} {table.mean_time_ms[i]:>10.1f}"
        )
    print(f"table -> {out}")
    return 0


def _cmd_compare(args) -> int:
    spec = _build_spec(args, default_task="pl-quadratic", force_solver="algo2")
    table = compare_adaptive_nonadaptive(spec)
    out = args.out or "compare.csv"
    write_csv(table, out)
    a = np.asarray(table.aux["adaptive_bound"])
    na = np.asarray(table.aux["nonadaptive_bound"])
    print(f"paired runs: {spec.replications} seeds, Delta={spec.Delta}, "
          f"mode={spec.mode}")
    print(f"mean contraction bound: adaptive {a.mean():.6g}, "
          f"nonadaptive {na.mean():.6g}")
    print(f"adaptive bound <= nonadaptive on {int((a <= na).sum())}/"
          f"{len(a)} seeds; table -> {out}")
    return 0


def _report(name: str, ok: bool, detail: str = "") -> bool:
    tag = "PASS" if ok else "FAIL"
    suffix = f"  ({detail})" if detail else ""
    print(f"[{tag}] {name}{suffix}")
    return ok


def _smooth_point_task1(problem, rng, margin=1e-3):
    for _ in range(1000):
        x = rng.standard_normal(problem.dim)
        x *= rng.uniform(0.0, 0.99) / np.linalg.norm(x)
        d = np.sqrt(((problem.centers - x) ** 2).sum(axis=1))
        if np.all(np.abs(d - problem.ball_radius) > margin):
            return x
    raise RuntimeError("could not sample a smooth point")


def _smooth_point_task2(problem, rng, margin=1e-3):
    for _ in range(1000):
        x = rng.standard_normal(problem.dim)
        x *= rng.uniform(0.0, 0.99) / np.linalg.norm(x)
        d = np.sort(np.sqrt(((problem.centers - x) ** 2).sum(axis=1)))
        if d[-1] - d[-2] > margin and d[-1] > margin:
            return x
    raise RuntimeError("could not sample a smooth point")


def _cmd_check(args) -> int:
    n = args.n or 20
    m = args.m or 6
    seed = args.seed or 0
    rng = np.random.default_rng(seed)
    ok = True

    t1 = generate_task1(n=n, m=m, seed=seed)
    t2 = generate_task2(n=n, m=m, seed=seed + 1)
    quad = pl_quadratic_make(
        rng.standard_normal((m + 2, n)), rng.standard_normal(m + 2)
    )

    def ball_point():
        x = rng.standard_normal(n)
        return x * (rng.uniform(0.0, 1.0) / np.linalg.norm(x))

    for name, oracle, point in (
        ("model-conformance task1", t1.oracle(), ball_point),
        ("model-conformance task2", t2.oracle(), ball_point),
        ("model-conformance quadratic", quad.oracle(), lambda: rng.standard_normal(n)),
    ):
        violations = check_oracle_conformance(oracle, point, trials=200)
        ok &= _report(name, not violations,
                      violations[0] if violations else "200 trials")

    worst = 0.0
    for _ in range(20):
        worst = max(worst, finite_diff_check(t1.oracle(), _smooth_point_task1(t1, rng)))
    ok &= _report("finite-diff task1", worst < 1e-5, f"max rel err {worst:.2e}")
    worst = 0.0
    for _ in range(20):
        worst = max(worst, finite_diff_check(t2.oracle(), _smooth_point_task2(t2, rng)))
    ok &= _report("finite-diff task2", worst < 1e-5, f"max rel err {worst:.2e}")
    worst = max(
        finite_diff_check(quad.oracle(), rng.standard_normal(n)) for _ in range(20)
    )
    ok &= _report("finite-diff quadratic", worst < 1e-5, f"max rel err {worst:.2e}")

    Delta, delta = (args.Delta or 0.3), (args.delta or 0.05)
    noisy = NoisyOracle(quad.oracle(), Delta=Delta, delta=delta, seed=seed)
    worst_g, worst_v = 0.0, 0.0
    for _ in range(500):
        x = rng.standard_normal(n)
        g_err = float(np.linalg.norm(noisy.model_gradient_at(x) - quad.gradient(x)))
        v_err = quad.value(x) - noisy.value_inexact(x)
        worst_g = max(worst_g, g_err)
        worst_v = max(worst_v, abs(v_err) if v_err < 0 else 0.0, v_err - delta)
    ok &= _report(
        "noise envelopes",
        worst_g <= Delta * (1 + 1e-12) and worst_v <= 0.0,
        f"max grad err {worst_g:.4g} vs Delta={Delta}",
    )

    pen = L1Penalty(0.1)
    comp = composite_oracle(
        lambda x: 0.5 * float(np.dot(x, x)), lambda x: x.copy(), pen
    )
    x = rng.standard_normal(n)
    v = comp.value_inexact(x)
    expected = 0.5 * float(np.dot(x, x)) + 0.1 * float(np.abs(x).sum())
    ok &= _report("composite value split", abs(v - expected) < 1e-12)

    return 0 if ok else 1


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "solve":
            return _cmd_solve(args)
        if args.command == "table1":
            return _cmd_table1(args)
        if args.command == "compare":
            return _cmd_compare(args)
        return _cmd_check(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
