"""Command-line harness: ``generate``, ``solve`` and ``sweep``.

Exit codes: 0 success, 1 usage or precondition failure, 2 I/O failure,
3 internal assertion failure.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import baseline, mechanisms, problems, solver
from .errors import (InfeasibleError, InternalAssertionError, OracleError, ParameterError,
                     PreconditionError, PrivDudeError, ScaleError)
from .rng import Streams

ALGOS = ("privdude", "truedude", "tightdude", "rounddude", "baseline")
OPT_T_LONG = 10**4


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def threads() -> int:
    raw = os.environ.get("PRIVDUDE_THREADS")
    if raw is None or raw == "":
        return os.cpu_count() or 1
    try:
        count = int(raw)
    except ValueError:
        raise UsageError(f"PRIVDUDE_THREADS must be an integer, got {raw!r}")
    if count < 1:
        raise UsageError(f"PRIVDUDE_THREADS must be positive, got {count}")
    return count


def _clean(obj):
    """Make a structure JSON-safe; non-finite floats become null."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer, int)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        val = float(obj)
        return val if math.isfinite(val) else None
    return obj


def _dump(obj) -> str:
    return json.dumps(_clean(obj), indent=1, sort_keys=True, allow_nan=False) + "\n"


def _write(path, text):
    if path is None or path == "-":
        sys.stdout.write(text)
        return
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)


def estimate_opt(instance, program, workers=1):
    """Exact optimum when cheap, otherwise a long noiseless run with its error bar."""
    if instance.kind == "knapsack" and program.k == 1:
        return baseline.greedy_fractional_knapsack(instance.values, instance.weights, program.b), 0.0, "greedy"
    return (*baseline.noiseless_opt(program, OPT_T_LONG, workers), "noiseless")


def _config(args, workers, seed=None, epsilon=None):
    return solver.SolveConfig(
        epsilon=args.epsilon if epsilon is None else epsilon,
        delta=args.delta, beta=args.beta, noise_enabled=not args.no_noise,
        T_override=args.T_override, seed=args.seed if seed is None else seed, workers=workers)


def _report_block(report: solver.SolveReport) -> dict:
    return {
        "schedule": report.schedule.as_dict(),
        "lambda_bar": report.lambda_bar,
        "ledger": report.ledger.as_dict(),
        "rp": report.rp,
        "rp_theory": report.rp_theory,
        "timings": report.counts,
    }


def _solve(instance, args, workers):
    program = instance.program()
    config = _config(args, workers)
    algo = args.algo
    if algo == "baseline":
        value, err, method = estimate_opt(instance, program, workers)
        out = {"algo": algo, "opt": value, "opt_error": err, "method": method}
        if method != "greedy":
            try:
                exact, witness = baseline.brute_force_opt(program)
                out["brute_force_opt"] = exact
                out["witness"] = witness
            except ScaleError:
                pass
        return out

    opt, opt_err, method = estimate_opt(instance, program, workers)
    if algo == "privdude":
        report = solver.run(program, config)
        out = {"algo": algo, "x_bar": report.x_bar.points}
    elif algo == "truedude":
        outcome = mechanisms.truedude(program, config, args.alpha)
        report = outcome.report
        out = _priced(algo, outcome)
    elif algo == "tightdude":
        outcome = mechanisms.tightdude(program, config, args.alpha)
        report = outcome.report
        out = _priced(algo, outcome)
        out["xi"], out["kappa"] = outcome.xi, outcome.kappa
    else:
        outcome = mechanisms.rounddude(program, config)
        report = outcome.report
        out = {"algo": algo, "x_bar": report.x_bar.points, "final": outcome.point.points,
               "served": outcome.served, "zeta": outcome.zeta, "flag_epsilon": outcome.flag_epsilon,
               "final_violation": float(np.clip(outcome.point.aggregate() - program.b, 0, None).sum())}
    audited, audit_opt = program, opt
    if algo == "tightdude":
        # The inner solve ran on the reduced program, whose optimum is at least (1 - kappa) OPT.
        audited, audit_opt = program.with_b(program.b - outcome.xi), (1.0 - outcome.kappa) * opt
    verdict = baseline.audit(report, audited, audit_opt, opt_err)
    out.update(_report_block(report))
    out["audit"] = {**report.audit, **verdict.as_dict(), "opt": opt, "opt_error": opt_err, "opt_method": method}
    return out


def _priced(algo, outcome):
    return {"algo": algo, "x_bar": outcome.report.x_bar.points, "final": outcome.points.points,
            "payments": outcome.payments, "satisfied_before": outcome.satisfied_before,
            "reassigned": outcome.reassigned, "rho": outcome.rho, "gamma": outcome.gamma, "alpha": outcome.alpha}


def cmd_generate(args) -> int:
    sizes = {name: getattr(args, name) for name in
             ("n", "k", "d", "nodes", "intervals", "slots", "d_max", "projects", "resources", "capacity_fraction")
             if getattr(args, name) is not None}
    instance = problems.generate(args.kind, seed=args.seed, **sizes)
    _write(args.out, problems.dumps(instance))
    if args.out not in (None, "-"):
        sys.stdout.write(_dump({"kind": instance.kind, "n": instance.n, "k": instance.k,
                                "metadata": instance.metadata().as_dict()}))
    return 0


def cmd_solve(args) -> int:
    workers = threads()
    instance = problems.load(args.input)
    start = time.perf_counter()
    out = _solve(instance, args, workers)
    elapsed = time.perf_counter() - start
    _write(args.out, _dump(out))
    # Wall time stays out of the report so identical runs give identical files.
    print(f"wall time: {elapsed:.3f}s", file=sys.stderr)
    return 0


def parse_epsilons(text: str) -> list[float]:
    try:
        values = [float(tok) for tok in text.split(",")]
    except ValueError:
        raise UsageError(f"malformed epsilon list {text!r}")
    if not values or any(not (math.isfinite(v) and v > 0) for v in values):
        raise UsageError(f"epsilons must be positive numbers, got {text!r}")
    return values


def _trial(program, instance, args, eps, seed, opt):
    config = solver.SolveConfig(epsilon=eps, delta=args.delta, beta=args.beta, noise_enabled=not args.no_noise,
                                T_override=args.T_override, seed=seed)
    report = solver.run(program, config)
    alpha = args.alpha if args.alpha is not None else report.rp / 5.0
    lam = report.lambda_bar
    sat = [mechanisms.utility(o, report.x_bar.point_of(l), lam)
           >= mechanisms.utility(o, o.best_response(lam).point, lam) - alpha
           for l, o in zip(program.labels, program.oracles)]
    objective = report.x_bar.objective
    return [eps, seed, objective, opt, opt - objective, report.audit["total_violation"], report.rp,
            sum(sat) / len(sat) if sat else 1.0]


def cmd_sweep(args) -> int:
    epsilons = parse_epsilons(args.epsilons)
    if args.trials < 1:
        raise UsageError("trials must be at least 1")
    workers = threads()
    instance = problems.load(args.input)
    program = instance.program()
    opt, _, _ = estimate_opt(instance, program)
    streams = Streams(args.seed)
    jobs = [(eps, streams.derive_seed("sweep", i, trial)) for i, eps in enumerate(epsilons) for trial in range(args.trials)]
    with ThreadPoolExecutor(workers) as pool:
        rows = list(pool.map(lambda job: _trial(program, instance, args, job[0], job[1], opt), jobs))
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["epsilon", "seed", "objective", "opt", "gap", "violation", "rp_bound", "satisfied_frac"])
    for row in rows:
        writer.writerow([repr(float(v)) if isinstance(v, float) else v for v in row])
    _write(args.out, buf.getvalue())
    return 0


def _add_privacy(p):
    p.add_argument("--epsilon", type=float, default=1.0)
    p.add_argument("--delta", type=float, default=0.01)
    p.add_argument("--beta", type=float, default=0.1)
    p.add_argument("--alpha", type=float, default=None)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--T-override", dest="T_override", type=int, default=None)
    p.add_argument("--no-noise", dest="no_noise", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="privdude", description="Jointly private dual decomposition solver")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    gen = sub.add_parser("generate", help="write a seeded random instance")
    gen.add_argument("kind", choices=sorted(problems.GENERATORS))
    gen.add_argument("--n", type=int)
    gen.add_argument("--k", type=int)
    gen.add_argument("--d", type=int)
    gen.add_argument("--nodes", type=int)
    gen.add_argument("--intervals", type=int)
    gen.add_argument("--slots", type=int)
    gen.add_argument("--d-max", dest="d_max", type=int)
    gen.add_argument("--projects", type=int)
    gen.add_argument("--resources", type=int)
    gen.add_argument("--capacity-fraction", dest="capacity_fraction", type=float)
    gen.add_argument("--seed", type=int, default=0)
    gen.add_argument("--out")
    gen.set_defaults(func=cmd_generate)

    solve = sub.add_parser("solve", help="solve an instance file")
    solve.add_argument("input")
    solve.add_argument("--algo", choices=ALGOS, default="privdude")
    _add_privacy(solve)
    solve.add_argument("--out")
    solve.set_defaults(func=cmd_solve)

    sweep = sub.add_parser("sweep", help="objective and violation across privacy levels")
    sweep.add_argument("input")
    sweep.add_argument("--epsilons", required=True)
    sweep.add_argument("--trials", type=int, default=1)
    _add_privacy(sweep)
    sweep.add_argument("--out")
    sweep.set_defaults(func=cmd_sweep)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "algo", None) in ("truedude", "tightdude") and args.alpha is None:
        args.alpha = 1.0
    try:
        return args.func(args)
    except (UsageError, ParameterError, PreconditionError, ScaleError, InfeasibleError) as exc:
        print(f"privdude: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"privdude: I/O error: {exc}", file=sys.stderr)
        return 2
    except (InternalAssertionError, OracleError) as exc:
        print(f"privdude: internal assertion failed: {exc}", file=sys.stderr)
        return 3
    except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
        print(f"privdude: malformed input: {exc}", file=sys.stderr)
        return 1
    except PrivDudeError as exc:
        print(f"privdude: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
