"""Command-line harness: run benchmarks, verify solutions, scaling studies.

Verbs:
  run      solve one problem, write per-iteration log, solution and summary
  check    recompute the first-order error of a stored solution
  scaling  time the structured linear solver across horizon lengths
  suite    run the full acceptance battery

Configuration comes from an INI-style file with [problem], [solver],
[output] and [run] sections; command-line flags override file values.
Exit codes: 0 success, 1 solver/criterion failure, 2 configuration error.
"""

from __future__ import annotations

import argparse
import configparser
import csv
import io
import logging
import os
import statistics
import sys
import time
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from . import riccati as rc
from .errors import ConfigError, OcpikError, UnknownProblemError
from .ocp import Iterate, assemble_nlp, kkt_error
from .problems import BENCHMARK_NAMES, Benchmark, build_benchmark
from .solver import SolveResult, SolverOptions, SolveStatus, solve

log = logging.getLogger("ocpik")

LOG_COLUMNS = [
    "iter", "mu", "objective", "theta", "kkt_total",
    "alpha_primal", "alpha_dual", "delta", "soc_count",
]

SUMMARY_COLUMNS = [
    "problem", "iterations", "total_ms", "function_eval_ms",
    "linear_algebra_ms", "status", "kkt_error",
]


def _setup_logging():
    level = os.environ.get("OCPIK_LOG_LEVEL", "info").strip().lower()
    levels = {"quiet": logging.WARNING, "info": logging.INFO, "debug": logging.DEBUG}
    if level not in levels:
        level = "info"
    logging.basicConfig(stream=sys.stderr, level=levels[level], format="%(message)s")


@dataclass
class RunConfig:
    """Validated configuration of one solver run."""

    problem: str = ""
    problem_params: dict = field(default_factory=dict)
    solver: dict = field(default_factory=dict)
    out_dir: str = "."
    reps: int = 1
    seed: int = 0

    RUN_KEYS = {"reps", "seed"}
    OUTPUT_KEYS = {"dir"}

    @classmethod
    def from_file(cls, path: str) -> "RunConfig":
        parser = configparser.ConfigParser()
        read = parser.read(path)
        if not read:
            raise ConfigError(f"cannot read config file '{path}'")
        cfg = cls()
        for section in parser.sections():
            if section == "problem":
                for key, val in parser["problem"].items():
                    if key == "name":
                        cfg.problem = val
                    else:
                        cfg.problem_params[key] = val
            elif section == "solver":
                cfg.solver.update(parser["solver"])
            elif section == "output":
                for key, val in parser["output"].items():
                    if key not in cls.OUTPUT_KEYS:
                        raise ConfigError(f"unknown [output] key '{key}'")
                    cfg.out_dir = val
            elif section == "run":
                for key, val in parser["run"].items():
                    if key not in cls.RUN_KEYS:
                        raise ConfigError(f"unknown [run] key '{key}'")
                    setattr(cfg, key, int(val))
            else:
                raise ConfigError(f"unknown config section '{section}'")
        cfg.validate()
        return cfg

    def validate(self) -> "RunConfig":
        if self.reps < 1:
            raise ConfigError("repetitions must be >= 1")
        try:
            SolverOptions.from_mapping(self.solver)
        except OcpikError as exc:
            raise ConfigError(str(exc)) from exc
        return self


def _apply_flag_overrides(cfg: RunConfig, args) -> RunConfig:
    if args.problem:
        cfg.problem = args.problem
    for key in ("tol", "mu_init", "gamma_theta", "max_iter"):
        val = getattr(args, key.replace("-", "_"), None)
        if val is not None:
            cfg.solver[key] = str(val)
    if getattr(args, "reps", None) is not None:
        cfg.reps = args.reps
    if getattr(args, "seed", None) is not None:
        cfg.seed = args.seed
    if getattr(args, "out", None) is not None:
        cfg.out_dir = args.out
    cfg.validate()
    if not cfg.problem:
        raise ConfigError("no problem name given (use --problem or a config file)")
    return cfg


def _build_from_config(cfg: RunConfig) -> Benchmark:
    params = {}
    for key, raw in cfg.problem_params.items():
        try:
            params[key] = float(raw)
        except ValueError:
            raise ConfigError(f"parameter '{key}' is not numeric: {raw!r}")
    try:
        return build_benchmark(cfg.problem, params or None)
    except UnknownProblemError:
        raise ConfigError(
            f"unknown problem '{cfg.problem}' (known: {', '.join(BENCHMARK_NAMES)})"
        )
    except OcpikError as exc:
        raise ConfigError(str(exc)) from exc


def format_iteration_log(result: SolveResult) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf)
    writer.writerow(LOG_COLUMNS)
    for rec in result.iterations:
        writer.writerow([
            rec.iter,
            f"{rec.mu:.17g}",
            f"{rec.objective:.17g}",
            f"{rec.theta:.17g}",
            f"{rec.kkt_total:.17g}",
            f"{rec.alpha_primal:.17g}",
            f"{rec.alpha_dual:.17g}",
            f"{rec.delta:.17g}",
            rec.soc_count,
        ])
    return buf.getvalue()


def write_solution(path: str, it: Iterate):
    """Labeled plain-text solution with exact decimal round trip."""

    def fmt(vec):
        return " ".join(f"{v:.17g}" for v in vec)

    with open(path, "w") as fh:
        fh.write(f"mu {it.mu:.17g}\n")
        for k, x in enumerate(it.x):
            fh.write(f"x[{k}] {fmt(x)}\n")
        for k, u in enumerate(it.u):
            fh.write(f"u[{k}] {fmt(u)}\n")
        fh.write(f"s {fmt(it.s)}\n")
        fh.write(f"z {fmt(it.z)}\n")
        fh.write(f"lam_g {fmt(it.lam_g)}\n")
        for k, lam in enumerate(it.lam_h):
            fh.write(f"lam_h[{k}] {fmt(lam)}\n")
        for k, pi in enumerate(it.pi):
            fh.write(f"pi[{k}] {fmt(pi)}\n")


def read_solution(path: str, problem) -> Iterate:
    dims = problem.dims
    fields = {}
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            parts = line.split()
            fields[parts[0]] = np.array([float(t) for t in parts[1:]])
    try:
        it = Iterate(
            x=[fields[f"x[{k}]"] for k in range(dims.K + 1)],
            u=[fields.get(f"u[{k}]", np.zeros(0)) for k in range(dims.K)],
            s=fields.get("s", np.zeros(0)),
            z=fields.get("z", np.zeros(0)),
            lam_g=fields.get("lam_g", np.zeros(0)),
            lam_h=[fields.get(f"lam_h[{k}]", np.zeros(dims.nh[k])) for k in range(dims.K + 1)],
            pi=[fields[f"pi[{k}]"] for k in range(dims.K)],
            mu=float(fields["mu"][0]) if "mu" in fields else 0.0,
        )
    except KeyError as exc:
        raise ConfigError(f"solution file missing entry {exc}")
    for k in range(dims.K + 1):
        if it.x[k].size != dims.nx[k]:
            raise ConfigError(f"solution x[{k}] has wrong length")
        if k < dims.K and it.u[k].size != dims.nu[k]:
            raise ConfigError(f"solution u[{k}] has wrong length")
    return it


@dataclass
class SummaryRow:
    problem: str
    iterations: int
    total_ms: float
    function_eval_ms: float
    linear_algebra_ms: float
    status: str
    kkt_error: float

    def as_list(self):
        return [
            self.problem, self.iterations,
            f"{self.total_ms:.3f}", f"{self.function_eval_ms:.3f}",
            f"{self.linear_algebra_ms:.3f}", self.status, f"{self.kkt_error:.3e}",
        ]


def cmd_run(cfg: RunConfig) -> int:
    bench = _build_from_config(cfg)
    opts = SolverOptions.from_mapping(cfg.solver)
    os.makedirs(cfg.out_dir, exist_ok=True)

    results: List[SolveResult] = []
    for _ in range(cfg.reps):
        results.append(solve(bench.problem, bench.guess, opts))
    result = results[-1]

    log_path = os.path.join(cfg.out_dir, f"{bench.name}_iterations.csv")
    with open(log_path, "w", newline="") as fh:
        fh.write(format_iteration_log(result))
    sol_path = os.path.join(cfg.out_dir, f"{bench.name}_solution.txt")
    write_solution(sol_path, result.iterate)

    row = SummaryRow(
        problem=bench.name,
        iterations=result.n_iter,
        total_ms=1e3 * statistics.median(r.timing["total"] for r in results),
        function_eval_ms=1e3 * statistics.median(r.timing["function_eval"] for r in results),
        linear_algebra_ms=1e3 * statistics.median(r.timing["linear_algebra"] for r in results),
        status=result.status.value,
        kkt_error=result.kkt.total,
    )
    summary_path = os.path.join(cfg.out_dir, "results.csv")
    new_file = not os.path.exists(summary_path)
    with open(summary_path, "a", newline="") as fh:
        writer = csv.writer(fh)
        if new_file:
            writer.writerow(SUMMARY_COLUMNS)
        writer.writerow(row.as_list())

    log.info("%s: %s in %d iterations (kkt %.3e)", bench.name, result.status.value,
             result.n_iter, result.kkt.total)
    log.info("iteration log: %s", log_path)
    log.info("solution: %s", sol_path)
    log.info("summary appended to: %s", summary_path)
    return 0 if result.status is SolveStatus.SOLVED else 1


def cmd_check(cfg: RunConfig, solution_path: str, tol: float) -> int:
    bench = _build_from_config(cfg)
    try:
        it = read_solution(solution_path, bench.problem)
    except (OSError, ValueError, ConfigError) as exc:
        log.warning("cannot parse solution file: %s", exc)
        return 2
    try:
        err = kkt_error(bench.problem, it, 0.0)
    except OcpikError as exc:
        log.warning("solution not checkable: %s", exc)
        return 2
    print(f"stationarity    {err.stationarity:.6e}")
    print(f"eq_violation    {err.eq_violation:.6e}")
    print(f"ineq_violation  {err.ineq_violation:.6e}")
    print(f"centering       {err.centering:.6e}")
    print(f"total           {err.total:.6e}  (tol {tol:g})")
    return 0 if err.total <= tol else 1


def repeated_lqr_blocks(K: int, nx: int, nu: int, seed: int) -> rc.StageBlocks:
    """Horizon-K system with identical random positive definite stages."""
    rng = np.random.default_rng(seed)
    M = rng.standard_normal((nx + nu, nx + nu))
    W = M @ M.T + np.eye(nx + nu)
    R, S, Q = W[:nu, :nu], W[nu:, :nu], W[nu:, nu:]
    A = rng.standard_normal((nx, nx)) * (0.9 / np.sqrt(nx))
    B = rng.standard_normal((nx, nu))
    QT = np.eye(nx)
    stages = []
    for _ in range(K):
        stages.append(rc.StageData(
            Q=Q.copy(), q=rng.standard_normal(nx), Hx=np.zeros((0, nx)), h=np.zeros(0),
            R=R.copy(), S=S.copy(), r=rng.standard_normal(nu),
            A=A.copy(), B=B.copy(), b=rng.standard_normal(nx), Hu=np.zeros((0, nu)),
        ))
    stages.append(rc.StageData(Q=QT, q=rng.standard_normal(nx),
                               Hx=np.zeros((0, nx)), h=np.zeros(0)))
    return rc.StageBlocks(stages)


def time_structured_solve(K: int, nx: int, nu: int, seed: int, reps: int) -> float:
    """Median wall time of one factorize + solve on a repeated-stage system."""
    blocks = repeated_lqr_blocks(K, nx, nu, seed)
    times = []
    for _ in range(reps):
        t0 = time.perf_counter()
        fact = rc.factorize(blocks)
        rc.solve(fact, blocks)
        times.append(time.perf_counter() - t0)
    return statistics.median(times)


def cmd_scaling(k_list: List[int], nx: int, nu: int, seed: int, reps: int,
                dense_compare: Optional[int] = None) -> int:
    if len(k_list) < 2 or any(b <= a for a, b in zip(k_list, k_list[1:])):
        raise ConfigError("need an ascending list of at least two horizon lengths")
    rows = []
    for K in k_list:
        rows.append((K, time_structured_solve(K, nx, nu, seed, reps)))
    print(f"{'K':>6}  {'solve_ms':>10}  {'ratio':>6}")
    prev = None
    for K, t in rows:
        ratio = "" if prev is None else f"{t / prev:.2f}"
        print(f"{K:>6}  {1e3 * t:>10.3f}  {ratio:>6}")
        prev = t
    logs = np.log([r[0] for r in rows]), np.log([r[1] for r in rows])
    exponent = float(np.polyfit(logs[0], logs[1], 1)[0])
    print(f"fitted growth exponent: {exponent:.3f}")
    ok = exponent <= 1.3
    if dense_compare:
        blocks = repeated_lqr_blocks(dense_compare, nx, nu, seed)
        t0 = time.perf_counter()
        fact = rc.factorize(blocks)
        rc.solve(fact, blocks)
        t_struct = time.perf_counter() - t0
        t0 = time.perf_counter()
        rc.dense_oracle_solve(blocks)
        t_dense = time.perf_counter() - t0
        print(f"dense comparison at K={dense_compare}: structured {1e3 * t_struct:.2f} ms, "
              f"dense {1e3 * t_dense:.2f} ms, speedup {t_dense / t_struct:.1f}x")
    if not ok:
        log.warning("growth exponent %.3f exceeds 1.3", exponent)
    return 0 if ok else 1


def cmd_suite(fast: bool) -> int:
    from .acceptance import run_all

    results = run_all(fast=fast)
    failed = [r for r in results if not r.passed]
    return 0 if not failed else 1


def main(argv=None) -> int:
    _setup_logging()
    parser = argparse.ArgumentParser(prog="ocpik", description=__doc__,
                                     formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = parser.add_subparsers(dest="verb", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--problem", help="benchmark name")
    common.add_argument("--config", help="INI configuration file")
    common.add_argument("--tol", type=float)
    common.add_argument("--mu-init", dest="mu_init", type=float)
    common.add_argument("--gamma-theta", dest="gamma_theta", type=float)
    common.add_argument("--max-iter", dest="max_iter", type=int)

    p_run = sub.add_parser("run", parents=[common], help="solve a problem")
    p_run.add_argument("--reps", type=int, help="timing repetitions (median reported)")
    p_run.add_argument("--out", help="output directory")
    p_run.add_argument("--seed", type=int)

    p_check = sub.add_parser("check", parents=[common], help="verify a stored solution")
    p_check.add_argument("solution", help="solution file from 'run'")

    p_scal = sub.add_parser("scaling", help="horizon scaling study")
    p_scal.add_argument("--k-list", default="100,200,400")
    p_scal.add_argument("--nx", type=int, default=8)
    p_scal.add_argument("--nu", type=int, default=3)
    p_scal.add_argument("--seed", type=int, default=0)
    p_scal.add_argument("--reps", type=int, default=5)
    p_scal.add_argument("--dense-compare", type=int, default=None,
                        help="also time the dense oracle at this horizon")

    p_suite = sub.add_parser("suite", help="run the acceptance battery")
    p_suite.add_argument("--fast", action="store_true",
                         help="skip the long solver convergence criteria")

    args = parser.parse_args(argv)
    try:
        if args.verb == "run":
            cfg = RunConfig.from_file(args.config) if args.config else RunConfig()
            return cmd_run(_apply_flag_overrides(cfg, args))
        if args.verb == "check":
            cfg = RunConfig.from_file(args.config) if args.config else RunConfig()
            cfg = _apply_flag_overrides(cfg, args)
            return cmd_check(cfg, args.solution, args.tol if args.tol else 1e-8)
        if args.verb == "scaling":
            k_list = [int(t) for t in args.k_list.split(",")]
            return cmd_scaling(k_list, args.nx, args.nu, args.seed, args.reps,
                               args.dense_compare)
        if args.verb == "suite":
            return cmd_suite(args.fast)
    except ConfigError as exc:
        log.warning("configuration error: %s", exc)
        return 2
    return 2


if __name__ == "__main__":
    sys.exit(main())
