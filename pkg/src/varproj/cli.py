"""Benchmark command line: solver comparisons, bound verification, checks.

Four subcommands operate on the blind-deconvolution benchmark:

* ``compare`` runs the exact solver and the inexact solver under the
  configured tolerance schedules, writing per-iteration CSV traces and
  per-schedule gap files.
* ``bounds`` reruns the inexact solver with diagnostics and verifies the
  a-posteriori solution/residual bounds at every iteration.
* ``gradcheck`` validates the analytic Jacobian and gradient against
  central finite differences.
* ``table`` emits reconstruction-error/parameter/gradient tables for the
  first seven iterations of the exact and exponential-schedule runs.

Config files are INI-style with sections [problem], [solver], [schedules]
and [output]; every key has a default, so an empty (or absent) file runs
the default benchmark experiment. Exit codes: 0 success, 1 config or I/O
error, 2 solver failure, 3 check failure.
"""

from __future__ import annotations

import argparse
import configparser
import csv
import json
import sys
import time
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from . import __version__
from .bounds import initial_tolerance, residual_bound, solution_bound
from .deconv import BenchConfig, ConfigError, ProblemInstance, build_problem, stacked_operator
from .inner_solvers import (
    NORM_MODE_EXPLICIT,
    NORM_MODE_INTERNAL,
    DirectFactorization,
    condition_number,
)
from .linops import DenseOperator
from .varpro import (
    OuterOptions,
    SolverTrace,
    ToleranceSchedule,
    exact_jacobian,
    genvarpro,
    gradient,
    inexact_genvarpro,
    reduced_residual,
)

SCHEDULE_NAMES = {"b": "constant", "lb": "linear", "ab": "exponential", "s": "fixed-small"}

# Shipped starting tolerances for the standard initial guesses; other y0
# values fall back to the safety/kappa rule.
DEFAULT_INITIAL_TOLERANCES = {2.0: 1.8718e-4, 4.0: 1.1239e-4}

# Bound violations at tolerances below this are reported but not fatal: the
# inner tolerance has reached the rounding floor of the solver itself.
MUST_HOLD_EPSILON = 1e3 * float(np.finfo(float).eps)

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_SOLVER = 2
EXIT_CHECK = 3

_PROBLEM_KEYS = ("n", "sigma_true", "noise_level", "lambda", "seed", "tau", "signal")
_SOLVER_KEYS = ("y0", "max_outer_iterations", "step_tolerance", "gradient_tolerance",
                "lsqr_max_iterations", "norm_estimate_mode")
_SCHEDULE_KEYS = ("run", "epsilon0", "safety")
_OUTPUT_KEYS = ("gnuplot",)


@dataclass(frozen=True)
class RunSettings:
    """Fully resolved run configuration (every default made explicit)."""

    problem: BenchConfig
    y0_list: tuple[float, ...] = (2.0, 4.0)
    max_outer_iterations: int = 50
    step_tolerance: float = 0.0
    gradient_tolerance: float = 0.0
    lsqr_max_iterations: int = 10000
    norm_estimate_mode: str = NORM_MODE_INTERNAL
    schedules: tuple[str, ...] = ("b", "lb", "ab", "s")
    epsilon0: float | None = None  # None: resolve per y0
    safety: float = 0.1
    gnuplot: bool = True

    def resolved(self) -> dict:
        p = self.problem
        return {
            "problem": {
                "n": p.n, "sigma_true": p.sigma_true, "noise_level": p.noise_level,
                "lambda": p.lam, "seed": p.rng_seed, "tau": p.tau, "signal": p.x_true_spec,
            },
            "solver": {
                "y0": list(self.y0_list),
                "max_outer_iterations": self.max_outer_iterations,
                "step_tolerance": self.step_tolerance,
                "gradient_tolerance": self.gradient_tolerance,
                "lsqr_max_iterations": self.lsqr_max_iterations,
                "norm_estimate_mode": self.norm_estimate_mode,
            },
            "schedules": {
                "run": list(self.schedules),
                "epsilon0": "auto" if self.epsilon0 is None else self.epsilon0,
                "safety": self.safety,
            },
            "output": {"gnuplot": self.gnuplot},
        }


def _get(parser, section, key, cast, default):
    if not parser.has_option(section, key):
        return default
    raw = parser.get(section, key)
    try:
        return cast(raw)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"[{section}] {key}: cannot parse {raw!r}") from exc


def _parse_bool(raw: str) -> bool:
    lowered = raw.strip().lower()
    if lowered in ("1", "true", "yes", "on"):
        return True
    if lowered in ("0", "false", "no", "off"):
        return False
    raise ValueError(raw)


def _parse_float_list(raw: str) -> tuple[float, ...]:
    items = tuple(float(part) for part in raw.split(",") if part.strip())
    if not items:
        raise ValueError(raw)
    return items


def _parse_schedule_list(raw) -> tuple[str, ...]:
    names = []
    for part in str(raw).split(","):
        name = part.strip().lower()
        if not name:
            continue
        # Accept full kind names as aliases for the short labels.
        for short, kind in SCHEDULE_NAMES.items():
            if name in (short, kind):
                name = short
                break
        else:
            raise ConfigError(f"unknown schedule {part.strip()!r} "
                              f"(expected one of {sorted(SCHEDULE_NAMES)})")
        names.append(name)
    if not names:
        raise ConfigError("schedule list is empty")
    return tuple(names)


def load_settings(config_path: str | None, seed_override: int | None = None,
                  schedules_override: str | None = None) -> RunSettings:
    """Read an INI config file, applying defaults for every missing key."""
    parser = configparser.ConfigParser()
    if config_path is not None:
        path = Path(config_path)
        if not path.is_file():
            raise ConfigError(f"config file not found: {path}")
        try:
            with open(path) as handle:
                parser.read_file(handle)
        except (OSError, configparser.Error) as exc:
            raise ConfigError(f"cannot read config file {path}: {exc}") from exc

    known = {"problem": _PROBLEM_KEYS, "solver": _SOLVER_KEYS,
             "schedules": _SCHEDULE_KEYS, "output": _OUTPUT_KEYS}
    for section in parser.sections():
        if section not in known:
            raise ConfigError(f"unknown config section [{section}]")
        for key in parser.options(section):
            if key not in known[section]:
                raise ConfigError(f"unknown key {key!r} in section [{section}]")

    try:
        problem = BenchConfig(
            n=_get(parser, "problem", "n", int, 128),
            sigma_true=_get(parser, "problem", "sigma_true", float, 3.0),
            noise_level=_get(parser, "problem", "noise_level", float, 0.05),
            lam=_get(parser, "problem", "lambda", float, 0.0379),
            rng_seed=_get(parser, "problem", "seed", int, BenchConfig().rng_seed),
            tau=_get(parser, "problem", "tau", float, 1e-8),
            x_true_spec=_get(parser, "problem", "signal", str, "piecewise"),
        )
    except ConfigError:
        raise
    if seed_override is not None:
        problem = replace(problem, rng_seed=seed_override)

    mode = _get(parser, "solver", "norm_estimate_mode", str, NORM_MODE_INTERNAL).lower()
    if mode not in (NORM_MODE_INTERNAL, NORM_MODE_EXPLICIT):
        raise ConfigError(f"[solver] norm_estimate_mode: unknown mode {mode!r}")

    eps0_raw = _get(parser, "schedules", "epsilon0", str, "auto").strip().lower()
    if eps0_raw == "auto":
        epsilon0 = None
    else:
        try:
            epsilon0 = float(eps0_raw)
        except ValueError as exc:
            raise ConfigError(f"[schedules] epsilon0: cannot parse {eps0_raw!r}") from exc
        if not epsilon0 > 0.0:
            raise ConfigError(f"[schedules] epsilon0 must be positive, got {epsilon0}")

    schedules_raw = schedules_override if schedules_override is not None else \
        _get(parser, "schedules", "run", str, "b, lb, ab, s")

    settings = RunSettings(
        problem=problem,
        y0_list=_get(parser, "solver", "y0", _parse_float_list, (2.0, 4.0)),
        max_outer_iterations=_get(parser, "solver", "max_outer_iterations", int, 50),
        step_tolerance=_get(parser, "solver", "step_tolerance", float, 0.0),
        gradient_tolerance=_get(parser, "solver", "gradient_tolerance", float, 0.0),
        lsqr_max_iterations=_get(parser, "solver", "lsqr_max_iterations", int, 10000),
        norm_estimate_mode=mode,
        schedules=_parse_schedule_list(schedules_raw),
        epsilon0=epsilon0,
        safety=_get(parser, "schedules", "safety", float, 0.1),
        gnuplot=_get(parser, "output", "gnuplot", _parse_bool, True),
    )
    if settings.max_outer_iterations < 1:
        raise ConfigError("[solver] max_outer_iterations must be at least 1")
    if settings.lsqr_max_iterations < 1:
        raise ConfigError("[solver] lsqr_max_iterations must be at least 1")
    if settings.step_tolerance < 0 or settings.gradient_tolerance < 0:
        raise ConfigError("[solver] stopping tolerances must be nonnegative")
    if not settings.safety > 0:
        raise ConfigError("[schedules] safety must be positive")
    for y0 in settings.y0_list:
        if not y0 > 0:
            raise ConfigError(f"[solver] y0 values must be positive, got {y0}")
    return settings


def resolve_epsilon0(settings: RunSettings, problem: ProblemInstance, y0: float) -> float:
    """Starting tolerance for one run: explicit config value, the shipped
    default for the standard initial guesses, or safety/kappa otherwise."""
    if settings.epsilon0 is not None:
        return settings.epsilon0
    if y0 in DEFAULT_INITIAL_TOLERANCES:
        return DEFAULT_INITIAL_TOLERANCES[y0]
    kappa0 = condition_number(stacked_operator(problem, y0))
    return initial_tolerance(max(kappa0, 1.0), settings.safety)


def make_schedule(name: str, epsilon0: float) -> ToleranceSchedule:
    kind = SCHEDULE_NAMES[name]
    if kind == "fixed-small":
        return ToleranceSchedule("fixed-small")
    return ToleranceSchedule(kind, epsilon0)


def _outer_options(settings: RunSettings, schedule: ToleranceSchedule | None = None,
                   **overrides) -> OuterOptions:
    kwargs = dict(
        max_outer_iterations=settings.max_outer_iterations,
        step_tolerance=settings.step_tolerance,
        gradient_tolerance=settings.gradient_tolerance,
        schedule=schedule,
        lsqr_max_iterations=settings.lsqr_max_iterations,
        norm_estimate_mode=settings.norm_estimate_mode,
    )
    kwargs.update(overrides)
    return OuterOptions(**kwargs)


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return f"{float(value):.17g}"


def _write_csv(path: Path, header: list[str], rows: list[list]) -> None:
    with open(path, "w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(v) for v in row])


def _trace_rows(trace: SolverTrace) -> list[list]:
    rows = []
    for rec in trace.records:
        rows.append([rec.k, rec.y[0], rec.f_value, float(np.linalg.norm(rec.gradient)),
                     rec.epsilon, rec.inner_iterations])
    return rows


_TRACE_HEADER = ["k", "y", "f_value", "grad_norm", "epsilon", "inner_iterations"]


def _y0_tag(y0: float) -> str:
    return f"{y0:g}".replace(".", "p")


def _write_manifest(out_dir: Path, command: str, settings: RunSettings,
                    files: list[str], timings: dict, extra: dict | None = None) -> None:
    payload = {
        "command": command,
        "package_version": __version__,
        "config": settings.resolved(),
        "outputs": sorted(files),
        "timings_seconds": timings,
    }
    if extra:
        payload.update(extra)
    with open(out_dir / "manifest.json", "w") as handle:
        json.dump(payload, handle, indent=2, sort_keys=True)
        handle.write("\n")


def _gnuplot_script(gap_files: list[str]) -> str:
    lines = [
        "# Parameter gaps between the exact and inexact runs, log scale.",
        "set datafile separator ','",
        "set logscale y",
        "set xlabel 'outer iteration k'",
        "set ylabel '|y_exact - y_inexact|'",
    ]
    plots = [f"'{name}' skip 1 using 1:2 with lines title '{name}'" for name in gap_files]
    lines.append("plot " + ", \\\n     ".join(plots))
    return "\n".join(lines) + "\n"


def _solver_failed(trace: SolverTrace, label: str) -> bool:
    if trace.failed:
        print(f"solver failure in {label}: status={trace.status}", file=sys.stderr)
        for message in trace.warnings:
            print(f"  {message}", file=sys.stderr)
        return True
    return False


def cmd_compare(settings: RunSettings, out_dir: Path) -> int:
    """Run the exact solver and every configured schedule, emit traces and gaps."""
    problem = build_problem(settings.problem)
    files: list[str] = []
    gap_files: list[str] = []
    timings: dict[str, float] = {}
    failed = False
    for y0 in settings.y0_list:
        tag = _y0_tag(y0)
        tic = time.perf_counter()
        trace_gp = genvarpro(problem.model, problem.b, problem.L, problem.lam,
                             np.array([y0]), _outer_options(settings))
        timings[f"genvarpro_y0_{tag}"] = time.perf_counter() - tic
        name = f"gp_y0_{tag}.csv"
        _write_csv(out_dir / name, _TRACE_HEADER, _trace_rows(trace_gp))
        files.append(name)
        if _solver_failed(trace_gp, f"genvarpro y0={y0}"):
            failed = True
            continue
        eps0 = resolve_epsilon0(settings, problem, y0)
        y_gp = trace_gp.y_history[:, 0]
        for sched_name in settings.schedules:
            tic = time.perf_counter()
            trace = inexact_genvarpro(problem.model, problem.b, problem.L, problem.lam,
                                      np.array([y0]),
                                      _outer_options(settings, make_schedule(sched_name, eps0)))
            timings[f"lsqr_{sched_name}_y0_{tag}"] = time.perf_counter() - tic
            name = f"lsqr_{sched_name}_y0_{tag}.csv"
            _write_csv(out_dir / name, _TRACE_HEADER, _trace_rows(trace))
            files.append(name)
            if _solver_failed(trace, f"inexact ({sched_name}) y0={y0}"):
                failed = True
                continue
            y_in = trace.y_history[:, 0]
            count = min(y_gp.size, y_in.size)
            gap_name = f"gap_{sched_name}_y0_{tag}.csv"
            _write_csv(out_dir / gap_name, ["k", "gap"],
                       [[k, abs(y_gp[k] - y_in[k])] for k in range(count)])
            files.append(gap_name)
            gap_files.append(gap_name)
    if settings.gnuplot and gap_files:
        with open(out_dir / "plot_gaps.gp", "w") as handle:
            handle.write(_gnuplot_script(gap_files))
        files.append("plot_gaps.gp")
    _write_manifest(out_dir, "compare", settings, files, timings)
    return EXIT_SOLVER if failed else EXIT_OK


def cmd_bounds(settings: RunSettings, out_dir: Path) -> int:
    """Verify the solution/residual bounds along every inexact run.

    The inexact runs use the explicit-SVD operator norm in the stopping
    test, since the bounds are stated for the true 2-norm. Violations at
    tolerances above 1e3 * machine epsilon are check failures; below that
    the inner tolerance has outrun the solver's own rounding floor and
    violations are reported only.
    """
    problem = build_problem(settings.problem)
    b_norm = float(np.linalg.norm(problem.b))
    files: list[str] = []
    timings: dict[str, float] = {}
    violations: list[dict] = []
    fatal = False
    failed = False
    for y0 in settings.y0_list:
        tag = _y0_tag(y0)
        eps0 = resolve_epsilon0(settings, problem, y0)
        for sched_name in settings.schedules:
            tic = time.perf_counter()
            trace = inexact_genvarpro(
                problem.model, problem.b, problem.L, problem.lam, np.array([y0]),
                _outer_options(settings, make_schedule(sched_name, eps0),
                               diagnostic=True, norm_estimate_mode=NORM_MODE_EXPLICIT))
            timings[f"bounds_{sched_name}_y0_{tag}"] = time.perf_counter() - tic
            if _solver_failed(trace, f"inexact ({sched_name}) y0={y0}"):
                failed = True
                continue
            rows = []
            for rec in trace.records:
                eps, kappa = rec.epsilon, rec.kappa
                valid = eps * kappa < 1.0
                measured_x = float(np.linalg.norm(rec.x_exact - rec.x))
                op = stacked_operator(problem, rec.y[0])
                measured_r = float(np.linalg.norm(op.matvec(rec.x) - op.matvec(rec.x_exact)))
                if valid:
                    bound_x = solution_bound(kappa, b_norm, rec.op_norm, eps)
                    bound_r = residual_bound(kappa, b_norm, eps)
                    violated = measured_x >= bound_x or measured_r >= bound_r
                else:
                    bound_x = bound_r = float("nan")
                    violated = False
                rows.append([rec.k, eps, kappa, eps * kappa, measured_x, bound_x,
                             measured_r, bound_r, int(violated)])
                if violated:
                    entry = {"schedule": sched_name, "y0": y0, "k": rec.k,
                             "epsilon": eps, "eps_kappa": eps * kappa,
                             "fatal": eps > MUST_HOLD_EPSILON}
                    violations.append(entry)
                    fatal = fatal or entry["fatal"]
                    print(f"bound violation: schedule={sched_name} y0={y0} k={rec.k} "
                          f"eps*kappa={eps * kappa:.3e}"
                          + ("" if entry["fatal"] else " (below rounding floor, not fatal)"),
                          file=sys.stderr)
            name = f"bounds_{sched_name}_y0_{tag}.csv"
            _write_csv(out_dir / name,
                       ["k", "epsilon", "kappa", "eps_kappa", "measured_x_err", "x_bound",
                        "measured_r_err", "r_bound", "violation"], rows)
            files.append(name)
    _write_manifest(out_dir, "bounds", settings, files, timings,
                    extra={"violations": violations})
    if failed:
        return EXIT_SOLVER
    return EXIT_CHECK if fatal else EXIT_OK


def _fd_jacobian(problem: ProblemInstance, y: np.ndarray, h: float) -> np.ndarray:
    """Central finite differences of the full reduced-residual map y -> F(y)."""
    model = problem.model
    cols = []
    for j in range(model.r):
        yp = y.copy()
        yp[j] += h
        ym = y.copy()
        ym[j] -= h
        fp = _reduced_residual_at(problem, yp)
        fm = _reduced_residual_at(problem, ym)
        cols.append((fp - fm) / (2.0 * h))
    return np.column_stack(cols)


def _reduced_residual_at(problem: ProblemInstance, y: np.ndarray) -> np.ndarray:
    op = stacked_operator(problem, y[0])
    x = DirectFactorization(op).solve_rhs(problem.b)
    return reduced_residual(problem.model, y, x, problem.b, problem.L, problem.lam)


def cmd_gradcheck(settings: RunSettings, corrupt: bool = False) -> int:
    """Finite-difference validation of the Jacobian and gradient at random y.

    ``corrupt`` deliberately rescales the analytic derivative as a negative
    control; the check must then fail.
    """
    problem = build_problem(settings.problem)
    model = problem.model
    if corrupt:
        clean = model.derivative

        def skewed(y, j):
            return DenseOperator(1.05 * clean(y, j).to_dense())

        model = replace(model, derivative=skewed)
        problem = replace(problem, model=model)
    rng = np.random.default_rng(settings.problem.rng_seed + 1000003)
    sigma_true = settings.problem.sigma_true
    worst = 0.0
    for _ in range(5):
        y = np.array([rng.uniform(0.6 * sigma_true, 1.4 * sigma_true)])
        h = 1e-6 * max(1.0, abs(y[0]))
        op = stacked_operator(problem, y[0])
        fact = DirectFactorization(op)
        x = fact.solve_rhs(problem.b)
        fvec = op.matvec(x) - np.concatenate([problem.b, np.zeros(problem.L.rows)])
        J = exact_jacobian(model, y, fact, x, problem.b)
        J_fd = _fd_jacobian(problem, y, h)
        err_jac = float(np.linalg.norm(J - J_fd, 2) / max(np.linalg.norm(J, 2), 1e-30))
        grad = gradient(J, fvec)
        f_plus = _objective_value(problem, y[0] + h)
        f_minus = _objective_value(problem, y[0] - h)
        err_grad = float(abs((f_plus - f_minus) / (2 * h) - grad[0]) / (1.0 + abs(grad[0])))
        err = max(err_jac, err_grad)
        worst = max(worst, err)
        print(f"y={y[0]:.6f}  jacobian rel err {err_jac:.3e}  gradient rel err {err_grad:.3e}")
    print(f"max relative error: {worst:.3e}")
    return EXIT_OK if worst <= 1e-4 else EXIT_CHECK


def _objective_value(problem: ProblemInstance, y_value: float) -> float:
    fvec = _reduced_residual_at(problem, np.array([y_value]))
    return 0.5 * float(fvec @ fvec)


def cmd_table(settings: RunSettings, out_dir: Path) -> int:
    """Reconstruction-error table over the first seven iterations.

    Runs the exact solver and the exponential-schedule inexact solver for
    exactly seven steps from each configured y0 and tabulates the relative
    reconstruction error, the parameter iterates, and the exact gradient
    magnitudes at both solvers' iterates.
    """
    problem = build_problem(settings.problem)
    x_true_norm = float(np.linalg.norm(problem.x_true))
    files: list[str] = []
    timings: dict[str, float] = {}
    header = ["k", "rre_gp", "rre_ab", "y_gp", "y_ab", "grad_gp", "grad_ab"]
    for y0 in settings.y0_list:
        tag = _y0_tag(y0)
        eps0 = resolve_epsilon0(settings, problem, y0)
        tic = time.perf_counter()
        opts_exact = _outer_options(settings, max_outer_iterations=7,
                                    step_tolerance=0.0, gradient_tolerance=0.0)
        trace_gp = genvarpro(problem.model, problem.b, problem.L, problem.lam,
                             np.array([y0]), opts_exact)
        opts_ab = _outer_options(settings, make_schedule("ab", eps0),
                                 max_outer_iterations=7, step_tolerance=0.0,
                                 gradient_tolerance=0.0, diagnostic=True)
        trace_ab = inexact_genvarpro(problem.model, problem.b, problem.L, problem.lam,
                                     np.array([y0]), opts_ab)
        timings[f"table_y0_{tag}"] = time.perf_counter() - tic
        if _solver_failed(trace_gp, f"genvarpro y0={y0}") or \
                _solver_failed(trace_ab, f"inexact (ab) y0={y0}"):
            return EXIT_SOLVER
        rows = []
        for k in range(min(len(trace_gp), len(trace_ab))):
            rec_gp = trace_gp.records[k]
            rec_ab = trace_ab.records[k]
            rows.append([
                k,
                float(np.linalg.norm(rec_gp.x - problem.x_true)) / x_true_norm,
                float(np.linalg.norm(rec_ab.x - problem.x_true)) / x_true_norm,
                rec_gp.y[0],
                rec_ab.y[0],
                float(np.linalg.norm(rec_gp.gradient)),
                float(np.linalg.norm(rec_ab.gradient_exact)),
            ])
        name = f"table_y0_{tag}.csv"
        _write_csv(out_dir / name, header, rows)
        files.append(name)
        text_name = f"table_y0_{tag}.txt"
        with open(out_dir / text_name, "w") as handle:
            handle.write(f"{'k':>2s} {'RRE(x_GP)':>10s} {'RRE(x_ab)':>10s} "
                         f"{'y_GP':>8s} {'y_ab':>8s} {'|grad_GP|':>10s} {'|grad_ab|':>10s}\n")
            for row in rows:
                handle.write(f"{row[0]:2d} {row[1]:10.4f} {row[2]:10.4f} "
                             f"{row[3]:8.4f} {row[4]:8.4f} {row[5]:10.2e} {row[6]:10.2e}\n")
        files.append(text_name)
    _write_manifest(out_dir, "table", settings, files, timings)
    return EXIT_OK


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="varproj",
        description="Blind-deconvolution benchmark for variable-projection solvers "
                    "with certified inexact inner solves.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, helptext in [
        ("compare", "run exact and inexact solvers under the configured schedules"),
        ("bounds", "verify the a-posteriori error bounds along the inexact runs"),
        ("gradcheck", "finite-difference validation of the Jacobian and gradient"),
        ("table", "reconstruction-error tables for the first seven iterations"),
    ]:
        cmd = sub.add_parser(name, help=helptext)
        cmd.add_argument("--config", default=None, help="INI config file (all keys optional)")
        cmd.add_argument("--seed", type=int, default=None, help="override the noise seed")
        cmd.add_argument("--schedules", default=None,
                         help="comma-separated subset of b, lb, ab, s")
        if name != "gradcheck":
            cmd.add_argument("--out", required=True, help="output directory")
        else:
            cmd.add_argument("--corrupt-derivative", action="store_true",
                             help="negative control: perturb the analytic derivative")

    args = parser.parse_args(argv)
    try:
        settings = load_settings(args.config, seed_override=args.seed,
                                 schedules_override=args.schedules)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    try:
        if args.command == "gradcheck":
            return cmd_gradcheck(settings, corrupt=args.corrupt_derivative)
        out_dir = Path(args.out)
        try:
            out_dir.mkdir(parents=True, exist_ok=True)
        except OSError as exc:
            print(f"cannot create output directory {out_dir}: {exc}", file=sys.stderr)
            return EXIT_CONFIG
        if args.command == "compare":
            return cmd_compare(settings, out_dir)
        if args.command == "bounds":
            return cmd_bounds(settings, out_dir)
        return cmd_table(settings, out_dir)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as exc:  # solver-level failures
        print(f"solver error: {exc}", file=sys.stderr)
        return EXIT_SOLVER


def main_entry() -> None:
    sys.exit(main())
