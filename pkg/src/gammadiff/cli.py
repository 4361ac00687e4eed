"""Command-line interface: ``gammadiff {spectrum,diff,sweep,synth,fit-gamma}``.

Exit codes: 0 success, 1 usage error, 2 input/output error, 3 numerical or
optimization failure.
"""

import argparse
import logging
import math
import os
import sys
import warnings

import numpy as np

from . import __version__
from .core import estimate_cutoff_frequency, power_spectrum
from .errors import (
    ConvergenceError,
    DataFileError,
    FitError,
    InvalidInputError,
    NoSignalError,
    OptimizationError,
)
from .methods import METHODS, params_to_dict
from .optimize import (
    TimeStepWarning,
    fit_gamma_model,
    gamma_from_heuristic,
    optimize_params,
    suggest_gamma,
)
from .plots import Chart, save
from .synthetic import (
    KINDS,
    ProblemConfig,
    SyntheticProblem,
    TrainingConfig,
    brute_force_grid,
    default_savgol_grid,
    elbow_gamma,
    gamma_sweep,
    generate,
    heuristic_training_sweep,
    lower_envelope,
)
from .tables import atomic_write_text, format_number, read_series, write_columns, write_table

EXIT_OK, EXIT_USAGE, EXIT_IO, EXIT_NUMERIC = 0, 1, 2, 3
DEFAULT_GAMMA_GRID = "1e-4:1e3:15"

log = logging.getLogger("gammadiff")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse exits with status 2 on bad arguments; usage errors here are 1
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def parse_grid(spec):
    """Parse a gamma grid: ``start:stop:count`` (log-spaced) or a comma list."""
    spec = spec.strip()
    try:
        if ":" in spec:
            parts = spec.split(":")
            if len(parts) != 3:
                raise ValueError
            lo, hi, n = float(parts[0]), float(parts[1]), int(parts[2])
            if not (lo > 0 and hi >= lo and n >= 1) or (n == 1 and hi != lo):
                raise ValueError
            grid = np.geomspace(lo, hi, n) if n > 1 else np.array([lo])
        else:
            grid = np.array([float(v) for v in spec.split(",")])
    except ValueError:
        raise UsageError(
            f"malformed grid {spec!r}: use start:stop:count (log-spaced, start > 0) "
            "or a comma-separated list"
        ) from None
    if grid.size == 0 or not np.all(np.isfinite(grid)) or np.any(grid < 0):
        raise UsageError(f"malformed grid {spec!r}: values must be finite and nonnegative")
    return grid


def _float_list(text, name):
    try:
        vals = tuple(float(v) for v in text.split(","))
    except ValueError:
        raise UsageError(f"--{name} expects a comma-separated list of numbers") from None
    if not vals or not all(v > 0 for v in vals):
        raise UsageError(f"--{name} values must be positive")
    return vals


def _gamma_arg(text):
    if text == "auto":
        return "auto"
    try:
        g = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError("expected a number or 'auto'") from None
    if not (math.isfinite(g) and g >= 0):
        raise argparse.ArgumentTypeError("gamma must be finite and nonnegative")
    return g


def _positive(text):
    try:
        v = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError("expected a number") from None
    if not (math.isfinite(v) and v > 0):
        raise argparse.ArgumentTypeError("must be positive")
    return v


def _nonnegative(text):
    try:
        v = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError("expected a number") from None
    if not (math.isfinite(v) and v >= 0):
        raise argparse.ArgumentTypeError("must be nonnegative")
    return v


def build_parser():
    parser = _Parser(prog="gammadiff", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"gammadiff {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND", parser_class=_Parser)
    sub.required = True

    def add_input(p, required=True):
        p.add_argument("--input", required=required, help="CSV file with a header row")
        p.add_argument("--dt", type=_positive, help="time step, when the file has no time column")
        p.add_argument("--time-col", help="name of the time column (default: t or time)")
        p.add_argument("--value-col", help="name of the measurement column (default: y)")

    def add_out(p):
        p.add_argument("--out", default=".", help="output directory (default: current)")
        p.add_argument("--plot", action="store_true", help="also write SVG charts")

    def add_problem(p):
        p.add_argument("--kind", choices=KINDS, help="synthetic problem kind")
        p.add_argument("--duration", type=_positive, default=None, help="length in time units")
        p.add_argument("--noise", type=_nonnegative, default=0.05,
                       help="noise std as a fraction of the signal amplitude (default 0.05)")
        p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("spectrum", help="power spectrum, cutoff frequency and implied gamma")
    add_input(p)
    p.add_argument("--cutoff", type=_positive, help="use this cutoff instead of the estimate")
    p.add_argument("--fraction", type=float, default=0.95,
                   help="cumulative power fraction defining the cutoff (default 0.95)")
    add_out(p)

    p = sub.add_parser("diff", help="choose parameters by the loss and differentiate")
    add_input(p)
    p.add_argument("--method", choices=METHODS, default="savgol")
    p.add_argument("--gamma", type=_gamma_arg, default="auto", help="number or 'auto' (default)")
    p.add_argument("--cutoff", type=_positive, help="cutoff frequency for gamma=auto")
    p.add_argument("--seed", type=int, default=0, help="accepted for symmetry; diff is deterministic")
    add_out(p)

    p = sub.add_parser("sweep", help="gamma sweep evaluated against a known derivative")
    add_input(p, required=False)
    add_problem(p)
    p.add_argument("--truth-col", default="dxdt_true", help="true derivative column for --input")
    p.add_argument("--method", choices=METHODS, default="savgol")
    p.add_argument("--grid", default=DEFAULT_GAMMA_GRID,
                   help=f"gamma grid, start:stop:count or a,b,c (default {DEFAULT_GAMMA_GRID})")
    p.add_argument("--brute", action="store_true",
                   help="also evaluate the default ~5000-point Savitzky-Golay grid")
    add_out(p)

    p = sub.add_parser("synth", help="write a synthetic problem with its true derivative")
    p.add_argument("--kind", choices=KINDS, required=True)
    p.add_argument("--dt", type=_positive, default=0.01)
    p.add_argument("--duration", type=_positive, default=4.0)
    p.add_argument("--noise", type=_nonnegative, default=0.05,
                   help="noise std as a fraction of the signal amplitude (default 0.05)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=".")

    p = sub.add_parser("fit-gamma", help="regenerate the gamma heuristic from sinusoid sweeps")
    p.add_argument("--freqs", default="0.5,1,2,5")
    p.add_argument("--dts", default="0.001,0.01,0.1")
    p.add_argument("--noise-levels", default="0.005,0.05")
    p.add_argument("--durations", default="4,25")
    p.add_argument("--grid", default=DEFAULT_GAMMA_GRID)
    p.add_argument("--seed", type=int, default=0)
    add_out(p)
    return parser


# --------------------------------------------------------------------------
# commands


def _load(args):
    if args.dt is not None and args.time_col is not None:
        raise UsageError("give either --dt or --time-col, not both")
    return read_series(args.input, dt=args.dt, time_col=args.time_col, value_col=args.value_col)


def cmd_spectrum(args):
    series, _ = _load(args)
    spec = power_spectrum(series)
    os.makedirs(args.out, exist_ok=True)
    write_columns(os.path.join(args.out, "spectrum.csv"),
                  {"frequency": spec.frequencies, "power": spec.power})
    estimated = estimate_cutoff_frequency(spec, args.fraction)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", TimeStepWarning)
        gamma, cutoff = suggest_gamma(series, args.cutoff, args.fraction)
    for w in caught:
        print(f"warning: {w.message}", file=sys.stderr)
    if args.plot:
        chart = Chart("Power spectrum", "frequency", "power", logx=True, logy=True)
        chart.add(spec.frequencies[1:], spec.power[1:], label="power")
        chart.vlines.append((cutoff, f"cutoff {cutoff:.4g}"))
        save(chart, os.path.join(args.out, "spectrum.svg"))
    print(f"estimated cutoff: {format_number(estimated)}")
    print(f"cutoff used: {format_number(cutoff)}")
    print(f"gamma: {format_number(gamma)}")
    return EXIT_OK


def _report_lines(method, gamma, cutoff, result=None, warn=(), failure=None):
    lines = [f"method: {method}", f"gamma: {format_number(gamma)}",
             f"cutoff: {format_number(cutoff) if cutoff is not None else 'n/a'}"]
    if result is not None:
        params = params_to_dict(result.best_params)
        params.pop("method")
        lines.append("parameters: " + ", ".join(f"{k}={format_number(v)}" for k, v in params.items()))
        b = result.best_loss
        lines += [
            f"loss: {format_number(b.total)}",
            f"fidelity: {format_number(b.fidelity)}",
            f"smoothness: {format_number(b.smoothness)}",
            f"mu: {format_number(b.mu)}",
        ]
        for i, s in enumerate(result.starts):
            lines.append(
                f"start {i}: {s.initial_params} loss {format_number(s.initial_loss)} -> "
                f"{s.final_params} loss {format_number(s.final_loss)} "
                f"({s.iterations} iterations, converged={s.converged})"
            )
    for w in warn:
        lines.append(f"warning: {w}")
    if failure is not None:
        lines.append(f"failure: {failure}")
    return lines


def cmd_diff(args):
    series, _ = _load(args)
    os.makedirs(args.out, exist_ok=True)
    report = os.path.join(args.out, "report.txt")
    cutoff = None
    warn = []
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", TimeStepWarning)
        if args.gamma == "auto":
            gamma, cutoff = suggest_gamma(series, args.cutoff)
        else:
            gamma = args.gamma
            if args.cutoff is not None:
                cutoff = args.cutoff
    warn = [str(w.message) for w in caught]
    for w in warn:
        print(f"warning: {w}", file=sys.stderr)
    try:
        result = optimize_params(args.method, series, gamma)
    except OptimizationError as exc:
        lines = _report_lines(args.method, gamma, cutoff, warn=warn, failure=exc)
        lines += [f"diagnostic: {d}" for d in exc.diagnostics]
        atomic_write_text(report, "\n".join(lines) + "\n")
        raise
    est = result.estimate
    write_columns(os.path.join(args.out, "result.csv"), {
        "t": series.t, "y": series.values, "x_hat": est.x_hat, "dxdt_hat": est.dxdt_hat,
    })
    atomic_write_text(report, "\n".join(_report_lines(args.method, gamma, cutoff, result, warn)) + "\n")
    if args.plot:
        chart = Chart(f"{args.method} derivative", "t", "dx/dt")
        chart.add(series.t, est.dxdt_hat, label="dxdt_hat")
        save(chart, os.path.join(args.out, "result.svg"))
    print(f"gamma: {format_number(gamma)}")
    print(f"parameters: {result.best_params}")
    print(f"loss: {format_number(result.best_loss.total)}")
    return EXIT_OK


def _record_rows(records):
    names = sorted({k for r in records for k in params_to_dict(r.params) if k != "method"})
    header = ["gamma", "rmse", "error_correlation", "degenerate",
              "loss", "fidelity", "smoothness"] + names
    rows = []
    for r in records:
        p = params_to_dict(r.params)
        rows.append([r.gamma, r.metrics.rmse, r.metrics.error_correlation, int(r.metrics.degenerate),
                     r.loss.total, r.loss.fidelity, r.loss.smoothness]
                    + [p.get(n, float("nan")) for n in names])
    return header, rows


def _sweep_problem(args):
    if (args.kind is None) == (args.input is None):
        raise UsageError("sweep needs exactly one of --kind or --input")
    if args.kind is not None:
        config = ProblemConfig(dt=args.dt or 0.01, duration=args.duration or 10.0,
                               noise_fraction=args.noise, seed=args.seed)
        return generate(args.kind, config)
    series, columns = _load(args)
    if args.truth_col not in columns:
        raise DataFileError(f"no truth column {args.truth_col!r}", args.input)
    x_true = columns.get("x_true", np.full(len(series), np.nan))
    return SyntheticProblem(series, x_true, columns[args.truth_col], float("nan"), args.seed, "file")


def cmd_sweep(args):
    grid = parse_grid(args.grid)
    if args.brute and args.method != "savgol":
        raise UsageError("--brute is only defined for --method savgol")
    problem = _sweep_problem(args)
    os.makedirs(args.out, exist_ok=True)
    records = gamma_sweep(args.method, problem, grid)
    write_table(os.path.join(args.out, "sweep.csv"), *_record_rows(records))
    brute = []
    if args.brute:
        brute = brute_force_grid("savgol", problem, default_savgol_grid(len(problem.noisy)))
        write_table(os.path.join(args.out, "brute.csv"), *_record_rows(brute))
    if args.plot:
        chart = Chart("Error correlation vs RMSE", "error correlation", "RMSE", logy=True)
        if brute:
            chart.add([r.metrics.error_correlation for r in brute], [r.metrics.rmse for r in brute],
                      kind="scatter", label="parameter grid", color="#aaaaaa", size=1.5)
            front = lower_envelope(brute)
            chart.add([r.metrics.error_correlation for r in front], [r.metrics.rmse for r in front],
                      label="grid lower boundary", color="#444444", size=1.0)
        chart.add([r.metrics.error_correlation for r in records], [r.metrics.rmse for r in records],
                  label="gamma sweep", color="#5b2a86")
        save(chart, os.path.join(args.out, "pareto.svg"))
    print(f"records: {len(records)}")
    print(f"elbow gamma: {format_number(elbow_gamma(records))}")
    return EXIT_OK


def cmd_synth(args):
    config = ProblemConfig(dt=args.dt, duration=args.duration, noise_fraction=args.noise,
                           seed=args.seed)
    problem = generate(args.kind, config)
    os.makedirs(args.out, exist_ok=True)
    path = os.path.join(args.out, "problem.csv")
    write_columns(path, {"t": problem.t, "y": problem.noisy.values,
                         "x_true": problem.truth_x, "dxdt_true": problem.truth_dxdt})
    print(f"wrote {path} ({len(problem.noisy)} samples)")
    return EXIT_OK


def cmd_fit_gamma(args):
    config = TrainingConfig(
        freqs=_float_list(args.freqs, "freqs"),
        dts=_float_list(args.dts, "dts"),
        noise_fractions=_float_list(args.noise_levels, "noise-levels"),
        durations=_float_list(args.durations, "durations"),
        gamma_grid=tuple(parse_grid(args.grid)),
        seed=args.seed,
    )

    def progress(i, n, obs):
        log.info("case %d/%d: f=%g dt=%g noise=%g duration=%g -> gamma %g",
                 i, n, obs.freq, obs.dt, obs.noise_fraction, obs.duration, obs.gamma)

    obs = heuristic_training_sweep(config, progress)
    os.makedirs(args.out, exist_ok=True)
    write_table(os.path.join(args.out, "observations.csv"),
                ["freq", "dt", "noise_fraction", "duration", "gamma"],
                [(o.freq, o.dt, o.noise_fraction, o.duration, o.gamma) for o in obs])
    model, adj_r2 = fit_gamma_model([o.as_triple() for o in obs])
    lines = [
        f"observations: {len(obs)}",
        f"coef_log_freq: {format_number(model.coef_log_freq)}",
        f"coef_log_dt: {format_number(model.coef_log_dt)}",
        f"intercept: {format_number(model.intercept)}",
        f"adjusted_r2: {format_number(adj_r2)}",
    ]
    atomic_write_text(os.path.join(args.out, "fit.txt"), "\n".join(lines) + "\n")
    if args.plot:
        pred = [gamma_from_heuristic(o.freq, o.dt, model) for o in obs]
        chart = Chart("Elbow gamma vs fitted gamma", "fitted gamma", "elbow gamma",
                      logx=True, logy=True)
        chart.add(pred, [o.gamma for o in obs], kind="scatter", size=3.0)
        save(chart, os.path.join(args.out, "fit.svg"))
    print("\n".join(lines))
    return EXIT_OK


COMMANDS = {
    "spectrum": cmd_spectrum,
    "diff": cmd_diff,
    "sweep": cmd_sweep,
    "synth": cmd_synth,
    "fit-gamma": cmd_fit_gamma,
}


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                            format="%(message)s")
        return COMMANDS[args.command](args)
    except SystemExit as exc:  # --help and --version
        return exc.code if isinstance(exc.code, int) else EXIT_OK
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DataFileError, OSError) as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (NoSignalError, OptimizationError, ConvergenceError, FitError) as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except InvalidInputError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
