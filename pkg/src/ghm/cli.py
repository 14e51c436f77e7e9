"""Command-line entry point: ``ghm <command> [options]``.

Exit codes: 0 on success, 2 for bad input, 3 when a numerical routine fails.
Every output file is a deterministic function of the inputs and ``--seed``.
Use ``-`` as an output path to write to standard output.
"""

from __future__ import annotations

import argparse
import sys
import warnings

import numpy as np

from ghm.errors import EmptyCubeError, GHMError, InputError, NumericalError, OutOfRegionError
from ghm.estimator.fit import FitOptions, fit, predict_many
from ghm.estimator.io import (
    read_config,
    read_dataset,
    read_fit,
    read_table,
    write_dataset,
    write_fit,
    write_json,
    write_rows,
)
from ghm.estimator.model import ModelConfig, index_values
from ghm.inference.bootstrap import BootstrapConfig, bootstrap_theta
from ghm.inference.multipliers import KERNELS
from ghm.sim.demo import KINDS, demo_grid
from ghm.sim.design import SPARSE_CUBE_FACTOR, SimDesign, simulate
from ghm.sim.forecast import rolling_forecast
from ghm.sim.study import run_study, write_records, write_summary

EXIT_OK, EXIT_INPUT, EXIT_NUMERICAL = 0, 2, 3


def _ell(text: str) -> int | None:
    if text == "auto":
        return None
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError("ell must be 'auto' or a positive integer") from None
    if value < 1:
        raise argparse.ArgumentTypeError("ell must be 'auto' or a positive integer")
    return value


def _seed(text: str) -> int:
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError("seed must be a non-negative integer") from None
    if not 0 <= value < 2**64:
        raise argparse.ArgumentTypeError("seed must lie in [0, 2^64)")
    return value


def _add_design(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("design")
    g.add_argument("--T", type=int, default=1000, help="sample size")
    g.add_argument("--r", type=int, default=2, help="number of index blocks")
    g.add_argument("--m", type=int, default=5, help="product network depth parameter")
    g.add_argument("--rho-eps", type=float, default=0.2, help="AR(1) coefficient of the error")
    g.add_argument("--noise-sd", type=float, default=0.2,
                   help="stationary sd of the error (calibration; default 0.2)")
    g.add_argument("--a", type=float, default=0.9, help="half-width of the region")
    g.add_argument("--vartheta", type=int, default=2, help="local polynomial degree")
    g.add_argument("--M", type=int, default=None, help="cubes per axis (default from T)")
    g.add_argument("--activation", default="relu", help="relu or smoothed(s)")
    g.add_argument("--min-obs-per-coef", type=float, default=SPARSE_CUBE_FACTOR,
                   help="sparse cubes drop to lower degrees below this many rows per coefficient")


def _design(args, **extra) -> SimDesign:
    return SimDesign(r=args.r, T=args.T, m=args.m, rho_eps=args.rho_eps, a=args.a,
                     vartheta=args.vartheta, seed=args.seed, activation=args.activation,
                     noise_sd=args.noise_sd, M=args.M, min_obs_per_coef=args.min_obs_per_coef,
                     **extra)


def _add_fit_options(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("search")
    g.add_argument("--starts", type=int, default=8, help="number of search starts")
    g.add_argument("--grid-deg", type=float, default=None,
                   help="exhaustive angle grid with this spacing in degrees instead of a search")


def _fit_options(args) -> FitOptions:
    return FitOptions(n_starts=args.starts, seed=args.seed % 2**32,
                      theta_grid_deg=args.grid_deg, warn=False)


def _add_bootstrap(p: argparse.ArgumentParser, reps_default: int) -> None:
    g = p.add_argument_group("bootstrap")
    g.add_argument("--reps", type=int, default=reps_default, help="bootstrap replications R")
    g.add_argument("--level", type=float, default=0.95, help="confidence level")
    g.add_argument("--kernel", default="bartlett", choices=sorted(KERNELS))
    g.add_argument("--ell", type=_ell, default=None, metavar="auto|INT",
                   help="multiplier block length (default auto)")
    g.add_argument("--mean", default="smoothed", choices=("smoothed", "fitted"),
                   help="regression mean the multipliers perturb")


def _bootstrap_config(args, seed: int) -> BootstrapConfig:
    return BootstrapConfig(R=args.reps, kernel=args.kernel, ell=args.ell, level=args.level,
                           seed=seed, mean=args.mean)


def _load_config(args, data) -> ModelConfig:
    if args.config:
        config = read_config(args.config)
        if config.block_dims != data.block_dims:
            raise InputError(f"config blocks {config.block_dims} differ from data {data.block_dims}")
        return config
    return ModelConfig(data.block_dims, min_obs_per_coef=SPARSE_CUBE_FACTOR)


def _fit_quietly(data, config, opts):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        return fit(data, config, opts)


def cmd_simulate(args) -> None:
    design = _design(args)
    write_dataset(args.out, simulate(design, np.random.default_rng(args.seed)))


def cmd_fit(args) -> None:
    data = read_dataset(args.data)
    write_fit(args.out, _fit_quietly(data, _load_config(args, data), _fit_options(args)))


def _points(path, fit_) -> tuple[list[str], np.ndarray, np.ndarray]:
    """Index points from a CSV with ``x1..xr`` columns or dataset-style ``z`` columns."""
    header, body = read_table(path)
    r = fit_.config.r
    if header == [f"x{j + 1}" for j in range(r)]:
        return header, body, body
    zcols = [h for h in header if h.startswith("z")]
    if len(zcols) != fit_.config.d:
        raise InputError(f"points need columns x1..x{r} or {fit_.config.d} z columns")
    z = body[:, [header.index(h) for h in zcols]]
    return zcols, z, index_values(z, fit_.theta)


def cmd_predict(args) -> None:
    fit_ = read_fit(args.fit)
    names, raw, x = _points(args.points, fit_)
    vals, status = predict_many(fit_, x)
    header = names + ["value", "status"]
    der = None
    if args.delta:
        delta = tuple(int(v) for v in args.delta.split(","))
        if len(delta) != fit_.config.r or any(v not in (0, 1) for v in delta):
            raise InputError(f"delta needs {fit_.config.r} entries in {{0, 1}}")
        der, _ = predict_many(fit_, x, delta)
        header.append("marginal")
    rows = []
    for k in range(raw.shape[0]):
        row = [float(v) for v in raw[k]] + [float(vals[k]), int(status[k])]
        if der is not None:
            row.append(float(der[k]))
        rows.append(row)
    write_rows(args.out, header, rows)


def cmd_bootstrap(args) -> None:
    data = read_dataset(args.data)
    if args.fit:
        fit_ = read_fit(args.fit)
        if fit_.config.block_dims != data.block_dims:
            raise InputError("fit and data disagree in block dimensions")
    else:
        fit_ = _fit_quietly(data, _load_config(args, data), _fit_options(args))
    result = bootstrap_theta(data, fit_, _bootstrap_config(args, args.seed))
    write_json(args.out, result.to_dict(include_draws=args.draws))


def cmd_study(args) -> None:
    design = _design(args, J=args.J, L=args.L)
    bcfg = _bootstrap_config(args, args.seed) if args.reps > 0 else None
    fopts = FitOptions(n_starts=args.starts, seed=args.seed % 2**32, warn=False)
    report = run_study(design, fopts, bcfg, workers=args.workers)
    write_summary(args.summary, report)
    if args.records:
        write_records(args.records, report)


def cmd_approx_demo(args) -> None:
    header, rows = demo_grid(args.kind, args.m, n=args.n, power=args.power,
                             ypower=args.ypower, s=args.s, activation=args.activation)
    write_rows(args.out, header, ([float(v) for v in row] for row in rows))


def cmd_rolling(args) -> None:
    data = read_dataset(args.data)
    report = rolling_forecast(data, _load_config(args, data), args.window, step=args.step,
                              lag=args.lag, opts=_fit_options(args))
    doc = report.to_dict()
    doc.update({"window": args.window, "step": args.step, "lag": args.lag})
    write_json(args.out, doc)
    if args.forecasts:
        rows = ([int(t), float(y), float(yh), int(f)]
                for t, y, yh, f in zip(report.rows, report.y, report.y_hat, report.flags))
        write_rows(args.forecasts, ["row", "y", "y_hat", "flag"], rows)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ghm", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def command(name, func, help_):
        p = sub.add_parser(name, help=help_, description=help_)
        p.set_defaults(func=func)
        p.add_argument("--seed", type=_seed, default=0, help="random seed")
        return p

    p = command("simulate", cmd_simulate, "draw one dataset from the Monte Carlo design")
    _add_design(p)
    p.add_argument("--out", required=True, help="dataset CSV")

    p = command("fit", cmd_fit, "estimate the index directions and the sieve surface")
    p.add_argument("--data", required=True, help="dataset CSV (y, z1_1, ...)")
    p.add_argument("--config", help="model config JSON (default: block dims of the data with"
                   " the sparse-cube degree fallback)")
    _add_fit_options(p)
    p.add_argument("--out", required=True, help="fit JSON")

    p = command("predict", cmd_predict, "evaluate a stored fit at new points")
    p.add_argument("--fit", required=True, help="fit JSON")
    p.add_argument("--points", required=True, help="CSV with x1..xr or z columns")
    p.add_argument("--delta", help="also report the mixed partial, e.g. 1,0")
    p.add_argument("--out", required=True, help="values CSV")

    p = command("bootstrap", cmd_bootstrap, "multiplier bootstrap intervals for the directions")
    p.add_argument("--data", required=True, help="dataset CSV")
    p.add_argument("--fit", help="fit JSON (fitted from --config if absent)")
    p.add_argument("--config", help="model config JSON")
    _add_fit_options(p)
    _add_bootstrap(p, 100)
    p.add_argument("--draws", action="store_true", help="include the draw matrix")
    p.add_argument("--out", required=True, help="interval JSON")

    p = command("study", cmd_study, "Monte Carlo study: summary JSON and per-replication CSV")
    _add_design(p)
    p.add_argument("--J", type=int, default=100, help="replications")
    p.add_argument("--L", type=int, default=20, help="evaluation grid intervals")
    p.add_argument("--starts", type=int, default=8, help="search starts per fit")
    p.add_argument("--workers", type=int, default=None, help="worker processes (or GHM_THREADS)")
    _add_bootstrap(p, 100)
    p.add_argument("--summary", required=True, help="summary JSON")
    p.add_argument("--records", help="per-replication CSV")

    p = command("approx-demo", cmd_approx_demo, "error-surface grids of the exact networks")
    p.add_argument("--kind", default="product", choices=KINDS)
    p.add_argument("--m", type=int, default=3)
    p.add_argument("--n", type=int, default=101, help="grid points per axis")
    p.add_argument("--power", type=int, default=1)
    p.add_argument("--ypower", type=int, default=1)
    p.add_argument("--s", type=int, default=16, help="smoothing parameter for --kind smoothed")
    p.add_argument("--activation", default="relu")
    p.add_argument("--out", required=True, help="grid CSV")

    p = command("rolling", cmd_rolling, "rolling-window one-step forecasts")
    p.add_argument("--data", required=True, help="dataset CSV")
    p.add_argument("--config", help="model config JSON")
    p.add_argument("--window", type=int, required=True)
    p.add_argument("--step", type=int, default=1)
    p.add_argument("--lag", type=int, default=0, help="pair y_t with z_(t-lag)")
    _add_fit_options(p)
    p.add_argument("--out", required=True, help="report JSON")
    p.add_argument("--forecasts", help="per-row forecast CSV")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        args.func(args)
    except (InputError, OutOfRegionError, EmptyCubeError) as exc:
        print(f"ghm: error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (NumericalError, GHMError, np.linalg.LinAlgError, FloatingPointError) as exc:
        print(f"ghm: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
