"""Monte Carlo harness: replicate simulate, fit and bootstrap, then aggregate.

Every replication draws from its own stream ``SeedSequence([seed, j])``,
so results do not depend on how replications are scheduled.  The summary
is computed only from the columns written to the per-replication table,
which keeps the two files consistent.
"""

from __future__ import annotations

import math
import time
import warnings
from dataclasses import dataclass, field, replace
from functools import partial

import numpy as np

from ghm.errors import GHMError, NumericalError
from ghm.estimator.fit import FitOptions, fit, predict_many
from ghm.estimator.io import read_table, write_json, write_rows
from ghm.inference.bootstrap import BootstrapConfig, bootstrap_theta
from ghm.parallel import run_indexed, worker_count
from ghm.sim.design import SimDesign, eval_grid, simulate, true_f, true_theta

MAX_FAILURE_SHARE = 0.2


@dataclass(frozen=True, eq=False)
class MetricsReport:
    """Aggregate accuracy and coverage measures plus per-replication columns."""

    rmse_theta: float
    rmse_f: float
    cr_theta: float
    cr_theta_percentile: float
    bias_theta: float
    std_theta: float
    bias_f: float
    std_f: float
    n_ok: int
    n_failed: int
    f_missing: int
    records: dict = field(repr=False)
    design: SimDesign | None = None
    seconds: float = math.nan

    def summary(self) -> dict:
        keys = ("rmse_theta", "rmse_f", "cr_theta", "cr_theta_percentile", "bias_theta",
                "std_theta", "bias_f", "std_f", "n_ok", "n_failed", "f_missing")
        doc = {k: _json_num(getattr(self, k)) for k in keys}
        if self.design is not None:
            doc["design"] = self.design.to_dict()
        return doc


def _json_num(v):
    if isinstance(v, (int, np.integer)):
        return int(v)
    v = float(v)
    return None if math.isnan(v) else v


def _grid_truth(design: SimDesign):
    grid = eval_grid(design.a, design.r, design.L)
    return grid, true_f(grid, design.r)


def _replicate(j: int, *, design: SimDesign, fopts: FitOptions, bcfg: BootstrapConfig | None):
    ss = np.random.SeedSequence([design.seed, j])
    data_ss, boot_ss = ss.spawn(2)
    rng = np.random.default_rng(data_ss)
    data = simulate(design, rng)
    grid, _ = _grid_truth(design)
    d = data.z.shape[1]
    out = {"theta": np.full(d, np.nan), "fhat": np.full(grid.shape[0], np.nan),
           "lo": np.full(d, np.nan), "hi": np.full(d, np.nan),
           "plo": np.full(d, np.nan), "phi": np.full(d, np.nan),
           "loss": np.nan, "converged": 0, "n_evals": 0, "boot_failures": 0, "error": ""}
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            res = fit(data, design.model_config(), replace(fopts, seed=fopts.seed + j))
        out["theta"] = res.theta.flat
        out["loss"] = res.loss
        out["converged"] = int(res.converged)
        out["n_evals"] = res.n_evals
        vals, _ = predict_many(res, grid)
        out["fhat"] = vals
        if bcfg is not None:
            seed = int(boot_ss.generate_state(1)[0])
            boot = bootstrap_theta(data, res, replace(bcfg, seed=seed, workers=1))
            out["lo"], out["hi"] = boot.ci[:, 0], boot.ci[:, 1]
            out["plo"], out["phi"] = boot.ci_percentile[:, 0], boot.ci_percentile[:, 1]
            out["boot_failures"] = len(boot.failures)
    except (GHMError, np.linalg.LinAlgError) as exc:
        out["error"] = f"{type(exc).__name__}: {exc}"
    return out


def _columns(d: int, n_grid: int) -> list[str]:
    cols = ["rep", "ok", "loss", "converged", "n_evals", "boot_failures"]
    cols += [f"theta_{s + 1}" for s in range(d)]
    cols += [f"fhat_{l}" for l in range(n_grid)]
    for name in ("ci_lo", "ci_hi", "pci_lo", "pci_hi"):
        cols += [f"{name}_{s + 1}" for s in range(d)]
    return cols


def _records(results: list[dict], d: int, n_grid: int) -> dict:
    J = len(results)
    rec = {
        "rep": np.arange(J),
        "ok": np.array([int(not r["error"]) for r in results]),
        "loss": np.array([r["loss"] for r in results], dtype=np.float64),
        "converged": np.array([r["converged"] for r in results]),
        "n_evals": np.array([r["n_evals"] for r in results]),
        "boot_failures": np.array([r["boot_failures"] for r in results]),
        "theta": np.array([r["theta"] for r in results]).reshape(J, d),
        "fhat": np.array([r["fhat"] for r in results]).reshape(J, n_grid),
        "ci_lo": np.array([r["lo"] for r in results]).reshape(J, d),
        "ci_hi": np.array([r["hi"] for r in results]).reshape(J, d),
        "pci_lo": np.array([r["plo"] for r in results]).reshape(J, d),
        "pci_hi": np.array([r["phi"] for r in results]).reshape(J, d),
        "errors": [r["error"] for r in results],
    }
    return rec


def compute_metrics(records: dict, theta_star: np.ndarray, f_star: np.ndarray, r: int) -> dict:
    """Aggregate measures from per-replication arrays; failed replications are skipped.

    Grid points where a fit could not be evaluated (NaN) are left out of
    the surface measures and counted in ``f_missing``.
    """
    ok = records["ok"].astype(bool)
    th = records["theta"][ok]
    fh = records["fhat"][ok]
    out = {"n_ok": int(ok.sum()), "n_failed": int((~ok).sum())}
    if th.shape[0] == 0:
        nan = math.nan
        out.update(rmse_theta=nan, rmse_f=nan, cr_theta=nan, cr_theta_percentile=nan,
                   bias_theta=nan, std_theta=nan, bias_f=nan, std_f=nan, f_missing=0)
        return out
    dist = np.linalg.norm(th - theta_star[None, :], axis=1)
    out["rmse_theta"] = float(np.sqrt(np.mean(dist**2)))
    out["bias_theta"] = float(np.mean(dist) / r)
    spread = np.linalg.norm(th - th.mean(axis=0)[None, :], axis=1)
    out["std_theta"] = float(np.sqrt(np.mean(spread) / r))

    avail = ~np.isnan(fh)
    out["f_missing"] = int((~avail).sum())
    err = (fh - f_star[None, :])[avail]
    out["rmse_f"] = float(np.sqrt(np.mean(err**2))) if err.size else math.nan
    out["bias_f"] = float(np.mean(np.abs(err))) if err.size else math.nan
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        fbar = np.nanmean(fh, axis=0)
    dev = np.abs(fh - fbar[None, :])[avail]
    out["std_f"] = float(np.sqrt(np.mean(dev))) if dev.size else math.nan

    for key, lo, hi in (("cr_theta", "ci_lo", "ci_hi"), ("cr_theta_percentile", "pci_lo", "pci_hi")):
        lo_, hi_ = records[lo][ok], records[hi][ok]
        if np.all(np.isnan(lo_)):
            out[key] = math.nan
            continue
        covered = (lo_ <= theta_star[None, :]) & (theta_star[None, :] <= hi_)
        out[key] = float(np.mean(covered))
    return out


def run_study(design: SimDesign, fopts: FitOptions | None = None,
              bcfg: BootstrapConfig | None = None, workers: int | None = None) -> MetricsReport:
    """``J`` replications of simulate, fit and (if ``bcfg`` is given) bootstrap.

    Raises :class:`NumericalError` if more than 20% of the replications fail.
    """
    fopts = fopts or FitOptions(warn=False)
    grid, f_star = _grid_truth(design)
    theta_star = true_theta(design.r, design.block_dim).flat
    task = partial(_replicate, design=design, fopts=fopts, bcfg=bcfg)
    t0 = time.perf_counter()
    results = run_indexed(task, design.J, worker_count(workers))
    seconds = time.perf_counter() - t0
    records = _records(results, theta_star.size, grid.shape[0])
    n_failed = int((records["ok"] == 0).sum())
    if n_failed > MAX_FAILURE_SHARE * design.J:
        first = next(e for e in records["errors"] if e)
        raise NumericalError(f"{n_failed} of {design.J} replications failed; first: {first}")
    m = compute_metrics(records, theta_star, f_star, design.r)
    return MetricsReport(records=records, design=design, seconds=seconds, **m)


def write_records(path, report: MetricsReport) -> None:
    rec = report.records
    J, d = rec["theta"].shape
    n_grid = rec["fhat"].shape[1]
    rows = []
    for j in range(J):
        row = [int(rec["rep"][j]), int(rec["ok"][j]), float(rec["loss"][j]),
               int(rec["converged"][j]), int(rec["n_evals"][j]), int(rec["boot_failures"][j])]
        row += [float(v) for v in rec["theta"][j]]
        row += [float(v) for v in rec["fhat"][j]]
        for key in ("ci_lo", "ci_hi", "pci_lo", "pci_hi"):
            row += [float(v) for v in rec[key][j]]
        rows.append(row)
    write_rows(path, _columns(d, n_grid), rows)


def read_records(path) -> dict:
    """Inverse of :func:`write_records` (numeric columns only)."""
    header, body = read_table(path)
    col = {h: body[:, k] for k, h in enumerate(header)}

    def block(prefix):
        names = [h for h in header if h.startswith(prefix) and h[len(prefix):].isdigit()]
        return np.column_stack([col[n] for n in names]) if names else np.empty((body.shape[0], 0))

    return {
        "rep": col["rep"].astype(np.int64),
        "ok": col["ok"].astype(np.int64),
        "loss": col["loss"],
        "converged": col["converged"].astype(np.int64),
        "n_evals": col["n_evals"].astype(np.int64),
        "boot_failures": col["boot_failures"].astype(np.int64),
        "theta": block("theta_"),
        "fhat": block("fhat_"),
        "ci_lo": block("ci_lo_"),
        "ci_hi": block("ci_hi_"),
        "pci_lo": block("pci_lo_"),
        "pci_hi": block("pci_hi_"),
    }


def metrics_from_files(records_path, design: SimDesign) -> dict:
    grid, f_star = _grid_truth(design)
    theta_star = true_theta(design.r, design.block_dim).flat
    return compute_metrics(read_records(records_path), theta_star, f_star, design.r)


def write_summary(path, report: MetricsReport) -> None:
    write_json(path, report.summary())
