"""CSV and JSON formats for datasets, configurations and fits.

Floats are written with 17 significant digits so that files round-trip
bit for bit; lines end with ``\\n`` on every platform.
"""

from __future__ import annotations

import csv
import io
import json
import sys
from pathlib import Path

import numpy as np

from ghm.errors import InputError
from ghm.estimator.fit import HierarchicalFit
from ghm.estimator.model import Dataset, ModelConfig, ThetaParam


def fmt(v: float) -> str:
    return format(float(v), ".17g")


def z_columns(block_dims) -> list[str]:
    return [f"z{j + 1}_{k + 1}" for j, d in enumerate(block_dims) for k in range(d)]


def write_rows(path, header, rows) -> None:
    """Write a CSV table; floats get 17 significant digits."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([fmt(v) if isinstance(v, (float, np.floating)) else v for v in row])
    _write_text(path, buf.getvalue())


def _write_text(path, text: str) -> None:
    if str(path) == "-":
        sys.stdout.write(text)
        sys.stdout.flush()
        return
    try:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            fh.write(text)
    except OSError as exc:
        raise InputError(f"cannot write {path}: {exc}") from exc


def write_json(path, doc) -> None:
    _write_text(path, json.dumps(doc, indent=2, sort_keys=True) + "\n")


def read_json(path) -> dict:
    try:
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise InputError(f"cannot read JSON from {path}: {exc}") from exc


def read_table(path) -> tuple[list[str], np.ndarray]:
    """Header and float matrix of a CSV file with a header row."""
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            rows = list(csv.reader(fh))
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc}") from exc
    rows = [r for r in rows if r]
    if not rows:
        raise InputError(f"{path} is empty")
    header = [h.strip() for h in rows[0]]
    try:
        body = np.array([[float(v) for v in r] for r in rows[1:]], dtype=np.float64)
    except ValueError as exc:
        raise InputError(f"{path}: non-numeric entry ({exc})") from exc
    if body.size and body.shape[1] != len(header):
        raise InputError(f"{path}: rows and header disagree in width")
    return header, body.reshape(-1, len(header))


def write_dataset(path, data: Dataset) -> None:
    header = ["y"] + z_columns(data.block_dims)
    rows = ([float(y)] + [float(v) for v in z] for y, z in zip(data.y, data.z))
    write_rows(path, header, rows)


def block_dims_from_header(header) -> tuple[int, ...]:
    """Recover ``(d_1, ..., d_r)`` from ``z{j}_{k}`` column names."""
    if not header or header[0] != "y":
        raise InputError("first column must be 'y'")
    dims: list[int] = []
    for name in header[1:]:
        try:
            j, k = name[1:].split("_")
            j, k = int(j), int(k)
        except ValueError:
            raise InputError(f"column {name!r} is not of the form z<block>_<index>") from None
        if not name.startswith("z"):
            raise InputError(f"column {name!r} is not of the form z<block>_<index>")
        if j == len(dims) + 1 and k == 1:
            dims.append(1)
        elif dims and j == len(dims) and k == dims[-1] + 1:
            dims[-1] += 1
        else:
            raise InputError(f"column {name!r} is out of block order")
    if not dims:
        raise InputError("no regressor columns")
    return tuple(dims)


def read_dataset(path, block_dims=None) -> Dataset:
    header, body = read_table(path)
    dims = block_dims_from_header(header)
    if block_dims is not None and tuple(block_dims) != dims:
        raise InputError(f"CSV blocks {dims} differ from config {tuple(block_dims)}")
    return Dataset(body[:, 0], body[:, 1:], dims, tuple(header))


def read_config(path) -> ModelConfig:
    return ModelConfig.from_dict(read_json(path))


def fit_to_dict(fit_: HierarchicalFit) -> dict:
    part = fit_.config.partition()
    betas = {
        ",".join(str(i) for i in part.unravel(k)): [float(v) for v in fit_.coef[k]]
        for k in np.flatnonzero(fit_.occupancy)
    }
    occupancy = {
        ",".join(str(i) for i in part.unravel(k)): int(fit_.occupancy[k])
        for k in np.flatnonzero(fit_.occupancy)
    }
    return {
        "config": fit_.config.to_dict(),
        "theta": fit_.theta.to_list(),
        "betas": betas,
        "occupancy": occupancy,
        "thin_cubes": [",".join(str(i) for i in part.unravel(k)) for k in np.flatnonzero(fit_.thin)],
        "loss": fit_.loss,
        "n_in": fit_.n_in,
        "sigma2": None if np.isnan(fit_.sigma2) else fit_.sigma2,
        "trace": list(fit_.trace),
        "converged": fit_.converged,
        "degenerate": fit_.degenerate,
        "n_evals": fit_.n_evals,
        "notes": list(fit_.notes),
    }


def fit_from_dict(doc: dict) -> HierarchicalFit:
    try:
        config = ModelConfig.from_dict(doc["config"])
        if config.M is None:
            raise InputError("stored fit has no resolved M")
        theta = ThetaParam(tuple(np.asarray(b, dtype=np.float64) for b in doc["theta"]))
        part = config.partition()
        p = config.spec.size
        coef = np.full((part.n_cubes, p), np.nan)
        occ = np.zeros(part.n_cubes, dtype=np.int64)
        thin = np.zeros(part.n_cubes, dtype=bool)
        for key, beta in doc["betas"].items():
            idx = _parse_key(key, config.r, config.M)
            k = part.linear(np.array([idx]))[0]
            beta = np.asarray(beta, dtype=np.float64)
            if beta.shape != (p,) or not np.all(np.isfinite(beta)):
                raise InputError(f"cube {key}: need {p} finite coefficients")
            coef[k] = beta
            occ[k] = int(doc.get("occupancy", {}).get(key, 1))
        for key in doc.get("thin_cubes", []):
            thin[part.linear(np.array([_parse_key(key, config.r, config.M)]))[0]] = True
        sigma2 = doc.get("sigma2")
        return HierarchicalFit(
            theta=theta, coef=coef, occupancy=occ, thin=thin, loss=float(doc["loss"]),
            n_in=int(doc["n_in"]), sigma2=float("nan") if sigma2 is None else float(sigma2),
            config=config, trace=tuple(doc.get("trace", ())),
            converged=bool(doc.get("converged", True)),
            degenerate=bool(doc.get("degenerate", False)),
            n_evals=int(doc.get("n_evals", 0)), notes=tuple(doc.get("notes", ())),
        )
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, InputError):
            raise
        raise InputError(f"malformed fit document: {exc}") from exc


def _parse_key(key: str, r: int, M: int) -> tuple[int, ...]:
    idx = tuple(int(v) for v in key.split(","))
    if len(idx) != r or any(not 0 <= i < M for i in idx):
        raise InputError(f"cube key {key!r} is not a valid index for r={r}, M={M}")
    return idx


def write_fit(path, fit_: HierarchicalFit) -> None:
    write_json(path, fit_to_dict(fit_))


def read_fit(path) -> HierarchicalFit:
    return fit_from_dict(read_json(Path(path)))
