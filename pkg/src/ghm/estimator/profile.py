"""Per-cube least squares for a fixed index direction.

For fixed ``theta`` the fitted surface is linear in the coefficients, so
the inner problem splits into one small regression per occupied cube.
All cubes are solved together: rows are sorted by cube, normal equations
are accumulated with ``np.add.reduceat`` and solved as one batch.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from ghm.errors import EmptyCubeError, InputError, NumericalError, OutOfRegionError
from ghm.estimator.model import Dataset, ModelConfig, ThetaParam, index_values
from ghm.relu_nets.basis import marginal_coefficients, net_monomials
from ghm.relu_nets.hdnn import max_offset

RIDGE = 1e-8


@dataclass(frozen=True, eq=False)
class Design:
    """Network regressors of the in-region rows for one ``theta``."""

    rows: np.ndarray  # positions of in-region observations
    cube: np.ndarray  # linear cube id per in-region row
    basis: np.ndarray  # (n_in, p), already divided by the H scaling


def scaled_offsets(x: np.ndarray, idx: np.ndarray, config: ModelConfig) -> np.ndarray:
    """``rho * (x - corner)`` clipped to the network domain; shape ``(r, n)``."""
    h = config.h
    off = np.clip(x - (-config.a + idx * h), 0.0, h) * config.rescale
    return np.minimum(off, max_offset(config.r, config.m)).T


def h_scaling(config: ModelConfig) -> np.ndarray:
    """Diagonal of ``H``: ``(rho h)^|alpha_j|`` for each basis entry."""
    return _h_scaling(config.h * config.rescale, config.spec.degrees.tobytes())


@lru_cache(maxsize=256)
def _h_scaling(side: float, degrees: bytes) -> np.ndarray:
    out = side ** np.frombuffer(degrees, dtype=np.int64).astype(np.float64)
    out.setflags(write=False)
    return out


def design(x: np.ndarray, config: ModelConfig, exps=None, coef=None) -> Design:
    """Regressors for index points ``x`` of shape ``(n, r)``.

    ``exps``/``coef`` override the power list (used for marginal effects).
    The returned basis is divided by the ``H`` scaling of the full power list.
    """
    part = config.partition()
    idx, inside = part.locate(x)
    rows = np.flatnonzero(inside)
    idx = idx[rows]
    spec = config.spec
    exps = spec.exponents if exps is None else exps
    u = scaled_offsets(x[rows], idx, config)
    b = net_monomials(u, exps, config.m, config.act)
    if coef is not None:
        b = b * coef[None, :]
    return Design(rows, part.linear(idx), b / h_scaling(config)[None, :])


@lru_cache(maxsize=16)
def _upper(p: int):
    return np.triu_indices(p)


def _group(cube: np.ndarray):
    order = np.argsort(cube, kind="stable")
    srt = cube[order]
    starts = np.flatnonzero(np.r_[True, srt[1:] != srt[:-1]])
    counts = np.diff(np.r_[starts, srt.size])
    return order, srt[starts], starts, counts


def cube_degrees(counts: np.ndarray, degrees: np.ndarray, factor: float) -> np.ndarray:
    """Highest degree whose basis has at most ``count / factor`` entries (0 if none)."""
    top = int(degrees.max())
    if factor <= 0:
        return np.full(counts.shape, top)
    sizes = np.array([np.count_nonzero(degrees <= k) for k in range(top + 1)])
    ok = counts[:, None] >= factor * sizes[None, :]
    return np.where(ok.any(axis=1), top - np.argmax(ok[:, ::-1], axis=1), 0)


def solve_cubes(des: Design, y: np.ndarray, n_cubes: int, degrees=None, factor: float = 0.0):
    """Least-squares coefficients per occupied cube.

    Returns ``(coef, occupancy, thin)`` where ``coef`` is ``(n_cubes, p)``
    in ``H``-scaled units with NaN rows for empty cubes, and ``thin`` flags
    cubes with fewer rows than coefficients (solved with a tiny ridge).
    With ``factor > 0`` sparse cubes drop their higher-degree columns (see
    :func:`cube_degrees`); dropped coefficients are exactly zero.
    """
    n, p = des.basis.shape
    if n == 0:
        raise InputError("no observations fall inside the partitioned region")
    order, ids, starts, counts = _group(des.cube)
    B = des.basis[order]
    yy = y[order]
    iu, ju = _upper(p)
    # upper triangle of B'B and B'y accumulated in one pass
    rows = np.concatenate([B[:, iu] * B[:, ju], B * yy[:, None]], axis=1)
    sums = np.add.reduceat(rows, starts, axis=0)
    G = np.empty((ids.size, p, p))
    G[:, iu, ju] = sums[:, : iu.size]
    G[:, ju, iu] = sums[:, : iu.size]
    c = sums[:, iu.size:]
    if degrees is None or factor <= 0:
        active = None
        thin = counts < p
    else:
        active = degrees[None, :] <= cube_degrees(counts, degrees, factor)[:, None]
        drop = ~active
        G[drop[:, :, None] | drop[:, None, :]] = 0.0
        G[:, np.arange(p), np.arange(p)] += drop
        c[drop] = 0.0
        thin = counts < active.sum(axis=1)
    G[thin] += RIDGE * np.eye(p)
    try:
        beta = np.linalg.solve(G, c[:, :, None])[:, :, 0]
    except np.linalg.LinAlgError:
        beta = _solve_one_by_one(B, yy, starts, counts, p, active)
    if not np.all(np.isfinite(beta)):
        beta = _solve_one_by_one(B, yy, starts, counts, p, active)
    coef = np.full((n_cubes, p), np.nan)
    coef[ids] = beta
    occ = np.zeros(n_cubes, dtype=np.int64)
    occ[ids] = counts
    thin_all = np.zeros(n_cubes, dtype=bool)
    thin_all[ids] = thin
    return coef, occ, thin_all


def _solve_one_by_one(B, yy, starts, counts, p, active=None):
    out = np.zeros((starts.size, p))
    for k, (s, c) in enumerate(zip(starts, counts)):
        cols = np.ones(p, dtype=bool) if active is None else active[k]
        q = int(cols.sum())
        Xk = B[s:s + c][:, cols]
        if c < q:
            Xk = np.vstack([Xk, np.sqrt(RIDGE) * np.eye(q)])
            yk = np.concatenate([yy[s:s + c], np.zeros(q)])
        else:
            yk = yy[s:s + c]
        sol, *_ = np.linalg.lstsq(Xk, yk, rcond=None)
        out[k, cols] = sol
    if not np.all(np.isfinite(out)):
        raise NumericalError("per-cube least squares produced non-finite coefficients")
    return out


def fitted_from(des: Design, coef: np.ndarray) -> np.ndarray:
    """Fitted values of the in-region rows; NaN where the cube has no coefficients."""
    return np.einsum("ij,ij->i", des.basis, coef[des.cube])


@dataclass(frozen=True, eq=False)
class Profile:
    """Result of profiling out the coefficients at one ``theta``."""

    theta: ThetaParam
    coef: np.ndarray  # (n_cubes, p), H-scaled units
    occupancy: np.ndarray
    thin: np.ndarray
    rows: np.ndarray
    resid: np.ndarray  # residuals of in-region rows

    @property
    def n_in(self) -> int:
        return self.rows.size

    @property
    def loss(self) -> float:
        return float(np.mean(self.resid**2))


def profile(data: Dataset, theta: ThetaParam, config: ModelConfig,
            sparse_fallback: bool = False) -> Profile:
    """Per-cube least squares at ``theta``.

    The full degree is used in every cube unless ``sparse_fallback`` is set,
    in which case ``config.min_obs_per_coef`` lowers it in sparse cubes.
    """
    x = index_values(data.z, theta)
    des = design(x, config)
    factor = config.min_obs_per_coef if sparse_fallback else 0.0
    coef, occ, thin = solve_cubes(des, data.y[des.rows], config.partition().n_cubes,
                                  config.spec.degrees, factor)
    resid = data.y[des.rows] - fitted_from(des, coef)
    return Profile(theta, coef, occ, thin, des.rows, resid)


def unscale(coef: np.ndarray, config: ModelConfig) -> np.ndarray:
    """Coefficients in ``H``-scaled units back to the raw basis units."""
    return coef / h_scaling(config)[None, :]


def rescale_coef(betas: np.ndarray, config: ModelConfig) -> np.ndarray:
    return betas * h_scaling(config)[None, :]


def fit_betas_given_theta(data: Dataset, theta: ThetaParam, config: ModelConfig) -> dict:
    """Least-squares coefficients of every occupied cube for fixed ``theta``.

    Returns a dict mapping the 0-based cube multi-index to its coefficient
    vector on the raw network basis (as used by :func:`piecewise_eval`).
    """
    config = config.resolved(data.T)
    prof = profile(data, theta, config, sparse_fallback=True)
    raw = unscale(prof.coef, config)
    part = config.partition()
    return {part.unravel(k): raw[k].copy() for k in np.flatnonzero(prof.occupancy)}


def betas_to_array(betas: dict, config: ModelConfig) -> np.ndarray:
    part = config.partition()
    p = config.spec.size
    out = np.full((part.n_cubes, p), np.nan)
    for key, b in betas.items():
        b = np.asarray(b, dtype=np.float64)
        if b.shape != (p,):
            raise InputError(f"cube {key}: expected {p} coefficients, got {b.shape}")
        out[part.linear(np.array([key]))[0]] = b
    return out


def evaluate_surface(x, coef_raw: np.ndarray, config: ModelConfig, delta=None):
    """Network surface (or its ``delta`` derivative) at points ``x`` ``(n, r)``.

    Returns ``(values, status)``; status is 0 for ok, 1 for out of region
    and 2 for an unfitted cube, with NaN values in the last two cases.
    """
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    exps = coef = None
    if delta is not None:
        coef, exps = marginal_coefficients(config.spec, delta)
        # chain rule through the offset rescale u = rho (x - corner)
        coef = coef * config.rescale ** int(np.sum(delta))
    des = design(x, config, exps, coef)
    # design divides by the power list's H; multiply back so raw betas apply
    vals_in = np.einsum("ij,ij->i", des.basis * h_scaling(config)[None, :], coef_raw[des.cube])
    values = np.full(x.shape[0], np.nan)
    status = np.ones(x.shape[0], dtype=np.int64)
    values[des.rows] = vals_in
    status[des.rows] = np.where(np.isnan(vals_in), 2, 0)
    return values, status


def piecewise_eval(x, betas, config: ModelConfig, delta=None) -> float:
    """Evaluate the piecewise network approximant at a single point ``x``.

    ``betas`` is a dict from cube multi-index to coefficients or an
    ``(n_cubes, p)`` array with NaN rows for empty cubes.
    """
    coef = betas_to_array(betas, config) if isinstance(betas, dict) else np.asarray(betas)
    x = np.asarray(x, dtype=np.float64).reshape(1, -1)
    vals, status = evaluate_surface(x, coef, config, delta)
    if status[0] == 1:
        raise OutOfRegionError(f"point {x[0].tolist()} lies outside [-{config.a}, {config.a}]^r")
    if status[0] == 2:
        raise EmptyCubeError(f"point {x[0].tolist()} lies in a cube without fitted coefficients")
    return float(vals[0])


def q_loss(data: Dataset, theta: ThetaParam, betas, config: ModelConfig) -> tuple[float, int]:
    """Mean squared residual over in-region observations, and their count.

    Rows falling in a cube without coefficients raise :class:`EmptyCubeError`.
    """
    config = config.resolved(data.T)
    coef = betas_to_array(betas, config) if isinstance(betas, dict) else np.asarray(betas)
    x = index_values(data.z, theta)
    vals, status = evaluate_surface(x, coef, config)
    keep = status != 1
    if not keep.any():
        raise InputError("no observations fall inside the partitioned region")
    if np.any(status == 2):
        raise EmptyCubeError("an in-region observation lies in a cube without coefficients")
    resid = data.y[keep] - vals[keep]
    return float(np.mean(resid**2)), int(keep.sum())

