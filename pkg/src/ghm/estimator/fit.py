"""Joint estimation of the index directions and the piecewise network surface.

The coefficients are profiled out exactly (per-cube least squares), which
leaves a low-dimensional, piecewise smooth objective in ``theta``.  That
objective is searched with Nelder-Mead in an angle chart of the product of
half-spheres, restarted in outer rounds until the loss stops improving.
"""

from __future__ import annotations

import itertools
import math
import warnings
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.optimize import minimize

from ghm.errors import DomainError, EmptyCubeError, InputError, OutOfRegionError
from ghm.estimator.model import Dataset, ModelConfig, ThetaParam, index_values
from ghm.estimator.profile import Profile, evaluate_surface, profile, unscale


class ConvergenceWarning(UserWarning):
    """The outer search hit its iteration cap before the loss settled."""


@dataclass(frozen=True)
class FitOptions:
    """Search settings.

    ``tol`` applies to the loss divided by the sample variance of ``y`` so
    that rescaling ``y`` leaves the search path unchanged.
    """

    n_starts: int = 8
    tol: float = 1e-8
    max_outer: int = 50
    seed: int = 0
    step: float = 0.2
    maxfev: int = 200
    screen_fev: int = 60
    xatol: float = 1e-7
    theta_start: ThetaParam | None = None
    theta_grid_deg: float | None = None
    warn: bool = True

    def __post_init__(self):
        if self.n_starts < 1:
            raise InputError("n_starts must be >= 1")
        if self.max_outer < 1:
            raise InputError("max_outer must be >= 1")
        if not self.tol >= 0:
            raise InputError("tol must be non-negative")


@dataclass(frozen=True, eq=False)
class HierarchicalFit:
    """Estimated directions, per-cube coefficients and diagnostics."""

    theta: ThetaParam
    coef: np.ndarray  # (n_cubes, p) raw-basis coefficients, NaN rows for empty cubes
    occupancy: np.ndarray
    thin: np.ndarray
    loss: float
    n_in: int
    sigma2: float
    config: ModelConfig
    trace: tuple[float, ...] = ()
    converged: bool = True
    degenerate: bool = False
    n_evals: int = 0
    notes: tuple[str, ...] = field(default=())

    @property
    def betas(self) -> dict:
        part = self.config.partition()
        return {part.unravel(k): self.coef[k].copy() for k in np.flatnonzero(self.occupancy)}

    def fitted(self, data: Dataset) -> tuple[np.ndarray, np.ndarray]:
        """Fitted values and in-region mask for every row of ``data``."""
        vals, status = evaluate_surface(index_values(data.z, self.theta), self.coef, self.config)
        return vals, status == 0


def _ols_start(data: Dataset) -> list[np.ndarray]:
    X = np.column_stack([np.ones(data.T), data.z])
    coef, *_ = np.linalg.lstsq(X, data.y, rcond=None)
    out, k = [], 1
    for d in data.block_dims:
        b = coef[k:k + d].copy()
        k += d
        if not np.any(b) or b[0] == 0.0 or not np.all(np.isfinite(b)):
            b = np.eye(d)[0]
        out.append(b)
    return out


def start_points(data: Dataset, n_starts: int, seed: int) -> list[ThetaParam]:
    """OLS block directions followed by seeded random unit vectors."""
    starts = [ThetaParam.normalized(_ols_start(data))]
    rng = np.random.default_rng(seed)
    while len(starts) < n_starts:
        blocks = [rng.standard_normal(d) for d in data.block_dims]
        try:
            starts.append(ThetaParam.normalized(blocks))
        except DomainError:
            continue
    return starts


class _Objective:
    """Profiled loss over angle vectors, remembering the best profile seen."""

    def __init__(self, data: Dataset, config: ModelConfig, scale2: float):
        self.data, self.config, self.scale2 = data, config, scale2
        self.n_evals = 0
        self.best: Profile | None = None
        self.anchors: dict[bytes, ThetaParam] = {}

    def anchor(self, theta: ThetaParam) -> np.ndarray:
        """Angles of ``theta``; evaluating them later yields ``theta`` itself, not a round trip."""
        phi = theta.to_angles()
        self.anchors[phi.tobytes()] = theta
        return phi

    def profile_at(self, theta: ThetaParam) -> Profile | None:
        self.n_evals += 1
        try:
            prof = profile(self.data, theta, self.config)
        except InputError:
            return None
        if self.best is None or prof.loss < self.best.loss:
            self.best = prof
        return prof

    def value(self, theta: ThetaParam) -> float:
        prof = self.profile_at(theta)
        return math.inf if prof is None else prof.loss / self.scale2

    def __call__(self, phi: np.ndarray) -> float:
        phi = np.asarray(phi, dtype=np.float64)
        theta = self.anchors.get(phi.tobytes())
        if theta is None:
            try:
                theta = ThetaParam.from_angles(phi, self.data.block_dims)
            except DomainError:
                return math.inf
        return self.value(theta)

    def theta_at(self, phi: np.ndarray) -> ThetaParam:
        phi = np.asarray(phi, dtype=np.float64)
        theta = self.anchors.get(phi.tobytes())
        return theta if theta is not None else ThetaParam.from_angles(phi, self.data.block_dims)


def _simplex(phi: np.ndarray, step: float) -> np.ndarray:
    return np.vstack([phi, phi + step * np.eye(phi.size)])


def _nelder_mead(obj: _Objective, phi: np.ndarray, step: float, maxfev: int, opts: FitOptions):
    res = minimize(
        obj,
        phi,
        method="Nelder-Mead",
        options={
            "initial_simplex": _simplex(phi, step),
            "maxfev": maxfev,
            "xatol": opts.xatol,
            "fatol": opts.tol,
        },
    )
    return np.asarray(res.x), float(res.fun)


def _descend(obj: _Objective, phi: np.ndarray, f0: float, opts: FitOptions):
    """Outer rounds of Nelder-Mead; the recorded loss never increases."""
    trace = [f0]
    step = opts.step
    converged = False
    for _ in range(opts.max_outer):
        cand, f = _nelder_mead(obj, phi, step, opts.maxfev, opts)
        gain = trace[-1] - f
        if f < trace[-1]:
            phi = cand
            trace.append(f)
        else:
            trace.append(trace[-1])
        if gain < opts.tol:
            converged = True
            break
        step = max(step / 2.0, 1e-3)
    return phi, trace, converged


def _grid_search(obj: _Objective, dims, step_deg: float):
    if any(d != 2 for d in dims):
        raise InputError("grid search is only available for two-dimensional blocks")
    n = int(round(90.0 / step_deg))
    if not math.isclose(n * step_deg, 90.0):
        raise InputError("grid step must divide 90 degrees")
    grid = np.deg2rad(step_deg * np.arange(-n + 1, n))
    best_f, best_phi = math.inf, None
    for combo in itertools.product(grid, repeat=len(dims)):
        phi = np.array(combo)
        f = obj(phi)
        if f < best_f:
            best_f, best_phi = f, phi
    if best_phi is None:
        raise InputError("no grid direction puts any observation inside the region")
    return best_phi, [best_f]


def _constant_fit(data: Dataset, config: ModelConfig) -> HierarchicalFit:
    theta = ThetaParam(tuple(np.eye(d)[0] for d in data.block_dims))
    x = index_values(data.z, theta)
    part = config.partition()
    idx, inside = part.locate(x)
    if not inside.any():
        raise InputError("no observations fall inside the partitioned region")
    occ = np.bincount(part.linear(idx[inside]), minlength=part.n_cubes)
    coef = np.full((part.n_cubes, config.spec.size), np.nan)
    coef[occ > 0] = 0.0
    coef[occ > 0, 0] = data.y[0]
    return HierarchicalFit(
        theta, coef, occ, occ < config.spec.size, 0.0, int(inside.sum()), 0.0, config,
        trace=(0.0,), converged=True, degenerate=True, notes=("constant response",),
    )


def _sigma2(prof: Profile, p: int) -> float:
    used = int(np.minimum(prof.occupancy, p).sum())
    dof = prof.n_in - used
    return float(np.sum(prof.resid**2) / dof) if dof > 0 else math.nan


def fit(data: Dataset, config: ModelConfig, opts: FitOptions | None = None) -> HierarchicalFit:
    """Least-squares estimate of ``(theta, B)`` over the cube-partitioned sieve.

    Parameters
    ----------
    data : Dataset
        Series and regressors; the block layout must match ``config``.
    config : ModelConfig
        Sieve settings; ``M=None`` picks the cube count from ``T``.
    opts : FitOptions, optional
        Multi-start and stopping settings.

    Returns
    -------
    HierarchicalFit
        Best fit over all starts.  ``trace`` holds the loss after each outer
        round of the winning start and is non-increasing; ``converged`` is
        False if ``max_outer`` rounds ran without settling.  The search
        always uses the full degree in every cube; a positive
        ``config.min_obs_per_coef`` only changes the final coefficients
        (and ``loss``) at the chosen ``theta``.
    """
    opts = opts or FitOptions()
    if tuple(data.block_dims) != tuple(config.block_dims):
        raise InputError(f"data blocks {data.block_dims} differ from config {config.block_dims}")
    config = config.resolved(data.T)
    if np.ptp(data.y) == 0.0:
        return _constant_fit(data, config)
    scale2 = float(np.var(data.y))
    obj = _Objective(data, config, scale2)
    dims = data.block_dims
    notes: list[str] = []

    if opts.theta_grid_deg is not None:
        phi, trace = _grid_search(obj, dims, opts.theta_grid_deg)
        converged = True
    else:
        if opts.theta_start is not None:
            starts = [opts.theta_start] + start_points(data, opts.n_starts, opts.seed)[1:]
            starts = starts[: opts.n_starts]
        else:
            starts = start_points(data, opts.n_starts, opts.seed)
        best_phi, best_f = None, math.inf
        for theta0 in starts:
            phi0 = obj.anchor(theta0)
            f0 = obj(phi0)
            if len(starts) > 1:
                phi0, f0 = _nelder_mead(obj, phi0, opts.step, opts.screen_fev, opts)
            if f0 < best_f:
                best_phi, best_f = phi0, f0
        if best_phi is None:
            raise InputError("no start direction puts any observation inside the region")
        phi, trace, converged = _descend(obj, best_phi, best_f, opts)
        if not converged:
            notes.append(f"outer search stopped after {opts.max_outer} rounds")
            if opts.warn:
                warnings.warn("theta search did not settle; returning best so far",
                              ConvergenceWarning, stacklevel=2)

    theta = obj.theta_at(phi)
    prof = profile(data, theta, config)
    if obj.best is not None and obj.best.loss < prof.loss:
        prof = obj.best
        theta = prof.theta
    if config.min_obs_per_coef > 0:
        prof = profile(data, theta, config, sparse_fallback=True)
    if prof.thin.any():
        notes.append(f"{int(prof.thin.sum())} cubes solved with ridge")
    return HierarchicalFit(
        theta=theta,
        coef=unscale(prof.coef, config),
        occupancy=prof.occupancy,
        thin=prof.thin,
        loss=prof.loss,
        n_in=prof.n_in,
        sigma2=_sigma2(prof, config.spec.size),
        config=config,
        trace=tuple(float(t) * scale2 for t in trace),
        converged=converged,
        n_evals=obj.n_evals,
        notes=tuple(notes),
    )


def predict(fit: HierarchicalFit, x0) -> float | np.ndarray:
    """Fitted surface at ``x0`` (one point ``(r,)`` or many ``(n, r)``).

    Raises :class:`OutOfRegionError` or :class:`EmptyCubeError` if any point
    cannot be evaluated; use :func:`predict_many` for a masked variant.
    """
    return _checked(fit, x0, None)


def estimate_marginal(fit: HierarchicalFit, x0, delta) -> float | np.ndarray:
    """Estimate of the mixed partial ``d^delta`` at ``x0``, ``delta`` in ``{0,1}^r``.

    Each basis term contributes ``alpha_j^delta`` times the tree network for
    ``alpha_j - delta``, so the result tracks the derivative of the local
    polynomial rather than differentiating the network surface itself.
    """
    return _checked(fit, x0, tuple(delta))


def predict_many(fit: HierarchicalFit, x, delta=None) -> tuple[np.ndarray, np.ndarray]:
    """Values and status codes (0 ok, 1 out of region, 2 empty cube) for ``(n, r)`` points."""
    return evaluate_surface(x, fit.coef, fit.config, delta)


def _checked(fit: HierarchicalFit, x0, delta):
    x = np.asarray(x0, dtype=np.float64)
    single = x.ndim == 1
    vals, status = evaluate_surface(np.atleast_2d(x), fit.coef, fit.config, delta)
    if np.any(status == 1):
        raise OutOfRegionError(f"point outside [-{fit.config.a}, {fit.config.a}]^r")
    if np.any(status == 2):
        raise EmptyCubeError("point lies in a cube with no fitted coefficients")
    return float(vals[0]) if single else vals


def with_theta_start(opts: FitOptions, theta: ThetaParam, **kw) -> FitOptions:
    return replace(opts, theta_start=theta, **kw)
