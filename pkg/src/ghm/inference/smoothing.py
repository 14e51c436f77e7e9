"""Local linear smoothing of fitted values along the estimated index."""

from __future__ import annotations

import numpy as np

from ghm.errors import InputError

CHUNK = 256


def local_linear_smooth(x: np.ndarray, values: np.ndarray, bandwidth: float,
                        targets: np.ndarray | None = None) -> np.ndarray:
    """Local linear regression of ``values`` on points ``x`` ``(n, r)``.

    Uses the product Epanechnikov weight ``prod_k (1 - (d_k / b)^2)_+``.
    Targets with fewer than ``r + 2`` neighbours inside the window, or an
    ill-conditioned local design, get the local weighted mean instead, and
    the nearest observed value if the window is empty.
    """
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    values = np.asarray(values, dtype=np.float64)
    if values.shape != (x.shape[0],):
        raise InputError("values must have one entry per point")
    if not bandwidth > 0:
        raise InputError("bandwidth must be positive")
    targets = x if targets is None else np.atleast_2d(np.asarray(targets, dtype=np.float64))
    n, r = x.shape
    out = np.empty(targets.shape[0])
    for s in range(0, targets.shape[0], CHUNK):
        t = targets[s:s + CHUNK]
        diff = x[None, :, :] - t[:, None, :]
        w = np.prod(np.clip(1.0 - (diff / bandwidth) ** 2, 0.0, None), axis=2)
        X = np.concatenate([np.ones(diff.shape[:2] + (1,)), diff / bandwidth], axis=2)
        G = np.einsum("tn,tni,tnj->tij", w, X, X)
        c = np.einsum("tn,tni,n->ti", w, X, values)
        wsum = G[:, 0, 0]
        neigh = np.count_nonzero(w > 0, axis=1)
        est = np.full(t.shape[0], np.nan)
        good = neigh >= r + 2
        if good.any():
            cond = np.linalg.cond(G[good])
            ok = np.isfinite(cond) & (cond < 1e10)
            idx = np.flatnonzero(good)[ok]
            if idx.size:
                est[idx] = np.linalg.solve(G[idx], c[idx][:, :, None])[:, 0, 0]
        fallback = np.isnan(est) & (wsum > 0)
        est[fallback] = c[fallback, 0] / wsum[fallback]
        empty = np.isnan(est)
        if empty.any():
            nearest = np.argmin(np.sum(diff[empty] ** 2, axis=2), axis=1)
            est[empty] = values[nearest]
        out[s:s + CHUNK] = est
    return out
