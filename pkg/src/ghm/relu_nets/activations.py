"""ReLU and its Epanechnikov-mollified variant.

The smoothed activation is the convolution of ``max(x, 0)`` with the scaled
kernel ``s * phi(s * u)``, ``phi(u) = 0.75 (1 - u^2) 1{|u| <= 1}``.  With
``w = s * u`` it has the closed form

    sigma_s(u) = (3 + 8 w + 6 w^2 - w^4) / (16 s)     for |w| < 1,

and coincides with ``max(u, 0)`` outside ``|u| < 1/s``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ghm.errors import DomainError


def relu(x):
    """``max(x, 0)`` elementwise; NaN propagates."""
    return np.maximum(x, 0.0)


def relu_grad(x):
    """Derivative of :func:`relu` with the convention ``relu'(0) = 0``."""
    return np.where(np.asarray(x) > 0.0, 1.0, 0.0)


def _check_s(s: int) -> None:
    if int(s) != s or s < 1:
        raise DomainError(f"smoothing index s must be a positive integer, got {s!r}")


def smoothed_relu(u, s: int):
    """Closed-form ReLU mollified by the Epanechnikov kernel at scale ``1/s``.

    Parameters
    ----------
    u : float or array_like
        Evaluation points.
    s : int
        Positive smoothing index; the transition band is ``|u| < 1/s``.

    Returns
    -------
    float or ndarray
        ``sigma_s(u)``; equals ``u`` for ``u >= 1/s`` and ``0`` for
        ``u <= -1/s``.  The gap to ReLU peaks at ``u = 0`` with value
        ``3 / (16 s)``.
    """
    _check_s(s)
    u = np.asarray(u, dtype=np.float64)
    out = np.empty(u.shape)
    np.maximum(u, 0.0, out=out)
    flat = out.reshape(-1)
    uf = u.reshape(-1)
    # only the band |s u| < 1 needs the polynomial
    band = np.flatnonzero(np.abs(uf) < 1.0 / s)
    band = band[np.abs(s * uf[band]) < 1.0]
    if band.size:
        w = s * uf[band]
        w2 = w * w
        flat[band] = (3.0 + 8.0 * w + 6.0 * w2 - w2 * w2) / (16.0 * s)
    return out[()] if out.ndim == 0 else out


def smoothed_relu_grad(u, s: int):
    """Derivative of :func:`smoothed_relu`: ``(2 + 3w - w^3)/4`` inside the band."""
    _check_s(s)
    u = np.asarray(u, dtype=np.float64)
    w = s * u
    inner = (2.0 + 3.0 * w - w**3) / 4.0
    out = np.where(w >= 1.0, 1.0, np.where(w <= -1.0, 0.0, inner))
    return out[()] if out.ndim == 0 else out


@dataclass(frozen=True)
class Activation:
    """Activation selector: plain ReLU (``s is None``) or ``sigma_s``."""

    s: int | None = None

    def __post_init__(self):
        if self.s is not None:
            _check_s(self.s)

    @classmethod
    def parse(cls, text: str | None) -> Activation:
        """Parse ``"relu"``, ``"smoothed"`` (s=32), ``"smoothed:16"`` or ``"smoothed(16)"``."""
        if text is None or text == "relu":
            return cls()
        if isinstance(text, str) and text.startswith("smoothed"):
            tail = text[len("smoothed"):].strip()
            if tail.startswith(":"):
                tail = tail[1:]
            elif tail.startswith("(") and tail.endswith(")"):
                tail = tail[1:-1]
            elif tail:
                raise DomainError(f"unknown activation {text!r}")
            try:
                return cls(int(tail) if tail else 32)
            except ValueError:
                raise DomainError(f"bad smoothing index in {text!r}") from None
        raise DomainError(f"unknown activation {text!r}")

    @property
    def name(self) -> str:
        return "relu" if self.s is None else f"smoothed:{self.s}"

    def __call__(self, x):
        return relu(x) if self.s is None else smoothed_relu(x, self.s)

    def grad(self, x):
        return relu_grad(x) if self.s is None else smoothed_relu_grad(x, self.s)


RELU = Activation()
