"""Model configuration, parameter blocks, data containers and the cube grid."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from functools import cached_property

import numpy as np

from ghm.errors import DimensionError, DomainError, InputError
from ghm.relu_nets.activations import Activation
from ghm.relu_nets.basis import LocalBasisSpec
from ghm.relu_nets.hdnn import max_offset


def default_cubes_per_axis(a: float, T: int) -> int:
    """``max(2, round(2a T^(1/4)))`` so that the side length is about ``T^(-1/4)``."""
    return max(2, int(round(2.0 * a * T**0.25)))


@dataclass(frozen=True)
class ModelConfig:
    """Everything that defines the sieve apart from the data.

    ``M=None`` means "pick from the sample size" via
    :func:`default_cubes_per_axis`; call :meth:`resolved` before use.

    ``min_obs_per_coef`` lowers the polynomial degree in sparse cubes: a
    cube with ``n`` observations uses the highest degree ``k <= vartheta``
    whose basis has at most ``n / min_obs_per_coef`` entries.  The default
    0 keeps the full degree everywhere (thin cubes then get a tiny ridge).
    """

    block_dims: tuple[int, ...]
    a: float = 0.9
    vartheta: int = 2
    m: int = 5
    M: int | None = None
    activation: str = "relu"
    min_obs_per_coef: float = 0.0

    def __post_init__(self):
        dims = tuple(int(d) for d in self.block_dims)
        object.__setattr__(self, "block_dims", dims)
        if not dims:
            raise InputError("need at least one index block")
        if any(d < 2 for d in dims):
            raise InputError(f"every block needs dimension >= 2, got {dims}")
        if not self.a > 0:
            raise InputError(f"a must be positive, got {self.a}")
        if self.vartheta < 0:
            raise InputError("vartheta must be >= 0")
        if int(self.m) != self.m or self.m < 1:
            raise InputError(f"m must be a positive integer, got {self.m}")
        if self.M is not None and self.M < 1:
            raise InputError(f"M must be >= 1, got {self.M}")
        Activation.parse(self.activation)
        if not self.min_obs_per_coef >= 0:
            raise InputError("min_obs_per_coef must be >= 0")

    @property
    def r(self) -> int:
        return len(self.block_dims)

    @property
    def d(self) -> int:
        return sum(self.block_dims)

    @cached_property
    def act(self) -> Activation:
        return Activation.parse(self.activation)

    @cached_property
    def spec(self) -> LocalBasisSpec:
        return LocalBasisSpec(self.r, self.vartheta, self.m)

    def resolved(self, T: int) -> ModelConfig:
        if self.M is not None:
            return self
        return replace(self, M=default_cubes_per_axis(self.a, T))

    @property
    def h(self) -> float:
        if self.M is None:
            raise InputError("M is unresolved; call resolved(T) first")
        return 2.0 * self.a / self.M

    @cached_property
    def rescale(self) -> float:
        """Factor applied to cube offsets so they fit the tree network's domain."""
        hmax = max_offset(self.r, self.m)
        return 1.0 if self.h <= hmax else hmax / self.h

    def partition(self) -> CubePartition:
        return self._partition

    @cached_property
    def _partition(self) -> CubePartition:
        if self.M is None:
            raise InputError("M is unresolved; call resolved(T) first")
        return CubePartition(self.a, self.M, self.r)

    def to_dict(self) -> dict:
        return {
            "block_dims": list(self.block_dims),
            "a": self.a,
            "vartheta": self.vartheta,
            "m": self.m,
            "M": self.M,
            "activation": self.activation,
            "min_obs_per_coef": self.min_obs_per_coef,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> ModelConfig:
        fields = ("a", "vartheta", "m", "M", "activation", "min_obs_per_coef")
        known = {"block_dims", "r", *fields}
        extra = set(doc) - known
        if extra:
            raise InputError(f"unknown config keys: {sorted(extra)}")
        if "block_dims" not in doc:
            raise InputError("config needs block_dims")
        if "r" in doc and doc["r"] != len(doc["block_dims"]):
            raise InputError("r disagrees with block_dims")
        kw = {k: doc[k] for k in fields if k in doc}
        return cls(tuple(doc["block_dims"]), **kw)


@dataclass(frozen=True, eq=False)
class ThetaParam:
    """``r`` unit-norm index directions, each with a strictly positive first entry."""

    blocks: tuple[np.ndarray, ...]

    def __post_init__(self):
        fixed = []
        for j, b in enumerate(self.blocks):
            b = np.array(b, dtype=np.float64, ndmin=1)
            if b.ndim != 1 or b.size < 2:
                raise DimensionError(f"block {j} must be a vector of length >= 2")
            if not np.all(np.isfinite(b)):
                raise DomainError(f"block {j} is not finite")
            if abs(np.linalg.norm(b) - 1.0) > 1e-9:
                raise DomainError(f"block {j} does not have unit norm")
            if not b[0] > 0.0:
                raise DomainError(f"block {j} must have a positive first entry")
            b.setflags(write=False)
            fixed.append(b)
        if not fixed:
            raise DimensionError("need at least one block")
        object.__setattr__(self, "blocks", tuple(fixed))

    @classmethod
    def normalized(cls, blocks) -> ThetaParam:
        """Scale each block to unit norm and flip it so the first entry is positive."""
        out = []
        for j, b in enumerate(blocks):
            b = np.asarray(b, dtype=np.float64)
            n = np.linalg.norm(b)
            if n == 0.0 or b[0] == 0.0:
                raise DomainError(f"block {j} is not identified (zero norm or zero lead)")
            b = b / n
            out.append(b if b[0] > 0 else -b)
        return cls(tuple(out))

    @classmethod
    def from_flat(cls, vec, dims) -> ThetaParam:
        vec = np.asarray(vec, dtype=np.float64)
        if vec.size != sum(dims):
            raise DimensionError(f"flat theta has {vec.size} entries, blocks need {sum(dims)}")
        cuts = np.cumsum(dims)[:-1]
        return cls(tuple(np.split(vec, cuts)))

    @property
    def dims(self) -> tuple[int, ...]:
        return tuple(b.size for b in self.blocks)

    @property
    def r(self) -> int:
        return len(self.blocks)

    @property
    def flat(self) -> np.ndarray:
        return np.concatenate(self.blocks)

    def to_angles(self) -> np.ndarray:
        return np.concatenate([_block_to_angles(b) for b in self.blocks])

    @classmethod
    def from_angles(cls, phi, dims) -> ThetaParam:
        """Inverse of :meth:`to_angles`; blocks with a negative lead are flipped."""
        phi = np.asarray(phi, dtype=np.float64)
        if phi.size != sum(dims) - len(dims):
            raise DimensionError("wrong number of angles for these block sizes")
        out, k = [], 0
        for d in dims:
            out.append(_angles_to_block(phi[k:k + d - 1]))
            k += d - 1
        return cls.normalized(out)

    def __eq__(self, other):
        return isinstance(other, ThetaParam) and self.dims == other.dims and bool(
            np.array_equal(self.flat, other.flat)
        )

    def __hash__(self):
        return hash(self.flat.tobytes())

    def to_list(self) -> list[list[float]]:
        return [b.tolist() for b in self.blocks]


def _angles_to_block(phi: np.ndarray) -> np.ndarray:
    d = phi.size + 1
    out = np.empty(d)
    s = 1.0
    for k in range(d - 1):
        out[k] = s * math.cos(phi[k])
        s *= math.sin(phi[k])
    out[d - 1] = s
    return out


def _block_to_angles(b: np.ndarray) -> np.ndarray:
    d = b.size
    phi = np.empty(d - 1)
    for k in range(d - 2):
        phi[k] = math.atan2(float(np.linalg.norm(b[k + 1:])), b[k])
    phi[d - 2] = math.atan2(b[d - 1], b[d - 2])
    return phi


@dataclass(frozen=True, eq=False)
class Dataset:
    """Response ``y`` (length T) and regressors ``z`` (T x d, blocks side by side)."""

    y: np.ndarray
    z: np.ndarray
    block_dims: tuple[int, ...]
    names: tuple[str, ...] = field(default=())

    def __post_init__(self):
        y = np.array(self.y, dtype=np.float64)
        z = np.array(self.z, dtype=np.float64)
        dims = tuple(int(d) for d in self.block_dims)
        if y.ndim != 1:
            raise DimensionError("y must be one-dimensional")
        if z.ndim != 2 or z.shape[0] != y.size:
            raise DimensionError(f"z must be {y.size} x d, got shape {z.shape}")
        if z.shape[1] != sum(dims):
            raise DimensionError(f"z has {z.shape[1]} columns, block layout needs {sum(dims)}")
        if not (np.all(np.isfinite(y)) and np.all(np.isfinite(z))):
            raise InputError("data contain NaN or infinite values")
        if y.size < z.shape[1]:
            raise InputError(f"need T >= d, got T={y.size}, d={z.shape[1]}")
        y.setflags(write=False)
        z.setflags(write=False)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "z", z)
        object.__setattr__(self, "block_dims", dims)

    @property
    def T(self) -> int:
        return self.y.size

    def with_y(self, y) -> Dataset:
        return Dataset(y, self.z, self.block_dims, self.names)

    def slice(self, start: int, stop: int) -> Dataset:
        return Dataset(self.y[start:stop], self.z[start:stop], self.block_dims, self.names)


def index_values(z, theta: ThetaParam) -> np.ndarray:
    """Block inner products ``(z_1' theta_1, ..., z_r' theta_r)``.

    ``z`` is one row of length d or a ``(T, d)`` matrix; the result is
    ``(r,)`` or ``(T, r)``.
    """
    z = np.asarray(z, dtype=np.float64)
    d = sum(theta.dims)
    if z.shape[-1] != d:
        raise DimensionError(f"z has {z.shape[-1]} columns, theta needs {d}")
    out = np.empty(z.shape[:-1] + (theta.r,))
    k = 0
    for j, b in enumerate(theta.blocks):
        out[..., j] = z[..., k:k + b.size] @ b
        k += b.size
    return out


@dataclass(frozen=True)
class CubePartition:
    """``M^r`` cubes of side ``h = 2a/M`` tiling ``[-a, a]^r``.

    Cube ``i`` (0-based multi-index) has corner ``-a + i h`` and owns points
    with ``corner <= x < corner + h`` per axis; on the last cube of an axis
    the upper face ``x = a`` is included as well.
    """

    a: float
    M: int
    r: int

    @property
    def h(self) -> float:
        return 2.0 * self.a / self.M

    @property
    def n_cubes(self) -> int:
        return self.M**self.r

    def corner(self, idx) -> np.ndarray:
        return -self.a + np.asarray(idx, dtype=np.float64) * self.h

    def locate(self, x) -> tuple[np.ndarray, np.ndarray]:
        """Per-axis cube indices ``(n, r)`` and an in-region mask ``(n,)``.

        Indices of out-of-region rows are clipped and must not be used.
        """
        x = np.atleast_2d(np.asarray(x, dtype=np.float64))
        if x.shape[1] != self.r:
            raise DimensionError(f"points must have {self.r} coordinates")
        a, h, M = self.a, self.h, self.M
        inside = np.all((x >= -a) & (x <= a), axis=1)
        idx = np.clip(np.floor((x + a) / h), 0, M - 1).astype(np.int64)
        # floor() may be off by one next to a face; settle it against the corners
        idx = np.where((idx > 0) & (x < -a + idx * h), idx - 1, idx)
        idx = np.where((idx < M - 1) & (x >= -a + (idx + 1) * h), idx + 1, idx)
        return idx, inside

    def linear(self, idx: np.ndarray) -> np.ndarray:
        return np.ravel_multi_index(tuple(np.asarray(idx).T), (self.M,) * self.r)

    def unravel(self, k) -> tuple[int, ...]:
        return tuple(int(v) for v in np.unravel_index(k, (self.M,) * self.r))


def cube_index(p: CubePartition, x) -> tuple[int, ...] | None:
    """0-based multi-index of the cube owning ``x``, or ``None`` outside ``[-a, a]^r``."""
    idx, inside = p.locate(np.asarray(x, dtype=np.float64).reshape(1, -1))
    if not inside[0]:
        return None
    return tuple(int(v) for v in idx[0])
