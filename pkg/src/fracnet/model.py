"""Driving diffusions and exact-law Brownian path simulation.

Two processes drive the stochastic integrals: the ``d``-dimensional Brownian
motion ``Y = W`` and the coordinate-wise geometric Brownian motion
``Y_k = exp(W_k - t/2)``.  Both have exact Gaussian transition laws, so paths
are sampled on a prescribed :class:`TimeGrid` without any time-stepping bias.

Random numbers come from a counter-based Philox stream keyed by
``(seed, block)``.  Paths are grouped in blocks of :data:`BLOCK_SIZE`; path ``i``
lives in block ``i // BLOCK_SIZE`` and its values do not depend on how many
paths are requested or how many workers generate them.
"""

from __future__ import annotations

import enum
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Iterable, Iterator, Sequence, TypeVar

import numpy as np

__all__ = [
    "BLOCK_SIZE",
    "ModelKind",
    "DiffusionModel",
    "TimeGrid",
    "PathBatch",
    "ResourceError",
    "sigma",
    "map_w_to_y",
    "build_grid",
    "simulate_paths",
    "iter_path_blocks",
    "map_path_blocks",
    "grid_from_times",
]

T = TypeVar("T")

BLOCK_SIZE = 1024

TAG_NET = 1
TAG_QUAD = 2


class ResourceError(MemoryError):
    """Raised when a path batch would not fit in memory."""

    def __init__(self, requested: int, available: int):
        self.requested = requested
        self.available = available
        super().__init__(
            f"path batch needs {requested} bytes but only {available} bytes are available"
        )


class ModelKind(str, enum.Enum):
    BM = "bm"
    GBM = "gbm"


@dataclass(frozen=True)
class DiffusionModel:
    """Brownian motion or coordinate-wise geometric Brownian motion on ``[0, 1]``.

    ``W_0 = 0``, hence ``Y_0 = 0`` for BM and ``Y_0 = (1, ..., 1)`` for GBM.
    """

    kind: ModelKind = ModelKind.BM
    dim: int = 1

    def __post_init__(self):
        object.__setattr__(self, "kind", ModelKind(self.kind))
        if int(self.dim) != self.dim or self.dim < 1:
            raise ValueError(f"dim must be a positive integer, got {self.dim!r}")

    @classmethod
    def bm(cls, dim: int = 1) -> "DiffusionModel":
        return cls(ModelKind.BM, dim)

    @classmethod
    def gbm(cls, dim: int = 1) -> "DiffusionModel":
        return cls(ModelKind.GBM, dim)

    @property
    def is_gbm(self) -> bool:
        return self.kind is ModelKind.GBM

    @property
    def y0(self) -> np.ndarray:
        return map_w_to_y(self, 0.0, np.zeros(self.dim))

    def in_domain(self, y) -> np.ndarray:
        """Boolean mask of points lying in the state space ``E``."""
        y = np.asarray(y, dtype=float)
        if self.is_gbm:
            return np.all(y > 0, axis=-1)
        return np.all(np.isfinite(y), axis=-1)


def sigma(model: DiffusionModel, y) -> np.ndarray:
    """Diffusion matrix ``sigma(y)`` with ``dY = sigma(Y) dW``.

    Identity for BM and ``diag(y)`` for GBM.  Accepts a single point of shape
    ``(d,)`` or a stack ``(..., d)``.
    """
    y = np.asarray(y, dtype=float)
    if y.shape[-1:] != (model.dim,):
        raise ValueError(f"expected points of dimension {model.dim}, got shape {y.shape}")
    if model.is_gbm:
        if not np.all(y > 0):
            raise ValueError("GBM state must have strictly positive coordinates")
        return y[..., :, None] * np.eye(model.dim)
    return np.broadcast_to(np.eye(model.dim), y.shape[:-1] + (model.dim, model.dim)).copy()


def map_w_to_y(model: DiffusionModel, t, w) -> np.ndarray:
    """State ``Y_t`` as a function of the Brownian value ``W_t = w``.

    ``t`` broadcasts against ``w.shape[:-1]``.
    """
    w = np.asarray(w, dtype=float)
    if not model.is_gbm:
        return w
    t = np.asarray(t, dtype=float)
    return np.exp(w - 0.5 * t[..., None])


@dataclass(frozen=True)
class TimeGrid:
    """Strictly increasing knots in ``[0, 1]`` with per-knot tags.

    ``tags`` is a bit field: 1 marks a time-net knot, 2 a quadrature knot.
    """

    knots: np.ndarray
    tags: np.ndarray = field(default=None)

    def __post_init__(self):
        knots = np.asarray(self.knots, dtype=float)
        if knots.ndim != 1 or knots.size < 2:
            raise ValueError("a time grid needs at least the knots 0 and 1")
        if knots[0] != 0.0 or knots[-1] != 1.0:
            raise ValueError("grid must start at 0 and end at 1")
        if not np.all(np.diff(knots) > 0):
            raise ValueError("grid knots must be strictly increasing")
        tags = self.tags
        if tags is None:
            tags = np.full(knots.size, TAG_QUAD, dtype=np.uint8)
        tags = np.asarray(tags, dtype=np.uint8)
        if tags.shape != knots.shape:
            raise ValueError("tags must match knots")
        knots.setflags(write=False)
        tags.setflags(write=False)
        object.__setattr__(self, "knots", knots)
        object.__setattr__(self, "tags", tags)

    def __len__(self) -> int:
        return self.knots.size

    @property
    def dt(self) -> np.ndarray:
        return np.diff(self.knots)

    def contains(self, times) -> np.ndarray:
        times = np.asarray(times, dtype=float)
        idx = np.clip(np.searchsorted(self.knots, times), 0, self.knots.size - 1)
        return self.knots[idx] == times

    def index_of(self, times) -> np.ndarray:
        """Grid indices of ``times``; every time must be a knot."""
        times = np.asarray(times, dtype=float)
        idx = np.clip(np.searchsorted(self.knots, times), 0, self.knots.size - 1)
        missing = self.knots[idx] != times
        if np.any(missing):
            bad = np.asarray(times)[missing].ravel()[:5]
            raise KeyError(f"times not on the simulation grid: {bad.tolist()}")
        return idx

    def snap_up(self, times) -> np.ndarray:
        """Index of the smallest knot ``>= times``."""
        return np.searchsorted(self.knots, np.asarray(times, dtype=float), side="left")

    def __eq__(self, other):
        if not isinstance(other, TimeGrid):
            return NotImplemented
        return np.array_equal(self.knots, other.knots) and np.array_equal(self.tags, other.tags)

    def __hash__(self):
        return hash(self.knots.tobytes())


def build_grid(
    nets: Iterable = (),
    *,
    refine: int = 40,
    per_octave: int = 4,
    substeps: int = 8,
    base: int = 0,
) -> TimeGrid:
    """Simulation grid containing every knot of ``nets``.

    Parameters
    ----------
    nets : iterable of TimeNet or arrays of knots
        Their knots are included exactly and tagged as net knots.
    refine : int
        Geometric refinement toward the horizon: knots ``1 - 2**(-j/per_octave)``
        for ``j = 1, ..., refine * per_octave``.  ``refine = 0`` disables it.
    per_octave : int
        Refinement knots per halving of ``1 - t``.
    substeps : int
        Each interval between consecutive knots of the union of all nets is
        split into this many equal quadrature steps.
    base : int
        Optional uniform background grid ``i / base``.
    """
    net_knots = [np.asarray(getattr(net, "knots", net), dtype=float) for net in nets]
    quad = [np.array([0.0, 1.0])]
    if substeps > 1 and net_knots:
        u = np.unique(np.concatenate(net_knots))
        a, b = u[:-1], u[1:]
        frac = np.arange(1, substeps) / substeps
        quad.append((a[:, None] + (b - a)[:, None] * frac).ravel())
    if refine > 0:
        j = np.arange(1, refine * per_octave + 1)
        quad.append(1.0 - 2.0 ** (-j / per_octave))
    if base > 0:
        quad.append(np.arange(base + 1) / base)
    net_all = np.concatenate(net_knots) if net_knots else np.empty(0)
    quad_all = np.concatenate(quad)
    knots = np.unique(np.concatenate([net_all, quad_all]))
    tags = np.zeros(knots.size, dtype=np.uint8)
    tags[np.isin(knots, net_all)] |= TAG_NET
    tags[np.isin(knots, quad_all)] |= TAG_QUAD
    return TimeGrid(knots, tags)


@dataclass(frozen=True)
class PathBatch:
    """Brownian values of ``n_paths`` trajectories at the knots of ``grid``.

    ``w`` has shape ``(n_paths, len(grid), d)``.  Values of ``Y`` are derived
    on demand with :func:`map_w_to_y`.
    """

    model: DiffusionModel
    grid: TimeGrid
    w: np.ndarray
    seed: int
    start: int = 0

    @property
    def n_paths(self) -> int:
        return self.w.shape[0]

    @property
    def w_values(self) -> np.ndarray:
        return self.w

    def y(self) -> np.ndarray:
        return map_w_to_y(self.model, self.grid.knots[None, :], self.w)

    def path(self, i: int) -> "PathBatch":
        """One-path view of path ``i``."""
        return PathBatch(self.model, self.grid, self.w[i : i + 1], self.seed, self.start + i)


def _block_generator(seed: int, block: int) -> np.random.Generator:
    ss = np.random.SeedSequence(int(seed) & ((1 << 64) - 1), spawn_key=(int(block),))
    return np.random.Generator(np.random.Philox(ss))


def _block_w(seed: int, block: int, rows: int, sqrt_dt: np.ndarray, dim: int) -> np.ndarray:
    z = _block_generator(seed, block).standard_normal((rows, sqrt_dt.size, dim))
    z *= sqrt_dt[None, :, None]
    w = np.empty((rows, sqrt_dt.size + 1, dim))
    w[:, 0] = 0.0
    np.cumsum(z, axis=1, out=w[:, 1:])
    return w


def iter_path_blocks(
    model: DiffusionModel, grid: TimeGrid, n_paths: int, seed: int
) -> Iterator[tuple[int, np.ndarray]]:
    """Yield ``(first_path_index, w_block)`` in block order."""
    if n_paths < 1:
        raise ValueError("n_paths must be >= 1")
    sqrt_dt = np.sqrt(grid.dt)
    n_blocks = -(-n_paths // BLOCK_SIZE)
    for b in range(n_blocks):
        rows = min(BLOCK_SIZE, n_paths - b * BLOCK_SIZE)
        yield b * BLOCK_SIZE, _block_w(seed, b, rows, sqrt_dt, model.dim)


def map_path_blocks(
    fn: Callable[[int, np.ndarray], T], model: DiffusionModel, grid: TimeGrid, n_paths: int, seed: int, workers: int = 1
) -> list[T]:
    """``[fn(start, w_block) for each block]`` in block order.

    Blocks may be processed by ``workers`` threads; results do not depend on
    the number of workers because every block has its own random stream.
    """
    if n_paths < 1:
        raise ValueError("n_paths must be >= 1")
    sqrt_dt = np.sqrt(grid.dt)
    n_blocks = -(-n_paths // BLOCK_SIZE)

    def run(b: int):
        rows = min(BLOCK_SIZE, n_paths - b * BLOCK_SIZE)
        return fn(b * BLOCK_SIZE, _block_w(seed, b, rows, sqrt_dt, model.dim))

    if workers > 1 and n_blocks > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(run, range(n_blocks)))
    return [run(b) for b in range(n_blocks)]


def _available_bytes() -> int:
    try:
        return os.sysconf("SC_AVPHYS_PAGES") * os.sysconf("SC_PAGE_SIZE")
    except (ValueError, OSError, AttributeError):  # pragma: no cover - non-POSIX
        return 1 << 34


def simulate_paths(
    model: DiffusionModel,
    grid: TimeGrid,
    n_paths: int,
    seed: int = 0,
    *,
    workers: int = 1,
    max_bytes: int | None = None,
) -> PathBatch:
    """Exact-law Brownian paths at the knots of ``grid``.

    The result is bit-identical for equal ``(seed, grid, n_paths)`` whatever
    the number of ``workers``.
    """
    if n_paths < 1:
        raise ValueError("n_paths must be >= 1")
    requested = n_paths * len(grid) * model.dim * 8
    available = _available_bytes() if max_bytes is None else max_bytes
    if requested > available:
        raise ResourceError(requested, available)

    w = np.empty((n_paths, len(grid), model.dim))
    sqrt_dt = np.sqrt(grid.dt)
    n_blocks = -(-n_paths // BLOCK_SIZE)

    def fill(b: int) -> None:
        lo = b * BLOCK_SIZE
        rows = min(BLOCK_SIZE, n_paths - lo)
        w[lo : lo + rows] = _block_w(seed, b, rows, sqrt_dt, model.dim)

    if workers > 1 and n_blocks > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            list(pool.map(fill, range(n_blocks)))
    else:
        for b in range(n_blocks):
            fill(b)
    return PathBatch(model, grid, w, int(seed))


def grid_from_times(times: Sequence[float]) -> TimeGrid:
    """Grid made of exactly the given times plus the endpoints."""
    knots = np.unique(np.concatenate([[0.0, 1.0], np.asarray(times, dtype=float)]))
    return TimeGrid(knots)
