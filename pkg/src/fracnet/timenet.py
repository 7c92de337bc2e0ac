"""Time-nets: deterministic knot sequences, theta-adapted nets and predictable random nets.

A time-net is ``0 = t_0 <= t_1 <= ... <= t_{n-1} < t_n = 1``.  Random nets are
generated by step rules that decide the next knot from the current time and
state only, so every knot is measurable with respect to the information at the
previous knot.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .model import PathBatch, TimeGrid, map_w_to_y

__all__ = [
    "TimeNet",
    "RandomNet",
    "AdaptiveNetRule",
    "equidistant",
    "theta_net",
    "mesh",
    "mesh_theta",
    "lower_mesh_constant",
    "realize_random_net",
    "constant_rule",
    "proportional_rule",
    "curvature_rule",
    "RULES",
]

RULE_CAP = 1.0 - 1e-9
# proposals within this distance below a knot snap to that knot (absorbs summation rounding)
SNAP_TOL = 1e-12


@dataclass(frozen=True)
class TimeNet:
    """Deterministic net.

    ``gaps`` and ``steps`` optionally carry ``1 - t_i`` and ``t_i - t_{i-1}``
    computed without cancellation; theta-nets with small theta put knots
    closer to 1 than double precision can resolve, and their meshes are then
    computed from these.
    """

    knots: np.ndarray
    label: str = ""
    gaps: np.ndarray | None = None
    steps: np.ndarray | None = None

    def __post_init__(self):
        k = np.asarray(self.knots, dtype=float)
        if k.ndim != 1 or k.size < 2:
            raise ValueError("a time-net needs at least two knots")
        if self.gaps is not None:
            g = np.asarray(self.gaps, dtype=float)
            if g.shape != k.shape or g[0] != 1.0 or g[-1] != 0.0 or not g[-2] > 0.0 or np.any(np.diff(g) > 0):
                raise ValueError("gaps must decrease from 1 to 0 with 1 - t_{n-1} > 0")
            g.setflags(write=False)
            object.__setattr__(self, "gaps", g)
            last_ok = True
        else:
            last_ok = k[-2] < 1.0
        if k[0] != 0.0 or k[-1] != 1.0 or not last_ok:
            raise ValueError("a time-net starts at 0, ends at 1 and has t_{n-1} < 1")
        if np.any(np.diff(k) < 0):
            raise ValueError("time-net knots must be nondecreasing")
        k.setflags(write=False)
        object.__setattr__(self, "knots", k)

    @property
    def n(self) -> int:
        return self.knots.size - 1

    @property
    def resolvable(self) -> bool:
        """Whether every knot before the last is below 1 in double precision."""
        return bool(self.knots[-2] < 1.0)

    def __len__(self):
        return self.knots.size

    def __eq__(self, other):
        return isinstance(other, TimeNet) and np.array_equal(self.knots, other.knots)

    def __hash__(self):
        return hash(self.knots.tobytes())


def equidistant(n: int) -> TimeNet:
    """Knots ``i / n``."""
    if n < 1:
        raise ValueError("n must be >= 1")
    return TimeNet(np.arange(n + 1) / n, f"equidistant({n})")


def theta_net(n: int, theta: float) -> TimeNet:
    """Knots ``1 - (1 - i/n)**(1/theta)``, concentrating near the horizon for ``theta < 1``."""
    if n < 1:
        raise ValueError("n must be >= 1")
    if not 0.0 < theta <= 1.0:
        raise ValueError(f"theta must lie in (0, 1], got {theta}")
    m = n - np.arange(n + 1)  # n (1 - i/n), exact integers
    gaps = (m / n) ** (1.0 / theta)
    gaps[-1] = 0.0
    # t_i - t_{i-1} = s_{i-1} (1 - (1 - 1/m_{i-1})^(1/theta))
    if theta == 1.0:
        steps = np.full(n, 1.0 / n)
    else:
        with np.errstate(divide="ignore"):
            steps = -gaps[:-1] * np.expm1(np.log1p(-1.0 / m[:-1]) / theta)
    return TimeNet(1.0 - gaps, f"theta({n},{theta:g})", gaps, steps)


def mesh_theta(net, theta: float = 1.0) -> float:
    """``max_i (t_i - t_{i-1}) / (1 - t_{i-1})**(1 - theta)``; ``theta = 1`` is the usual mesh."""
    gaps = getattr(net, "gaps", None)
    if gaps is None:
        k = np.asarray(getattr(net, "knots", net), dtype=float)
        if k.ndim == 2:
            return np.array([mesh_theta(row, theta) for row in k])
        gaps = 1.0 - k
    dt = getattr(net, "steps", None)
    if dt is None:
        dt = gaps[:-1] - gaps[1:]
    return float(np.max(dt / gaps[:-1] ** (1.0 - theta)))


def mesh(net) -> float:
    return mesh_theta(net, 1.0)


def lower_mesh_constant(net, theta: float) -> float:
    """``max_i (1 - t_{i-1})**(1 - theta) / (t_i - t_{i-1}) / n``.

    For theta-nets this stays bounded in ``n``; its supremum is the constant
    ``beta`` of the reverse mesh estimate.
    """
    gaps = getattr(net, "gaps", None)
    if gaps is None:
        gaps = 1.0 - np.asarray(getattr(net, "knots", net), dtype=float)
    dt = getattr(net, "steps", None)
    if dt is None:
        dt = gaps[:-1] - gaps[1:]
    return float(np.max(gaps[:-1] ** (1.0 - theta) / dt) / (gaps.size - 1))


# ---------------------------------------------------------------------------
# random nets


@dataclass(frozen=True)
class AdaptiveNetRule:
    """Predictable step rule.

    ``step(t, y)`` receives the current knot times ``(P,)`` and states
    ``(P, d)`` of ``P`` paths and returns the proposed next knot times.
    """

    step: Callable[[np.ndarray, np.ndarray], np.ndarray]
    max_steps: int
    name: str = "rule"

    def __post_init__(self):
        if self.max_steps < 1:
            raise ValueError("max_steps must be >= 1")


@dataclass(frozen=True)
class RandomNet:
    """Per-path nets realized on a simulation grid.

    ``index`` has shape ``(P, n + 1)`` and points into ``grid.knots``.
    """

    grid: TimeGrid
    index: np.ndarray
    label: str = ""

    @property
    def knots(self) -> np.ndarray:
        return self.grid.knots[self.index]

    @property
    def n(self) -> int:
        return self.index.shape[1] - 1

    def path(self, i: int) -> TimeNet:
        return TimeNet(self.knots[i], self.label)


class RuleError(ValueError):
    def __init__(self, index: int, path: int):
        self.index = index
        self.path = path
        super().__init__(f"rule proposed a non-increasing time at knot {index} (path {path})")


def realize_random_net(rule: AdaptiveNetRule, batch: PathBatch) -> RandomNet:
    """Run ``rule`` along every path of ``batch``.

    Proposed times are capped at ``1 - 1e-9`` and snapped up to the next grid
    knot; the final knot is set to 1.  A proposal not exceeding the current
    time raises :class:`RuleError`, unless the path already sits at the cap.
    """
    grid = batch.grid
    knots = grid.knots
    P = batch.n_paths
    n = rule.max_steps
    idx = np.zeros((P, n + 1), dtype=np.int64)
    last = np.searchsorted(knots, RULE_CAP, side="right") - 1
    rows = np.arange(P)
    for i in range(1, n):
        cur = idx[:, i - 1]
        t = knots[cur]
        y = _state(batch, rows, cur)
        prop = np.asarray(rule.step(t, y), dtype=float)
        prop = np.broadcast_to(prop, t.shape)
        stuck = cur >= last
        bad = (prop <= t) & ~stuck
        if np.any(bad):
            raise RuleError(i, int(np.argmax(bad)))
        snapped = np.minimum(grid.snap_up(np.minimum(prop, RULE_CAP) - SNAP_TOL), last)
        idx[:, i] = np.where(stuck, cur, np.maximum(snapped, cur))
    idx[:, n] = knots.size - 1
    return RandomNet(grid, idx, rule.name)


def _state(batch: PathBatch, rows, cols) -> np.ndarray:
    w = batch.w[rows, cols]
    return map_w_to_y(batch.model, batch.grid.knots[cols], w)


def constant_rule(n: int) -> AdaptiveNetRule:
    """State-independent steps of length ``1/n``."""
    return AdaptiveNetRule(lambda t, y: t + 1.0 / n, n, f"constant({n})")


def proportional_rule(c: float, n: int) -> AdaptiveNetRule:
    """``tau_i = tau_{i-1} + c (1 - tau_{i-1})``."""
    if not 0 < c <= 1:
        raise ValueError("c must lie in (0, 1]")
    return AdaptiveNetRule(lambda t, y: t + c * (1.0 - t), n, f"proportional({c:g},{n})")


def curvature_rule(h_fn: Callable, n: int, theta: float = 0.5, scale: float = 1.0) -> AdaptiveNetRule:
    """Shorter steps where the curvature ``h_fn(t, y)`` is large.

    The step is ``(1 - t)**(1 - theta) / (theta n) / (1 + scale * h (1 - t))``,
    i.e. a theta-net step shrunk by the local curvature.
    """

    def step(t, y):
        s = 1.0 - t
        h = np.asarray(h_fn(t, y), dtype=float)
        base = s ** (1.0 - theta) / (theta * n)
        return t + np.minimum(base / (1.0 + scale * h * s), s)

    return AdaptiveNetRule(step, n, f"curvature({n},{theta:g})")


RULES = {
    "constant": constant_rule,
    "proportional": proportional_rule,
    "curvature": curvature_rule,
}
