"""Monte Carlo for Riemann-sum hedging errors and their square functions.

For a net ``tau`` and weights ``v`` the error on one path is

    C_1 = g(Y_1) - G(0, Y_0) - sum_i v_{tau_{i-1}} (Y_{tau_i} - Y_{tau_{i-1}}),

where the stochastic integral is replaced by the exact identity
``int_0^1 grad G dY = g(Y_1) - G(0, Y_0)``.  The square function is

    sq_fn = (sum_i int_{tau_{i-1}}^{tau_i} (tau_i - t) H_G(t, Y_t)^2 dt)^(1/2),

integrated on the fine simulation grid.
"""

from __future__ import annotations

import csv
import io
import json
import warnings
from dataclasses import dataclass
from enum import Enum
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np

from .model import DiffusionModel, PathBatch, TimeGrid, build_grid, grid_from_times, map_path_blocks, map_w_to_y
from .payoff import Payoff, family, h_squared
from .quadrature import KernelSums
from .timenet import AdaptiveNetRule, RandomNet, TimeNet, equidistant, realize_random_net, theta_net

__all__ = [
    "StrategyKind",
    "Strategy",
    "GRADIENT",
    "ZERO",
    "ErrorSample",
    "LpEstimate",
    "RatioEstimate",
    "exact_integral",
    "riemann_sum",
    "error_sample",
    "lp_norm",
    "lp_norm_mc",
    "paired_ratio",
    "simulate_errors",
    "equivalence_ratio",
    "strategy_comparison",
    "write_csv",
    "CSV_COLUMNS",
]

BOOTSTRAP_RESAMPLES = 200
# spawn key of the bootstrap stream; path blocks use keys 0, 1, 2, ...
_BOOTSTRAP_KEY = 2**32 - 1


class StrategyKind(str, Enum):
    GRADIENT = "gradient"
    ZERO = "zero"
    CUSTOM = "custom"


@dataclass(frozen=True)
class Strategy:
    """Hedge weights ``v`` applied on ``(tau_{i-1}, tau_i]``.

    ``fn(t, y)`` (custom strategies) maps knot times ``(...)`` and states
    ``(..., d)`` at the left knot to weights ``(..., d)``; it sees no later
    information.
    """

    kind: StrategyKind
    fn: Callable | None = None
    name: str = ""

    def __post_init__(self):
        if self.kind == StrategyKind.CUSTOM and self.fn is None:
            raise ValueError("a custom strategy needs fn")
        if not self.name:
            object.__setattr__(self, "name", self.kind.value)

    @classmethod
    def custom(cls, fn: Callable, name: str = "custom") -> "Strategy":
        return cls(StrategyKind.CUSTOM, fn, name)


GRADIENT = Strategy(StrategyKind.GRADIENT)
ZERO = Strategy(StrategyKind.ZERO)


@dataclass
class ErrorSample:
    """Per-path errors; every array has one entry per path."""

    c_simple: np.ndarray
    sq_fn: np.ndarray
    c_strategy: np.ndarray | None = None
    net_used: TimeNet | RandomNet | None = None
    n_tail_failures: int = 0


@dataclass
class LpEstimate:
    p: float
    value: float
    std_err: float
    n_paths: int
    seed: int
    n_nonfinite: int = 0
    low_p: bool = False
    divergent: bool = False
    n_divergent: int = 0
    raw_value: float | None = None
    finite_certified: bool | None = None

    def __post_init__(self):
        if self.value < 0 or self.std_err < 0:
            raise ValueError("an L_p estimate and its error are non-negative")

    def __float__(self):
        return float(self.value)


@dataclass
class RatioEstimate:
    value: float
    std_err: float
    numerator: LpEstimate
    denominator: LpEstimate
    guarded: bool


# ---------------------------------------------------------------------------
# nets on the simulation grid


def _net_columns(grid: TimeGrid, net) -> np.ndarray:
    """Grid indices of the knots of a deterministic net; missing knots are rejected."""
    if isinstance(net, TimeNet) and not net.resolvable:
        raise ValueError(f"{net.label}: knots closer to 1 than double precision resolves")
    k = np.asarray(getattr(net, "knots", net), dtype=float)
    if not np.all(grid.contains(k)):
        missing = k[~grid.contains(k)]
        raise ValueError(f"net knots missing from the simulation grid: {missing[:5]}")
    return grid.index_of(k)


def _resolve(grid: TimeGrid, net, w: np.ndarray, model: DiffusionModel, seed: int, start: int) -> np.ndarray:
    """Per-path knot indices ``(P, n + 1)`` for a deterministic or random net."""
    P = w.shape[0]
    if isinstance(net, AdaptiveNetRule):
        return realize_random_net(net, PathBatch(model, grid, w, seed, start)).index
    if isinstance(net, RandomNet):
        if net.grid != grid:
            raise ValueError("random net was realized on a different grid")
        return net.index[start : start + P]
    cols = _net_columns(grid, net)
    return np.broadcast_to(cols, (P, cols.size))


def _weights(strategy: Strategy, fam, t, y) -> np.ndarray:
    if strategy.kind == StrategyKind.GRADIENT:
        return fam.grad(t, y)
    if strategy.kind == StrategyKind.ZERO:
        return np.zeros_like(y)
    return np.broadcast_to(np.asarray(strategy.fn(t, y), dtype=float), y.shape)


def _riemann(strategy: Strategy, fam, knots, y, idx) -> np.ndarray:
    rows = np.arange(y.shape[0])[:, None]
    left, right = idx[:, :-1], idx[:, 1:]
    y_left = y[rows, left]
    v = _weights(strategy, fam, knots[left], y_left)
    return np.sum(v * (y[rows, right] - y_left), axis=(1, 2))


def _block(payoff, model, fam, grid, w, nets, strategies, want_sq, seed, start):
    """Errors of one block of paths for every net; returns a list of dicts."""
    knots = grid.knots
    K = knots.size
    y = map_w_to_y(model, knots[None, :], w)
    stoch = payoff.g(y[:, -1]) - fam.G(0.0, model.y0[None, :])
    sums = None
    if want_sq:
        h2 = np.empty((w.shape[0], K))
        h2[:, :-1] = h_squared(payoff, model, knots[None, :-1], y[:, :-1], fam)
        h2[:, -1] = np.nan
        sums = KernelSums(h2, knots)
        del h2
    out = []
    for net in nets:
        idx = _resolve(grid, net, w, model, seed, start)
        res = {"c": {}, "idx": idx}
        for st in strategies:
            res["c"][st.name] = stoch - _riemann(st, fam, knots, y, idx)
        if want_sq:
            val, fail = sums(idx)
            res["sq"] = np.sqrt(np.maximum(val, 0.0))
            res["fail"] = fail
        out.append(res)
    return out


def simulate_errors(
    payoff: Payoff,
    model: DiffusionModel,
    nets: Sequence,
    n_paths: int,
    seed: int = 0,
    *,
    strategies: Sequence[Strategy] = (GRADIENT,),
    grid: TimeGrid | None = None,
    square_function: bool = True,
    grid_refine: int = 40,
    workers: int = 1,
) -> list[ErrorSample]:
    """Simulate ``n_paths`` paths once and evaluate every net on them.

    Nets are :class:`TimeNet` or :class:`AdaptiveNetRule`; rules are realized
    along each path on the simulation grid.  The default grid contains all
    deterministic knots, eight quadrature steps per net interval and a
    geometric refinement toward ``t = 1``.  ``c_simple`` uses the first
    strategy; ``c_strategy`` holds all of them in a dict.
    """
    if grid is None:
        det = [n for n in nets if not isinstance(n, AdaptiveNetRule)]
        if square_function:
            grid = build_grid(det, refine=grid_refine, base=_rule_base(nets))
        else:
            grid = build_grid(det, refine=0, substeps=1, base=_rule_base(nets))
    fam = family(payoff, model)
    blocks = map_path_blocks(
        lambda start, w: _block(payoff, model, fam, grid, w, nets, strategies, square_function, seed, start),
        model,
        grid,
        n_paths,
        seed,
        workers,
    )
    chunks = [[b[j] for b in blocks] for j in range(len(nets))]
    out = []
    for net, acc in zip(nets, chunks):
        c = {st.name: np.concatenate([r["c"][st.name] for r in acc]) for st in strategies}
        sq = np.concatenate([r["sq"] for r in acc]) if square_function else np.full(n_paths, np.nan)
        fails = sum(r.get("fail", 0) for r in acc)
        used = net if not isinstance(net, AdaptiveNetRule) else RandomNet(grid, np.concatenate([r["idx"] for r in acc]), net.name)
        out.append(ErrorSample(c[strategies[0].name], sq, c, used, fails))
    return out


def _rule_base(nets) -> int:
    """Uniform background resolution for grids that carry random nets."""
    steps = [n.max_steps for n in nets if isinstance(n, AdaptiveNetRule)]
    return 8 * max(steps) if steps else 0


# ---------------------------------------------------------------------------
# per-path operations


def exact_integral(payoff: Payoff, model: DiffusionModel, path: PathBatch) -> np.ndarray:
    """``int_0^1 grad G dY = g(Y_1) - G(0, Y_0)`` for every path of ``path``."""
    fam = family(payoff, model)
    y1 = map_w_to_y(model, 1.0, path.w[:, -1])
    return payoff.g(y1) - fam.G(0.0, model.y0[None, :])


def riemann_sum(payoff: Payoff, model: DiffusionModel, path: PathBatch, net, strategy: Strategy = GRADIENT) -> np.ndarray:
    """``sum_i v_{tau_{i-1}} (Y_{tau_i} - Y_{tau_{i-1}})`` per path.

    ``net`` is a :class:`TimeNet` whose knots must be grid knots, a
    :class:`RandomNet` realized on the same grid, or a rule.
    """
    fam = family(payoff, model)
    idx = _resolve(path.grid, net, path.w, model, path.seed, path.start)
    y = map_w_to_y(model, path.grid.knots[None, :], path.w)
    return _riemann(strategy, fam, path.grid.knots, y, idx)


def error_sample(
    payoff: Payoff, model: DiffusionModel, path: PathBatch, net, strategy: Strategy | None = None
) -> ErrorSample:
    """Errors and square functions for the paths of ``path`` under one net."""
    fam = family(payoff, model)
    strategies = [GRADIENT] if strategy is None or strategy.name == GRADIENT.name else [GRADIENT, strategy]
    (res,) = _block(payoff, model, fam, path.grid, path.w, [net], strategies, True, path.seed, path.start)
    c_strategy = res["c"][strategy.name] if strategy is not None else None
    used = net if not isinstance(net, AdaptiveNetRule) else RandomNet(path.grid, res["idx"], net.name)
    return ErrorSample(res["c"][GRADIENT.name], res["sq"], c_strategy, used, res["fail"])


# ---------------------------------------------------------------------------
# L_p estimation


def _bootstrap_indices(n: int, seed: int, chunk: int = 20):
    ss = np.random.SeedSequence(int(seed) & ((1 << 64) - 1), spawn_key=(_BOOTSTRAP_KEY,))
    rng = np.random.Generator(np.random.Philox(ss))
    done = 0
    while done < BOOTSTRAP_RESAMPLES:
        m = min(chunk, BOOTSTRAP_RESAMPLES - done)
        yield rng.integers(0, n, size=(m, n))
        done += m


def _clean(samples):
    x = np.asarray(samples, dtype=float).ravel()
    ok = np.isfinite(x)
    return x[ok], int(x.size - ok.sum())


def lp_norm(samples, p: float, seed: int = 0) -> LpEstimate:
    """``(mean |X|^p)^(1/p)`` with a seeded bootstrap standard error.

    Non-finite samples are dropped and counted.  ``p < 2`` is accepted but
    flagged through ``low_p`` and a warning.
    """
    if p < 1:
        raise ValueError("p must be >= 1")
    low = p < 2
    if low:
        warnings.warn("p < 2 lies outside the range covered by the error equivalences", stacklevel=2)
    x, bad = _clean(samples)
    if x.size == 0:
        return LpEstimate(p, 0.0, 0.0, 0, seed, bad, low)
    a = np.abs(x) ** p
    value = float(np.mean(a) ** (1.0 / p))
    boots = np.concatenate([np.mean(a[ix], axis=1) ** (1.0 / p) for ix in _bootstrap_indices(a.size, seed)])
    return LpEstimate(p, value, float(np.std(boots, ddof=1)), int(x.size), seed, bad, low)


def lp_norm_mc(
    sampler: Callable[[PathBatch], np.ndarray],
    p: float,
    n_paths: int,
    seed: int = 0,
    *,
    model: DiffusionModel | None = None,
    grid: TimeGrid | None = None,
) -> LpEstimate:
    """``||X||_p`` for ``X = sampler(paths)``, drawn block by block.

    ``sampler`` receives a :class:`PathBatch` and returns one value per path.
    """
    model = model or DiffusionModel.bm()
    grid = grid or grid_from_times([0.0, 1.0])
    parts = map_path_blocks(
        lambda start, w: np.broadcast_to(
            np.asarray(sampler(PathBatch(model, grid, w, seed, start)), dtype=float), (w.shape[0],)
        ),
        model,
        grid,
        n_paths,
        seed,
    )
    return lp_norm(np.concatenate(parts), p, seed)


def paired_ratio(num, den, p: float, seed: int) -> RatioEstimate:
    """Ratio of two L_p norms with a paired bootstrap (same resampled paths)."""
    a = np.abs(np.asarray(num, dtype=float)) ** p
    b = np.abs(np.asarray(den, dtype=float)) ** p
    ok = np.isfinite(a) & np.isfinite(b)
    a, b = a[ok], b[ok]
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        ln = lp_norm(np.asarray(num)[ok], p, seed)
        ld = lp_norm(np.asarray(den)[ok], p, seed)
    ln.n_nonfinite = ld.n_nonfinite = int((~ok).sum())
    guarded = not ld.value > 10.0 * ld.std_err
    if guarded:
        return RatioEstimate(float("nan"), float("nan"), ln, ld, True)
    ratios = []
    for ix in _bootstrap_indices(a.size, seed):
        ratios.append((np.mean(a[ix], axis=1) / np.mean(b[ix], axis=1)) ** (1.0 / p))
    ratios = np.concatenate(ratios)
    return RatioEstimate(ln.value / ld.value, float(np.std(ratios, ddof=1)), ln, ld, False)


@dataclass
class EquivalenceRow:
    net_family: str
    n: int
    p: float
    strategy: str
    error: LpEstimate
    sq_fn: LpEstimate
    ratio: RatioEstimate
    n_paths: int
    seed: int
    n_tail_failures: int = 0


def equivalence_ratio(
    payoff: Payoff,
    model: DiffusionModel,
    net_family: str | Callable[[int], object],
    p_list: Iterable[float],
    n_list: Iterable[int],
    n_paths: int,
    seed: int = 0,
    *,
    grid_refine: int = 40,
    workers: int = 1,
) -> list[EquivalenceRow]:
    """``||C_1||_p / ||sq_fn||_p`` for each net of a family and each ``p``.

    ``net_family`` maps ``n`` to a net (or is one of ``"equidistant"``,
    ``"theta:<x>"``).  All nets share the same simulated paths.
    """
    name = net_family if isinstance(net_family, str) else getattr(net_family, "__name__", "custom")
    if isinstance(net_family, str):
        if net_family == "equidistant":
            make = equidistant
        elif net_family.startswith("theta:"):
            th = float(net_family.split(":", 1)[1])
            make = lambda n: theta_net(n, th)  # noqa: E731
        else:
            raise ValueError(f"unknown net family {net_family!r}")
    else:
        make = net_family
    n_list = list(n_list)
    nets = [make(n) for n in n_list]
    samples = simulate_errors(payoff, model, nets, n_paths, seed, grid_refine=grid_refine, workers=workers)
    rows = []
    for n, smp in zip(n_list, samples):
        for p in p_list:
            r = paired_ratio(smp.c_simple, smp.sq_fn, p, seed)
            rows.append(EquivalenceRow(name, n, p, GRADIENT.name, r.numerator, r.denominator, r, n_paths, seed, smp.n_tail_failures))
    return rows


@dataclass
class StrategyReport:
    estimates: dict
    best: str
    gradient_within_budget: bool


def strategy_comparison(
    payoff: Payoff,
    model: DiffusionModel,
    net,
    p: float,
    strategies: Sequence[Strategy],
    n_paths: int,
    seed: int = 0,
) -> StrategyReport:
    """``||C_1(., tau, v)||_p`` per strategy on common paths.

    The check ``min_v ||C(v)|| <= ||C(gradient)|| + 3 se`` always includes the
    gradient strategy.
    """
    strategies = list(strategies)
    if all(s.name != GRADIENT.name for s in strategies):
        strategies.insert(0, GRADIENT)
    (smp,) = simulate_errors(payoff, model, [net], n_paths, seed, strategies=strategies, square_function=False)
    est = {name: lp_norm(c, p, seed) for name, c in smp.c_strategy.items()}
    best = min(est, key=lambda k: est[k].value)
    g = est[GRADIENT.name]
    return StrategyReport(est, best, bool(est[best].value <= g.value + 3 * g.std_err))


# ---------------------------------------------------------------------------
# output

CSV_COLUMNS = (
    "net_family",
    "n",
    "p",
    "strategy",
    "lp_value",
    "std_err",
    "sq_fn_value",
    "sq_fn_std_err",
    "ratio",
    "n_paths",
    "seed",
)


def _fmt(x) -> str:
    if isinstance(x, float):
        return repr(x) if np.isfinite(x) else ("nan" if np.isnan(x) else ("inf" if x > 0 else "-inf"))
    return str(x)


def write_csv(rows: Iterable[EquivalenceRow], path=None, config: Mapping | None = None) -> str:
    """Write equivalence rows as CSV; a leading ``# config`` line records the run.

    Returns the CSV text; also writes it to ``path`` when given.
    """
    buf = io.StringIO()
    if config is not None:
        buf.write("# config " + json.dumps(config, sort_keys=True, default=str) + "\n")
    wr = csv.writer(buf, lineterminator="\n")
    wr.writerow(CSV_COLUMNS)
    for r in rows:
        wr.writerow(
            [
                r.net_family,
                r.n,
                _fmt(float(r.p)),
                r.strategy,
                _fmt(r.error.value),
                _fmt(r.error.std_err),
                _fmt(r.sq_fn.value),
                _fmt(r.sq_fn.std_err),
                _fmt(r.ratio.value),
                r.n_paths,
                r.seed,
            ]
        )
    text = buf.getvalue()
    if path is not None:
        with open(path, "w", newline="") as fh:
            fh.write(text)
    return text
