"""Fractional smoothness of ``f(W_1)`` seen through conditional expectations.

With ``F(t, x) = E f(x + W_{1-t})`` the three curves

    d0(t) = ||f(W_1) - F(t, W_t)||_p,   d1(t) = ||grad F(t, W_t)||_p,   d2(t) = ||D^2 F(t, W_t)||_p

decay or blow up like powers of ``1 - t``; weighting them by
``(1-t)^(-theta/2)``, ``(1-t)^((1-theta)/2)`` and ``(1-t)^((2-theta)/2)`` and
taking ``L_q(dt/(1-t))`` norms gives three equivalent measures of smoothness
``theta``.  The Riemann-Liouville quantity

    D^theta = (int_0^1 (1-u)^(1-theta) H_G(u, Y_u)^2 du)^(1/2)

is estimated per path and its finiteness is decided from moment curves of
``H_G``.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from . import _gauss
from .model import DiffusionModel, build_grid, map_path_blocks, map_w_to_y
from .payoff import Payoff, _x_kinks, f_view, family, h_squared
from .quadrature import DEFAULT_DELTA, NormResult, WeightedCurve, horizon_integrals, u_grid, weighted_q_norm
from .simulator import LpEstimate, lp_norm

__all__ = [
    "SmoothnessCurve",
    "ThetaFit",
    "BesovNorm",
    "default_t_grid",
    "smoothness_curves",
    "besov_proxy_norm",
    "fit_theta",
    "riemann_liouville_norm",
    "h_moment_curves",
    "h_norm_curve",
    "derivative_bound_check",
    "proxy_consistency",
    "curves_csv",
]

FIT_WINDOW = (0.9, 1.0 - 1e-4)
PROXY_BUDGET = 25.0
_OUTER_OFFSETS = np.array([0.0, 0.25, 0.5, 1.0, 2.0, 4.0, 8.0, 16.0])


def default_t_grid(n: int = 701, delta: float = DEFAULT_DELTA) -> np.ndarray:
    """Times equi-spaced in ``-log(1 - t)`` from 0 to ``1 - delta``."""
    return u_grid(n, delta)


@dataclass
class SmoothnessCurve:
    payoff: str
    p: float
    t_grid: np.ndarray
    d0: np.ndarray
    d1: np.ndarray
    d2: np.ndarray
    method: np.ndarray
    f_norm: float
    std_err: dict = field(default_factory=dict)

    def __post_init__(self):
        for name in ("d0", "d1", "d2"):
            if np.any(getattr(self, name) < 0):
                raise ValueError(f"{name} must be non-negative")


@dataclass
class ThetaFit:
    theta_hat: float
    slope_ci: tuple
    window: tuple
    r_squared: float
    n_points: int
    boundary: bool = False


@dataclass
class BesovNorm:
    value: float
    weighted: NormResult
    f_norm: float
    which: int
    theta: float
    q: float

    @property
    def divergent(self) -> bool:
        return self.weighted.divergent


# ---------------------------------------------------------------------------
# curves


def _outer_breaks(kinks, s):
    if kinks.size == 0:
        return ()
    r = np.sqrt(s) * np.concatenate([-_OUTER_OFFSETS[::-1], _OUTER_OFFSETS[1:]])
    return (kinks[:, None] + r[None, :]).ravel()


def _quad_point(fv: Payoff, fam, t: float, p: float, kinks, n: int):
    """``(E|f(W_1) - F|^p, E|grad F|^p, E|D^2 F|^p)`` at one time, 1-d."""
    s = 1.0 - t
    x, wx = _gauss.piecewise_rule(np.zeros(1), np.sqrt(t), _outer_breaks(kinks, s), n)
    x, wx = x[0], wx[0]
    F = fam.G(t, x[:, None])
    z, wz = _gauss.piecewise_rule(x, np.sqrt(s), kinks, max(n // 2, 8))
    m0 = np.sum(wx * np.sum(wz * np.abs(fv.g(z[..., None]) - F[:, None]) ** p, axis=1))
    g1 = np.abs(fam.grad(t, x[:, None])[:, 0])
    g2 = np.abs(fam.hess(t, x[:, None])[:, 0, 0])
    return np.array([m0, np.sum(wx * g1**p), np.sum(wx * g2**p)])


def _mc_point(fv: Payoff, fam, t: float, p: float, n_paths: int, seed: int, key: int):
    """Moments and their standard errors by sampling ``(W_t, W_1)`` exactly."""
    d = fv.dim
    ss = np.random.SeedSequence(int(seed) & ((1 << 64) - 1), spawn_key=(1 << 20, key))
    rng = np.random.Generator(np.random.Philox(ss))
    wt = np.sqrt(t) * rng.standard_normal((n_paths, d))
    w1 = wt + np.sqrt(1.0 - t) * rng.standard_normal((n_paths, d))
    a0 = np.abs(fv.g(w1) - fam.G(t, wt)) ** p
    a1 = np.linalg.norm(fam.grad(t, wt), axis=-1) ** p
    a2 = np.sqrt(np.sum(fam.hess(t, wt) ** 2, axis=(-2, -1))) ** p
    a = np.stack([a0, a1, a2])
    return a.mean(axis=1), a.std(axis=1, ddof=1) / np.sqrt(n_paths)


def smoothness_curves(
    payoff: Payoff,
    p: float,
    t_grid=None,
    n_paths: int = 100_000,
    seed: int = 0,
    *,
    model: DiffusionModel | None = None,
    n_nodes: int = 32,
    tol: float = 1e-8,
    force_mc: bool = False,
) -> SmoothnessCurve:
    """Curves ``d0, d1, d2`` of ``payoff`` (driven by ``model``, default BM).

    One-dimensional payoffs use nested Gaussian quadrature on the exact joint
    law of ``(W_t, W_1)``, with the rule split at the payoff's kinks.  Points
    where the quadrature error estimate exceeds ``tol`` (relative), and all
    points for ``d >= 2``, fall back to Monte Carlo with ``n_paths`` samples.
    """
    model = model or DiffusionModel.bm(payoff.dim)
    fv = f_view(payoff, model)
    bm = DiffusionModel.bm(payoff.dim)
    fam = family(fv, bm)
    t = default_t_grid() if t_grid is None else np.asarray(t_grid, dtype=float)
    if np.any(t < 0) or np.any(t >= 1):
        raise ValueError("t_grid must lie in [0, 1)")
    kinks = np.asarray(fv.kinks, dtype=float)
    m = np.empty((3, t.size))
    se = np.zeros((3, t.size))
    method = np.empty(t.size, dtype=object)
    for j, tj in enumerate(t):
        if fv.dim == 1 and not force_mc:
            full = _quad_point(fv, fam, float(tj), p, kinks, n_nodes)
            half = _quad_point(fv, fam, float(tj), p, kinks, n_nodes // 2)
            if np.all(np.abs(full - half) <= tol * np.maximum(1.0, np.abs(full))):
                m[:, j] = full
                method[j] = "quadrature"
                continue
        m[:, j], se[:, j] = _mc_point(fv, fam, float(tj), p, n_paths, seed, j)
        method[j] = "monte_carlo"
    m = np.maximum(m, 0.0)
    d = m ** (1.0 / p)
    with np.errstate(divide="ignore", invalid="ignore"):
        d_se = np.where(m > 0, d * se / (p * m), 0.0)
    f_norm = _f_norm(fv, p, kinks, n_nodes, n_paths, seed)
    return SmoothnessCurve(
        fv.name, p, t, d[0], d[1], d[2], method, f_norm, {"d0": d_se[0], "d1": d_se[1], "d2": d_se[2]}
    )


def _f_norm(fv: Payoff, p: float, kinks, n: int, n_paths: int, seed: int) -> float:
    if fv.dim == 1:
        x, w = _gauss.piecewise_rule(np.zeros(1), 1.0, kinks, n)
        return float(np.sum(w[0] * np.abs(fv.g(x[0][:, None])) ** p) ** (1.0 / p))
    ss = np.random.SeedSequence(int(seed) & ((1 << 64) - 1), spawn_key=(1 << 21,))
    w1 = np.random.Generator(np.random.Philox(ss)).standard_normal((n_paths, fv.dim))
    return float(np.mean(np.abs(fv.g(w1)) ** p) ** (1.0 / p))


_EXPONENTS = {0: lambda th: -th / 2, 1: lambda th: (1 - th) / 2, 2: lambda th: (2 - th) / 2}


def besov_proxy_norm(curve: SmoothnessCurve, theta: float, q: float, which: int) -> BesovNorm:
    """``||f||_p + ||(1-t)^e d_which(t)||_{L_q(dt/(1-t))}`` with the exponent ``e`` set by ``which``."""
    if which not in _EXPONENTS:
        raise ValueError("which must be 0, 1 or 2")
    d = (curve.d0, curve.d1, curve.d2)[which]
    e = _EXPONENTS[which](theta)
    res = weighted_q_norm(WeightedCurve(curve.t_grid, (1.0 - curve.t_grid) ** e * d), q)
    return BesovNorm(curve.f_norm + res.value, res, curve.f_norm, which, theta, q)


def fit_theta(curve: SmoothnessCurve, window=FIT_WINDOW) -> ThetaFit:
    """``theta = 2 * slope`` of ``log d0`` against ``log(1 - t)`` on ``window``.

    The interval is the 95% confidence interval of the slope, doubled.
    ``boundary`` marks fits at the endpoint ``theta = 1`` (smooth payoffs),
    which lies outside the open range of fractional smoothness.
    """
    lo, hi = window
    if not 0 <= lo < hi < 1:
        raise ValueError("window must lie inside [0, 1)")
    t = curve.t_grid
    sel = (t >= lo) & (t <= hi) & (curve.d0 > 0)
    if sel.sum() < 5:
        raise ValueError("fewer than 5 usable points in the fit window")
    x = np.log1p(-t[sel])
    y = np.log(curve.d0[sel])
    weights = None
    se = curve.std_err.get("d0")
    if se is not None and np.any(se[sel] > 0):
        rel = se[sel] / curve.d0[sel]
        weights = 1.0 / np.maximum(rel, 1e-12) ** 2
    if weights is None:
        r = stats.linregress(x, y)
        slope, slope_se, r2 = r.slope, r.stderr, r.rvalue**2
    else:
        W = np.sqrt(weights)
        X = np.stack([np.ones_like(x), x], axis=1)
        coef, *_ = np.linalg.lstsq(X * W[:, None], y * W, rcond=None)
        resid = y - X @ coef
        dof = max(x.size - 2, 1)
        sigma2 = np.sum(weights * resid**2) / dof
        cov = sigma2 * np.linalg.inv((X * weights[:, None]).T @ X)
        slope, slope_se = coef[1], np.sqrt(cov[1, 1])
        r2 = 1.0 - np.sum(resid**2) / max(np.sum((y - y.mean()) ** 2), 1e-300)
    tq = stats.t.ppf(0.975, max(x.size - 2, 1))
    theta = 2.0 * slope
    ci = (2.0 * (slope - tq * slope_se), 2.0 * (slope + tq * slope_se))
    return ThetaFit(float(theta), (float(ci[0]), float(ci[1])), (lo, hi), float(r2), int(x.size), bool(theta > 0.98))


# ---------------------------------------------------------------------------
# Riemann-Liouville operator


def _h2_nodes(payoff, model, fam, t: float, kinks, j: int, n_nodes: int, n_paths: int, seed: int):
    """Values of ``H_G^2(t, Y_t)`` on quadrature nodes (1-d) or samples, with weights."""
    if payoff.dim == 1:
        x, w = _gauss.piecewise_rule(np.zeros(1), np.sqrt(t), _outer_breaks(kinks, 1.0 - t), n_nodes)
        x, w = x[0][:, None], w[0]
    else:
        ss = np.random.SeedSequence(int(seed) & ((1 << 64) - 1), spawn_key=(1 << 22, j))
        x = np.sqrt(t) * np.random.Generator(np.random.Philox(ss)).standard_normal((n_paths, payoff.dim))
        w = np.full(n_paths, 1.0 / n_paths)
    return h_squared(payoff, model, t, map_w_to_y(model, t, x), fam), w


def h_norm_curve(
    payoff: Payoff, model: DiffusionModel, r: float, t_grid=None, n_nodes: int = 32, n_paths: int = 100_000, seed: int = 0
):
    """``||H_G(t, Y_t)||_r`` on ``t_grid`` (``r = inf`` gives the supremum over the nodes).

    Quadrature against the Gaussian law of ``W_t`` in dimension one, sampling
    otherwise.
    """
    t = default_t_grid() if t_grid is None else np.asarray(t_grid, dtype=float)
    fam = family(payoff, model)
    kinks = _x_kinks(payoff, model) if payoff.dim == 1 else np.empty(0)
    out = np.empty(t.size)
    for j, tj in enumerate(t):
        h2, w = _h2_nodes(payoff, model, fam, float(tj), kinks, j, n_nodes, n_paths, seed)
        if np.isinf(r):
            out[j] = np.sqrt(np.max(h2[w > 0]))
        else:
            out[j] = np.sum(w * h2 ** (r / 2.0)) ** (1.0 / r)
    return t, out


def h_moment_curves(payoff: Payoff, model: DiffusionModel, p: float, t_grid=None, **kw):
    """``E H_G^2(t, Y_t)`` and ``||H_G^2(t, Y_t)||_{p/2}`` (``p >= 2``) on ``t_grid``."""
    t, n2 = h_norm_curve(payoff, model, 2.0, t_grid, **kw)
    _, npp = h_norm_curve(payoff, model, max(p, 2.0), t, **kw)
    return t, n2**2, npp**2


def riemann_liouville_norm(
    payoff: Payoff,
    model: DiffusionModel,
    theta: float,
    p: float,
    n_paths: int,
    seed: int = 0,
    *,
    grid_refine: int = 40,
    base: int = 256,
    workers: int = 1,
) -> LpEstimate:
    """``||D^theta||_p`` by simulation, with a moment-based divergence verdict.

    Each path integral uses the trapezoid rule on a grid refined
    geometrically toward ``t = 1`` plus the fitted-exponent tail; paths whose
    tail fit is not integrable are counted in ``n_divergent``.  Path-wise the
    integral is usually finite even when its moments are not, so the verdict
    comes from the curves of :func:`h_moment_curves`:
    ``int (1-u)^(1-theta) E H^2 du = inf`` makes the norm infinite (for
    ``p >= 2``), and finiteness of ``int (1-u)^(1-theta) ||H^2||_{p/2} du``
    makes it finite.  A divergent estimate has ``value = inf``.
    """
    if not 0 < theta <= 1:
        raise ValueError("theta must lie in (0, 1]")
    grid = build_grid([], refine=grid_refine, base=base)
    knots = grid.knots
    fam = family(payoff, model)

    def block(_, w):
        y = map_w_to_y(model, knots[None, :], w)
        h2 = np.empty(w.shape[:2])
        h2[:, :-1] = h_squared(payoff, model, knots[None, :-1], y[:, :-1], fam)
        h2[:, -1] = np.nan
        v, f = horizon_integrals(h2, knots, weight_exponent=1.0 - theta)
        return np.sqrt(np.maximum(v, 0.0)), f

    parts = map_path_blocks(block, model, grid, n_paths, seed, workers)
    fails = sum(f for _, f in parts)
    est = lp_norm(np.concatenate([v for v, _ in parts]), p, seed)
    t, mean, rmom = h_moment_curves(payoff, model, p, seed=seed)
    s = 1.0 - t
    lower = weighted_q_norm(WeightedCurve(t, s ** (2.0 - theta) * mean), 1.0)
    upper = weighted_q_norm(WeightedCurve(t, s ** (2.0 - theta) * rmom), 1.0)
    est.n_divergent = fails
    est.divergent = bool(lower.divergent and p >= 2)
    est.finite_certified = not upper.divergent
    est.raw_value = est.value
    if est.divergent:
        est.value = float("inf")
    return est


# ---------------------------------------------------------------------------
# consistency checks


@dataclass
class DerivativeBoundReport:
    sup_first: float
    sup_second: float
    finite: bool


def derivative_bound_check(curve: SmoothnessCurve) -> DerivativeBoundReport:
    """``sup (1-t)^(1/2) d1/d0`` and ``sup (1-t) d2/d0`` over points with ``d0 > 0``."""
    ok = curve.d0 > 0
    s = 1.0 - curve.t_grid[ok]
    r1 = np.sqrt(s) * curve.d1[ok] / curve.d0[ok]
    r2 = s * curve.d2[ok] / curve.d0[ok]
    a = float(np.max(r1)) if r1.size else 0.0
    b = float(np.max(r2)) if r2.size else 0.0
    return DerivativeBoundReport(a, b, bool(np.isfinite(a) and np.isfinite(b)))


@dataclass
class ProxyConsistency:
    norms: tuple
    spread: float
    all_finite: bool
    all_divergent: bool
    consistent: bool


def proxy_consistency(curve: SmoothnessCurve, theta: float, q: float, budget: float = PROXY_BUDGET) -> ProxyConsistency:
    """The three proxy norms agree up to ``budget`` or diverge together."""
    norms = tuple(besov_proxy_norm(curve, theta, q, k) for k in (0, 1, 2))
    flags = [n.divergent for n in norms]
    vals = np.array([n.value for n in norms])
    if not any(flags):
        spread = float(vals.max() / vals.min()) if vals.min() > 0 else float("inf")
        return ProxyConsistency(norms, spread, True, False, spread <= budget)
    return ProxyConsistency(norms, float("inf"), False, all(flags), all(flags))


def curves_csv(curve: SmoothnessCurve, path=None) -> str:
    """CSV with columns ``payoff, p, t, d0, d1, d2, method, d0_std_err, d1_std_err, d2_std_err``."""
    buf = io.StringIO()
    wr = csv.writer(buf, lineterminator="\n")
    wr.writerow(["payoff", "p", "t", "d0", "d1", "d2", "method", "d0_std_err", "d1_std_err", "d2_std_err"])
    se = curve.std_err
    zeros = np.zeros_like(curve.t_grid)
    for j, t in enumerate(curve.t_grid):
        wr.writerow(
            [
                curve.payoff,
                repr(float(curve.p)),
                repr(float(t)),
                repr(float(curve.d0[j])),
                repr(float(curve.d1[j])),
                repr(float(curve.d2[j])),
                curve.method[j],
                repr(float(se.get("d0", zeros)[j])),
                repr(float(se.get("d1", zeros)[j])),
                repr(float(se.get("d2", zeros)[j])),
            ]
        )
    text = buf.getvalue()
    if path is not None:
        with open(path, "w", newline="") as fh:
            fh.write(text)
    return text
