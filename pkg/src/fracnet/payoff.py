"""Terminal payoffs and their conditional-expectation families.

For a payoff ``g`` and a model ``Y`` the function
``G(t, y) = E(g(Y_1) | Y_t = y)`` and its first two space derivatives drive
everything downstream.  Catalog payoffs ship closed forms for both models;
any other ``g`` falls back to Gaussian quadrature against the exact transition
law, with derivatives obtained from Gaussian integration-by-parts weights.

Conventions: ``y`` has shape ``(..., d)``; ``t`` broadcasts against
``y.shape[:-1]``; ``G`` returns ``(...)``, ``grad`` ``(..., d)`` and ``hess``
``(..., d, d)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np
from scipy.special import ndtr

from . import _gauss
from .model import DiffusionModel, ModelKind, map_w_to_y

__all__ = [
    "AnalyticG",
    "Payoff",
    "HValue",
    "QuadratureError",
    "identity",
    "quadratic",
    "call",
    "binary",
    "product",
    "make_payoff",
    "CATALOG",
    "family",
    "conditional_expectation",
    "gradient",
    "hessian",
    "h_squared",
    "h_value",
    "f_view",
    "check_bm_gbm_hessian_identity",
    "fd_grad_hess",
    "fd_step",
]

_pdf = _gauss.std_normal_pdf


class QuadratureError(ArithmeticError):
    """Quadrature did not reach the requested tolerance."""

    def __init__(self, achieved: float, tolerance: float):
        self.achieved = achieved
        self.tolerance = tolerance
        super().__init__(f"quadrature error estimate {achieved:.3e} exceeds tolerance {tolerance:.3e}")


@dataclass(frozen=True)
class AnalyticG:
    """``G`` and its space derivatives on ``[0, 1) x E``; ``G`` extends to ``t = 1``."""

    G: Callable
    grad: Callable
    hess: Callable
    numeric: bool = False


@dataclass(frozen=True)
class HValue:
    value: float | np.ndarray

    def __post_init__(self):
        if np.any(np.asarray(self.value) < 0):
            raise ValueError("H_G is a norm and cannot be negative")

    def __float__(self):
        return float(self.value)


@dataclass(frozen=True)
class Payoff:
    """Terminal functional ``g: E -> R``.

    Attributes
    ----------
    analytic : mapping ModelKind -> AnalyticG
        Closed-form conditional expectation families, per driving model.
    kinks : tuple of float
        Coordinate values where ``g`` is not smooth (applied on every axis);
        used to split quadrature rules.
    theta : callable p -> theta, optional
        Known fractional smoothness of ``g(Y_1)`` in ``L_p``.
    """

    name: str
    g: Callable
    dim: int = 1
    analytic: Mapping[ModelKind, AnalyticG] = field(default_factory=dict)
    kinks: tuple = ()
    theta: Callable[[float], float] | None = None
    params: Mapping = field(default_factory=dict)

    def known_theta(self, p: float) -> float | None:
        return None if self.theta is None else float(self.theta(p))

    def __call__(self, y):
        return self.g(np.asarray(y, dtype=float))


# ---------------------------------------------------------------------------
# one-dimensional building blocks


@dataclass(frozen=True)
class _Factor:
    """Scalar family: ``g(v)`` and ``G, dG/dv, d2G/dv2`` as functions of ``(s, v)``, ``s = 1 - t > 0``."""

    g: Callable
    G: Callable
    G1: Callable
    G2: Callable


def _bm_factors(name: str, K: float) -> _Factor:
    if name == "identity":
        return _Factor(lambda v: v, lambda s, v: v, lambda s, v: np.ones_like(v), lambda s, v: np.zeros_like(v))
    if name == "quadratic":
        return _Factor(lambda v: v * v, lambda s, v: v * v + s, lambda s, v: 2.0 * v, lambda s, v: np.full_like(v, 2.0))
    if name == "call":
        def G(s, v):
            r = np.sqrt(s)
            z = (v - K) / r
            return (v - K) * ndtr(z) + r * _pdf(z)

        return _Factor(
            lambda v: np.maximum(v - K, 0.0),
            G,
            lambda s, v: ndtr((v - K) / np.sqrt(s)),
            lambda s, v: _pdf((v - K) / np.sqrt(s)) / np.sqrt(s),
        )
    if name == "binary":
        def G2(s, v):
            z = (v - K) / np.sqrt(s)
            return -z * _pdf(z) / s

        return _Factor(
            lambda v: (v >= K).astype(float),
            lambda s, v: ndtr((v - K) / np.sqrt(s)),
            lambda s, v: _pdf((v - K) / np.sqrt(s)) / np.sqrt(s),
            G2,
        )
    raise KeyError(name)


def _gbm_factors(name: str, K: float) -> _Factor:
    if name == "identity":
        return _bm_factors("identity", K)
    if name == "quadratic":
        return _Factor(
            lambda v: v * v,
            lambda s, v: v * v * np.exp(s),
            lambda s, v: 2.0 * v * np.exp(s),
            lambda s, v: np.broadcast_to(2.0 * np.exp(s), np.shape(v)).astype(float),
        )
    if K <= 0:
        raise ValueError("GBM strikes must be positive")

    def dpm(s, v):
        r = np.sqrt(s)
        m = np.log(v / K) / r
        return m + 0.5 * r, m - 0.5 * r

    if name == "call":
        def G(s, v):
            dp, dm = dpm(s, v)
            return v * ndtr(dp) - K * ndtr(dm)

        return _Factor(
            lambda v: np.maximum(v - K, 0.0),
            G,
            lambda s, v: ndtr(dpm(s, v)[0]),
            lambda s, v: _pdf(dpm(s, v)[0]) / (v * np.sqrt(s)),
        )
    if name == "binary":
        def G2(s, v):
            dp, dm = dpm(s, v)
            return -_pdf(dm) * dp / (v * v * s)

        return _Factor(
            lambda v: (v >= K).astype(float),
            lambda s, v: ndtr(dpm(s, v)[1]),
            lambda s, v: _pdf(dpm(s, v)[1]) / (v * np.sqrt(s)),
            G2,
        )
    raise KeyError(name)


def _horizon(t, y):
    t = np.asarray(t, dtype=float)
    s = np.broadcast_to(1.0 - t, y.shape[:-1])
    return s


def _single(f: _Factor) -> AnalyticG:
    def G(t, y):
        y = np.asarray(y, dtype=float)
        s = _horizon(t, y)
        v = y[..., 0]
        with np.errstate(divide="ignore", invalid="ignore"):
            out = f.G(np.where(s > 0, s, 1.0), v)
        return np.where(s > 0, out, f.g(v))

    def grad(t, y):
        y = np.asarray(y, dtype=float)
        s = _horizon(t, y)
        return f.G1(s, y[..., 0])[..., None] * np.ones(1)

    def hess(t, y):
        y = np.asarray(y, dtype=float)
        s = _horizon(t, y)
        return f.G2(s, y[..., 0])[..., None, None] * np.ones((1, 1))

    return AnalyticG(G, grad, hess)


def _additive(f: _Factor, dim: int) -> AnalyticG:
    """``G(t, y) = sum_k G_1(t, y_k)``."""

    def G(t, y):
        y = np.asarray(y, dtype=float)
        s = _horizon(t, y)[..., None]
        with np.errstate(divide="ignore", invalid="ignore"):
            out = f.G(np.where(s > 0, s, 1.0), y)
        return np.sum(np.where(s > 0, out, f.g(y)), axis=-1)

    def grad(t, y):
        y = np.asarray(y, dtype=float)
        return f.G1(_horizon(t, y)[..., None], y)

    def hess(t, y):
        y = np.asarray(y, dtype=float)
        diag = f.G2(_horizon(t, y)[..., None], y)
        return diag[..., :, None] * np.eye(dim)

    return AnalyticG(G, grad, hess)


def _product(factors: Sequence[_Factor]) -> AnalyticG:
    """``G(t, y) = prod_k G_k(t, y_k)``; factors are independent under the model."""
    d = len(factors)

    def parts(t, y):
        y = np.asarray(y, dtype=float)
        s = _horizon(t, y)
        g0 = [fk.G(s, y[..., k]) for k, fk in enumerate(factors)]
        g1 = [fk.G1(s, y[..., k]) for k, fk in enumerate(factors)]
        g2 = [fk.G2(s, y[..., k]) for k, fk in enumerate(factors)]
        return g0, g1, g2

    def prod_except(vals, skip):
        out = np.ones_like(vals[0])
        for j, v in enumerate(vals):
            if j not in skip:
                out = out * v
        return out

    def G(t, y):
        y = np.asarray(y, dtype=float)
        s = _horizon(t, y)
        with np.errstate(divide="ignore", invalid="ignore"):
            vals = [fk.G(np.where(s > 0, s, 1.0), y[..., k]) for k, fk in enumerate(factors)]
        inner = prod_except(vals, ())
        term = prod_except([fk.g(y[..., k]) for k, fk in enumerate(factors)], ())
        return np.where(s > 0, inner, term)

    def grad(t, y):
        g0, g1, _ = parts(t, y)
        return np.stack([g1[k] * prod_except(g0, {k}) for k in range(d)], axis=-1)

    def hess(t, y):
        g0, g1, g2 = parts(t, y)
        rows = []
        for k in range(d):
            row = []
            for l in range(d):
                if k == l:
                    row.append(g2[k] * prod_except(g0, {k}))
                else:
                    row.append(g1[k] * g1[l] * prod_except(g0, {k, l}))
            rows.append(np.stack(row, axis=-1))
        return np.stack(rows, axis=-2)

    return AnalyticG(G, grad, hess)


def _theta_smooth(p):
    return 1.0


def _theta_binary(p):
    return 1.0 / p


def _catalog_payoff(name: str, dim: int, K: float, theta, kinks) -> Payoff:
    bm = _bm_factors(name, K)
    families = {ModelKind.BM: (_single(bm) if dim == 1 else _additive(bm, dim))}
    try:
        gbm = _gbm_factors(name, K)
    except ValueError:
        gbm = None
    if gbm is not None:
        families[ModelKind.GBM] = _single(gbm) if dim == 1 else _additive(gbm, dim)

    def g(y):
        y = np.asarray(y, dtype=float)
        return np.sum(bm.g(y), axis=-1)

    params = {} if name in ("identity", "quadratic") else {"K": K}
    return Payoff(name, g, dim, families, kinks, theta, params)


def identity(dim: int = 1) -> Payoff:
    """``g(y) = y_1 + ... + y_d``."""
    return _catalog_payoff("identity", dim, 0.0, _theta_smooth, ())


def quadratic(dim: int = 1) -> Payoff:
    """``g(y) = |y|^2``."""
    return _catalog_payoff("quadratic", dim, 0.0, _theta_smooth, ())


def call(K: float = 1.0) -> Payoff:
    """European call ``(y - K)_+``: Black-Scholes under GBM, Bachelier under BM."""
    return _catalog_payoff("call", 1, float(K), _theta_smooth, (float(K),))


def binary(K: float = 0.0) -> Payoff:
    """Digital ``1_{[K, inf)}(y)``.  GBM requires ``K > 0``."""
    return _catalog_payoff("binary", 1, float(K), _theta_binary, (float(K),))


def product(*factors: Payoff) -> Payoff:
    """Separable product ``prod_k g_k(y_k)`` of one-dimensional catalog payoffs."""
    if len(factors) < 1 or any(f.dim != 1 or f.name not in ("identity", "quadratic", "call", "binary") for f in factors):
        raise ValueError("product() takes one-dimensional catalog payoffs")
    K = [f.params.get("K", 0.0) for f in factors]
    families = {ModelKind.BM: _product([_bm_factors(f.name, k) for f, k in zip(factors, K)])}
    try:
        families[ModelKind.GBM] = _product([_gbm_factors(f.name, k) for f, k in zip(factors, K)])
    except ValueError:
        pass
    gs = [f.g for f in factors]

    def g(y):
        y = np.asarray(y, dtype=float)
        out = np.ones(y.shape[:-1])
        for k, gk in enumerate(gs):
            out = out * gk(y[..., k : k + 1])
        return out

    kinks = tuple(sorted({k for f in factors for k in f.kinks}))
    thetas = [f.theta for f in factors]

    def theta(p):
        return min(th(p) for th in thetas)

    name = "product(" + ",".join(f.name for f in factors) + ")"
    return Payoff(name, g, len(factors), families, kinks, theta, {"factors": [f.name for f in factors], "K": K})


CATALOG = {
    "identity": identity,
    "quadratic": quadratic,
    "call": call,
    "binary": binary,
}


def make_payoff(name: str, dim: int = 1, **params) -> Payoff:
    """Catalog payoff by name, e.g. ``make_payoff("call", K=1.0)``.

    ``name`` may also be ``"product:binary,call"``; strikes are then given as
    ``K`` (shared) or a sequence.
    """
    if name.startswith("product:"):
        parts = name.split(":", 1)[1].split(",")
        K = params.get("K", 0.0)
        Ks = list(K) if isinstance(K, (list, tuple)) else [K] * len(parts)
        facs = []
        for part, k in zip(parts, Ks):
            facs.append(CATALOG[part](K=k) if part in ("call", "binary") else CATALOG[part]())
        return product(*facs)
    if name not in CATALOG:
        raise KeyError(f"unknown payoff {name!r}; choose from {sorted(CATALOG)}")
    if name in ("identity", "quadratic"):
        return CATALOG[name](dim=dim)
    if dim != 1:
        raise ValueError(f"{name} is one-dimensional; use product: for d > 1")
    return CATALOG[name](K=float(params.get("K", 1.0 if name == "call" else 0.0)))


# ---------------------------------------------------------------------------
# quadrature fallback


def _x_kinks(payoff: Payoff, model: DiffusionModel) -> np.ndarray:
    k = np.asarray(payoff.kinks, dtype=float)
    if model.is_gbm:
        k = k[k > 0]
        return np.log(k) + 0.5
    return k


def _f_on_x(payoff: Payoff, model: DiffusionModel) -> Callable:
    if model.is_gbm:
        return lambda x: payoff.g(np.exp(x - 0.5))
    return payoff.g


def _quad_moments(payoff, model, t, x, tol=None, n=32, hermite=128):
    """``E f(x + sqrt(s) Z)`` with IBP weights for the first two derivatives.

    Returns ``(F, gradF, hessF, err)`` for one point ``x`` of shape ``(d,)``.
    """
    d = payoff.dim
    if d > 3:
        raise ValueError("quadrature fallback supports d <= 3")
    f = _f_on_x(payoff, model)
    s = 1.0 - t
    if s <= 0:
        return float(f(x)), np.full(d, np.nan), np.full((d, d), np.nan), 0.0
    r = math.sqrt(s)
    kinks = _x_kinks(payoff, model)

    def rule(nn):
        if kinks.size == 0:
            z, w = _gauss.tensor_rule(d, hermite=nn if nn >= 2 else 2)
            return z, w
        axes = []
        for k in range(d):
            zk, wk = _gauss.piecewise_rule(np.zeros(1), 1.0, (kinks - x[k]) / r, nn if d == 1 else max(nn // 2, 4))
            axes.append((zk[0], wk[0]))
        zs = np.meshgrid(*[a[0] for a in axes], indexing="ij")
        ws = np.meshgrid(*[a[1] for a in axes], indexing="ij")
        z = np.stack([g.ravel() for g in zs], axis=-1)
        w = np.prod(np.stack([g.ravel() for g in ws], axis=-1), axis=-1)
        return z, w

    def moments(nn):
        z, w = rule(nn)
        fx = f(x[None, :] + r * z)
        F = np.sum(w * fx)
        grad = np.sum((w * fx)[:, None] * z, axis=0) / r
        hz = z[:, :, None] * z[:, None, :] - np.eye(d)
        hess = np.sum((w * fx)[:, None, None] * hz, axis=0) / s
        return F, grad, hess

    full = moments(n if kinks.size else hermite)
    half = moments(n // 2 if kinks.size else hermite // 2)
    err = abs(full[0] - half[0])
    if tol is not None and err > tol * max(1.0, abs(full[0])):
        raise QuadratureError(err, tol)
    return full[0], full[1], full[2], err


def _quadrature_family(payoff: Payoff, model: DiffusionModel, tol=None) -> AnalyticG:
    d = payoff.dim

    def evaluate(t, y, which):
        y = np.asarray(y, dtype=float)
        t = np.broadcast_to(np.asarray(t, dtype=float), y.shape[:-1])
        x = np.log(y) + 0.5 * t[..., None] if model.is_gbm else y
        flat_x = x.reshape(-1, d)
        flat_t = t.ravel()
        outs = []
        for ti, xi in zip(flat_t, flat_x):
            F, gx, hx, _ = _quad_moments(payoff, model, float(ti), xi, tol=tol)
            if which == 0:
                outs.append(F)
            elif not model.is_gbm:
                outs.append(gx if which == 1 else hx)
            else:
                yi = np.exp(xi - 0.5 * ti)
                if which == 1:
                    outs.append(gx / yi)
                else:
                    outs.append((hx - np.diag(gx)) / np.outer(yi, yi))
        shape = y.shape[:-1] + ((), (d,), (d, d))[which]
        return np.asarray(outs, dtype=float).reshape(shape)

    return AnalyticG(
        lambda t, y: evaluate(t, y, 0),
        lambda t, y: evaluate(t, y, 1),
        lambda t, y: evaluate(t, y, 2),
        numeric=True,
    )


# ---------------------------------------------------------------------------
# public operations


def _check_args(payoff: Payoff, model: DiffusionModel, t, y):
    if payoff.dim != model.dim:
        raise ValueError(f"payoff dimension {payoff.dim} does not match model dimension {model.dim}")
    t = np.asarray(t, dtype=float)
    if np.any((t < 0) | (t > 1)):
        raise ValueError("t must lie in [0, 1]")
    y = np.asarray(y, dtype=float)
    if y.ndim == 0:
        y = y[None]
    if not np.all(model.in_domain(y)):
        raise ValueError("y must lie in the state space of the model")
    return t, y


def family(payoff: Payoff, model: DiffusionModel, *, tol=None) -> AnalyticG:
    """Closed-form family when available, else the quadrature fallback."""
    fam = payoff.analytic.get(model.kind)
    return fam if fam is not None else _quadrature_family(payoff, model, tol)


def conditional_expectation(payoff: Payoff, model: DiffusionModel, t, y, *, quadrature: bool = False, tol=1e-8):
    """``G(t, y) = E(g(Y_1) | Y_t = y)``.

    With ``quadrature=True`` the closed form is bypassed.  The quadrature path
    raises :class:`QuadratureError` when its error estimate exceeds ``tol``
    (relative to ``max(1, |G|)``).
    """
    t, y = _check_args(payoff, model, t, y)
    fam = _quadrature_family(payoff, model, tol) if quadrature else family(payoff, model, tol=tol)
    out = fam.G(t, y)
    return float(out) if np.ndim(out) == 0 else out


def gradient(payoff: Payoff, model: DiffusionModel, t, y) -> np.ndarray:
    t, y = _check_args(payoff, model, t, y)
    return family(payoff, model).grad(t, y)


def hessian(payoff: Payoff, model: DiffusionModel, t, y) -> np.ndarray:
    t, y = _check_args(payoff, model, t, y)
    return family(payoff, model).hess(t, y)


def h_squared(payoff: Payoff, model: DiffusionModel, t, y, fam: AnalyticG | None = None) -> np.ndarray:
    """``H_G^2 = sum_{k,l} (sigma_kk sigma_ll d2G/dy_k dy_l)^2``, vectorized, no validation."""
    y = np.asarray(y, dtype=float)
    fam = fam or family(payoff, model)
    h = fam.hess(t, y)
    if model.is_gbm:
        h = h * y[..., :, None] * y[..., None, :]
    return np.sum(h * h, axis=(-2, -1))


def h_value(payoff: Payoff, model: DiffusionModel, t, y) -> HValue:
    """Curvature ``H_G(t, y)``; the horizon ``t = 1`` is singular and rejected."""
    t, y = _check_args(payoff, model, t, y)
    if np.any(t >= 1):
        raise ValueError("H_G is undefined at t = 1")
    v = np.sqrt(h_squared(payoff, model, t, y))
    return HValue(float(v) if np.ndim(v) == 0 else v)


def f_view(payoff: Payoff, model: DiffusionModel) -> Payoff:
    """The same terminal variable written as ``f(W_1)``.

    Under GBM ``f(x) = g(exp(x - 1/2))`` and ``F(t, x) = G(t, y(t))`` with
    ``y_k(t) = exp(x_k - t/2)``; under BM the payoff is returned unchanged.
    """
    if not model.is_gbm:
        return payoff
    gfam = payoff.analytic.get(ModelKind.GBM)
    families = {}
    if gfam is not None:
        def to_y(t, x):
            return map_w_to_y(model, np.broadcast_to(np.asarray(t, dtype=float), np.shape(x)[:-1]), x)

        def F(t, x):
            return gfam.G(t, to_y(t, x))

        def gradF(t, x):
            y = to_y(t, x)
            return gfam.grad(t, y) * y

        def hessF(t, x):
            y = to_y(t, x)
            g1 = gfam.grad(t, y) * y
            h = gfam.hess(t, y) * y[..., :, None] * y[..., None, :]
            return h + g1[..., :, None] * np.eye(payoff.dim)

        families[ModelKind.BM] = AnalyticG(F, gradF, hessF)
    g = payoff.g

    def f(x):
        return g(np.exp(np.asarray(x, dtype=float) - 0.5))

    kinks = tuple(float(np.log(k) + 0.5) for k in payoff.kinks if k > 0)
    return Payoff(f"{payoff.name}@gbm", f, payoff.dim, families, kinks, payoff.theta, dict(payoff.params))


# ---------------------------------------------------------------------------
# finite differences

_D1 = np.array([1 / 280, -4 / 105, 1 / 5, -4 / 5, 0.0, 4 / 5, -1 / 5, 4 / 105, -1 / 280])
_D2 = np.array([-1 / 560, 8 / 315, -1 / 5, 8 / 5, -205 / 72, 8 / 5, -1 / 5, 8 / 315, -1 / 560])
_OFFSETS = np.arange(-4, 5)


def fd_step(t) -> np.ndarray:
    """Finite-difference step scaled to the diffusion length ``sqrt(1 - t)``."""
    return 0.1 * np.sqrt(1.0 - np.asarray(t, dtype=float))


def fd_grad_hess(fun: Callable, x, h):
    """Eighth-order central differences of a scalar field.

    ``fun`` maps ``(..., d)`` to ``(...)``; ``x`` is one point ``(d,)``.
    """
    x = np.asarray(x, dtype=float)
    d = x.size
    eye = np.eye(d)
    grad = np.empty(d)
    hess = np.empty((d, d))
    for k in range(d):
        pts = x + np.outer(_OFFSETS * h, eye[k])
        vals = fun(pts)
        grad[k] = _D1 @ vals / h
        hess[k, k] = _D2 @ vals / (h * h)
    for k in range(d):
        for l in range(k + 1, d):
            a, b = np.meshgrid(_OFFSETS * h, _OFFSETS * h, indexing="ij")
            pts = x + a[..., None] * eye[k] + b[..., None] * eye[l]
            vals = fun(pts.reshape(-1, d)).reshape(a.shape)
            hess[k, l] = hess[l, k] = _D1 @ vals @ _D1 / (h * h)
    return grad, hess


@dataclass
class HessianIdentityReport:
    max_residual: float
    residuals: np.ndarray
    lhs: np.ndarray
    rhs: np.ndarray


def check_bm_gbm_hessian_identity(payoff: Payoff, probes) -> HessianIdentityReport:
    """Compare ``y_k y_l d2G/dy_k dy_l`` with ``d2F/dx_k dx_l - delta_kl dF/dx_k``.

    The left side uses the GBM family of ``payoff``; the right side is a finite
    difference of ``F(t, x) = G(t, y(t))`` in ``x``.  Residuals are
    ``|L - R| / max(1, |L|, |R|)`` (max over matrix entries).
    """
    gfam = payoff.analytic.get(ModelKind.GBM)
    if gfam is None:
        raise ValueError("payoff has no GBM family")
    res, lhs_all, rhs_all = [], [], []
    for t, x in probes:
        t = float(t)
        if t > 1 - 1e-3:
            raise ValueError("probes need t <= 1 - 1e-3")
        x = np.atleast_1d(np.asarray(x, dtype=float))
        y = np.exp(x - 0.5 * t)
        lhs = gfam.hess(t, y) * np.outer(y, y)

        def F(xx, t=t):
            return gfam.G(t, np.exp(xx - 0.5 * t))

        g1, h2 = fd_grad_hess(F, x, float(fd_step(t)))
        rhs = h2 - np.diag(g1)
        scale = max(1.0, float(np.max(np.abs(lhs))), float(np.max(np.abs(rhs))))
        res.append(float(np.max(np.abs(lhs - rhs))) / scale)
        lhs_all.append(lhs)
        rhs_all.append(rhs)
    res = np.asarray(res)
    return HessianIdentityReport(float(res.max()) if res.size else 0.0, res, np.asarray(lhs_all), np.asarray(rhs_all))
