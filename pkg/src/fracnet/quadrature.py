"""Integrals on ``[0, 1)`` that are singular at the horizon ``t = 1``.

Weighted norms use the measure ``dt / (1 - t)``.  After the substitution
``u = -log(1 - t)`` this measure becomes ``du`` and the singular region is
equi-spaced, so curves are sampled uniformly in ``u`` and integrated with the
trapezoid rule there.  Everything is truncated at ``1 - delta``; the remainder
is estimated from the power law ``A (1 - t)**a`` fitted to the last samples.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from scipy import integrate

from .timenet import theta_net

__all__ = [
    "DEFAULT_DELTA",
    "DIVERGENCE_FACTOR",
    "WeightedCurve",
    "NormResult",
    "u_grid",
    "TailFit",
    "fit_tail_exponent",
    "weighted_q_norm",
    "kernel_interval_integral",
    "horizon_integrals",
    "net_kernel_sums",
    "KernelSums",
    "HardyReport",
    "hardy_constant",
    "hardy_check",
    "HARDY_FAMILY",
    "NetKernelReport",
    "net_kernel_equivalence_check",
]

DEFAULT_DELTA = 1e-6
DIVERGENCE_FACTOR = 10.0
# q = 2 is an equality case of the Hardy inequality; allow quadrature error
HARDY_RTOL = 1e-5


def u_grid(n: int = 20001, delta: float = DEFAULT_DELTA) -> np.ndarray:
    """Times ``1 - exp(-u)`` for ``n`` equi-spaced ``u`` in ``[0, -log(delta)]``."""
    u = np.linspace(0.0, -np.log(delta), n)
    return -np.expm1(-u)


@dataclass(frozen=True)
class WeightedCurve:
    """Non-negative samples ``phi(t)`` on an increasing grid in ``[0, 1 - delta]``."""

    t_grid: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.t_grid, dtype=float)
        v = np.asarray(self.values, dtype=float)
        if t.ndim != 1 or t.shape != v.shape or t.size < 2:
            raise ValueError("t_grid and values must be 1-D arrays of equal length >= 2")
        if not np.all(np.diff(t) > 0):
            raise ValueError("t_grid must be strictly increasing")
        if t[0] < 0 or t[-1] >= 1:
            raise ValueError("t_grid must lie in [0, 1)")
        if np.any(v < 0) or np.any(np.isnan(v)):
            raise ValueError("values must be non-negative")
        object.__setattr__(self, "t_grid", t)
        object.__setattr__(self, "values", v)

    @property
    def delta(self) -> float:
        return 1.0 - float(self.t_grid[-1])

    @classmethod
    def from_function(cls, phi: Callable, n: int = 20001, delta: float = DEFAULT_DELTA) -> "WeightedCurve":
        t = u_grid(n, delta)
        return cls(t, np.broadcast_to(np.asarray(phi(t), dtype=float), t.shape))

    def scaled(self, exponent: float) -> "WeightedCurve":
        """The curve ``(1 - t)**exponent * phi(t)``."""
        return WeightedCurve(self.t_grid, (1.0 - self.t_grid) ** exponent * self.values)


@dataclass(frozen=True)
class NormResult:
    value: float
    finite_part: float
    tail: float
    divergent: bool
    exponent: float
    q: float

    def __float__(self):
        return float(self.value)


@dataclass(frozen=True)
class TailFit:
    """Local model ``A (1 - t)**a * log(1/(1 - t))**b`` of a curve near the horizon."""

    A: float
    a: float
    b: float = 0.0

    def integral(self, q: float, delta: float) -> float:
        """``int_{1-delta}^1 (model)**q dt/(1-t)``; ``inf`` when not integrable."""
        if self.A == 0.0 or np.isinf(self.a):
            return 0.0
        aq, bq = self.a * q, self.b * q
        if aq <= 0:
            return np.inf
        L = -np.log(delta)
        if abs(bq) < 1e-12:
            return self.A**q * delta**aq / aq
        # with x = log(1/s) the integrand is A^q exp(-aq x) x^bq on [L, inf)
        val, _ = integrate.quad(lambda x: np.exp(-aq * (x - L) + bq * np.log(x / L)), L, np.inf)
        return float(self.A**q * delta**aq * L**bq * val)

    def grows(self, tol: float = 1e-3) -> bool:
        return bool(self.a < -tol or (abs(self.a) <= tol and self.b > tol))


def fit_tail_exponent(t, values, delta: float | None = None, decades: float = 2.0) -> TailFit:
    """Least-squares fit of ``values`` near the end of the grid.

    The model is ``A (1 - t)**a log(1/(1 - t))**b`` on the samples with
    ``1 - t <= delta * 10**decades`` (at least the last five).  The log factor
    captures borderline curves such as ``(1 - t)**a log(1/(1 - t))``; it is
    dropped (``b = 0``) when the window is too short to resolve it.
    """
    t = np.asarray(t, dtype=float)
    v = np.asarray(values, dtype=float)
    s = 1.0 - t
    if delta is None:
        delta = float(s[-1])
    sel = s <= delta * 10.0**decades
    if sel.sum() < 5:
        sel = np.zeros_like(sel)
        sel[-min(5, t.size) :] = True
    ss, vv = s[sel], v[sel]
    pos = vv > 0
    if pos.sum() < 2:
        return TailFit(0.0, np.inf)
    x = np.log(ss[pos])
    y = np.log(vv[pos])
    L = np.log(-x)
    if pos.sum() >= 10 and np.ptp(L) > 0.05:
        X = np.stack([np.ones_like(x), x, L], axis=1)
        (logA, a, b), *_ = np.linalg.lstsq(X, y, rcond=None)
        if abs(b) < 1e-6:
            a, logA = np.polyfit(x, y, 1)
            b = 0.0
    else:
        a, logA = np.polyfit(x, y, 1)
        b = 0.0
    return TailFit(float(np.exp(logA)), float(a), float(b))


def weighted_q_norm(curve: WeightedCurve, q: float) -> NormResult:
    """``(int_0^1 phi(t)**q dt/(1-t))**(1/q)``, or ``sup phi`` for ``q = inf``.

    The finite part is the trapezoid rule in ``u = -log(1 - t)`` up to the last
    sample.  The tail beyond it comes from the fitted tail model; the norm is
    flagged divergent when the tail exceeds ten times the finite part (for
    ``q = inf``: when the fitted model grows toward the horizon).
    """
    if q < 1:
        raise ValueError("q must be >= 1")
    t, v = curve.t_grid, curve.values
    fit = fit_tail_exponent(t, v)
    if np.isinf(q):
        finite = float(np.max(v))
        divergent = fit.grows()
        tail = np.inf if divergent else 0.0
        return NormResult(np.inf if divergent else finite, finite, tail, divergent, fit.a, q)
    u = -np.log1p(-t)
    finite = float(integrate.trapezoid(v**q, u))
    tail = fit.integral(q, curve.delta)
    divergent = bool(tail > DIVERGENCE_FACTOR * finite) if finite > 0 else bool(tail > 0)
    value = np.inf if divergent else (finite + tail) ** (1.0 / q)
    return NormResult(float(value), finite ** (1.0 / q), float(tail), divergent, fit.a, q)


# ---------------------------------------------------------------------------
# time integrals against singular kernels


def _loglog(i0, i1, s0, s1):
    """``int`` over ``[1 - s0, 1 - s1]`` of a positive integrand interpolated as a power of ``1 - t``.

    Exact for ``c (1 - t)**a``; falls back to the trapezoid rule when an
    endpoint value is not positive.
    """
    i0 = np.asarray(i0, dtype=float)
    i1 = np.asarray(i1, dtype=float)
    trap = 0.5 * (s0 - s1) * (i0 + i1)
    ok = (i0 > 0) & (i1 > 0)
    with np.errstate(divide="ignore", invalid="ignore"):
        a = np.log(i1 / i0) / np.log(s1 / s0)
        a1 = a + 1.0
        pw = np.where(np.abs(a1) > 1e-9, (i0 * s0 - i1 * s1) / a1, i0 * s0 * np.log(s0 / s1))
    return np.where(ok & np.isfinite(pw), pw, trap)


def _tail(i_last, h_prev, h_last, s_prev, s_last, weight_exponent):
    """Remainder ``int_{1 - s_last}^1`` of ``(1 - t)**weight_exponent * h(t)``.

    ``h`` is extrapolated with the power fitted through the last two samples.
    Returns ``(tail, failed)``; ``failed`` marks non-integrable fits (tail set to 0).
    """
    with np.errstate(divide="ignore", invalid="ignore"):
        a_h = np.log(h_last / h_prev) / np.log(s_last / s_prev)
    a = a_h + weight_exponent
    zero = ~(i_last > 0)
    valid = np.isfinite(a) & (a > -1.0)
    with np.errstate(divide="ignore", invalid="ignore"):
        tail = np.where(valid & ~zero, i_last * s_last / (a + 1.0), 0.0)
    # h_prev <= 0 with h_last > 0 gives no usable exponent; treat as flat h
    flat = ~np.isfinite(a_h) & ~zero
    tail = np.where(flat, i_last * s_last / (weight_exponent + 1.0), tail)
    failed = ~valid & ~zero & ~flat
    return tail, failed


def kernel_interval_integral(h_samples, t_samples, b: float) -> float:
    """``int_a^b (b - t) h(t) dt`` from samples of ``h`` on ``[a, b]``.

    Trapezoid rule in ``t``; when ``b = 1`` the power-law rule is used instead
    (exact for ``h ~ (1 - t)**a``), and samples stopping short of 1 are
    completed with the fitted-exponent tail.  A sample at ``t = 1`` itself is
    ignored there, since ``h`` is typically singular at the horizon.
    """
    t = np.asarray(t_samples, dtype=float)
    h = np.asarray(h_samples, dtype=float)
    if t.size == 0 or t.shape != h.shape:
        raise ValueError("need at least one sample and matching shapes")
    if np.any(np.diff(t) <= 0) or t[-1] > b or b > 1:
        raise ValueError("samples must be increasing inside [a, b] with b <= 1")
    if b < 1:
        if t[-1] != b:
            raise ValueError("samples must reach b when b < 1")
        integrand = (b - t) * h
        return float(integrate.trapezoid(integrand, t)) if t.size > 1 else 0.0
    if t[-1] == 1.0:
        t, h = t[:-1], h[:-1]
    if t.size == 0:
        raise ValueError("no samples strictly below the horizon")
    s = 1.0 - t
    integrand = s * h
    total = float(np.sum(_loglog(integrand[:-1], integrand[1:], s[:-1], s[1:])))
    if t.size >= 2:
        tail, failed = _tail(integrand[-1], h[-2], h[-1], s[-2], s[-1], 1.0)
        if failed:
            raise ArithmeticError("tail exponent fit is not integrable")
        total += float(tail)
    else:
        total += float(integrand[-1] * s[-1] / 2.0)
    return total


def horizon_integrals(h, t, weight_exponent: float):
    """Batched ``int_0^1 (1 - t)**weight_exponent h(t) dt`` per path.

    ``h`` has shape ``(P, K)`` on the increasing knots ``t`` ending at 1; its
    last column is ignored.  Segments use the trapezoid rule in ``t``, which is
    linear in the samples and hence unbiased for the mean curve when ``h`` is
    random; the remainder beyond the last interior knot comes from the
    fitted-exponent tail.  Returns ``(values, n_tail_failures)``.
    """
    t = np.asarray(t, dtype=float)
    h = np.asarray(h, dtype=float)
    s = 1.0 - t
    K = t.size
    h_in = h[:, : K - 1]
    iv = s[: K - 1] ** weight_exponent * h_in
    body = integrate.trapezoid(iv, t[: K - 1], axis=1)
    tail, failed = _tail(iv[:, -1], h_in[:, -2], h_in[:, -1], s[K - 3], s[K - 2], weight_exponent)
    return body + tail, int(np.count_nonzero(failed))


class KernelSums:
    """Prefix sums of one batch of integrands for many nets.

    ``h`` has shape ``(P, K)`` on knots ``t`` (last knot 1, last column
    ignored).  Calling the object with net knot indices ``idx`` (shape
    ``(n + 1,)`` or ``(P, n + 1)``) returns
    ``(sum_i int_{tau_{i-1}}^{tau_i} (tau_i - t) h(t) dt, n_tail_failures)``.
    Every interval uses the trapezoid rule in ``t`` (unbiased for the mean
    curve when ``h`` is random); the final interval is completed beyond the
    last interior knot by the fitted-exponent tail.
    """

    def __init__(self, h, t):
        t = np.asarray(t, dtype=float)
        h = np.asarray(h, dtype=float)
        P, K = h.shape
        s = 1.0 - t
        dt = np.diff(t[: K - 1])
        h_in = h[:, : K - 1]
        # trapezoid of (R - t) h on a segment equals R * a - b
        self.A = np.zeros((P, K - 1))
        self.B = np.zeros((P, K - 1))
        np.cumsum(0.5 * dt * (h_in[:, :-1] + h_in[:, 1:]), axis=1, out=self.A[:, 1:])
        th = t[: K - 1] * h_in
        np.cumsum(0.5 * dt * (th[:, :-1] + th[:, 1:]), axis=1, out=self.B[:, 1:])
        iv = s[: K - 1] * h_in
        self.tail, failed = _tail(iv[:, -1], h_in[:, -2], h_in[:, -1], s[K - 3], s[K - 2], 1.0)
        self.n_failed = int(np.count_nonzero(failed))
        self.t = t
        self.P = P

    def __call__(self, idx):
        idx = np.broadcast_to(np.asarray(idx), (self.P, np.shape(idx)[-1]))
        lo, hi = idx[:, :-1], idx[:, 1:].copy()
        right = self.t[hi]
        # the final interval stops at the last interior knot; the tail covers the rest
        hi[:, -1] = self.A.shape[1] - 1
        gather = np.take_along_axis
        A, B = self.A, self.B
        body = np.sum(right * (gather(A, hi, 1) - gather(A, lo, 1)) - (gather(B, hi, 1) - gather(B, lo, 1)), axis=1)
        return body + self.tail, self.n_failed


def net_kernel_sums(h, t, idx):
    """``sum_i int_{tau_{i-1}}^{tau_i} (tau_i - t) h(t) dt`` per path; see :class:`KernelSums`."""
    return KernelSums(h, t)(idx)


# ---------------------------------------------------------------------------
# Hardy-type inequality


def hardy_constant(theta: float, q: float) -> float:
    """Constant of the weighted Hardy inequality.

    ``(1 - theta)**-1/2`` for ``q >= 2``; ``((2 - theta)/(1 - theta))**(1/q)`` for
    ``1 <= q < 2`` (non-decreasing ``phi`` only).
    """
    if q >= 2:
        return (1.0 / (1.0 - theta)) ** 0.5
    return ((2.0 - theta) / (1.0 - theta)) ** (1.0 / q)


@dataclass
class HardyReport:
    lhs: NormResult
    rhs: NormResult
    constant: float
    ratio: float
    holds: bool


def hardy_check(phi, theta: float, q: float, n: int = 20001, delta: float = DEFAULT_DELTA) -> HardyReport:
    """Check ``||(1-t)^((1-theta)/2) (int_0^t phi^2)^(1/2)|| <= C ||(1-t)^(1-theta/2) phi||``.

    Both norms are weighted ``q``-norms.  ``phi`` is a callable or a
    :class:`WeightedCurve`; a callable is sampled on a ``u``-uniform grid.
    """
    if not 0 < theta < 1:
        raise ValueError("theta must lie in (0, 1)")
    curve = phi if isinstance(phi, WeightedCurve) else WeightedCurve.from_function(phi, n, delta)
    t, v = curve.t_grid, curve.values
    if q < 2 and np.any(np.diff(v) < -1e-12 * max(1.0, float(np.max(v)))):
        raise ValueError("for q < 2 the inequality needs a non-decreasing phi")
    s = 1.0 - t
    u = -np.log1p(-t)
    inner = integrate.cumulative_trapezoid(v * v * s, u, initial=0.0)
    if t[0] > 0:
        inner = inner + t[0] * v[0] ** 2
    lhs = weighted_q_norm(WeightedCurve(t, s ** ((1 - theta) / 2) * np.sqrt(inner)), q)
    rhs = weighted_q_norm(WeightedCurve(t, s ** (1 - theta / 2) * v), q)
    C = hardy_constant(theta, q)
    if rhs.divergent:
        holds = True
    elif lhs.divergent:
        holds = False
    else:
        holds = lhs.value <= C * rhs.value * (1 + HARDY_RTOL) + 1e-300
    ratio = lhs.value / rhs.value if rhs.value > 0 and np.isfinite(rhs.value) else float("nan")
    return HardyReport(lhs, rhs, C, float(ratio), bool(holds))


HARDY_FAMILY: list[tuple[str, Callable, bool]] = [
    ("one", lambda t: np.ones_like(t), True),
    ("inv_quarter_root", lambda t: (1 - t) ** -0.25, True),
    ("inv_sqrt", lambda t: (1 - t) ** -0.5, True),
    ("inv_three_quarter", lambda t: (1 - t) ** -0.75, True),
    ("linear", lambda t: t, True),
    ("square", lambda t: t * t, True),
    ("exp", np.exp, True),
    ("log", lambda t: -np.log1p(-t), True),
    ("step", lambda t: (t >= 0.5).astype(float), True),
    ("sqrt_decay", lambda t: (1 - t) ** 0.5, False),
    ("sin_bump", lambda t: np.sin(np.pi * t) ** 2, False),
    ("oscillating", lambda t: 1 + np.cos(10 * t), False),
]


# ---------------------------------------------------------------------------
# net kernel sums against the Riemann-Liouville weight


@dataclass
class NetKernelReport:
    theta: float
    n_list: list
    scaled_sums: np.ndarray
    weighted_integral: NormResult
    growth_slope: float
    sums_bounded: bool
    consistent: bool


def net_kernel_equivalence_check(phi: Callable, theta: float, n_list: Sequence[int] = (4, 16, 64, 256)) -> NetKernelReport:
    """Compare ``n sum_i int (t_i - u) phi(u) du`` over theta-nets with ``int (1-u)^(1-theta) phi(u) du``.

    The sums are bounded in ``n`` exactly when the weighted integral is finite.
    Boundedness is read off the log-log growth of the scaled sums (slope
    below 0.1 counts as bounded).
    """
    sums = []
    for n in n_list:
        k = theta_net(int(n), theta).knots
        tot = 0.0
        for a, b in zip(k[:-1], k[1:]):
            val, _ = integrate.quad(lambda x, b=b: (b - x) * phi(x), a, b, limit=200)
            tot += val
        sums.append(n * tot)
    sums = np.asarray(sums)
    weighted = weighted_q_norm(
        WeightedCurve.from_function(lambda t: (1 - t) ** (2 - theta) * np.asarray(phi(t), dtype=float)), 1.0
    )
    if len(n_list) >= 2 and np.all(sums > 0):
        slope = float(np.polyfit(np.log(np.asarray(n_list, dtype=float)), np.log(sums), 1)[0])
    else:
        slope = 0.0
    bounded = slope < 0.1
    return NetKernelReport(theta, list(n_list), sums, weighted, slope, bounded, bounded == (not weighted.divergent))
