"""Gaussian expectation rules shared by the payoff and smoothness modules.

Expectations ``E fn(m + s Z)`` with ``Z ~ N(0, 1)`` are computed either with
probabilists' Gauss-Hermite nodes (smooth integrands) or with composite
Gauss-Legendre on ``[-12, 12]`` split at user-supplied breakpoints, which keeps
spectral accuracy for integrands that are smooth between known kinks.
"""

from __future__ import annotations

from functools import lru_cache

import numpy as np
from numpy.polynomial.hermite_e import hermegauss
from numpy.polynomial.legendre import leggauss

Z_MAX = 12.0
_BASE_BREAKS = np.array([-Z_MAX, -8.0, -5.0, -3.0, -1.5, 0.0, 1.5, 3.0, 5.0, 8.0, Z_MAX])
_INV_SQRT_2PI = 1.0 / np.sqrt(2.0 * np.pi)


def std_normal_pdf(z):
    return _INV_SQRT_2PI * np.exp(-0.5 * np.square(z))


@lru_cache(maxsize=None)
def hermite_rule(n: int) -> tuple[np.ndarray, np.ndarray]:
    """Nodes and weights with ``sum(w * f(x)) ~ E f(Z)``."""
    x, w = hermegauss(n)
    return x, w / np.sqrt(2.0 * np.pi)


@lru_cache(maxsize=None)
def legendre_rule(n: int) -> tuple[np.ndarray, np.ndarray]:
    return leggauss(n)


def piecewise_rule(mean, std: float, breaks=(), n: int = 32):
    """Nodes and weights for ``E fn(mean + std Z)`` per row of ``mean``.

    Parameters
    ----------
    mean : array_like, shape (M,)
    std : float
        Non-negative; ``std == 0`` returns the point mass at ``mean``.
    breaks : sequence of float
        Absolute abscissae where the integrand may be non-smooth.
    n : int
        Legendre nodes per piece.

    Returns
    -------
    x, w : ndarray, shape (M, N)
    """
    mean = np.atleast_1d(np.asarray(mean, dtype=float))
    if std <= 0:
        return mean[:, None].copy(), np.ones((mean.size, 1))
    breaks = np.asarray(breaks, dtype=float).ravel()
    kz = np.clip((breaks[None, :] - mean[:, None]) / std, -Z_MAX, Z_MAX)
    b = np.sort(
        np.concatenate([np.broadcast_to(_BASE_BREAKS, (mean.size, _BASE_BREAKS.size)), kz], axis=1),
        axis=1,
    )
    lo, hi = b[:, :-1], b[:, 1:]
    xg, wg = legendre_rule(n)
    half = 0.5 * (hi - lo)
    z = (0.5 * (hi + lo))[..., None] + half[..., None] * xg
    w = half[..., None] * wg * std_normal_pdf(z)
    m = mean.size
    return mean[:, None] + std * z.reshape(m, -1), w.reshape(m, -1)


def normal_expect(fn, mean, std: float, breaks=(), n: int = 32) -> np.ndarray:
    """``E fn(mean + std Z)`` for each entry of ``mean``.

    ``fn`` receives an array of shape ``(M, N)`` of abscissae, row ``i``
    belonging to ``mean[i]``, and must return an array of the same shape.
    """
    x, w = piecewise_rule(mean, std, breaks, n)
    return np.sum(fn(x) * w, axis=1)


def normal_expect_with_error(fn, mean, std: float, breaks=(), n: int = 32):
    """As :func:`normal_expect`, plus the difference to the half-order rule."""
    full = normal_expect(fn, mean, std, breaks, n)
    half = normal_expect(fn, mean, std, breaks, max(n // 2, 2))
    return full, np.abs(full - half)


def tensor_rule(dim: int, breaks=(), n: int = 32, hermite: int | None = None):
    """Standard-normal rule on ``R^dim`` as a tensor product of 1-D rules.

    Returns nodes ``z`` of shape ``(N, dim)`` and weights ``(N,)``.
    """
    if hermite:
        z1, w1 = hermite_rule(hermite)
    else:
        z1, w1 = piecewise_rule(np.zeros(1), 1.0, breaks, n)
        z1, w1 = z1[0], w1[0]
    grids = np.meshgrid(*([z1] * dim), indexing="ij")
    wgrids = np.meshgrid(*([w1] * dim), indexing="ij")
    z = np.stack([g.ravel() for g in grids], axis=-1)
    w = np.prod(np.stack([g.ravel() for g in wgrids], axis=-1), axis=-1)
    return z, w
