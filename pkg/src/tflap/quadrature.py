"""Quadrature building blocks shared by the stencil and source-term code.

All rules are returned on the unit interval [0, 1] so callers can map them
onto panels with a single affine transform.
"""
from __future__ import annotations

from functools import lru_cache

import numpy as np
from scipy.special import roots_jacobi, roots_legendre

TAIL_RTOL = 1e-16


@lru_cache(maxsize=None)
def gauss_legendre(order: int) -> tuple[np.ndarray, np.ndarray]:
    """Gauss-Legendre nodes and weights on [0, 1]."""
    x, w = roots_legendre(order)
    x = 0.5 * (x + 1.0)
    w = 0.5 * w
    x.setflags(write=False)
    w.setflags(write=False)
    return x, w


@lru_cache(maxsize=None)
def gauss_jacobi_power(order: int, exponent: float) -> tuple[np.ndarray, np.ndarray]:
    """Nodes/weights for int_0^1 s**exponent f(s) ds (exponent > -1)."""
    if exponent <= -1.0:
        raise ValueError("weight exponent must exceed -1")
    x, w = roots_jacobi(order, 0.0, exponent)
    s = 0.5 * (x + 1.0)
    w = w * 0.5 ** (exponent + 1.0)
    s.setflags(write=False)
    w.setflags(write=False)
    return s, w


def composite_legendre(a: float, b: float, panels: int, order: int) -> tuple[np.ndarray, np.ndarray]:
    """Composite Gauss-Legendre rule with equal panels on [a, b]."""
    x, w = gauss_legendre(order)
    edges = np.linspace(a, b, panels + 1)
    width = np.diff(edges)
    nodes = (edges[:-1, None] + width[:, None] * x[None, :]).ravel()
    weights = (width[:, None] * w[None, :]).ravel()
    return nodes, weights


def _tail_truncation_radius(a: np.ndarray, lam: float, beta: float) -> np.ndarray:
    # Rigorous lower bound of the tail integral over [a, a + delta].
    delta = np.minimum(a, 1.0 / lam)
    lower = delta * (a + delta) ** (-1.0 - beta) * np.exp(-lam * (a + delta))
    target = TAIL_RTOL * lower

    k = np.maximum(np.ceil(lam * a), 1.0)
    radius = np.maximum(a, k / lam)
    pending = np.exp(-lam * radius) * radius ** (-beta) / lam > target
    while np.any(pending):
        k = np.where(pending, k + 1.0, k)
        radius = np.maximum(a, k / lam)
        pending = np.exp(-lam * radius) * radius ** (-beta) / lam > target
    return radius


def radial_tail(a, lam: float, beta: float, order: int = 16, panel_width: float = 0.25) -> np.ndarray:
    """int_a^inf r**(-1-beta) exp(-lam r) dr, vectorized over ``a``.

    Closed form for lam == 0.  For lam > 0 the integral is truncated at a
    radius R* = max(a, k/lam) (smallest integer k meeting the tail bound)
    and integrated in the log variable t = ln(r/a) by composite Gauss-Legendre.
    """
    a = np.asarray(a, dtype=float)
    if np.any(a <= 0):
        raise ValueError("lower limit must be positive")
    if lam == 0.0:
        return a ** (-beta) / beta

    flat = a.ravel()
    radius = _tail_truncation_radius(flat, lam, beta)
    span = np.log(radius / flat)
    panels = max(1, int(np.ceil(span.max() / panel_width)))
    x, w = gauss_legendre(order)
    # per-element equal panels in t, shared panel count
    step = span / panels
    t = (np.arange(panels)[:, None] + x[None, :]).ravel()
    wt = np.tile(w, panels)
    r = flat[:, None] * np.exp(step[:, None] * t[None, :])
    vals = r ** (-beta) * np.exp(-lam * r)
    out = step * (vals @ wt)
    return out.reshape(a.shape)


def square_exterior_mass(half_side, lam: float, beta: float, theta_order: int = 32) -> np.ndarray:
    """Kernel mass exp(-lam r) r**(-2-beta) outside a centred square.

    Uses the octant symmetry: 8 * int_0^{pi/4} tail(half_side / cos t) dt.
    """
    half_side = np.asarray(half_side, dtype=float)
    x, w = gauss_legendre(theta_order)
    theta = 0.25 * np.pi * x
    sec = 1.0 / np.cos(theta)
    flat = half_side.ravel()
    if lam == 0.0:
        # radial part in closed form
        vals = (flat[:, None] * sec[None, :]) ** (-beta) / beta
    else:
        vals = radial_tail(flat[:, None] * sec[None, :], lam, beta)
    out = 8.0 * 0.25 * np.pi * (vals @ w)
    return out.reshape(half_side.shape)
