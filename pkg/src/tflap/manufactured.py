"""Reference source terms f = -(Delta + lam)^{beta/2} u for known u.

For a node (x, y) the plane is split into four pieces: the exterior of the
square A1 (half-side r1, contains Omega), A1 \\ Omega, Omega \\ A2 and the
inscribed square A2 (half-side r2).  The far field and the annulus are
regular; the A2 part carries the weak singularity and is integrated in
polar coordinates with a Gauss-Jacobi radial rule.
"""
from __future__ import annotations

import csv
import math
import os
import tempfile
from dataclasses import dataclass
from pathlib import Path
from typing import Callable

import numpy as np
from numpy.polynomial import Polynomial

from .operator import GridFunction, node_coordinates
from .quadrature import gauss_jacobi_power, gauss_legendre, square_exterior_mass
from .weights import ProblemConfig

_CHUNK = 256


@dataclass(frozen=True, eq=False)
class TestFunction:
    """A compactly supported function on Omega = (-l, l)^2.

    ``sym_diff(x, y, xi, eta)`` is u(x+xi, y+eta) + u(x-xi, y+eta) +
    u(x+xi, y-eta) + u(x-xi, y-eta) - 4 u(x, y).  ``psi(x, y, r, c, s)`` is
    sym_diff / r^2 in polar form (xi = r c, eta = r s), valid while all four
    points stay in the closed domain.  Built-ins evaluate it without
    cancellation; the generic fallback divides the four-point difference.
    """

    __test__ = False  # not a pytest class

    name: str
    value: Callable
    sym_diff: Callable
    psi: Callable
    regularity: str = "C2"
    symmetric: bool = False
    l: float = 1.0


def _bump_parts(k: int, l: float):
    # P(t) = (1 - (t/l)^2)^k and its even-order Taylor remainder pieces
    P = Polynomial([1.0, 0.0, -1.0 / l**2]) ** k
    derivs = []
    a = 2
    while a <= P.degree():
        derivs.append((a, P.deriv(a) / math.factorial(a)))
        a += 2
    return P, derivs


def bump(k: int, l: float = 1.0, name: str | None = None) -> TestFunction:
    """u = (1 - (x/l)^2)^k (1 - (y/l)^2)^k in Omega, zero outside."""
    P, derivs = _bump_parts(k, l)

    def inside(x, y):
        return (np.abs(x) < l) & (np.abs(y) < l)

    def value(x, y):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        return np.where(inside(x, y), P(x) * P(y), 0.0)

    def remainder(t, d):
        # A(t, d) = sum_{a >= 2 even} P^(a)(t) d^(a-2) / a!
        d2 = d * d
        out = np.zeros(np.broadcast(t, d).shape)
        for a, Da in reversed(derivs):
            out = out * d2 + Da(t)
        return out

    def psi(x, y, r, c, s):
        Ax = remainder(x, r * c)
        Ay = remainder(y, r * s)
        c2 = c * c
        s2 = s * s
        return 4.0 * (c2 * Ax * P(y) + s2 * Ay * P(x) + r * r * c2 * s2 * Ax * Ay)

    def sym_diff(x, y, xi, eta):
        x, y, xi, eta = np.broadcast_arrays(*(np.asarray(v, dtype=float) for v in (x, y, xi, eta)))
        direct = (value(x + xi, y + eta) + value(x - xi, y + eta) + value(x + xi, y - eta)
                  + value(x - xi, y - eta) - 4.0 * value(x, y))
        ok = (np.abs(x) + np.abs(xi) <= l) & (np.abs(y) + np.abs(eta) <= l)
        Ax = remainder(x, xi)
        Ay = remainder(y, eta)
        expanded = 4.0 * (xi * xi * Ax * P(y) + eta * eta * Ay * P(x) + xi * xi * eta * eta * Ax * Ay)
        return np.where(ok, expanded, direct)

    regularity = "C2" if k >= 3 else "C1"
    return TestFunction(name or f"bump{k}", value, sym_diff, psi, regularity, True, l)


def u1(l: float = 1.0) -> TestFunction:
    return bump(3, l, "u1")


def u2(l: float = 1.0) -> TestFunction:
    return bump(2, l, "u2")


def zero_function(l: float = 1.0) -> TestFunction:
    def value(x, y):
        return np.zeros(np.broadcast(x, y).shape)

    def sym_diff(x, y, xi, eta):
        return np.zeros(np.broadcast(x, y, xi, eta).shape)

    def psi(x, y, r, c, s):
        return np.zeros(np.broadcast(x, y, r, c, s).shape)

    return TestFunction("zero", value, sym_diff, psi, "C-inf", True, l)


def from_callable(name: str, func: Callable, l: float = 1.0, symmetric: bool = False) -> TestFunction:
    """Generic test function; ``func`` must vanish outside Omega.

    The four-point difference loses digits at small radii, so source terms
    are good to roughly 1e-7 near boundary-adjacent nodes.
    """

    def sym_diff(x, y, xi, eta):
        return func(x + xi, y + eta) + func(x - xi, y + eta) + func(x + xi, y - eta) + func(x - xi, y - eta) - 4.0 * func(x, y)

    def psi(x, y, r, c, s):
        return sym_diff(x, y, r * c, r * s) / (r * r)

    return TestFunction(name, func, sym_diff, psi, "generic", symmetric, l)


BUILTIN = {"u1": u1, "u2": u2, "zero": zero_function}


@dataclass(frozen=True)
class RegionGeometry:
    """Split radii around (x, y): A1 has half-side r1, A2 half-side r2."""

    x: np.ndarray
    y: np.ndarray
    r1: np.ndarray
    r2: np.ndarray
    l: float


def region_radii(x, y, l: float = 1.0) -> RegionGeometry:
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if np.any(np.abs(x) >= l) or np.any(np.abs(y) >= l):
        raise ValueError("point must lie strictly inside Omega")
    ax, ay = np.abs(x), np.abs(y)
    r1 = l + np.maximum(ax, ay)
    r2 = l - np.maximum(ax, ay)
    return RegionGeometry(x, y, r1, r2, l)


def far_field_deficit(geom: RegionGeometry, u_center, lam: float, beta: float) -> np.ndarray:
    """Contribution of R^2 \\ A1, where only -u(x, y) survives."""
    u_center = np.asarray(u_center, dtype=float)
    return -u_center * _mass_outside(geom.r1, lam, beta)


def _mass_outside(half_side, lam, beta):
    # square_exterior_mass over the distinct radii only
    half_side = np.asarray(half_side, dtype=float)
    uniq, inv = np.unique(half_side, return_inverse=True)
    return square_exterior_mass(uniq, lam, beta)[inv].reshape(half_side.shape)


def _octant_rule(theta_panels: int, theta_order: int):
    x, w = gauss_legendre(theta_order)
    width = 0.25 * math.pi / theta_panels
    t = ((np.arange(theta_panels)[:, None] + x[None, :]) * width).ravel()
    wt = np.tile(w * width, theta_panels)
    return t, wt


def near_singular(geom: RegionGeometry, tf: TestFunction, lam: float, beta: float,
                  radial_order: int = 64, theta_panels: int = 8, theta_order: int = 16,
                  first_octant_only: bool = False) -> np.ndarray:
    """Integral over A2 of (u(.) - u(x, y)) times the kernel.

    Written as int_0^{pi/2} int_0^{R(theta)} r^(1-beta) psi e^(-lam r) dr dtheta
    with psi = sym_diff / r^2; Gauss-Jacobi in r, composite Gauss-Legendre in
    theta on each octant.  ``first_octant_only`` doubles the [0, pi/4] part,
    which is exact only when u is symmetric under x <-> y about the centre.
    """
    x = np.atleast_1d(geom.x).ravel()
    y = np.atleast_1d(geom.y).ravel()
    r2 = np.atleast_1d(geom.r2).ravel()
    s, ws = gauss_jacobi_power(radial_order, 1.0 - beta)
    theta, wt = _octant_rule(theta_panels, theta_order)
    cos_t, sin_t = np.cos(theta), np.sin(theta)
    out = np.empty(x.size)
    for lo in range(0, x.size, _CHUNK):
        sl = slice(lo, lo + _CHUNK)
        xc = x[sl, None, None]
        yc = y[sl, None, None]
        total = np.zeros(xc.shape[0])
        octants = ((cos_t, sin_t),) if first_octant_only else ((cos_t, sin_t), (sin_t, cos_t))
        for c, sn in octants:
            # second octant: theta' = pi/2 - theta swaps cos and sin
            R = r2[sl, None] / cos_t[None, :]  # same radial extent in both octants
            r = R[:, :, None] * s[None, None, :]
            vals = tf.psi(xc, yc, r, c[None, :, None], sn[None, :, None])
            if lam != 0.0:
                vals = vals * np.exp(-lam * r)
            radial = R ** (2.0 - beta) * (vals @ ws)
            total += radial @ wt
        if first_octant_only:
            total *= 2.0
        out[sl] = total
    return out.reshape(np.shape(geom.x))


def _outer_rule(start, extent, order, subdivide):
    """Geometric panels on offsets [start, extent] (arrays), ratio 2 outward.

    Returns nodes/weights of shape (points, K*order) with a shared panel
    count; panels beyond ``extent`` collapse to zero width.
    """
    x, w = gauss_legendre(order)
    ratio = np.where(extent > start, extent / start, 1.0)
    levels = max(1, int(np.ceil(np.log2(ratio.max()))))
    k = np.arange(levels + 1)
    edges = np.minimum(start[:, None] * 2.0 ** k[None, :], extent[:, None])
    if subdivide > 1:
        frac = np.arange(subdivide) / subdivide
        lo, hi = edges[:, :-1], edges[:, 1:]
        sub = lo[:, :, None] + (hi - lo)[:, :, None] * frac[None, None, :]
        edges = np.concatenate([sub.reshape(len(start), -1), edges[:, -1:]], axis=1)
    lo, width = edges[:, :-1], np.diff(edges, axis=1)
    nodes = (lo[:, :, None] + width[:, :, None] * x[None, None, :]).reshape(len(start), -1)
    weights = (width[:, :, None] * w[None, None, :]).reshape(len(start), -1)
    return nodes, weights


def _mid_rule(half, order, subdivide):
    x, w = gauss_legendre(order)
    pieces = 2 * subdivide
    frac = np.arange(pieces) / pieces
    width = 2.0 * half / pieces
    lo = -half[:, None] + 2.0 * half[:, None] * frac[None, :]
    nodes = (lo[:, :, None] + width[:, None, None] * x[None, None, :]).reshape(len(half), -1)
    weights = (width[:, None, None] * w[None, None, :] * np.ones((1, pieces, 1))).reshape(len(half), -1)
    return nodes, weights


def _u_over_frame(x, y, r2, tf, lam, beta, l, order, subdivide):
    """int over Omega \\ A2 of u(xi, eta) K(|(xi, eta) - (x, y)|), graded rectangles."""
    expo = -0.5 * (2.0 + beta)
    # offsets from the centre to each side of Omega
    right = l - x
    left = l + x
    top = l - y
    bottom = l + y
    xs = [("+", *_outer_rule(r2, right, order, subdivide)),
          ("-", *_outer_rule(r2, left, order, subdivide)),
          ("0", *_mid_rule(r2, order, subdivide))]
    ys = [("+", *_outer_rule(r2, top, order, subdivide)),
          ("-", *_outer_rule(r2, bottom, order, subdivide)),
          ("0", *_mid_rule(r2, order, subdivide))]
    total = np.zeros(x.shape)
    for sx, ox, wx in xs:
        for sy, oy, wy in ys:
            if sx == "0" and sy == "0":
                continue  # A2 itself
            dx = -ox if sx == "-" else ox
            dy = -oy if sy == "-" else oy
            d2 = dx[:, :, None] ** 2 + dy[:, None, :] ** 2
            K = d2 ** expo
            if lam != 0.0:
                K = K * np.exp(-lam * np.sqrt(d2))
            uu = tf.value(x[:, None, None] + dx[:, :, None], y[:, None, None] + dy[:, None, :])
            total += np.einsum("pi,pij,pj->p", wx, uu * K, wy)
    return total


def annulus_terms(geom: RegionGeometry, tf: TestFunction, lam: float, beta: float,
                  order: int = 12, subdivide: int = 1, u_center=None) -> np.ndarray:
    """Integral over (A1 \\ Omega) u (Omega \\ A2) of (u(.) - u(x, y)) K.

    Split as int_{Omega \\ A2} u K minus u(x, y) times the kernel mass of the
    square frame A1 \\ A2.  The first piece uses up to eight rectangles with
    panels doubling away from A2; the second is a 1D polar integral.
    """
    x = np.atleast_1d(geom.x).ravel()
    y = np.atleast_1d(geom.y).ravel()
    r1 = np.atleast_1d(geom.r1).ravel()
    r2 = np.atleast_1d(geom.r2).ravel()
    if u_center is None:
        u_center = tf.value(x, y)
    u_center = np.atleast_1d(np.asarray(u_center, dtype=float)).ravel()
    frame_mass = _mass_outside(r2, lam, beta) - _mass_outside(r1, lam, beta)
    out = np.empty(x.size)
    for lo in range(0, x.size, _CHUNK):
        sl = slice(lo, lo + _CHUNK)
        part = _u_over_frame(x[sl], y[sl], r2[sl], tf, lam, beta, geom.l, order, subdivide)
        out[sl] = part - u_center[sl] * frame_mass[sl]
    return out.reshape(np.shape(geom.x))


def pointwise_source(tf: TestFunction, x, y, lam: float, beta: float, c: float,
                     l: float | None = None, **quad) -> np.ndarray:
    """f(x, y) = -c (far + annulus + near) at arbitrary interior points."""
    l = tf.l if l is None else l
    geom = region_radii(x, y, l)
    uc = tf.value(geom.x, geom.y)
    far = far_field_deficit(geom, uc, lam, beta)
    ann = annulus_terms(geom, tf, lam, beta, u_center=uc,
                        **{k: v for k, v in quad.items() if k in ("order", "subdivide")})
    near = near_singular(geom, tf, lam, beta,
                         **{k: v for k, v in quad.items() if k in ("radial_order", "theta_panels", "theta_order")})
    return -c * (far + ann + near)


def _fundamental_nodes(n: int):
    # 1 <= p <= q <= n/2 region of the 8-fold symmetric grid (0-based offsets)
    half = n // 2
    pts = [(p, q) for p in range(1, half + 1) for q in range(p, half + 1)]
    return np.array(pts, dtype=int)


def _unfold(n: int, pts: np.ndarray, vals: np.ndarray) -> np.ndarray:
    full = np.full((n - 1, n - 1), np.nan)
    for (p, q), v in zip(pts, vals):
        for a in (p, n - p):
            for b in (q, n - q):
                full[a - 1, b - 1] = v
                full[b - 1, a - 1] = v
    return full


def cache_filename(tf: TestFunction, config: ProblemConfig) -> str:
    name = tf.name if tf.l == 1.0 else f"{tf.name}-w{tf.l:g}"
    tempered = config.constant == "tempered" or (config.constant == "auto" and config.lam > 0)
    if tempered:
        name = f"{name}-tempered"
    return f"f_{name}_b{config.beta:g}_l{config.lam:g}_n{config.n}.csv"


def _read_cache(path: Path, n: int) -> np.ndarray | None:
    if not path.exists():
        return None
    vals = np.full((n - 1, n - 1), np.nan)
    with path.open() as fh:
        reader = csv.DictReader(fh)
        for row in reader:
            vals[int(row["p"]) - 1, int(row["q"]) - 1] = float(row["f"])
    if np.any(np.isnan(vals)):
        return None
    return vals


def _write_cache(path: Path, vals: np.ndarray) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name, suffix=".tmp")
    with os.fdopen(fd, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["p", "q", "f"])
        m = vals.shape[0]
        for p in range(m):
            for q in range(m):
                writer.writerow([p + 1, q + 1, repr(float(vals[p, q]))])
    os.replace(tmp, path)


def source_term(tf: TestFunction, config: ProblemConfig, cache_dir=None, **quad) -> GridFunction:
    """Exact source term on the interior grid of ``config``.

    Uses the same normalization constant as the stencil.  Symmetric test
    functions are evaluated on one eighth of the grid and unfolded.  With
    ``cache_dir`` the values are stored as ``p,q,f`` CSV files.
    """
    if abs(tf.l - config.l) > 1e-15:
        raise ValueError("test function support does not match the domain")
    n = config.n
    path = Path(cache_dir) / cache_filename(tf, config) if cache_dir is not None else None
    if path is not None and not quad:
        cached = _read_cache(path, n)
        if cached is not None:
            return GridFunction(n, cached)

    h = config.h
    if tf.symmetric:
        pts = _fundamental_nodes(n)
        x = -config.l + h * pts[:, 0]
        y = -config.l + h * pts[:, 1]
        raw = pointwise_source(tf, x, y, config.lam, config.beta, 1.0, config.l, **quad)
        vals = _unfold(n, pts, raw)
    else:
        X, Y = node_coordinates(n, config.l)
        vals = pointwise_source(tf, X, Y, config.lam, config.beta, 1.0, config.l, **quad)
    vals = config.c * vals
    if path is not None and not quad:
        _write_cache(path, vals)
    return GridFunction(n, vals)
