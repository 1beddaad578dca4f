"""Finite-difference weights for the 2D tempered fractional Laplacian.

The operator -(Delta + lam)^{beta/2} is discretized by splitting the kernel
as phi_gamma * r^(gamma-2-beta): the singular origin cell uses a weighted
trapezoid rule, every other cell a bilinear interpolant of phi_gamma.  The
resulting stencil w[i, j] (0 <= i, j <= n) fully determines the BTTB matrix.

Geometric moments are computed once per (beta, gamma) in reduced (h = 1)
coordinates and rescaled by powers of h.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.special import gamma as gamma_fn

from .quadrature import gauss_legendre, square_exterior_mass

MOMENT_RTOL = 1e-13
_ORDERS = (8, 16, 32, 64)


def _check_beta(beta: float) -> None:
    if not 0.0 < beta < 2.0:
        raise ValueError(f"beta must lie in (0, 2), got {beta}")
    if beta == 1.0:
        raise ValueError("beta = 1 is a pole of Gamma(-beta)")


def _check_gamma(gamma: float, beta: float) -> None:
    if not beta < gamma <= 2.0:
        raise ValueError(f"gamma must lie in (beta, 2] = ({beta}, 2], got {gamma}")


def normalization_constant(beta: float, lam: float, kind: str = "auto") -> float:
    """Normalization constant of the 2D operator.

    ``kind='tempered'`` gives 1 / (2 pi |Gamma(-beta)|); ``'standard'`` gives
    the fractional-Laplacian constant beta Gamma(1 + beta/2) /
    (2^(1-beta) pi Gamma(1 - beta/2)).  ``'auto'`` picks tempered for
    lam > 0 and standard for lam == 0.
    """
    _check_beta(beta)
    if lam < 0:
        raise ValueError("lambda must be non-negative")
    if kind == "auto":
        kind = "tempered" if lam > 0 else "standard"
    if kind == "tempered":
        return 1.0 / (2.0 * math.pi * abs(gamma_fn(-beta)))
    if kind == "standard":
        return beta * gamma_fn(1.0 + 0.5 * beta) / (2.0 ** (1.0 - beta) * math.pi * gamma_fn(1.0 - 0.5 * beta))
    raise ValueError(f"unknown constant kind {kind!r}")


@dataclass(frozen=True)
class ProblemConfig:
    """Physical and discretization parameters on Omega = (-l, l)^2."""

    beta: float
    lam: float = 0.0
    gamma: float | None = None
    l: float = 1.0
    n: int = 16
    constant: str = "standard"

    def __post_init__(self):
        _check_beta(self.beta)
        if self.gamma is None:
            object.__setattr__(self, "gamma", 1.0 + 0.5 * self.beta)
        _check_gamma(self.gamma, self.beta)
        if self.lam < 0:
            raise ValueError("lambda must be non-negative")
        if self.l <= 0:
            raise ValueError("domain half-width must be positive")
        if int(self.n) != self.n or self.n < 2:
            raise ValueError("n must be an integer >= 2")
        object.__setattr__(self, "n", int(self.n))
        normalization_constant(self.beta, self.lam, self.constant)

    @property
    def L(self) -> float:
        return 2.0 * self.l

    @property
    def h(self) -> float:
        return 2.0 * self.l / self.n

    @property
    def c(self) -> float:
        return normalization_constant(self.beta, self.lam, self.constant)

    @property
    def k_gamma(self) -> float:
        return 4.0 / 3.0 if self.gamma == 2.0 else 1.0

    def with_n(self, n: int) -> "ProblemConfig":
        return ProblemConfig(self.beta, self.lam, self.gamma, self.l, n, self.constant)


@dataclass(frozen=True)
class BilinearMomentSet:
    """Reduced moments of one unit cell [i, i+1] x [j, j+1].

    Kernel (p^2 + q^2)^((gamma-2-beta)/2) against densities 1, p, q, pq.
    Physical moments follow as G = h^(gamma-beta-2) g, G^xi = h^(gamma-beta-1)
    g_xi, G^eta = h^(gamma-beta-1) g_eta and G^xieta = h^(gamma-beta) g_xieta.
    """

    i: int
    j: int
    g: float
    g_xi: float
    g_eta: float
    g_xieta: float


def _cell_rule(i0: float, j_lo: np.ndarray, order: int):
    x, w = gauss_legendre(order)
    p = i0 + x  # (k,)
    q = j_lo[:, None] + x[None, :]  # (cells, k)
    ww = np.outer(w, w)
    return p, q, ww


def _kernel(p, q, expo):
    return (p * p + q * q) ** expo


def reduced_moments(i: int, j: int, gamma: float, beta: float) -> BilinearMomentSet:
    """Moments of cell (i, j) with tensor Gauss-Legendre order escalation."""
    if i < 0 or j < 0:
        raise ValueError("cell indices must be non-negative")
    if (i, j) == (0, 0):
        raise ValueError("cell (0, 0) is singular; use corner_moment")
    _check_beta(beta)
    _check_gamma(gamma, beta)
    expo = 0.5 * (gamma - 2.0 - beta)

    def at(order):
        p, q, ww = _cell_rule(float(i), np.array([float(j)]), order)
        K = _kernel(p[:, None], q[0][None, :], expo)
        P = p[:, None]
        Q = q[0][None, :]
        return np.array([np.sum(ww * K), np.sum(ww * K * P), np.sum(ww * K * Q), np.sum(ww * K * P * Q)])

    prev = at(_ORDERS[0])
    for order in _ORDERS[1:]:
        cur = at(order)
        if np.all(np.abs(cur - prev) <= MOMENT_RTOL * np.abs(cur)):
            break
        prev = cur
    return BilinearMomentSet(i, j, *map(float, cur))


def _row_basis(a: int, ncell: int, expo: float, order: int) -> np.ndarray:
    """Bilinear basis integrals for cells (a, 0..ncell-1) at one GL order.

    Returns (ncell, 4): weights toward nodes (a,b), (a+1,b), (a,b+1), (a+1,b+1).
    """
    x, w = gauss_legendre(order)
    b = np.arange(ncell, dtype=float)
    p = a + x
    q = b[:, None] + x[None, :]
    K = (p[None, :, None] ** 2 + q[:, None, :] ** 2) ** expo  # (cells, kp, kq)
    lp0 = (1.0 - x) * w  # (a+1-p) weight toward left node
    lp1 = x * w
    lq0 = (1.0 - x) * w
    lq1 = x * w
    out = np.empty((ncell, 4))
    Kq0 = K @ lq0  # (cells, kp)
    Kq1 = K @ lq1
    out[:, 0] = Kq0 @ lp0
    out[:, 1] = Kq0 @ lp1
    out[:, 2] = Kq1 @ lp0
    out[:, 3] = Kq1 @ lp1
    return out


def _basis_row_converged(a: int, ncell: int, expo: float) -> np.ndarray:
    prev = _row_basis(a, ncell, expo, _ORDERS[0])
    for order in _ORDERS[1:]:
        cur = _row_basis(a, ncell, expo, order)
        if np.all(np.abs(cur - prev) <= MOMENT_RTOL * np.abs(cur)):
            return cur
        prev = cur
    return cur


_BASIS_CACHE: dict[tuple[float, float], np.ndarray] = {}


def cell_basis_table(beta: float, gamma: float, ncell: int) -> np.ndarray:
    """Reduced bilinear basis integrals for cells [0, ncell)^2, shape (ncell, ncell, 4).

    Entry [a, b, k] integrates the kernel against the bilinear hat of corner k
    of cell (a, b); corner order (0,0), (1,0), (0,1), (1,1).  Cell (0, 0) is
    left as zeros.  Tables are cached and sliced for smaller requests.
    """
    key = (float(beta), float(gamma))
    cached = _BASIS_CACHE.get(key)
    if cached is not None and cached.shape[0] >= ncell:
        return cached[:ncell, :ncell]
    expo = 0.5 * (gamma - 2.0 - beta)
    table = np.zeros((ncell, ncell, 4))
    for a in range(1, ncell):
        table[a, : a + 1] = _basis_row_converged(a, a + 1, expo)
    # exact exchange symmetry: fill the upper triangle from the lower one
    iu = np.triu_indices(ncell, 1)
    swapped = table.transpose(1, 0, 2)[:, :, [0, 2, 1, 3]]
    table[iu] = swapped[iu]
    _BASIS_CACHE[key] = table
    return table


def corner_moment(gamma: float, beta: float, order: int = 32) -> float:
    """Reduced singular-cell moment: int over [0,1]^2 of (p^2+q^2)^((gamma-2-beta)/2).

    Polar split: pi / (2 (gamma - beta)) from the unit quarter disc plus the
    corner region 1 <= r <= sec(theta), whose radial integral is closed form.
    """
    if gamma <= beta:
        raise ValueError("gamma must exceed beta")
    s = gamma - beta
    x, w = gauss_legendre(order)
    theta = 0.25 * np.pi * x
    corner = (2.0 / s) * 0.25 * np.pi * np.sum(w * (np.cos(theta) ** (-s) - 1.0))
    return 0.5 * np.pi / s + corner


def tail_mass(L: float, lam: float, beta: float) -> float:
    """First-quadrant kernel mass outside [0, L]^2 (the G-infinity term)."""
    if L <= 0:
        raise ValueError("L must be positive")
    if lam < 0:
        raise ValueError("lambda must be non-negative")
    if not 0.0 < beta < 2.0:
        raise ValueError("beta must lie in (0, 2)")
    return 0.25 * float(square_exterior_mass(np.array(L), lam, beta))


@dataclass(frozen=True, eq=False)
class WeightStencil:
    """Weight table w[i, j], 0 <= i, j <= n, in units length^-beta."""

    config: ProblemConfig
    w: np.ndarray = field(repr=False)
    g00_reduced: float
    g_inf: float
    k_gamma: float

    @property
    def n(self) -> int:
        return self.config.n

    def full_sum(self) -> float:
        """Sum of w[|i|, |j|] over -n <= i, j <= n."""
        w = self.w
        return 4.0 * w[1:, 1:].sum() + 2.0 * (w[0, 1:].sum() + w[1:, 0].sum()) + w[0, 0]

    def dominance_gap(self) -> float:
        """w[0,0] minus the absolute off-diagonal mass of the full stencil."""
        w = self.w
        off = 4.0 * np.abs(w[1:, 1:]).sum() + 2.0 * (np.abs(w[0, 1:]).sum() + np.abs(w[1:, 0]).sum())
        return w[0, 0] - off

    def to_csv(self, path) -> None:
        path = Path(path)
        with path.open("w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["i", "j", "w"])
            for i in range(self.n + 1):
                for j in range(self.n + 1):
                    writer.writerow([i, j, repr(float(self.w[i, j]))])


def node_terms(config: ProblemConfig) -> tuple[np.ndarray, float]:
    """Reduced interpolation weights attached to each node (i, j) of [0, n]^2.

    Sums the bilinear-hat integrals of every non-singular cell touching the
    node and adds k_gamma/4 * G00 at (1,0), (0,1), (1,1).  Returns the table
    (node (0,0) is zero) and the reduced corner moment.
    """
    n = config.n
    basis = cell_basis_table(config.beta, config.gamma, n)
    T = np.zeros((n + 1, n + 1))
    T[:-1, :-1] += basis[:, :, 0]
    T[1:, :-1] += basis[:, :, 1]
    T[:-1, 1:] += basis[:, :, 2]
    T[1:, 1:] += basis[:, :, 3]
    g00 = corner_moment(config.gamma, config.beta)
    share = 0.25 * config.k_gamma * g00
    T[1, 0] += share
    T[0, 1] += share
    T[1, 1] += share
    return T, g00


def assemble_stencil(config: ProblemConfig) -> WeightStencil:
    """Assemble the full weight table for ``config``."""
    n, h, lam, beta, gam = config.n, config.h, config.lam, config.beta, config.gamma
    c = config.c
    T, g00 = node_terms(config)
    i = np.arange(n + 1, dtype=float)
    rho = np.hypot(i[:, None], i[None, :])
    rho[0, 0] = 1.0
    # T carries h^(gamma-beta); divide by exp(lam h rho) (h rho)^gamma
    terms = T * h ** (-beta) * rho ** (-gam) * np.exp(-lam * h * rho)
    terms[0, 0] = 0.0
    # exact symmetrization of round-off from the (1,0)/(0,1) sums
    terms = 0.5 * (terms + terms.T)
    mult = np.ones((n + 1, n + 1))
    mult[0, :] = 2.0
    mult[:, 0] = 2.0
    w = -c * mult * terms
    g_inf = tail_mass(config.L, lam, beta)
    w[0, 0] = 4.0 * c * (terms.sum() + g_inf)
    w.setflags(write=False)
    return WeightStencil(config=config, w=w, g00_reduced=g00, g_inf=g_inf, k_gamma=config.k_gamma)
