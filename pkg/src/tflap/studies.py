"""Convergence studies: truncation error, Poisson solves, self-convergence, exit time."""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .manufactured import TestFunction, source_term, u1
from .operator import GridFunction, build_fast_operator, node_coordinates
from .solver import cg_solve
from .weights import ProblemConfig, assemble_stencil

CSV_COLUMNS = ("h", "e_inf", "rate_inf", "e_l2", "rate_l2")


class NumericalFailure(RuntimeError):
    """CG or quadrature did not reach its tolerance."""


def grid_norms(v, h: float, norm: str = "area") -> tuple[float, float]:
    """Discrete (L2, Linf) norms of interior values.

    ``norm='area'`` weights the sum of squares by h^2 (cell area);
    ``norm='h'`` uses the single factor h of the 1D-style inner product.
    """
    vals = v.values if isinstance(v, GridFunction) else np.asarray(v, dtype=float)
    if norm == "area":
        weight = h * h
    elif norm == "h":
        weight = h
    else:
        raise ValueError(f"unknown norm convention {norm!r}")
    if vals.size == 0:
        return 0.0, 0.0
    return float(np.sqrt(weight * np.sum(vals * vals))), float(np.max(np.abs(vals)))


def convergence_rate(e_coarse: float, e_fine: float) -> float:
    """log(e_2h / e_h) / log 2."""
    if e_coarse <= 0 or e_fine <= 0:
        raise ValueError("errors must be positive")
    return math.log(e_coarse / e_fine) / math.log(2.0)


@dataclass
class ConvergenceRow:
    h: float
    e_inf: float
    e_l2: float
    rate_inf: float | None = None
    rate_l2: float | None = None
    converged: bool = True


@dataclass
class ConvergenceTable:
    rows: list[ConvergenceRow]
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        for prev, cur in zip(self.rows, self.rows[1:]):
            cur.rate_inf = convergence_rate(prev.e_inf, cur.e_inf)
            cur.rate_l2 = convergence_rate(prev.e_l2, cur.e_l2)

    @property
    def rates_inf(self) -> list[float]:
        return [r.rate_inf for r in self.rows[1:]]

    @property
    def rates_l2(self) -> list[float]:
        return [r.rate_l2 for r in self.rows[1:]]

    def to_csv(self, path) -> None:
        with Path(path).open("w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(CSV_COLUMNS)
            for r in self.rows:
                writer.writerow([
                    f"{r.h:.4E}", f"{r.e_inf:.4E}",
                    "" if r.rate_inf is None else f"{r.rate_inf:.4f}",
                    f"{r.e_l2:.4E}",
                    "" if r.rate_l2 is None else f"{r.rate_l2:.4f}",
                ])

    def format(self) -> str:
        head = " ".join(f"{k}={v}" for k, v in self.meta.items())
        lines = [head, f"{'h':>10} {'Linf':>11} {'rate':>7} {'L2':>11} {'rate':>7}"]
        for r in self.rows:
            ri = "" if r.rate_inf is None else f"{r.rate_inf:7.4f}"
            rl = "" if r.rate_l2 is None else f"{r.rate_l2:7.4f}"
            flag = "" if r.converged else "  (CG not converged)"
            lines.append(f"{r.h:10.6f} {r.e_inf:11.4E} {ri:>7} {r.e_l2:11.4E} {rl:>7}{flag}")
        return "\n".join(lines)


def _check_levels(levels) -> list[int]:
    levels = [int(n) for n in levels]
    if not levels:
        raise ValueError("need at least one level")
    for a, b in zip(levels, levels[1:]):
        if b != 2 * a:
            raise ValueError("levels must double (h halves between rows)")
    return levels


def truncation_study(beta: float, lam: float, gamma: float | None, levels, tf: TestFunction | None = None,
                     l: float = 1.0, norm: str = "area", constant: str = "standard",
                     cache_dir=None) -> ConvergenceTable:
    """Errors of the discrete operator applied to samples of ``tf`` against the exact source."""
    tf = tf or u1(l)
    rows = []
    for n in _check_levels(levels):
        cfg = ProblemConfig(beta, lam, gamma, l, n, constant)
        f = source_term(tf, cfg, cache_dir=cache_dir)
        op = build_fast_operator(assemble_stencil(cfg))
        err = op.matvec(GridFunction.sample(tf.value, n, l).values) - f.values
        l2, linf = grid_norms(err, cfg.h, norm)
        rows.append(ConvergenceRow(cfg.h, linf, l2))
    meta = dict(kind="truncation", tf=tf.name, beta=beta, lam=lam,
                gamma=ProblemConfig(beta, lam, gamma, l, 2).gamma, norm=norm, constant=constant)
    return ConvergenceTable(rows, meta)


def poisson_study(beta: float, lam: float, gamma: float | None, tf: TestFunction | None, levels,
                  l: float = 1.0, tol: float = 1e-10, norm: str = "area", constant: str = "standard",
                  cache_dir=None) -> ConvergenceTable:
    """Solve B U = f for the exact source of ``tf``; errors against samples of ``tf``."""
    tf = tf or u1(l)
    rows = []
    for n in _check_levels(levels):
        cfg = ProblemConfig(beta, lam, gamma, l, n, constant)
        f = source_term(tf, cfg, cache_dir=cache_dir)
        op = build_fast_operator(assemble_stencil(cfg))
        rep = cg_solve(op, f, tol=tol)
        err = rep.solution.values - GridFunction.sample(tf.value, n, l).values
        l2, linf = grid_norms(err, cfg.h, norm)
        rows.append(ConvergenceRow(cfg.h, linf, l2, converged=rep.converged))
    meta = dict(kind="poisson", tf=tf.name, beta=beta, lam=lam,
                gamma=ProblemConfig(beta, lam, gamma, l, 2).gamma, norm=norm, constant=constant)
    return ConvergenceTable(rows, meta)


def solve_unit_source(cfg: ProblemConfig, tol: float = 1e-10):
    """Solve B U = 1 on the interior grid; returns the SolveReport."""
    op = build_fast_operator(assemble_stencil(cfg))
    rhs = GridFunction(cfg.n, np.ones((cfg.n - 1, cfg.n - 1)))
    return cg_solve(op, rhs, tol=tol)


def restrict_to_coarse(fine: np.ndarray) -> np.ndarray:
    """Values of a grid with 2n cells at the nodes of the n-cell grid: (p, q) -> (2p, 2q)."""
    return fine[1::2, 1::2]


def self_convergence_study(beta: float, lam: float, gamma: float | None, levels, l: float = 1.0,
                           tol: float = 1e-10, norm: str = "area",
                           constant: str = "standard") -> ConvergenceTable:
    """Rates from e_h = ||U_2h - U_h|| on nested grids with f = 1.

    Row k compares levels k and k+1 and is labelled with the fine h, which
    is also the spacing used in the L2 weight (this reproduces the published
    magnitudes; rates do not depend on it).
    """
    levels = _check_levels(levels)
    if len(levels) < 2:
        raise ValueError("self-convergence needs at least two levels")
    sols = []
    flags = []
    for n in levels:
        rep = solve_unit_source(ProblemConfig(beta, lam, gamma, l, n, constant), tol)
        sols.append(rep.solution.values)
        flags.append(rep.converged)
    rows = []
    for k in range(len(levels) - 1):
        diff = sols[k] - restrict_to_coarse(sols[k + 1])
        h_fine = 2.0 * l / levels[k + 1]
        l2, linf = grid_norms(diff, h_fine, norm)
        rows.append(ConvergenceRow(h_fine, linf, l2, converged=flags[k] and flags[k + 1]))
    meta = dict(kind="selfconv", beta=beta, lam=lam,
                gamma=ProblemConfig(beta, lam, gamma, l, 2).gamma, norm=norm, constant=constant)
    return ConvergenceTable(rows, meta)


def exit_time_field(beta: float, lam: float, gamma: float | None, n: int, l: float = 1.0,
                    tol: float = 1e-10, out=None, constant: str = "standard") -> GridFunction:
    """Mean first exit time: solve with f = 1 and optionally write ``x,y,u`` CSV.

    Raises NumericalFailure if CG stalls, the field is not strictly positive,
    or its maximum sits on the boundary-adjacent ring.
    """
    cfg = ProblemConfig(beta, lam, gamma, l, n, constant)
    rep = solve_unit_source(cfg, tol)
    if not rep.converged:
        raise NumericalFailure(f"CG stopped at residual {rep.final_relative_residual:.3e}")
    u = rep.solution.values
    if not np.all(u > 0):
        raise NumericalFailure("exit-time field is not strictly positive")
    p, q = np.unravel_index(np.argmax(u), u.shape)
    if n > 4 and (p in (0, n - 2) or q in (0, n - 2)):
        raise NumericalFailure("exit-time maximum lies on the boundary-adjacent ring")
    if out is not None:
        X, Y = node_coordinates(n, l)
        with Path(out).open("w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["x", "y", "u"])
            for xv, yv, uv in zip(X.ravel(), Y.ravel(), u.ravel()):
                writer.writerow([repr(float(xv)), repr(float(yv)), repr(float(uv))])
    return rep.solution


def center_value(field: GridFunction) -> float:
    """Value at (0, 0); requires even n."""
    if field.n % 2:
        raise ValueError("centre is a grid node only for even n")
    k = field.n // 2 - 1
    return float(field.values[k, k])
