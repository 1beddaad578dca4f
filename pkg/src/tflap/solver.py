"""Conjugate Gradient for B U = F with the FFT operator."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .operator import GridFunction, StencilOperator


@dataclass
class SolveReport:
    solution: GridFunction
    iterations: int
    final_relative_residual: float
    converged: bool


def cg_solve(op: StencilOperator, rhs: GridFunction, tol: float = 1e-10,
             max_iter: int | None = None, callback=None) -> SolveReport:
    """Plain CG from a zero initial guess.

    Stops once ||F - B x||_2 / ||F||_2 <= tol or after ``max_iter`` steps
    (default 10 (n-1)).  ``callback(k, x)`` is called after every iteration.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    if rhs.n != op.n:
        raise ValueError(f"rhs has n={rhs.n}, operator has n={op.n}")
    b = rhs.ravel()
    if not np.all(np.isfinite(b)):
        raise ValueError("rhs contains non-finite values")
    if max_iter is None:
        max_iter = 10 * (op.n - 1)

    x = np.zeros_like(b)
    bnorm = np.linalg.norm(b)
    if bnorm == 0.0:
        return SolveReport(GridFunction(op.n, x), 0, 0.0, True)
    r = b.copy()
    p = r.copy()
    rr = r @ r
    k = 0
    rel = np.sqrt(rr) / bnorm
    while k < max_iter:
        if rel <= tol:
            # confirm with the true residual before stopping
            if np.linalg.norm(b - op.matvec(x)) / bnorm <= tol:
                break
        Ap = op.matvec(p)
        alpha = rr / (p @ Ap)
        x += alpha * p
        r -= alpha * Ap
        rr_new = r @ r
        k += 1
        if callback is not None:
            callback(k, x)
        if rr_new == 0.0:
            break  # exact solve; the next direction would be 0/0
        p = r + (rr_new / rr) * p
        rr = rr_new
        rel = np.sqrt(rr) / bnorm
    # report the true residual, not the recursively updated one
    true_rel = np.linalg.norm(b - op.matvec(x)) / bnorm
    return SolveReport(GridFunction(op.n, x), k, float(true_rel), bool(true_rel <= tol))
