"""Block-Toeplitz (BTTB) form of the discrete operator and its FFT matvec."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import fft

from .weights import WeightStencil

DENSE_CAP = 64


@dataclass(frozen=True, eq=False)
class GridFunction:
    """Values on the interior nodes (p, q), 1 <= p, q <= n-1.

    ``values`` has shape (n-1, n-1) with p along axis 0; ``ravel()`` gives the
    row-major vector U = (u_11, u_12, ..., u_{n-1,n-1}).
    """

    n: int
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim == 1:
            if v.size != (self.n - 1) ** 2:
                raise ValueError(f"expected {(self.n - 1) ** 2} values, got {v.size}")
            v = v.reshape(self.n - 1, self.n - 1)
        if v.shape != (self.n - 1, self.n - 1):
            raise ValueError(f"expected shape {(self.n - 1, self.n - 1)}, got {v.shape}")
        object.__setattr__(self, "values", v)

    @classmethod
    def zeros(cls, n: int) -> "GridFunction":
        return cls(n, np.zeros((n - 1, n - 1)))

    @classmethod
    def sample(cls, func, n: int, l: float = 1.0) -> "GridFunction":
        x, y = node_coordinates(n, l)
        return cls(n, func(x, y))

    def ravel(self) -> np.ndarray:
        return self.values.ravel()


def node_coordinates(n: int, l: float = 1.0) -> tuple[np.ndarray, np.ndarray]:
    """(x, y) of interior nodes, each (n-1, n-1), x varying along axis 0."""
    h = 2.0 * l / n
    t = -l + h * np.arange(1, n)
    return np.meshgrid(t, t, indexing="ij")


def dense_matrix(stencil: WeightStencil, cap: int = DENSE_CAP) -> np.ndarray:
    """Full (n-1)^2 x (n-1)^2 matrix with entries w[|p-p'|, |q-q'|]."""
    n = stencil.n
    if n > cap:
        raise MemoryError(f"dense matrix for n={n} exceeds the cap n <= {cap}")
    m = n - 1
    idx = np.arange(m)
    dp = np.abs(idx[:, None] - idx[None, :])
    P = dp[:, None, :, None]
    Q = dp[None, :, None, :]
    return stencil.w[P, Q].reshape(m * m, m * m)


class StencilOperator:
    """FFT-applicable BTTB operator built from a weight stencil.

    The generator w[|i|, |j|], |i|, |j| <= n-2, is embedded in an m x m
    block-circulant array (m >= 2(n-1)) whose 2D real FFT is stored.
    """

    def __init__(self, stencil: WeightStencil, keep_dense: bool = False):
        self.stencil = stencil
        self.n = stencil.n
        k = self.n - 1
        self.m = fft.next_fast_len(2 * k, real=True)
        gen = np.zeros((self.m, self.m))
        reach = np.arange(k)  # 0 .. n-2
        block = stencil.w[:k, :k]
        gen[:k, :k] = block
        neg = (self.m - reach[1:]) % self.m
        gen[neg, :k] = block[1:, :]
        gen[:k, neg] = block[:, 1:]
        gen[np.ix_(neg, neg)] = block[1:, 1:]
        self.symbol = fft.rfft2(gen)
        self.symbol.setflags(write=False)
        self.dense = dense_matrix(stencil) if keep_dense else None

    @property
    def shape(self) -> tuple[int, int]:
        k = (self.n - 1) ** 2
        return k, k

    def matvec(self, u: np.ndarray) -> np.ndarray:
        """Apply to a flat or (n-1, n-1) array; returns the same shape."""
        k = self.n - 1
        arr = np.asarray(u, dtype=float)
        flat = arr.ndim == 1
        if arr.size != k * k:
            raise ValueError(f"operator of size n={self.n} got {arr.size} values")
        spec = fft.rfft2(arr.reshape(k, k), s=(self.m, self.m))
        out = fft.irfft2(spec * self.symbol, s=(self.m, self.m))[:k, :k]
        return out.ravel() if flat else out

    def __call__(self, u: GridFunction) -> GridFunction:
        return apply(self, u)


def build_fast_operator(stencil: WeightStencil, keep_dense: bool = False) -> StencilOperator:
    return StencilOperator(stencil, keep_dense=keep_dense)


def apply(op: StencilOperator, u: GridFunction) -> GridFunction:
    """Discrete operator with zero extension of ``u`` outside the interior grid."""
    if u.n != op.n:
        raise ValueError(f"grid function has n={u.n}, operator has n={op.n}")
    return GridFunction(op.n, op.matvec(u.values))
