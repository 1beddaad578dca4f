import time

import numpy as np
import pytest
from hypothesis import given, strategies as st

from tflap.operator import (DENSE_CAP, GridFunction, apply, build_fast_operator, dense_matrix,
                            node_coordinates)
from tflap.weights import ProblemConfig, assemble_stencil


def _op(n, beta=0.5, lam=0.0, gamma=None):
    return build_fast_operator(assemble_stencil(ProblemConfig(beta, lam, gamma, 1.0, n)))


def test_grid_function_shapes():
    g = GridFunction(4, np.arange(9.0))
    assert g.values.shape == (3, 3)
    assert g.values[1, 2] == 5.0
    assert np.array_equal(g.ravel(), np.arange(9.0))
    with pytest.raises(ValueError):
        GridFunction(4, np.zeros(8))
    with pytest.raises(ValueError):
        GridFunction(4, np.zeros((2, 4)))


def test_node_coordinates_ordering():
    x, y = node_coordinates(4, 1.0)
    # node (p, q) -> (-l + p h, -l + q h), p along axis 0
    assert x[0, 2] == pytest.approx(-0.5) and y[0, 2] == pytest.approx(0.5)
    assert x[2, 0] == pytest.approx(0.5) and y[2, 0] == pytest.approx(-0.5)


def test_dense_matrix_n3():
    s = assemble_stencil(ProblemConfig(0.5, n=3))
    B = dense_matrix(s)
    w = s.w
    assert B.shape == (4, 4)
    assert np.all(np.diag(B) == w[0, 0])
    # (1,1)-(1,2): w[0][1]; (1,1)-(2,1): w[1][0]; (1,1)-(2,2): w[1][1]
    assert B[0, 1] == w[0, 1] and B[0, 2] == w[1, 0] and B[0, 3] == w[1, 1]
    assert np.array_equal(B, B.T)


@pytest.mark.parametrize("n", [4, 8, 16])
@pytest.mark.parametrize("beta,lam", [(0.5, 0.0), (1.5, 0.5)])
def test_dense_matrix_spd_and_dominant(n, beta, lam):
    s = assemble_stencil(ProblemConfig(beta, lam, None, 1.0, n))
    B = dense_matrix(s)
    assert np.array_equal(B, B.T)
    assert np.linalg.eigvalsh(B).min() > 0
    off = np.abs(B).sum(axis=1) - np.diag(B)
    assert np.all(np.diag(B) > off)


def test_dense_matrix_cap():
    s = assemble_stencil(ProblemConfig(0.5, n=DENSE_CAP + 1))
    with pytest.raises(MemoryError):
        dense_matrix(s)


@pytest.mark.parametrize("n", [4, 8, 16])
def test_fft_matches_dense(n):
    op = _op(n, 0.8, 0.5, 2.0)
    B = dense_matrix(op.stencil)
    rng = np.random.default_rng(n)
    for _ in range(20):
        u = rng.standard_normal((n - 1) ** 2)
        ref = B @ u
        got = op.matvec(u)
        assert np.max(np.abs(got - ref)) <= 1e-12 * np.max(np.abs(ref))


def test_embedding_size_and_idempotent_symbol():
    op = _op(10)
    assert op.m >= 2 * (op.n - 1)
    again = build_fast_operator(op.stencil)
    assert np.array_equal(op.symbol, again.symbol)


def test_zero_and_delta_inputs():
    n = 8
    op = _op(n, 1.2, 0.5)
    assert np.all(apply(op, GridFunction.zeros(n)).values == 0.0)
    u = np.zeros((n - 1, n - 1))
    u[3, 3] = 1.0  # node (4, 4)
    v = op.matvec(u)
    p = np.arange(1, n)
    expected = op.stencil.w[np.abs(4 - p)[:, None], np.abs(4 - p)[None, :]]
    np.testing.assert_allclose(v, expected, rtol=0, atol=1e-13 * op.stencil.w[0, 0])


@given(st.integers(1, 7), st.integers(1, 7))
def test_shifted_delta_reproduces_stencil_row(p0, q0):
    n = 8
    op = _op(n, 0.5)
    u = np.zeros((n - 1, n - 1))
    u[p0 - 1, q0 - 1] = 1.0
    v = op.matvec(u)
    p = np.arange(1, n)
    expected = op.stencil.w[np.abs(p0 - p)[:, None], np.abs(q0 - p)[None, :]]
    np.testing.assert_allclose(v, expected, rtol=0, atol=1e-13 * op.stencil.w[0, 0])


@given(st.integers(0, 2**31 - 1), st.sampled_from([0.5, 0.8, 1.2, 1.5]), st.sampled_from([0.0, 0.5]))
def test_symmetric_and_positive_form(seed, beta, lam):
    n = 12
    op = _op(n, beta, lam)
    rng = np.random.default_rng(seed)
    u, v = rng.standard_normal((2, (n - 1) ** 2))
    a, b = op.matvec(u) @ v, u @ op.matvec(v)
    assert abs(a - b) <= 1e-12 * max(abs(a), np.linalg.norm(op.matvec(u)) * np.linalg.norm(v))
    bound = 4 * op.stencil.config.c * op.stencil.g_inf * (u @ u)
    assert op.matvec(u) @ u >= bound * (1 - 1e-12)


def test_matvec_shape_handling():
    op = _op(6)
    u = np.ones((5, 5))
    assert op.matvec(u).shape == (5, 5)
    assert op.matvec(u.ravel()).shape == (25,)
    assert op.shape == (25, 25)
    with pytest.raises(ValueError):
        op.matvec(np.ones(24))
    with pytest.raises(ValueError):
        apply(op, GridFunction.zeros(5))


def test_apply_timing_scales():
    # one warm apply at n=256 stays well under half a second
    op = _op(256)
    u = np.random.default_rng(0).standard_normal(255**2)
    op.matvec(u)
    t0 = time.perf_counter()
    op.matvec(u)
    assert time.perf_counter() - t0 < 0.5
