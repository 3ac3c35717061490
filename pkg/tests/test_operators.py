"""Algebraic invariants and accuracy of the 1D SBP operators."""

import numpy as np
import pytest

from sbpwave import (
    ConfigurationError,
    DimensionError,
    build_first_derivative,
    build_second_derivative,
    build_time_quadrature,
)
from sbpwave.operators import MIN_POINTS, remainder_matrix


def sbp_identity_residual(ops):
    m = ops.m
    H = np.diag(ops.H)
    D1 = ops.D1.toarray()
    B = np.outer(ops.e_r, ops.e_r) - np.outer(ops.e_l, ops.e_l)
    return np.abs(H @ D1 + D1.T @ H - B).max()


@pytest.mark.parametrize("order,m", [(4, 8), (4, 20), (4, 57), (6, 12), (6, 30), (6, 64)])
def test_sbp_identity(order, m):
    ops = build_first_derivative(m, 1.0 / (m - 1), order)
    assert sbp_identity_residual(ops) <= 1e-13


@pytest.mark.parametrize("order", [4, 6])
def test_norm_positive_diagonal(order):
    ops = build_first_derivative(24, 0.05, order)
    assert np.all(ops.H > 0)


@pytest.mark.parametrize("order,m", [(4, 20), (6, 30)])
def test_d1_constants_and_coordinates(order, m):
    ops = build_first_derivative(m, 1.0 / (m - 1), order)
    assert np.abs(ops.D1 @ np.ones(m)).max() <= 1e-14
    x = ops.grid
    assert np.abs(ops.D1 @ x - 1.0).max() <= 1e-12


def test_d1_monomial_accuracy_order4():
    # interior rows must differentiate x^k exactly for k <= 4,
    # boundary rows for k <= 2 (oracle: symbolic d/dx x^k = k x^(k-1))
    m, order = 20, 4
    ops = build_first_derivative(m, 1.0 / (m - 1), order)
    x = ops.grid
    for k in range(order + 1):
        exact = k * x ** (k - 1) if k else np.zeros(m)
        err = np.abs(ops.D1 @ x ** k - exact)
        assert err[4:-4].max() <= 1e-11
        if k <= 2:
            assert err.max() <= 1e-11


def test_d1_monomial_accuracy_order6():
    # spec example: m=30, D1 x^2 -> 2x exactly everywhere (boundary order 3)
    m = 30
    ops = build_first_derivative(m, 1.0 / (m - 1), 6)
    x = ops.grid
    assert np.abs(ops.D1 @ x ** 2 - 2 * x).max() <= 1e-12
    for k in range(7):
        exact = k * x ** (k - 1) if k else np.zeros(m)
        err = np.abs(ops.D1 @ x ** k - exact)
        assert err[6:-6].max() <= 5e-10
        if k <= 3:
            assert err.max() <= 5e-11


def test_boundary_derivative_rows_exact_on_polynomials():
    # d_l, d_r differentiate polynomials exactly up to the closure accuracy
    for order, deg in [(4, 3), (6, 4)]:
        ops = build_first_derivative(24, 1.0 / 23, order)
        x = ops.grid
        for k in range(deg + 1):
            dlx = float(ops.d_l @ x ** k)
            drx = float(ops.d_r @ x ** k)
            assert abs(dlx - (k * x[0] ** (k - 1) if k else 0.0)) <= 1e-11
            assert abs(drx - (k * x[-1] ** (k - 1) if k else 0.0)) <= 1e-10


@pytest.mark.parametrize("order", [4, 6])
def test_minimum_points_enforced(order):
    with pytest.raises(ConfigurationError) as err:
        build_first_derivative(MIN_POINTS[order] - 1, 0.1, order)
    assert str(MIN_POINTS[order]) in str(err.value)


def test_unsupported_order_rejected():
    with pytest.raises(ConfigurationError):
        build_first_derivative(20, 0.1, 2)


# ---------------------------------------------------------------------------
# second derivative
# ---------------------------------------------------------------------------

@pytest.mark.parametrize("order,m", [(4, 20), (6, 24)])
def test_d2_compatibility_identity(order, m):
    # H D2 = -M - e_l c_0 d_l^T + e_r c_{m-1} d_r^T, residual <= 1e-13
    rng = np.random.default_rng(3)
    ops = build_first_derivative(m, 1.0 / (m - 1), order)
    c = rng.uniform(0.3, 2.0, m)
    d2 = build_second_derivative(ops, c)
    lhs = np.diag(ops.H) @ d2.D2c.toarray()
    rhs = -d2.Mc.toarray()
    rhs[0] -= c[0] * ops.d_l
    rhs[-1] += c[-1] * ops.d_r
    scale = max(1.0, np.abs(rhs).max())
    assert np.abs(lhs - rhs).max() / scale <= 1e-13


def test_d2_constant_coefficient_on_linear():
    ops = build_first_derivative(20, 1.0 / 19, 4)
    d2 = build_second_derivative(ops, np.ones(20))
    u = 3.0 * ops.grid + 1.0
    assert np.abs(d2.D2c @ u).max() <= 1e-11


@pytest.mark.parametrize("order", [4, 6])
def test_remainder_symmetric_psd(order):
    rng = np.random.default_rng(11)
    m = 24
    ops = build_first_derivative(m, 1.0 / (m - 1), order)
    c = rng.uniform(0.1, 3.0, m)
    R = remainder_matrix(ops, c).toarray()
    assert np.abs(R - R.T).max() <= 1e-13
    assert np.linalg.eigvalsh(0.5 * (R + R.T)).min() >= -1e-12


@pytest.mark.parametrize("order", [4, 6])
def test_remainder_linear_in_c(order):
    rng = np.random.default_rng(5)
    m = 20 if order == 4 else 26
    ops = build_first_derivative(m, 0.03, order)
    c1 = rng.standard_normal(m)
    c2 = rng.standard_normal(m)
    a, b = 1.7, -0.4
    R = remainder_matrix(ops, a * c1 + b * c2).toarray()
    Rab = a * remainder_matrix(ops, c1).toarray() + b * remainder_matrix(ops, c2).toarray()
    assert np.abs(R - Rab).max() <= 1e-12 * max(1.0, np.abs(R).max())


def test_d2_variable_coefficient_interior_convergence():
    # c(x) = x + 1, u = x^2: d/dx((x+1) 2x) = 4x + 2; interior error O(h^4).
    # oracle: symbolic differentiation of the exact expression.
    errs = []
    for m in (20, 40, 80):
        ops = build_first_derivative(m, 1.0 / (m - 1), 4)
        x = ops.grid
        d2 = build_second_derivative(ops, x + 1.0)
        err = d2.D2c @ (x ** 2) - (4.0 * x + 2.0)
        errs.append(np.abs(err[6:-6]).max())
    # quadratic data is below the interior truncation degree: exact
    assert errs[-1] <= 1e-10
    # a non-polynomial check with the same coefficient: u = sin(2x)
    errs = []
    for m in (40, 80, 160):
        ops = build_first_derivative(m, 1.0 / (m - 1), 4)
        x = ops.grid
        d2 = build_second_derivative(ops, x + 1.0)
        exact = 2.0 * np.cos(2 * x) - 4.0 * (x + 1.0) * np.sin(2 * x)
        errs.append(np.abs((d2.D2c @ np.sin(2 * x) - exact)[8:-8]).max())
    rate = np.log(errs[0] / errs[2]) / np.log((160 - 1) / (40 - 1))
    assert rate >= 3.7


def test_d2_length_mismatch():
    ops = build_first_derivative(20, 0.05, 4)
    with pytest.raises(DimensionError):
        build_second_derivative(ops, np.ones(19))


# ---------------------------------------------------------------------------
# time quadrature
# ---------------------------------------------------------------------------

def test_time_quadrature_weights_positive():
    w = build_time_quadrature(101, 0.01)
    assert np.all(w > 0)


def test_time_quadrature_constant():
    n = 101
    w = build_time_quadrature(n, 1.0 / (n - 1))
    assert abs(w.sum() - 1.0) <= 1e-14


def test_time_quadrature_quintic_exact():
    # weights integrate t^5 over [0,1] to 1/6 exactly (degree-5 exactness)
    n = 101
    t = np.linspace(0.0, 1.0, n)
    w = build_time_quadrature(n, t[1] - t[0])
    assert abs(np.dot(w, t ** 5) - 1.0 / 6.0) <= 1e-14


def test_time_quadrature_sine():
    # analytic oracle: integral of sin(2 pi t) over [0,1] is 0
    n = 201
    t = np.linspace(0.0, 1.0, n)
    w = build_time_quadrature(n, t[1] - t[0])
    assert abs(np.dot(w, np.sin(2 * np.pi * t))) <= 1e-10


def test_time_quadrature_too_few_points():
    with pytest.raises(ConfigurationError):
        build_time_quadrature(11, 0.1)
