"""Transfinite maps, metric factors, and design sensitivities."""

import numpy as np
import pytest

from sbpwave import FoldedMeshError, build_first_derivative
from sbpwave.geometry import (
    arc_nodes,
    check_admissible_seabed,
    compute_metrics,
    line_nodes,
    make_bathymetry_block,
    metric_sensitivities,
    metric_sensitivity,
    tfi_coordinates,
)

L_I = 0.5


def bathy_coords(p, m_eta, x_l=0.0, x_r=1.0):
    blk = make_bathymetry_block(len(p), m_eta, x_l, x_r, L_I)
    return blk, blk.coords(p)


def test_flat_bottom_map_is_linear_in_eta():
    p = np.zeros(11)
    _, (x, y) = bathy_coords(p, 9)
    eta = np.linspace(0, 1, 9)
    for col in range(11):
        assert np.allclose(y[col * 9:(col + 1) * 9], L_I * eta, atol=1e-14)


def test_constant_depth_bottom_row():
    p = np.full(13, -0.1)
    _, (x, y) = bathy_coords(p, 8)
    bottom = y[::8]
    assert np.allclose(bottom, -0.1, atol=1e-14)


def test_corner_matches_boundary_data():
    p = np.linspace(0.0, -0.1, 11)
    _, (x, y) = bathy_coords(p, 9)
    # corner (xi=1, eta=1) -> (x_r, L_I)
    assert abs(x[-1] - 1.0) <= 1e-14
    assert abs(y[-1] - L_I) <= 1e-14


def test_map_affine_in_p():
    rng = np.random.default_rng(0)
    m = 11
    p1 = -0.2 * rng.random(m)
    p2 = -0.2 * rng.random(m)
    a = 0.3
    blk = make_bathymetry_block(m, 9, 0.0, 1.0, L_I)
    xa, ya = blk.coords(a * p1 + (1 - a) * p2)
    x1, y1 = blk.coords(p1)
    x2, y2 = blk.coords(p2)
    assert np.allclose(xa, a * x1 + (1 - a) * x2, atol=1e-14)
    assert np.allclose(ya, a * y1 + (1 - a) * y2, atol=1e-14)


def test_degenerate_map_rejected():
    with pytest.raises(FoldedMeshError):
        check_admissible_seabed(np.array([0.0, 0.6, 0.0]), L_I)


def test_identity_map_metrics():
    m = 12
    ops = build_first_derivative(m, 1.0 / (m - 1), 4)
    xi = np.linspace(0, 1, m)
    x = np.repeat(xi, m)
    y = np.tile(xi, m)
    blk = compute_metrics(x, y, ops, ops)
    assert np.allclose(blk.jac, 1.0, atol=1e-13)
    assert np.allclose(blk.a1, 1.0, atol=1e-13)
    assert np.allclose(blk.a2, 1.0, atol=1e-13)
    assert np.allclose(blk.bet, 0.0, atol=1e-13)
    assert np.allclose(blk.w1, 1.0, atol=1e-13)
    assert np.allclose(blk.w2, 1.0, atol=1e-13)


def test_affine_map_metrics():
    # x = 2 xi, y = eta: J = 2, a1 = 1/2, a2 = 2, beta = 0 (hand-evaluated)
    m = 14
    ops = build_first_derivative(m, 1.0 / (m - 1), 4)
    xi = np.linspace(0, 1, m)
    x = np.repeat(2.0 * xi, m)
    y = np.tile(xi, m)
    blk = compute_metrics(x, y, ops, ops)
    assert np.allclose(blk.jac, 2.0, atol=1e-12)
    assert np.allclose(blk.a1, 0.5, atol=1e-12)
    assert np.allclose(blk.a2, 2.0, atol=1e-12)
    assert np.allclose(blk.bet, 0.0, atol=1e-12)


def test_smooth_map_ellipticity():
    m = 16
    ops = build_first_derivative(m, 1.0 / (m - 1), 4)
    xi = np.linspace(0, 1, m)
    X, E = np.meshgrid(xi, xi, indexing="ij")
    x = (X + 0.05 * np.sin(np.pi * X) * np.sin(np.pi * E)).ravel()
    y = (E + 0.07 * np.sin(2 * np.pi * X) * E).ravel()
    blk = compute_metrics(x, y, ops, ops)
    assert np.all(blk.a1 * blk.a2 - blk.bet**2 > 0)


def test_folded_mesh_reports_index():
    m = 12
    ops = build_first_derivative(m, 1.0 / (m - 1), 4)
    xi = np.linspace(0, 1, m)
    x = np.repeat(xi, m)
    y = np.tile(xi, m).copy()
    y[y.size // 2] += 0.9  # wreck one node
    with pytest.raises(FoldedMeshError) as err:
        compute_metrics(x, y, ops, ops)
    assert err.value.index is not None


def test_tfi_reproduces_annulus_boundaries():
    m_xi, m_eta = 13, 9
    inner = arc_nodes((0, 0), 0.5, 0.0, np.pi / 2, m_xi)
    outer = arc_nodes((0, 0), 1.0, 0.0, np.pi / 2, m_xi)
    west = line_nodes(inner[0], outer[0], m_eta)
    east = line_nodes(inner[-1], outer[-1], m_eta)
    x, y = tfi_coordinates(west, east, inner, outer)
    X = x.reshape(m_xi, m_eta)
    Y = y.reshape(m_xi, m_eta)
    assert np.allclose(np.column_stack([X[:, 0], Y[:, 0]]), inner, atol=1e-14)
    assert np.allclose(np.column_stack([X[:, -1], Y[:, -1]]), outer, atol=1e-14)


# ---------------------------------------------------------------------------
# sensitivities against the finite-difference oracle
# ---------------------------------------------------------------------------

def fd_metric(blk_map, ops_xi, ops_eta, p, i, attr, step=1e-6):
    e = np.zeros_like(p)
    e[i] = step
    xp, yp = blk_map.coords(p + e)
    xm, ym = blk_map.coords(p - e)
    bp = compute_metrics(xp, yp, ops_xi, ops_eta)
    bm = compute_metrics(xm, ym, ops_xi, ops_eta)
    return (getattr(bp, attr) - getattr(bm, attr)) / (2 * step)


@pytest.fixture(scope="module")
def bathy_setup():
    m_xi, m_eta = 11, 9
    blk_map = make_bathymetry_block(m_xi, m_eta, 0.0, 1.0, L_I)
    ops_xi = build_first_derivative(m_xi, 1.0 / (m_xi - 1), 4)
    ops_eta = build_first_derivative(m_eta, 1.0 / (m_eta - 1), 4)
    rng = np.random.default_rng(42)
    p = -0.15 * rng.random(m_xi)
    x, y = blk_map.coords(p)
    blk = compute_metrics(x, y, ops_xi, ops_eta)
    return blk_map, ops_xi, ops_eta, p, blk


def test_dx_dp_is_zero(bathy_setup):
    blk_map, ops_xi, ops_eta, p, blk = bathy_setup
    s = metric_sensitivity(blk, 3, blk_map.design_profile(), ops_xi, ops_eta)
    assert np.abs(s.dx).max() == 0.0
    assert np.abs(s.dxxi).max() == 0.0


@pytest.mark.parametrize("attr,sattr", [
    ("jac", "djac"), ("a1", "da1"), ("a2", "da2"),
    ("bet", "dbet"), ("w1", "dw1"), ("w2", "dw2"),
])
def test_metric_sensitivity_vs_fd(bathy_setup, attr, sattr):
    blk_map, ops_xi, ops_eta, p, blk = bathy_setup
    sens = metric_sensitivities(blk, blk_map.design_profile(), ops_xi, ops_eta)
    for i in (0, 4, 10):
        fd = fd_metric(blk_map, ops_xi, ops_eta, p, i, attr)
        an = np.asarray(getattr(sens, sattr)[:, i].todense()).ravel()
        scale = max(1.0, np.abs(fd).max())
        assert np.abs(an - fd).max() / scale <= 1e-6


def test_sensitivity_index_range(bathy_setup):
    blk_map, ops_xi, ops_eta, p, blk = bathy_setup
    from sbpwave import ConfigurationError

    with pytest.raises(ConfigurationError):
        metric_sensitivity(blk, 11, blk_map.design_profile(), ops_xi, ops_eta)
