"""Coordinate maps, metric terms and their design sensitivities.

Blocks live on the unit reference square discretized by m_xi x m_eta points;
states are column-major with the eta index fastest, so index = i_xi * m_eta
+ i_eta.  Physical coordinates come from linear transfinite interpolation of
the four boundary curves.  A block may carry a design boundary (south or
north) whose y-coordinates are displaced nodewise by the design vector p;
the interpolation is affine in p with

    dy/dp_i = e_i (x) (1 - eta)        (south design edge)
    dy/dp_i = e_i (x) eta              (north design edge)

and dx/dp_i = 0.  Metric derivatives are computed with the first-derivative
SBP operators of the block, and the design derivatives of all metric factors
follow by the product rule.
"""

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .errors import ConfigurationError, DimensionError, FoldedMeshError

JACOBIAN_FLOOR = 1e-12


# ---------------------------------------------------------------------------
# boundary curves
# ---------------------------------------------------------------------------

def line_nodes(p0, p1, n):
    """n points on the straight segment p0 -> p1."""
    t = np.linspace(0.0, 1.0, n)[:, None]
    return (1.0 - t) * np.asarray(p0, float) + t * np.asarray(p1, float)


def arc_nodes(center, radius, theta0, theta1, n):
    """n points on a circular arc, angles in radians."""
    th = np.linspace(theta0, theta1, n)
    cx, cy = center
    return np.column_stack([cx + radius * np.cos(th), cy + radius * np.sin(th)])


def tfi_coordinates(west, east, south, north):
    """Linear transfinite interpolation of four boundary node arrays.

    west/east have shape (m_eta, 2); south/north (m_xi, 2).  Corner data
    must agree.  Returns flattened (x, y), eta fastest.
    """
    west = np.asarray(west, float)
    east = np.asarray(east, float)
    south = np.asarray(south, float)
    north = np.asarray(north, float)
    m_eta = west.shape[0]
    m_xi = south.shape[0]
    if east.shape[0] != m_eta or north.shape[0] != m_xi:
        raise DimensionError("boundary curve node counts do not match")
    for pair, a, b in (
        ("south/west", south[0], west[0]),
        ("south/east", south[-1], east[0]),
        ("north/west", north[0], west[-1]),
        ("north/east", north[-1], east[-1]),
    ):
        if np.abs(np.asarray(a) - np.asarray(b)).max() > 1e-10:
            raise ConfigurationError(f"corner mismatch between {pair} curves: {a} vs {b}")

    xi = np.linspace(0.0, 1.0, m_xi)[:, None, None]
    eta = np.linspace(0.0, 1.0, m_eta)[None, :, None]
    P = (
        (1 - xi) * west[None, :, :]
        + xi * east[None, :, :]
        + (1 - eta) * south[:, None, :]
        + eta * north[:, None, :]
        - (1 - xi) * (1 - eta) * south[0][None, None, :]
        - xi * (1 - eta) * south[-1][None, None, :]
        - (1 - xi) * eta * north[0][None, None, :]
        - xi * eta * north[-1][None, None, :]
    )
    return P[:, :, 0].ravel(), P[:, :, 1].ravel()


@dataclass(frozen=True)
class BlockMap:
    """A TFI block map, optionally with a design edge displaced by p.

    The side curves are understood to follow the design-edge endpoints, so
    the displacement field is exactly the tensor-product blend and the map
    is affine in p.
    """

    west: np.ndarray
    east: np.ndarray
    south: np.ndarray
    north: np.ndarray
    design_edge: str = ""  # "", "s" or "n"

    @property
    def m_xi(self):
        return self.south.shape[0]

    @property
    def m_eta(self):
        return self.west.shape[0]

    def coords(self, p=None):
        x, y = tfi_coordinates(self.west, self.east, self.south, self.north)
        if self.design_edge:
            if p is None:
                raise ConfigurationError("design block requires a design vector")
            p = np.asarray(p, float)
            if p.shape != (self.m_xi,):
                raise DimensionError(
                    f"design vector must have length {self.m_xi}, got {p.shape}"
                )
            y = y + self.design_profile() @ p
        elif p is not None:
            raise ConfigurationError("block has no design edge")
        return x, y

    def design_profile(self):
        """Sparse dy/dp matrix of shape (N, m_xi): column i is e_i (x) w(eta)."""
        if not self.design_edge:
            raise ConfigurationError("block has no design edge")
        eta = np.linspace(0.0, 1.0, self.m_eta)
        w = (1.0 - eta) if self.design_edge == "s" else eta
        rows = np.arange(self.m_xi * self.m_eta)
        cols = np.repeat(np.arange(self.m_xi), self.m_eta)
        vals = np.tile(w, self.m_xi)
        return sp.csr_matrix((vals, (rows, cols)), shape=(rows.size, self.m_xi))


def bathymetry_map(p_len, x_l, x_r, interface_y):
    """Lower-block map of the seabed problem: south edge carries p.

    y(xi, eta) = p^ + (L_I - p^) eta with p = 0 as the base; x is uniform in
    xi.  Design values must stay below the interface level.
    """
    m_xi = p_len
    south = line_nodes((x_l, 0.0), (x_r, 0.0), m_xi)
    north = line_nodes((x_l, interface_y), (x_r, interface_y), m_xi)
    # side curves with matching endpoints; m_eta chosen by the caller via
    # with_eta() since the interface point count is a separate resolution.
    return south, north


def make_bathymetry_block(m_xi, m_eta, x_l, x_r, interface_y):
    south = line_nodes((x_l, 0.0), (x_r, 0.0), m_xi)
    north = line_nodes((x_l, interface_y), (x_r, interface_y), m_xi)
    west = line_nodes((x_l, 0.0), (x_l, interface_y), m_eta)
    east = line_nodes((x_r, 0.0), (x_r, interface_y), m_eta)
    return BlockMap(west=west, east=east, south=south, north=north, design_edge="s")


def check_admissible_seabed(p, interface_y):
    p = np.asarray(p, float)
    if np.any(p >= interface_y):
        raise FoldedMeshError(
            f"seabed touches the interface: max p = {p.max():.3g} >= {interface_y}",
            index=int(np.argmax(p)),
        )


# ---------------------------------------------------------------------------
# metric terms
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CurvilinearBlock:
    """Grid coordinates and discrete metric factors of one mapped block."""

    m_xi: int
    m_eta: int
    x: np.ndarray
    y: np.ndarray
    xxi: np.ndarray
    xeta: np.ndarray
    yxi: np.ndarray
    yeta: np.ndarray
    jac: np.ndarray
    a1: np.ndarray
    a2: np.ndarray
    bet: np.ndarray
    w1: np.ndarray
    w2: np.ndarray

    @property
    def n(self):
        return self.m_xi * self.m_eta

    def edge_indices(self, side):
        idx = np.arange(self.n).reshape(self.m_xi, self.m_eta)
        if side == "w":
            return idx[0, :]
        if side == "e":
            return idx[-1, :]
        if side == "s":
            return idx[:, 0]
        if side == "n":
            return idx[:, -1]
        raise ConfigurationError(f"unknown side {side!r}")


def _lifted_d1(ops_xi, ops_eta):
    Dxi = sp.kron(ops_xi.D1, sp.identity(ops_eta.m), format="csr")
    Deta = sp.kron(sp.identity(ops_xi.m), ops_eta.D1, format="csr")
    return Dxi, Deta


def compute_metrics(x, y, ops_xi, ops_eta):
    """Discrete metric coefficients from the SBP metric derivatives."""
    m_xi, m_eta = ops_xi.m, ops_eta.m
    x = np.asarray(x, float).ravel()
    y = np.asarray(y, float).ravel()
    if x.size != m_xi * m_eta or y.size != x.size:
        raise DimensionError("coordinate vectors must have length m_xi * m_eta")
    Dxi, Deta = _lifted_d1(ops_xi, ops_eta)
    xxi, xeta = Dxi @ x, Deta @ x
    yxi, yeta = Dxi @ y, Deta @ y
    jac = xxi * yeta - xeta * yxi
    if np.any(jac <= JACOBIAN_FLOOR):
        bad = int(np.argmin(jac))
        raise FoldedMeshError(
            f"non-positive Jacobian {jac[bad]:.3e} at node {bad} "
            f"(xi={bad // m_eta}, eta={bad % m_eta})",
            index=bad,
        )
    a1 = (xeta**2 + yeta**2) / jac
    a2 = (xxi**2 + yxi**2) / jac
    bet = -(xxi * xeta + yxi * yeta) / jac
    w1 = np.sqrt(xxi**2 + yxi**2)
    w2 = np.sqrt(xeta**2 + yeta**2)
    return CurvilinearBlock(
        m_xi=m_xi, m_eta=m_eta, x=x, y=y,
        xxi=xxi, xeta=xeta, yxi=yxi, yeta=yeta,
        jac=jac, a1=a1, a2=a2, bet=bet, w1=w1, w2=w2,
    )


@dataclass(frozen=True)
class MetricSensitivities:
    """Design derivatives of all metric factors, one column per parameter.

    Each attribute is a sparse (N, n_p) matrix whose column i is the
    diagonal of the derivative with respect to p_i.
    """

    n_p: int
    dx: sp.csr_matrix
    dy: sp.csr_matrix
    dxxi: sp.csr_matrix
    dxeta: sp.csr_matrix
    dyxi: sp.csr_matrix
    dyeta: sp.csr_matrix
    djac: sp.csr_matrix
    da1: sp.csr_matrix
    da2: sp.csr_matrix
    dbet: sp.csr_matrix
    dw1: sp.csr_matrix
    dw2: sp.csr_matrix


@dataclass(frozen=True)
class MetricSensitivity:
    """Single-parameter view of MetricSensitivities (diagonals as vectors)."""

    index: int
    dx: np.ndarray
    dy: np.ndarray
    dxxi: np.ndarray
    dxeta: np.ndarray
    dyxi: np.ndarray
    dyeta: np.ndarray
    djac: np.ndarray
    da1: np.ndarray
    da2: np.ndarray
    dbet: np.ndarray
    dw1: np.ndarray
    dw2: np.ndarray


def metric_sensitivities(block, design_profile, ops_xi, ops_eta):
    """Product-rule derivatives of the metric factors for every parameter.

    design_profile is the sparse dy/dp matrix of the block map; dx/dp = 0
    for vertical-displacement parameterizations, but the general formulas
    are kept so other maps can reuse this.
    """
    Dxi, Deta = _lifted_d1(ops_xi, ops_eta)
    n, n_p = design_profile.shape
    if n != block.n:
        raise DimensionError("design profile does not match block size")

    def dg(v):
        return sp.diags(v)

    S_y = design_profile.tocsr()
    S_x = sp.csr_matrix((n, n_p))
    S_xxi = (Dxi @ S_x).tocsr()
    S_xeta = (Deta @ S_x).tocsr()
    S_yxi = (Dxi @ S_y).tocsr()
    S_yeta = (Deta @ S_y).tocsr()

    S_J = (
        dg(block.yeta) @ S_xxi + dg(block.xxi) @ S_yeta
        - dg(block.yxi) @ S_xeta - dg(block.xeta) @ S_yxi
    ).tocsr()
    Ji = 1.0 / block.jac
    S_a1 = (
        -dg(Ji**2 * (block.xeta**2 + block.yeta**2)) @ S_J
        + dg(2.0 * Ji * block.xeta) @ S_xeta
        + dg(2.0 * Ji * block.yeta) @ S_yeta
    ).tocsr()
    S_a2 = (
        -dg(Ji**2 * (block.xxi**2 + block.yxi**2)) @ S_J
        + dg(2.0 * Ji * block.xxi) @ S_xxi
        + dg(2.0 * Ji * block.yxi) @ S_yxi
    ).tocsr()
    S_bet = (
        dg(Ji**2 * (block.xxi * block.xeta + block.yxi * block.yeta)) @ S_J
        - dg(Ji) @ (
            dg(block.xeta) @ S_xxi + dg(block.yeta) @ S_yxi
            + dg(block.xxi) @ S_xeta + dg(block.yxi) @ S_yeta
        )
    ).tocsr()
    S_w1 = (dg(block.xxi / block.w1) @ S_xxi + dg(block.yxi / block.w1) @ S_yxi).tocsr()
    S_w2 = (dg(block.xeta / block.w2) @ S_xeta + dg(block.yeta / block.w2) @ S_yeta).tocsr()

    return MetricSensitivities(
        n_p=n_p, dx=S_x, dy=S_y,
        dxxi=S_xxi, dxeta=S_xeta, dyxi=S_yxi, dyeta=S_yeta,
        djac=S_J, da1=S_a1, da2=S_a2, dbet=S_bet, dw1=S_w1, dw2=S_w2,
    )


def metric_sensitivity(block, i, design_profile, ops_xi, ops_eta):
    """Derivatives of the metric factors with respect to parameter i."""
    sens = metric_sensitivities(block, design_profile, ops_xi, ops_eta)
    if not 0 <= i < sens.n_p:
        raise ConfigurationError(f"parameter index {i} out of range [0, {sens.n_p})")

    def col(S):
        return np.asarray(S[:, i].todense()).ravel()

    return MetricSensitivity(
        index=i, dx=col(sens.dx), dy=col(sens.dy),
        dxxi=col(sens.dxxi), dxeta=col(sens.dxeta),
        dyxi=col(sens.dyxi), dyeta=col(sens.dyeta),
        djac=col(sens.djac), da1=col(sens.da1), da2=col(sens.da2),
        dbet=col(sens.dbet), dw1=col(sens.dw1), dw2=col(sens.dw2),
    )
