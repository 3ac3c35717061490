"""Per-block 2D SBP operators on Cartesian and curvilinear blocks.

States are column-major with eta fastest.  All boundary operators follow the
outward-normal sign convention: the west and south normal derivatives carry
a leading minus.  Curvilinear Laplacians are assembled from variable-
coefficient 1D operators lifted line-by-line (equivalently, by tensor
products with diagonal coefficient matrices), which keeps every coefficient
dependence an explicit diagonal factor; the design-gradient machinery relies
on that structure.
"""

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .errors import ConfigurationError
from .geometry import CurvilinearBlock, compute_metrics
from .operators import SbpOperatorSet1D

SIDES = ("w", "e", "s", "n")


def _kron(a, b):
    return sp.kron(a, b, format="csr")


def _row_matrix(vec):
    return sp.csr_matrix(np.asarray(vec, float)[None, :])


@dataclass(frozen=True)
class SandwichTerm:
    """One factor of H_dir D2_dir(c) = sum_t L^T diag(w * c) R."""

    L: sp.csr_matrix
    R: sp.csr_matrix
    w: np.ndarray


@dataclass(frozen=True)
class VarCoeffFactory:
    """Variable-coefficient second-derivative operator in one grid direction."""

    direction: str
    Hdir: np.ndarray  # lifted 1D norm diagonal (includes spacing)
    terms: tuple

    def assemble(self, c):
        """Sparse D2_dir(c) for a 2D coefficient field c (flattened)."""
        c = np.asarray(c, float)
        acc = None
        for t in self.terms:
            piece = t.L.T @ sp.diags(t.w * c) @ t.R
            acc = piece if acc is None else acc + piece
        return (sp.diags(1.0 / self.Hdir) @ acc).tocsr()

    def remainder(self, c):
        """R_dir(c): the PSD remainder lifted to 2D (terms beyond D1 and edges)."""
        c = np.asarray(c, float)
        acc = None
        for t in self.terms[1:-2]:
            piece = t.L.T @ sp.diags(-t.w * c) @ t.R
            acc = piece if acc is None else acc + piece
        return acc.tocsr()


def _make_factory(direction, ops, other_m):
    """Lift the 1D compatible-D2 structure along `direction`."""

    def lift(mat_1d):
        mat_1d = sp.csr_matrix(mat_1d)
        if direction == "xi":
            return _kron(mat_1d, sp.identity(other_m))
        return _kron(sp.identity(other_m), mat_1d)

    m = ops.m
    n = m * other_m if direction == "xi" else other_m * m
    terms = [SandwichTerm(L=lift(ops.D1), R=lift(ops.D1), w=-np.repeat(ops.H, other_m) if direction == "xi" else -np.tile(ops.H, other_m))]
    for wgt, Dk in ops.r_terms:
        lifted = lift(Dk)
        terms.append(SandwichTerm(L=lifted, R=lifted, w=np.full(n, -wgt)))
    e_l = sp.csr_matrix((np.ones(1), ([0], [0])), shape=(1, m))
    e_r = sp.csr_matrix((np.ones(1), ([0], [m - 1])), shape=(1, m))
    E_ll = lift(e_l.T @ e_l)
    E_ldl = lift(e_l.T @ _row_matrix(ops.d_l))
    E_rr = lift(e_r.T @ e_r)
    E_rdr = lift(e_r.T @ _row_matrix(ops.d_r))
    terms.append(SandwichTerm(L=E_ll, R=E_ldl, w=np.full(n, -1.0)))
    terms.append(SandwichTerm(L=E_rr, R=E_rdr, w=np.full(n, 1.0)))
    Hdir = np.repeat(ops.H, other_m) if direction == "xi" else np.tile(ops.H, other_m)
    return VarCoeffFactory(direction=direction, Hdir=Hdir, terms=tuple(terms))


@dataclass
class BlockOperators2D:
    """Assembled operators of a single block."""

    m_xi: int
    m_eta: int
    is_cartesian: bool
    geom: CurvilinearBlock
    ops_xi: SbpOperatorSet1D
    ops_eta: SbpOperatorSet1D
    Hvol: np.ndarray
    DL: sp.csr_matrix
    Dx: sp.csr_matrix
    Dy: sp.csr_matrix
    Rmat: sp.csr_matrix
    e: dict
    d: dict
    Hedge: dict
    edge_nodes: dict
    Dxi2d: sp.csr_matrix = None
    Deta2d: sp.csr_matrix = None
    K_core: sp.csr_matrix = None
    fac_xi: VarCoeffFactory = None
    fac_eta: VarCoeffFactory = None
    dhat: dict = field(default_factory=dict)

    @property
    def n(self):
        return self.m_xi * self.m_eta

    def edge_coords(self, side):
        idx = self.edge_nodes[side]
        return np.column_stack([self.geom.x[idx], self.geom.y[idx]])

    def r_form(self, u, v):
        return float(u @ (self.Rmat @ v))


def _edge_restrictions(m_xi, m_eta):
    I_xi = sp.identity(m_xi, format="csr")
    I_eta = sp.identity(m_eta, format="csr")
    e_l_xi = sp.csr_matrix((np.ones(1), ([0], [0])), shape=(1, m_xi))
    e_r_xi = sp.csr_matrix((np.ones(1), ([0], [m_xi - 1])), shape=(1, m_xi))
    e_l_eta = sp.csr_matrix((np.ones(1), ([0], [0])), shape=(1, m_eta))
    e_r_eta = sp.csr_matrix((np.ones(1), ([0], [m_eta - 1])), shape=(1, m_eta))
    e = {
        "w": _kron(e_l_xi, I_eta),
        "e": _kron(e_r_xi, I_eta),
        "s": _kron(I_xi, e_l_eta),
        "n": _kron(I_xi, e_r_eta),
    }
    idx = np.arange(m_xi * m_eta).reshape(m_xi, m_eta)
    nodes = {"w": idx[0, :], "e": idx[-1, :], "s": idx[:, 0], "n": idx[:, -1]}
    return e, nodes


def assemble_cartesian_block(x0, x1, y0, y1, ops_x, ops_y):
    """Tensor-product operators on a rectangle [x0,x1] x [y0,y1]."""
    if not np.isclose((x1 - x0) / (ops_x.m - 1), ops_x.h) or not np.isclose(
        (y1 - y0) / (ops_y.m - 1), ops_y.h
    ):
        raise ConfigurationError("operator spacing does not match the rectangle")
    m_xi, m_eta = ops_x.m, ops_y.m
    from .operators import build_second_derivative

    d2x = build_second_derivative(ops_x, np.ones(m_xi))
    d2y = build_second_derivative(ops_y, np.ones(m_eta))
    I_x = sp.identity(m_xi, format="csr")
    I_y = sp.identity(m_eta, format="csr")
    DL = _kron(d2x.D2c, I_y) + _kron(I_x, d2y.D2c)
    Dx = _kron(ops_x.D1, I_y)
    Dy = _kron(I_x, ops_y.D1)
    Hvol = np.repeat(ops_x.H, m_eta) * np.tile(ops_y.H, m_xi)
    Rx = d2x.Rc
    Ry = d2y.Rc
    Rmat = (_kron(Rx, sp.diags(ops_y.H)) + _kron(sp.diags(ops_x.H), Ry)).tocsr()

    e, nodes = _edge_restrictions(m_xi, m_eta)
    d = {
        "w": -_kron(_row_matrix(ops_x.d_l), I_y),
        "e": _kron(_row_matrix(ops_x.d_r), I_y),
        "s": -_kron(I_x, _row_matrix(ops_y.d_l)),
        "n": _kron(I_x, _row_matrix(ops_y.d_r)),
    }
    Hedge = {"w": ops_y.H.copy(), "e": ops_y.H.copy(), "s": ops_x.H.copy(), "n": ops_x.H.copy()}

    xs = x0 + np.arange(m_xi) * ops_x.h
    ys = y0 + np.arange(m_eta) * ops_y.h
    X = np.repeat(xs, m_eta)
    Y = np.tile(ys, m_xi)
    geom = compute_metrics(X, Y, ops_x, ops_y)
    return BlockOperators2D(
        m_xi=m_xi, m_eta=m_eta, is_cartesian=True, geom=geom,
        ops_xi=ops_x, ops_eta=ops_y, Hvol=Hvol, DL=DL.tocsr(),
        Dx=Dx, Dy=Dy, Rmat=Rmat, e=e, d=d, Hedge=Hedge, edge_nodes=nodes,
        Dxi2d=Dx, Deta2d=Dy,
    )


def assemble_curvilinear_block(geom, ops_xi, ops_eta):
    """Curvilinear Laplacian, boundary operators and quadratures per block."""
    m_xi, m_eta = geom.m_xi, geom.m_eta
    if (ops_xi.m, ops_eta.m) != (m_xi, m_eta):
        raise ConfigurationError("operator sizes do not match the block")
    n = geom.n
    I_xi = sp.identity(m_xi, format="csr")
    I_eta = sp.identity(m_eta, format="csr")
    Dxi = _kron(ops_xi.D1, I_eta)
    Deta = _kron(I_xi, ops_eta.D1)

    fac_xi = _make_factory("xi", ops_xi, m_eta)
    fac_eta = _make_factory("eta", ops_eta, m_xi)

    D2xi_a1 = fac_xi.assemble(geom.a1)
    D2eta_a2 = fac_eta.assemble(geom.a2)
    B = sp.diags(geom.bet)
    K = (D2xi_a1 + Deta @ B @ Dxi + Dxi @ B @ Deta + D2eta_a2).tocsr()
    Ji = sp.diags(1.0 / geom.jac)
    DL = (Ji @ K).tocsr()

    Dx = (Ji @ (sp.diags(geom.yeta) @ Dxi - sp.diags(geom.yxi) @ Deta)).tocsr()
    Dy = (Ji @ (-sp.diags(geom.xeta) @ Dxi + sp.diags(geom.xxi) @ Deta)).tocsr()

    Hxi2d = np.repeat(ops_xi.H, m_eta)
    Heta2d = np.tile(ops_eta.H, m_xi)
    Hvol = Hxi2d * Heta2d * geom.jac
    Rmat = (
        fac_xi.remainder(geom.a1) @ sp.diags(Heta2d)
        + fac_eta.remainder(geom.a2) @ sp.diags(Hxi2d)
    ).tocsr()

    e, nodes = _edge_restrictions(m_xi, m_eta)
    dhat = {
        "w": _kron(_row_matrix(ops_xi.d_l), I_eta),
        "e": _kron(_row_matrix(ops_xi.d_r), I_eta),
        "s": _kron(I_xi, _row_matrix(ops_eta.d_l)),
        "n": _kron(I_xi, _row_matrix(ops_eta.d_r)),
    }
    d = {}
    Hedge = {}
    for side in SIDES:
        idx = nodes[side]
        if side in ("w", "e"):
            tang = e[side] @ Deta
            scale = geom.w2[idx]
            core = sp.diags(geom.a1[idx]) @ dhat[side] + sp.diags(geom.bet[idx]) @ tang
            sign = -1.0 if side == "w" else 1.0
            Hedge[side] = ops_eta.H * scale
        else:
            tang = e[side] @ Dxi
            scale = geom.w1[idx]
            core = sp.diags(geom.a2[idx]) @ dhat[side] + sp.diags(geom.bet[idx]) @ tang
            sign = -1.0 if side == "s" else 1.0
            Hedge[side] = ops_xi.H * scale
        d[side] = (sign * sp.diags(1.0 / scale) @ core).tocsr()

    return BlockOperators2D(
        m_xi=m_xi, m_eta=m_eta, is_cartesian=False, geom=geom,
        ops_xi=ops_xi, ops_eta=ops_eta, Hvol=Hvol, DL=DL,
        Dx=Dx, Dy=Dy, Rmat=Rmat, e=e, d=d, Hedge=Hedge, edge_nodes=nodes,
        Dxi2d=Dxi, Deta2d=Deta, K_core=K, fac_xi=fac_xi, fac_eta=fac_eta,
        dhat=dhat,
    )


def assemble_block(geom_or_rect, ops_a, ops_b):
    """Dispatch on Cartesian rectangles (tuple) or CurvilinearBlock."""
    if isinstance(geom_or_rect, CurvilinearBlock):
        return assemble_curvilinear_block(geom_or_rect, ops_a, ops_b)
    x0, x1, y0, y1 = geom_or_rect
    return assemble_cartesian_block(x0, x1, y0, y1, ops_a, ops_b)
