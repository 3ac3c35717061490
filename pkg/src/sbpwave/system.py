"""Global SBP-P-SAT system for a multiblock domain.

The semi-discrete scheme is

    w_tt = D w + E w_t + forcing,
    D = c^2 P (blkdiag(D_L) + SAT_BC1 + SAT_IC) P,
    E = c P SAT_BC2 P,
    P = I - Hbar^-1 L^T (L Hbar^-1 L^T)^-1 L,

with SAT_BC1 carrying Neumann/symmetry conditions and the normal-derivative
part of characteristic edges, SAT_BC2 the characteristic time-derivative
damping, and SAT_IC the one-sided interface flux coupling.  Dirichlet values
and solution continuity across interfaces are imposed strongly through the
projection; the constraint rows are deduplicated with a union-find pass over
node equivalence classes so shared corners never produce a rank-deficient
Gram matrix.
"""

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import (
    ConfigurationError,
    ConstraintRankError,
    TopologyError,
    UnsupportedSourceError,
)

VALID_TAGS = ("dirichlet", "neumann", "outflow", "inflow", "interface", "symmetry")
CONFORMITY_TOL = 1e-12


@dataclass(frozen=True)
class EdgeSpec:
    block: int
    side: str
    tag: str
    partner: tuple = None  # (block, side) for interfaces


class _UnionFind:
    def __init__(self, n):
        self.parent = list(range(n))

    def find(self, a):
        while self.parent[a] != a:
            self.parent[a] = self.parent[self.parent[a]]
            a = self.parent[a]
        return a

    def union(self, a, b):
        ra, rb = self.find(a), self.find(b)
        if ra != rb:
            self.parent[max(ra, rb)] = min(ra, rb)


def _match_edges(coords_a, coords_b):
    """Return the permutation mapping b-edge nodes onto a-edge ordering."""
    if coords_a.shape != coords_b.shape:
        raise TopologyError(
            f"non-conforming interface: {coords_a.shape[0]} vs {coords_b.shape[0]} nodes"
        )
    if np.abs(coords_a - coords_b).max() <= CONFORMITY_TOL:
        return np.arange(coords_a.shape[0])
    if np.abs(coords_a - coords_b[::-1]).max() <= CONFORMITY_TOL:
        return np.arange(coords_a.shape[0])[::-1]
    raise TopologyError(
        "non-conforming interface: edge coordinates do not match in either orientation"
    )


class GlobalSystem:
    """Assembled multiblock operators and projection."""

    def __init__(self, blocks, edges, c):
        if c <= 0:
            raise ConfigurationError(f"wave speed must be positive, got {c}")
        self.blocks = list(blocks)
        self.c = float(c)
        self.offsets = np.cumsum([0] + [b.n for b in self.blocks])
        self.N = int(self.offsets[-1])
        self.Hbar = np.concatenate([b.Hvol for b in self.blocks])
        self.edges = self._normalize_edges(edges)
        self.interface_pairs = self._pair_interfaces()
        self._build_constraints()
        self._build_sats()
        self._P_dense = None

    # -- topology ---------------------------------------------------------

    def _normalize_edges(self, edges):
        specs = []
        for e in edges:
            if isinstance(e, EdgeSpec):
                specs.append(e)
            else:
                specs.append(EdgeSpec(
                    block=e["block"], side=e["side"], tag=e["tag"],
                    partner=tuple(e["partner"]) if e.get("partner") else None,
                ))
        seen = {}
        for s in specs:
            if s.tag not in VALID_TAGS:
                raise TopologyError(f"unknown edge tag {s.tag!r}")
            key = (s.block, s.side)
            if key in seen:
                raise TopologyError(f"edge {key} tagged more than once")
            seen[key] = s
        for b_id, blk in enumerate(self.blocks):
            for side in ("w", "e", "s", "n"):
                if (b_id, side) not in seen:
                    raise TopologyError(f"edge ({b_id}, {side!r}) has no tag")
        return specs

    def _edge_global_nodes(self, block, side):
        return self.offsets[block] + self.blocks[block].edge_nodes[side]

    def _pair_interfaces(self):
        pairs = []
        done = set()
        for s in self.edges:
            if s.tag != "interface":
                continue
            if (s.block, s.side) in done:
                continue
            if s.partner is None:
                raise TopologyError(f"interface edge ({s.block}, {s.side!r}) has no partner")
            pb, ps = s.partner
            partner_spec = next(
                (t for t in self.edges if (t.block, t.side) == (pb, ps)), None
            )
            if partner_spec is None or partner_spec.tag != "interface":
                raise TopologyError(f"partner edge ({pb}, {ps!r}) is not an interface")
            ca = self.blocks[s.block].edge_coords(s.side)
            cb = self.blocks[pb].edge_coords(ps)
            perm = _match_edges(ca, cb)
            pairs.append(((s.block, s.side), (pb, ps), perm))
            done.add((s.block, s.side))
            done.add((pb, ps))
        return pairs

    # -- constraints --------------------------------------------------------

    def _build_constraints(self):
        uf = _UnionFind(self.N)
        for (ba, sa), (bb, sb), perm in self.interface_pairs:
            ga = self._edge_global_nodes(ba, sa)
            gb = self._edge_global_nodes(bb, sb)[perm]
            for a, b in zip(ga, gb):
                uf.union(int(a), int(b))
        pinned = set()
        for s in self.edges:
            if s.tag == "dirichlet":
                for g in self._edge_global_nodes(s.block, s.side):
                    pinned.add(uf.find(int(g)))

        classes = {}
        for s in self.edges:
            if s.tag in ("dirichlet", "interface"):
                for g in self._edge_global_nodes(s.block, s.side):
                    g = int(g)
                    classes.setdefault(uf.find(g), set()).add(g)

        rows, cols, vals = [], [], []
        self.constraint_nodes = []  # node whose boundary value each row pins (or None)
        nrow = 0
        for root in sorted(classes):
            members = sorted(classes[root])
            rep = members[0]
            if root in pinned:
                rows.append(nrow)
                cols.append(rep)
                vals.append(1.0)
                self.constraint_nodes.append(rep)
                nrow += 1
            for other in members[1:]:
                rows.extend([nrow, nrow])
                cols.extend([other, rep])
                vals.extend([1.0, -1.0])
                self.constraint_nodes.append(None)
                nrow += 1
        self.L = sp.csr_matrix((vals, (rows, cols)), shape=(nrow, self.N))
        gram = (self.L @ sp.diags(1.0 / self.Hbar) @ self.L.T).tocsc()
        try:
            self._gram_lu = spla.splu(gram)
        except RuntimeError as err:
            raise ConstraintRankError(f"singular constraint Gram matrix: {err}") from err

    def project(self, v):
        """Apply P = I - Hbar^-1 L^T (L Hbar^-1 L^T)^-1 L."""
        if self.L.shape[0] == 0:
            return v.copy()
        return v - (self.L.T @ self._gram_lu.solve(self.L @ v)) / self.Hbar

    def lift(self, gvals):
        """Affine lift G g: the Hbar-minimal vector with L w = g."""
        return (self.L.T @ self._gram_lu.solve(gvals)) / self.Hbar

    def constraint_values(self, func):
        """Evaluate func(x, y) at pin rows (0 for continuity rows)."""
        g = np.zeros(self.L.shape[0])
        x = np.concatenate([b.geom.x for b in self.blocks])
        y = np.concatenate([b.geom.y for b in self.blocks])
        for i, node in enumerate(self.constraint_nodes):
            if node is not None:
                g[i] = func(x[node], y[node])
        return g

    # -- SAT assembly ------------------------------------------------------

    def _embed_edge_rows(self, block, rowmat):
        """Pad an (m_edge x n_block) matrix to global columns."""
        n_l = self.offsets[block]
        n_r = self.N - self.offsets[block + 1]
        return sp.hstack(
            [sp.csr_matrix((rowmat.shape[0], n_l)), rowmat, sp.csr_matrix((rowmat.shape[0], n_r))],
            format="csr",
        )

    def _build_sats(self):
        blk_dl = sp.block_diag([b.DL for b in self.blocks], format="csr")
        Hinv = sp.diags(1.0 / self.Hbar)
        sat1 = None
        sat2 = None
        for s in self.edges:
            if s.tag in ("neumann", "symmetry", "outflow", "inflow"):
                b = self.blocks[s.block]
                E = self._embed_edge_rows(s.block, b.e[s.side])
                Dn = self._embed_edge_rows(s.block, b.d[s.side])
                He = sp.diags(b.Hedge[s.side])
                term = (E.T @ He @ Dn).tocsr()
                sat1 = term if sat1 is None else sat1 + term
                if s.tag in ("outflow", "inflow"):
                    damp = (E.T @ He @ E).tocsr()
                    sat2 = damp if sat2 is None else sat2 + damp
        for (ba, sa), (bb, sb), perm in self.interface_pairs:
            A = self.blocks[ba]
            Bb = self.blocks[bb]
            Ha = A.Hedge[sa]
            Hb = Bb.Hedge[sb][perm]
            if np.abs(Ha - Hb).max() > 1e-9 * max(1.0, np.abs(Ha).max()):
                raise TopologyError(
                    f"interface quadratures disagree between ({ba},{sa}) and ({bb},{sb})"
                )
            Ea = self._embed_edge_rows(ba, A.e[sa])
            Da = self._embed_edge_rows(ba, A.d[sa])
            Db = self._embed_edge_rows(bb, Bb.d[sb])[perm]
            term = (Ea.T @ sp.diags(Ha) @ (Da + Db)).tocsr()
            sat1 = term if sat1 is None else sat1 + term

        zero = sp.csr_matrix((self.N, self.N))
        self.SAT_BC1 = (-Hinv @ sat1).tocsr() if sat1 is not None else zero
        self.SAT_BC2 = (-Hinv @ sat2).tocsr() if sat2 is not None else zero
        self.C_core = (blk_dl + self.SAT_BC1).tocsr()
        self.E_core = self.SAT_BC2

    # -- actions -----------------------------------------------------------

    def apply_D(self, w):
        return self.c**2 * self.project(self.C_core @ self.project(w))

    def apply_E(self, v):
        return self.c * self.project(self.E_core @ self.project(v))

    def rhs_core(self, wp, vp):
        """c^2 C wp + c E_core vp, then projected (wp, vp pre-projected)."""
        return self.project(self.c**2 * (self.C_core @ wp) + self.c * (self.E_core @ vp))

    def dense_P(self):
        if self._P_dense is None:
            self._P_dense = np.column_stack(
                [self.project(col) for col in np.eye(self.N)]
            )
        return self._P_dense

    def dense_D(self):
        P = self.dense_P()
        return self.c**2 * P @ (self.C_core.toarray() @ P)

    def dense_E(self):
        P = self.dense_P()
        return self.c * P @ (self.E_core.toarray() @ P)

    # -- sources -----------------------------------------------------------

    def block_of_point(self, x, y):
        for b_id, blk in enumerate(self.blocks):
            if not blk.is_cartesian:
                continue
            gx, gy = blk.geom.x, blk.geom.y
            if gx.min() < x < gx.max() and gy.min() < y < gy.max():
                return b_id
        raise UnsupportedSourceError(
            f"point ({x}, {y}) is not strictly inside any fixed Cartesian block"
        )

    def point_source(self, x, y, order=None):
        """Mollified point source (Hbar-dual of point evaluation).

        The 1D factors satisfy `order` moment conditions on the minimal
        stencil around the point; (v, d)_Hbar then interpolates v there.
        """
        b_id = self.block_of_point(x, y)
        blk = self.blocks[b_id]
        order = order or blk.ops_xi.order

        def delta_1d(ops, x0, coord0):
            xs = coord0 + np.arange(ops.m) * ops.h
            j = int(np.clip(np.searchsorted(xs, x0) - order // 2, 0, ops.m - order))
            stencil = np.arange(j, j + order)
            V = np.vander((xs[stencil] - x0) / ops.h, increasing=True).T
            rhs = np.zeros(order)
            rhs[0] = 1.0
            loc = np.linalg.solve(V, rhs)
            loc[np.abs(loc) < 1e-13 * np.abs(loc).max()] = 0.0
            out = np.zeros(ops.m)
            out[stencil] = loc
            return out

        dx = delta_1d(blk.ops_xi, x, blk.geom.x.min())
        dy = delta_1d(blk.ops_eta, y, blk.geom.y.min())
        local = np.outer(dx, dy).ravel() / blk.Hvol
        vec = np.zeros(self.N)
        vec[self.offsets[b_id]: self.offsets[b_id + 1]] = local
        if self.L.shape[0] and np.abs(self.L @ vec).max() > 1e-12:
            raise UnsupportedSourceError(
                "source stencil touches constrained boundary or interface nodes"
            )
        return vec

    def boundary_forcing_template(self, block, side):
        """Factory for inflow data: g(edge values) -> global forcing vector.

        Returns (edge coordinates, apply) where apply(g) = c Hbar^-1 e^T H_k g.
        """
        blk = self.blocks[block]
        E = self._embed_edge_rows(block, blk.e[side]).T.tocsr()
        He = blk.Hedge[side]
        coords = blk.edge_coords(side)
        Hbar = self.Hbar
        c = self.c

        def apply(gvals):
            return c * (E @ (He * gvals)) / Hbar

        return coords, apply

    # -- energy ------------------------------------------------------------

    def block_slice(self, b_id):
        return slice(int(self.offsets[b_id]), int(self.offsets[b_id + 1]))

    def discrete_energy(self, w, v):
        """Sum of block energies on the projected state."""
        wp = self.project(w)
        vp = self.project(v)
        total = 0.0
        for b_id, blk in enumerate(self.blocks):
            sl = self.block_slice(b_id)
            wb, vb = wp[sl], vp[sl]
            H = blk.Hvol
            dxw = blk.Dx @ wb
            dyw = blk.Dy @ wb
            total += float(vb @ (H * vb))
            total += self.c**2 * float(dxw @ (H * dxw) + dyw @ (H * dyw))
            total += self.c**2 * blk.r_form(wb, wb)
        return total
