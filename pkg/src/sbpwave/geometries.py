"""Block layouts of the three reference problems.

All builders return a GlobalSystem plus whatever geometry handles the
experiment drivers need (design block maps, operator sets, edge handles).
Curvilinear blocks are discretized on the unit reference square, so their
1D operators use the reference spacing 1/(m-1); physical scaling enters
through the metric factors.
"""

from dataclasses import dataclass

import numpy as np

from .blocks import assemble_cartesian_block, assemble_curvilinear_block
from .errors import ConfigurationError
from .geometry import (
    BlockMap,
    arc_nodes,
    check_admissible_seabed,
    compute_metrics,
    line_nodes,
    make_bathymetry_block,
)
from .operators import build_first_derivative
from .system import EdgeSpec, GlobalSystem


def _ref_ops(m, order):
    return build_first_derivative(m, 1.0 / (m - 1), order)


# ---------------------------------------------------------------------------
# bathymetry: fixed upper rectangle over a seabed-shaped lower block
# ---------------------------------------------------------------------------

@dataclass
class BathymetrySetup:
    system: GlobalSystem
    design_map: BlockMap
    ops_xi: object
    ops_eta: object
    design_block: int
    interface_y: float

    @property
    def n_design(self):
        return self.design_map.m_xi


def build_bathymetry_system(
    p, m_x, m_y, order, c=1.0, x_l=0.0, x_r=1.0, interface_y=0.5, top_y=1.0
):
    """Two-block seabed geometry; the lower block's south edge carries p."""
    p = np.asarray(p, dtype=float)
    if p.shape != (m_x,):
        raise ConfigurationError(f"design vector must have length m_x = {m_x}")
    check_admissible_seabed(p, interface_y)

    ops_x = build_first_derivative(m_x, (x_r - x_l) / (m_x - 1), order)
    ops_y_up = build_first_derivative(m_y, (top_y - interface_y) / (m_y - 1), order)
    upper = assemble_cartesian_block(x_l, x_r, interface_y, top_y, ops_x, ops_y_up)

    ops_xi = _ref_ops(m_x, order)
    ops_eta = _ref_ops(m_y, order)
    design_map = make_bathymetry_block(m_x, m_y, x_l, x_r, interface_y)
    gx, gy = design_map.coords(p)
    lower = assemble_curvilinear_block(compute_metrics(gx, gy, ops_xi, ops_eta), ops_xi, ops_eta)

    edges = [
        EdgeSpec(0, "n", "dirichlet"),
        EdgeSpec(0, "w", "outflow"),
        EdgeSpec(0, "e", "outflow"),
        EdgeSpec(0, "s", "interface", (1, "n")),
        EdgeSpec(1, "n", "interface", (0, "s")),
        EdgeSpec(1, "w", "outflow"),
        EdgeSpec(1, "e", "outflow"),
        EdgeSpec(1, "s", "neumann"),
    ]
    system = GlobalSystem([upper, lower], edges, c=c)
    return BathymetrySetup(
        system=system, design_map=design_map, ops_xi=ops_xi, ops_eta=ops_eta,
        design_block=1, interface_y=interface_y,
    )


# ---------------------------------------------------------------------------
# five-block circle
# ---------------------------------------------------------------------------

def build_circle_system(m, k, order, radius=1.0, square_scale=0.5, c=1.0):
    """Unit disk split into a central square and four petal blocks.

    m: points along each square side and each outer arc; k: radial points of
    the petals.  The central square has half-width square_scale * r / sqrt(2).
    """
    a = square_scale * radius / np.sqrt(2.0)
    ops_m = _ref_ops(m, order)
    ops_k = _ref_ops(k, order)
    ops_sq = build_first_derivative(m, 2.0 * a / (m - 1), order)

    square = assemble_cartesian_block(-a, a, -a, a, ops_sq, ops_sq)

    def rot(pts, quarter_turns):
        x, y = pts[:, 0].copy(), pts[:, 1].copy()
        for _ in range(quarter_turns % 4):
            x, y = -y, x
        return np.column_stack([x, y])

    # east petal in reference position, then rotate
    inner0 = line_nodes((a, -a), (a, a), m)
    outer0 = arc_nodes((0.0, 0.0), radius, -np.pi / 4, np.pi / 4, m)
    south0 = line_nodes(inner0[0], outer0[0], k)
    north0 = line_nodes(inner0[-1], outer0[-1], k)

    petals = []
    for q in range(4):
        pm = BlockMap(
            west=rot(inner0, q), east=rot(outer0, q),
            south=rot(south0, q), north=rot(north0, q),
        )
        x, y = pm.coords()
        petals.append(
            assemble_curvilinear_block(compute_metrics(x, y, ops_k, ops_m), ops_k, ops_m)
        )
    # blocks: 0 square, 1 east, 2 north, 3 west, 4 south petals
    square_sides = {1: "e", 2: "n", 3: "w", 4: "s"}
    edges = []
    for pid, sq_side in square_sides.items():
        edges.append(EdgeSpec(0, sq_side, "interface", (pid, "w")))
        edges.append(EdgeSpec(pid, "w", "interface", (0, sq_side)))
        edges.append(EdgeSpec(pid, "e", "dirichlet"))
    for pid in range(1, 5):
        nxt = pid % 4 + 1
        edges.append(EdgeSpec(pid, "n", "interface", (nxt, "s")))
        edges.append(EdgeSpec(nxt, "s", "interface", (pid, "n")))
    return GlobalSystem([square] + petals, edges, c=c)


# ---------------------------------------------------------------------------
# five-block horn
# ---------------------------------------------------------------------------

@dataclass
class HornSetup:
    system: GlobalSystem
    design_map: BlockMap
    ops_xi: object
    ops_eta: object
    design_block: int
    inflow_block: int
    inflow_side: str

    @property
    def n_design(self):
        return self.design_map.m_xi


def build_horn_system(
    p,
    order=4,
    c=340.0,
    m_wg=33,
    n_wg=9,
    m_flare=29,
    ring_radii=(0.3, 0.55, 0.85, 1.2),
    n_rings=(9, 9, 9),
    throat=(0.5, 0.05),
    mouth=(1.0, 0.3),
):
    """Waveguide + flare (with cap out to the first arc) + three annular rings.

    The flare wall runs from `throat` to `mouth` as a straight line displaced
    vertically by p (p[0] = p[-1] = 0: the end points are fixed).  Rings are
    quarter annuli centered at the mouth base (mouth_x, 0); their inner arc
    radius must equal mouth_y so the flare block's east edge conforms.
    """
    p = np.asarray(p, dtype=float)
    if p.shape != (m_flare,):
        raise ConfigurationError(f"design vector must have length m_flare = {m_flare}")
    if abs(p[0]) > 0 or abs(p[-1]) > 0:
        raise ConfigurationError("flare end points are fixed: p[0] = p[-1] = 0")
    mouth_x, mouth_y = mouth
    if abs(ring_radii[0] - mouth_y) > 1e-14:
        raise ConfigurationError("first ring radius must equal the mouth half-height")
    if len(n_rings) != len(ring_radii) - 1:
        raise ConfigurationError("need one radial point count per ring")

    # waveguide
    ops_wx = build_first_derivative(m_wg, throat[0] / (m_wg - 1), order)
    ops_wy = build_first_derivative(n_wg, throat[1] / (n_wg - 1), order)
    waveguide = assemble_cartesian_block(0.0, throat[0], 0.0, throat[1], ops_wx, ops_wy)

    # flare block: south on the symmetry line out to the cap corner
    ops_fx = _ref_ops(m_flare, order)
    ops_fy = _ref_ops(n_wg, order)
    cap_corner = (mouth_x + mouth_y, 0.0)
    design_map = BlockMap(
        west=line_nodes((throat[0], 0.0), throat, n_wg),
        east=arc_nodes((mouth_x, 0.0), mouth_y, 0.0, np.pi / 2, n_wg),
        south=line_nodes((throat[0], 0.0), cap_corner, m_flare),
        north=line_nodes(throat, mouth, m_flare),
        design_edge="n",
    )
    fx, fy = design_map.coords(p)
    flare = assemble_curvilinear_block(
        compute_metrics(fx, fy, ops_fx, ops_fy), ops_fx, ops_fy
    )

    blocks = [waveguide, flare]
    edges = [
        EdgeSpec(0, "w", "inflow"),
        EdgeSpec(0, "s", "symmetry"),
        EdgeSpec(0, "n", "neumann"),
        EdgeSpec(0, "e", "interface", (1, "w")),
        EdgeSpec(1, "w", "interface", (0, "e")),
        EdgeSpec(1, "s", "symmetry"),
        EdgeSpec(1, "n", "neumann"),
        EdgeSpec(1, "e", "interface", (2, "s")),
    ]
    center = (mouth_x, 0.0)
    for j, n_r in enumerate(n_rings):
        r_in, r_out = ring_radii[j], ring_radii[j + 1]
        bid = 2 + j
        ops_th = _ref_ops(n_wg, order)
        ops_r = _ref_ops(n_r, order)
        # xi runs from the baffle (theta = pi/2) to the symmetry axis so the
        # (xi, eta) frame with eta radially outward is right-handed
        ring_map = BlockMap(
            west=line_nodes((center[0], r_in), (center[0], r_out), n_r),
            east=line_nodes((center[0] + r_in, 0.0), (center[0] + r_out, 0.0), n_r),
            south=arc_nodes(center, r_in, np.pi / 2, 0.0, n_wg),
            north=arc_nodes(center, r_out, np.pi / 2, 0.0, n_wg),
        )
        rx, ry = ring_map.coords()
        blocks.append(
            assemble_curvilinear_block(compute_metrics(rx, ry, ops_th, ops_r), ops_th, ops_r)
        )
        edges.append(EdgeSpec(bid, "w", "neumann"))
        edges.append(EdgeSpec(bid, "e", "symmetry"))
        if j == 0:
            edges.append(EdgeSpec(bid, "s", "interface", (1, "e")))
        else:
            edges.append(EdgeSpec(bid, "s", "interface", (bid - 1, "n")))
            edges.append(EdgeSpec(bid - 1, "n", "interface", (bid, "s")))
    edges.append(EdgeSpec(len(blocks) - 1, "n", "outflow"))

    system = GlobalSystem(blocks, edges, c=c)
    return HornSetup(
        system=system, design_map=design_map, ops_xi=ops_fx, ops_eta=ops_fy,
        design_block=1, inflow_block=0, inflow_side="w",
    )
