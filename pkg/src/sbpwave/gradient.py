"""Adjoint solve and discrete loss gradient via operator derivatives.

The gradient of J = 1/2 int r^2 dt + 1/2 gamma |D2 p|_H^2 is

    dJ/dp_i = int -(lam, dD/dp_i w) + (lam_t, dE/dp_i w) dt
              + gamma (D2 e_i, D2 p)_H,

with lam the adjoint state (time-reversed, forced by the misfit).  The
operator derivatives decompose into sandwich terms  left^T diag(dm/dp_i)
right  where dm/dp_i are columns of the metric sensitivity matrices; the
time integrals are therefore accumulated as node-weight vectors that are
contracted with the sensitivity columns once, after the adjoint sweep.
One gradient evaluation costs one forward and one adjoint solve regardless
of the number of design parameters.
"""

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .errors import ConfigurationError, DimensionError
from .geometry import metric_sensitivities
from .operators import build_second_derivative, build_time_quadrature
from .solver import SourceSignal, solve_forward

_EDGE_AXES = {
    "w": ("eta", "w2", "a1"),
    "e": ("eta", "w2", "a1"),
    "s": ("xi", "w1", "a2"),
    "n": ("xi", "w1", "a2"),
}
_EDGE_SIGN = {"w": -1.0, "e": 1.0, "s": -1.0, "n": 1.0}


@dataclass
class MisfitSeries:
    """Receiver residual r(t_k) = (d_r, w(t_k))_Hbar - v_d(t_k)."""

    times: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        if len(self.times) != len(self.values):
            raise DimensionError("misfit series and time grid lengths differ")


def interp_series(times, data_times, data_values):
    """Linear interpolation of recorded data onto the solver time grid."""
    return np.interp(times, data_times, data_values)


def _half_step(series):
    """Midpoint values of a smooth series (4-point interpolation)."""
    s = np.asarray(series, float)
    mid = np.empty(len(s) - 1)
    if len(s) >= 4:
        mid[1:-1] = (-s[:-3] + 9 * s[1:-2] + 9 * s[2:-1] - s[3:]) / 16.0
        mid[0] = (5 * s[0] + 15 * s[1] - 5 * s[2] + s[3]) / 16.0
        mid[-1] = (5 * s[-1] + 15 * s[-2] - 5 * s[-3] + s[-4]) / 16.0
    else:
        mid[:] = 0.5 * (s[:-1] + s[1:])
    return mid


def solve_adjoint(system, dt, n_steps, point_forcing=None, edge_forcing=None,
                  callback=None):
    """Integrate the adjoint system over tau in [0, T] from zero data.

    point_forcing: (d_r vector, misfit series r(t_k)); the adjoint forcing is
    -r(tau) d_r with tau = T - t.  edge_forcing: (apply, series matrix
    (n_steps+1, m_edge)) for boundary-misfit losses; the series is indexed by
    t and reversed here.
    """
    T = dt * n_steps
    forcings = []
    if point_forcing is not None:
        d_r, series = point_forcing
        r_rev = np.asarray(series, float)[::-1]
        r_mid = _half_step(r_rev)

        def point_f(j, stage):
            # stage: 0 start, 1 mid, 2 end of step j
            if stage == 0:
                val = r_rev[j]
            elif stage == 2:
                val = r_rev[j + 1]
            else:
                val = r_mid[j]
            return -val * d_r

        forcings.append(point_f)
    if edge_forcing is not None:
        apply_edge, series = edge_forcing
        s_rev = np.asarray(series, float)[::-1]
        s_mid = np.empty((n_steps, s_rev.shape[1]))
        for col in range(s_rev.shape[1]):
            s_mid[:, col] = _half_step(s_rev[:, col])

        def edge_f(j, stage):
            if stage == 0:
                val = s_rev[j]
            elif stage == 2:
                val = s_rev[j + 1]
            else:
                val = s_mid[j]
            return -apply_edge(val)

        forcings.append(edge_f)

    lam = np.zeros(system.N)
    mu = np.zeros(system.N)
    if callback is not None:
        callback(0, 0.0, lam, mu)
    for j in range(n_steps):
        def rhs(stage, w, v):
            acc = system.rhs_core(system.project(w), system.project(v))
            for f in forcings:
                acc = acc + system.project(f(j, stage))
            return v, acc

        k1w, k1v = rhs(0, lam, mu)
        k2w, k2v = rhs(1, lam + dt / 2 * k1w, mu + dt / 2 * k1v)
        k3w, k3v = rhs(1, lam + dt / 2 * k2w, mu + dt / 2 * k2v)
        k4w, k4v = rhs(2, lam + dt * k3w, mu + dt * k3v)
        lam = lam + dt / 6 * (k1w + 2 * k2w + 2 * k3w + k4w)
        mu = mu + dt / 6 * (k1v + 2 * k2v + 2 * k3v + k4v)
        if callback is not None:
            callback(j + 1, (j + 1) * dt, lam, mu)
    return lam, mu


# ---------------------------------------------------------------------------
# design system: operator derivatives with respect to p
# ---------------------------------------------------------------------------

class DesignSystem:
    """Caches everything needed for dD/dp_i and dE/dp_i on one design block."""

    def __init__(self, setup):
        self.setup = setup
        self.system = setup.system
        self.b = setup.design_block
        blk = self.system.blocks[self.b]
        if blk.is_cartesian:
            raise ConfigurationError("design block must be curvilinear")
        self.blk = blk
        self.sl = self.system.block_slice(self.b)
        self.sens = metric_sensitivities(
            blk.geom, setup.design_map.design_profile(), setup.ops_xi, setup.ops_eta
        )
        self.n_p = self.sens.n_p
        g = blk.geom
        self.Hxi2d = np.repeat(setup.ops_xi.H, blk.m_eta)
        self.Heta2d = np.tile(setup.ops_eta.H, blk.m_xi)
        # volume sensitivity of Hbar = Hxi Heta J on the block
        self.S_Hvol = sp.diags(self.Hxi2d * self.Heta2d) @ self.sens.djac
        self.edge_terms = self._collect_edges()

    # roles of the design block's edges in the SATs
    def _collect_edges(self):
        sysm = self.system
        out = []
        for s in sysm.edges:
            if s.tag in ("neumann", "symmetry", "outflow", "inflow") and s.block == self.b:
                out.append(("bc", s.side, s.tag, None))
        for (ba, sa), (bb, sb), perm in sysm.interface_pairs:
            if ba == self.b:
                out.append(("ic_own", sa, None, ((bb, sb), perm)))
            elif bb == self.b:
                out.append(("ic_other", sb, None, ((ba, sa), perm)))
        return out

    # -- helpers ------------------------------------------------------------

    def edge_data(self, side):
        blk = self.blk
        g = blk.geom
        idx = blk.edge_nodes[side]
        axis, wname, aname = _EDGE_AXES[side]
        W = getattr(g, wname)[idx]
        alpha = getattr(g, aname)[idx]
        beta = g.bet[idx]
        tang = blk.Deta2d if axis == "eta" else blk.Dxi2d
        h1d = blk.ops_eta.H if axis == "eta" else blk.ops_xi.H
        S_w = (self.sens.dw2 if wname == "w2" else self.sens.dw1)[idx]
        S_a = (self.sens.da1 if aname == "a1" else self.sens.da2)[idx]
        S_b = self.sens.dbet[idx]
        return {
            "idx": idx, "W": W, "alpha": alpha, "beta": beta,
            "tang": tang, "h1d": h1d, "sign": _EDGE_SIGN[side],
            "S_w": S_w, "S_a": S_a, "S_b": S_b,
            "e": blk.e[side], "dhat": blk.dhat[side], "d": blk.d[side],
            "Hedge": blk.Hedge[side],
        }

    def dd_apply(self, side, i, u_b):
        """(d d_side / dp_i) u on the edge nodes."""
        ed = self.edge_data(side)
        dW = np.asarray(ed["S_w"][:, i].todense()).ravel()
        dA = np.asarray(ed["S_a"][:, i].todense()).ravel()
        dB = np.asarray(ed["S_b"][:, i].todense()).ravel()
        dhat_u = ed["dhat"] @ u_b
        tang_u = ed["e"] @ (ed["tang"] @ u_b)
        base = ed["alpha"] * dhat_u + ed["beta"] * tang_u
        out = -dW / ed["W"] ** 2 * base + (dA * dhat_u + dB * tang_u) / ed["W"]
        return ed["sign"] * out

    def dd_matrix(self, side, i):
        """Sparse d d_side/dp_i (edge rows x block cols)."""
        ed = self.edge_data(side)
        dW = np.asarray(ed["S_w"][:, i].todense()).ravel()
        dA = np.asarray(ed["S_a"][:, i].todense()).ravel()
        dB = np.asarray(ed["S_b"][:, i].todense()).ravel()
        tang_rows = ed["e"] @ ed["tang"]
        core = sp.diags(ed["alpha"]) @ ed["dhat"] + sp.diags(ed["beta"]) @ tang_rows
        out = -sp.diags(dW / ed["W"] ** 2) @ core + (
            sp.diags(dA / ed["W"]) @ ed["dhat"] + sp.diags(dB / ed["W"]) @ tang_rows
        )
        return (ed["sign"] * out).tocsr()

    def sens_col(self, S, i):
        return np.asarray(S[:, i].todense()).ravel()

    # -- explicit assembly (oracle path; coarse sizes) -----------------------

    def dDL_sparse(self, i):
        blk = self.blk
        g = blk.geom
        dJ = self.sens_col(self.sens.djac, i)
        da1 = self.sens_col(self.sens.da1, i)
        da2 = self.sens_col(self.sens.da2, i)
        db = self.sens_col(self.sens.dbet, i)
        Ji = sp.diags(1.0 / g.jac)
        term = -sp.diags(dJ / g.jac**2) @ blk.K_core
        dK = (
            blk.fac_xi.assemble(da1)
            + blk.Deta2d @ sp.diags(db) @ blk.Dxi2d
            + blk.Dxi2d @ sp.diags(db) @ blk.Deta2d
            + blk.fac_eta.assemble(da2)
        )
        return (term + Ji @ dK).tocsr()

    def _embed(self, mat_rows):
        return self.system._embed_edge_rows(self.b, mat_rows)

    def dC_dE_sparse(self, i):
        """Explicit sparse d(C_core)/dp_i and d(SAT_BC2)/dp_i (pre-projection)."""
        sysm = self.system
        N = sysm.N
        Hbar = sysm.Hbar
        dHbar = np.zeros(N)
        dHbar[self.sl] = self.sens_col(self.S_Hvol, i)

        dC = sp.lil_matrix((N, N))
        dDL = self.dDL_sparse(i)
        dC[self.sl, self.sl] = dDL

        dC = dC.tocsr()
        dE = sp.csr_matrix((N, N))
        dH_fac = sp.diags(dHbar / Hbar**2)
        Hinv = sp.diags(1.0 / Hbar)

        for s in sysm.edges:
            if s.tag in ("neumann", "symmetry", "outflow", "inflow"):
                blk = sysm.blocks[s.block]
                E = sysm._embed_edge_rows(s.block, blk.e[s.side])
                Dn = sysm._embed_edge_rows(s.block, blk.d[s.side])
                He = sp.diags(blk.Hedge[s.side])
                dC = dC + dH_fac @ (E.T @ He @ Dn)
                if s.tag in ("outflow", "inflow"):
                    dE = dE + dH_fac @ (E.T @ He @ E)
                if s.block == self.b:
                    ed = self.edge_data(s.side)
                    dHe = sp.diags(ed["h1d"] * self.sens_col(ed["S_w"], i))
                    ddk = self._embed(self.dd_matrix(s.side, i))
                    dC = dC - Hinv @ (E.T @ (dHe @ Dn + He @ ddk))
                    if s.tag in ("outflow", "inflow"):
                        dE = dE - Hinv @ (E.T @ dHe @ E)
        for (ba, sa), (bb, sb), perm in sysm.interface_pairs:
            A = sysm.blocks[ba]
            Bb = sysm.blocks[bb]
            Ea = sysm._embed_edge_rows(ba, A.e[sa])
            Da = sysm._embed_edge_rows(ba, A.d[sa])
            Db = sysm._embed_edge_rows(bb, Bb.d[sb])[perm]
            Ha = sp.diags(A.Hedge[sa])
            dC = dC + dH_fac @ (Ea.T @ Ha @ (Da + Db))
            if ba == self.b:
                ed = self.edge_data(sa)
                dHa = sp.diags(ed["h1d"] * self.sens_col(ed["S_w"], i))
                dda = self._embed(self.dd_matrix(sa, i))
                dC = dC - Hinv @ (Ea.T @ (dHa @ (Da + Db) + Ha @ dda))
            if bb == self.b:
                ddb = self._embed(self.dd_matrix(sb, i))[perm]
                dC = dC - Hinv @ (Ea.T @ Ha @ ddb)
        return dC.tocsr(), dE.tocsr(), dHbar

    def dD_dE_dense(self, i):
        """Dense dD/dp_i, dE/dp_i at coarse sizes (dual-path oracle)."""
        sysm = self.system
        dC, dS2, dHbar = self.dC_dE_sparse(i)
        P = sysm.dense_P()
        core = sysm.C_core.toarray()
        s2 = sysm.E_core.toarray()
        dP = P @ np.diag(dHbar / sysm.Hbar) @ (np.eye(sysm.N) - P)
        c = sysm.c
        dD = c**2 * (dP @ core @ P + P @ dC.toarray() @ P + P @ core @ dP)
        dE = c * (dP @ s2 @ P + P @ dS2.toarray() @ P + P @ s2 @ dP)
        return dD, dE

    # -- matrix-free contraction over snapshots ------------------------------

    def new_accumulators(self):
        acc = {
            "SH_D": np.zeros(self.blk.n),       # pairs with S_Hvol (D terms)
            "SJ_vol": np.zeros(self.blk.n),     # pairs with djac
            "Sa1": np.zeros(self.blk.n),
            "Sa2": np.zeros(self.blk.n),
            "Sbet_vol": np.zeros(self.blk.n),
            "SH_E": np.zeros(self.blk.n),       # pairs with S_Hvol (E terms)
        }
        for role, side, tag, extra in self.edge_terms:
            m_e = len(self.blk.edge_nodes[side])
            acc[("W", side)] = np.zeros(m_e)
            acc[("A", side)] = np.zeros(m_e)
            acc[("B", side)] = np.zeros(m_e)
            acc[("He", side)] = np.zeros(m_e)
            acc[("HeE", side)] = np.zeros(m_e)
        return acc

    def accumulate(self, acc, weight, lam, lam_t, w):
        """Add weight * [terms of -(lam, dD w) + (lam_t, dE w)] integrands.

        The raw pairings (lam, dD w) go into the *_D slots and (lam_t, dE w)
        into *_E slots; signs and the factors c^2, c are applied in finish().
        """
        sysm = self.system
        c = sysm.c
        Hbar = sysm.Hbar
        sl = self.sl
        blk = self.blk
        g = blk.geom

        u = sysm.project(w)
        z = Hbar * sysm.project(lam)
        y = sysm.C_core @ u
        q = (w - sysm.project(w)) / Hbar
        s_vec = (y - sysm.project(y)) / Hbar
        z2 = Hbar * sysm.project((sysm.C_core.T @ z) / Hbar)

        zE = Hbar * sysm.project(lam_t)
        yE = sysm.E_core @ u
        sE = (yE - sysm.project(yE)) / Hbar
        z2E = Hbar * sysm.project((sysm.E_core.T @ zE) / Hbar)

        # projection terms
        acc["SH_D"] += weight * (z * s_vec + z2 * q)[sl]
        acc["SH_E"] += weight * (zE * sE + z2E * q)[sl]

        # volume terms on the design block
        z_b = z[sl]
        u_b = u[sl]
        acc["SJ_vol"] += weight * (-z_b * ((blk.K_core @ u_b) / g.jac**2))
        zj = z_b / g.jac
        for fac, slot in ((blk.fac_xi, "Sa1"), (blk.fac_eta, "Sa2")):
            zh = zj / fac.Hdir
            for t in fac.terms:
                acc[slot] += weight * t.w * (t.L @ zh) * (t.R @ u_b)
        acc["Sbet_vol"] += weight * (
            (blk.Deta2d.T @ zj) * (blk.Dxi2d @ u_b)
            + (blk.Dxi2d.T @ zj) * (blk.Deta2d @ u_b)
        )

        zh_bar = (z / Hbar)[sl]
        zhE_bar = (zE / Hbar)[sl]
        for role, side, tag, extra in self.edge_terms:
            ed = self.edge_data(side)
            idx = ed["idx"]
            dhat_u = ed["dhat"] @ u_b
            tang_u = ed["e"] @ (ed["tang"] @ u_b)
            base = ed["alpha"] * dhat_u + ed["beta"] * tang_u
            du_edge = ed["d"] @ u_b

            if role == "bc":
                r_e = zh_bar[idx] * ed["Hedge"]
                # dHbar term of -Hbar^-1 e^T He d: +dH/H^2 e^T He d
                acc["SH_D"][idx] += weight * (z / Hbar**2)[sl][idx] * ed["Hedge"] * du_edge
                # dHe term
                acc[("He", side)] += weight * zh_bar[idx] * ed["h1d"] * du_edge
                # dd terms
                acc[("W", side)] += weight * r_e * ed["sign"] * base / ed["W"] ** 2
                acc[("A", side)] += weight * r_e * ed["sign"] * dhat_u / ed["W"]
                acc[("B", side)] += weight * r_e * ed["sign"] * tang_u / ed["W"]
                if tag in ("outflow", "inflow"):
                    eu = (ed["e"] @ u_b)
                    acc["SH_E"][idx] += weight * (zE / Hbar**2)[sl][idx] * ed["Hedge"] * eu
                    acc[("HeE", side)] += weight * zhE_bar[idx] * ed["h1d"] * eu
            elif role == "ic_own":
                (ob, os_), perm = extra
                other = sysm.blocks[ob]
                sl_o = sysm.block_slice(ob)
                d_other = (other.d[os_] @ u[sl_o])[perm]
                flux = du_edge + d_other
                r_e = zh_bar[idx] * ed["Hedge"]
                acc["SH_D"][idx] += weight * (z / Hbar**2)[sl][idx] * ed["Hedge"] * flux
                acc[("He", side)] += weight * zh_bar[idx] * ed["h1d"] * flux
                acc[("W", side)] += weight * r_e * ed["sign"] * base / ed["W"] ** 2
                acc[("A", side)] += weight * r_e * ed["sign"] * dhat_u / ed["W"]
                acc[("B", side)] += weight * r_e * ed["sign"] * tang_u / ed["W"]
            else:  # ic_other: SAT rows live on the fixed block
                (ob, os_), perm = extra
                other = sysm.blocks[ob]
                sl_o = sysm.block_slice(ob)
                r_other = (z / Hbar)[sl_o][other.edge_nodes[os_]] * other.Hedge[os_]
                r_e = np.empty_like(r_other)
                r_e[perm] = r_other  # align to this block's edge ordering
                acc[("W", side)] += weight * r_e * ed["sign"] * base / ed["W"] ** 2
                acc[("A", side)] += weight * r_e * ed["sign"] * dhat_u / ed["W"]
                acc[("B", side)] += weight * r_e * ed["sign"] * tang_u / ed["W"]

    def finish(self, acc):
        """Contract accumulators with sensitivity columns.

        Returns (a, b): a_i = (lam, dD/dp_i w) integrals, b_i for E.
        """
        c = self.system.c
        a = np.zeros(self.n_p)
        b = np.zeros(self.n_p)
        a += self.S_Hvol.T @ acc["SH_D"]
        b += self.S_Hvol.T @ acc["SH_E"]
        a += self.sens.djac.T @ acc["SJ_vol"]
        a += self.sens.da1.T @ acc["Sa1"]
        a += self.sens.da2.T @ acc["Sa2"]
        a += self.sens.dbet.T @ acc["Sbet_vol"]
        for role, side, tag, extra in self.edge_terms:
            ed = self.edge_data(side)
            a += ed["S_w"].T @ (acc[("W", side)] - acc[("He", side)])
            a -= ed["S_a"].T @ acc[("A", side)]
            a -= ed["S_b"].T @ acc[("B", side)]
            b -= ed["S_w"].T @ acc[("HeE", side)]
        return c**2 * a, c * b


def operator_derivative_actions(design, i, w, lam, lam_t):
    """Single-snapshot (lam, dD/dp_i w)_Hbar and (lam_t, dE/dp_i w)_Hbar."""
    acc = design.new_accumulators()
    design.accumulate(acc, 1.0, lam, lam_t, w)
    a, b = design.finish(acc)
    return a[i], b[i]


# ---------------------------------------------------------------------------
# gradient orchestration
# ---------------------------------------------------------------------------

@dataclass
class GradientReport:
    total: np.ndarray
    volume_term: np.ndarray
    damping_term: np.ndarray
    regularization: np.ndarray

    def to_csv(self, path):
        import csv

        with open(path, "w", newline="") as f:
            wtr = csv.writer(f)
            wtr.writerow(["i", "total", "volume_term", "damping_term", "regularization"])
            for i in range(len(self.total)):
                wtr.writerow([i, repr(self.total[i]), repr(self.volume_term[i]),
                              repr(self.damping_term[i]), repr(self.regularization[i])])


def regularization_gradient(ops_design, p, gamma):
    """gamma * D2^T H D2 p on the design grid."""
    d2 = build_second_derivative(ops_design, np.ones(ops_design.m))
    D2 = d2.D2c
    return gamma * (D2.T @ (ops_design.H * (D2 @ p)))


def regularization_value(ops_design, p, gamma):
    d2 = build_second_derivative(ops_design, np.ones(ops_design.m))
    v = d2.D2c @ p
    return 0.5 * gamma * float(v @ (ops_design.H * v))


def compute_gradient(design, w_states, dt, gamma, p, ops_design,
                     point_forcing=None, edge_forcing=None):
    """Steps 3-4 of a loss evaluation: adjoint solve and gradient assembly.

    w_states: forward solution snapshots at every step (list of w vectors).
    Returns a GradientReport; the adjoint trajectory is consumed streamwise.
    """
    n_steps = len(w_states) - 1
    quad = build_time_quadrature(n_steps + 1, dt)
    acc = design.new_accumulators()

    def cb(j, tau, lam, mu):
        k = n_steps - j  # forward time index paired with adjoint step j
        design.accumulate(acc, quad[k], lam, -mu, w_states[k])

    solve_adjoint(design.system, dt, n_steps, point_forcing=point_forcing,
                  edge_forcing=edge_forcing, callback=cb)
    a, b = design.finish(acc)
    reg = regularization_gradient(ops_design, p, gamma)
    total = -a + b + reg
    return GradientReport(total=total, volume_term=-a, damping_term=b,
                          regularization=reg)


def fd_gradient_oracle(loss_evaluator, p, eps=1e-5, workers=1):
    """Central finite differences of a deterministic loss functional.

    Cost: 2 * len(p) evaluations; test-scale verification only.
    """
    p = np.asarray(p, float)
    idx = list(range(len(p)))

    def one(i):
        e = np.zeros_like(p)
        e[i] = eps
        return (loss_evaluator(p + e) - loss_evaluator(p - e)) / (2 * eps)

    if workers > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=workers) as ex:
            return np.array(list(ex.map(one, idx)))
    return np.array([one(i) for i in idx])
