"""Drivers for the three reference experiments.

Each driver takes a plain configuration dict (see configs/ for the shipped
schemas), runs the study, and returns in-memory results; emit_outputs writes
the CSV artifacts plus a machine-readable run manifest.  Every experiment is
fully specified by its config; the defaults below are the documented schema.
"""

import csv
import hashlib
import json
import os
import time
from dataclasses import dataclass

import numpy as np

from . import __version__
from .errors import ConfigurationError
from .geometries import build_bathymetry_system, build_circle_system, build_horn_system
from .gradient import (
    DesignSystem,
    compute_gradient,
    fd_gradient_oracle,
    interp_series,
    regularization_gradient,
    regularization_value,
)
from .operators import build_first_derivative, build_time_quadrature
from .optimize import LossConfig, minimize
from .solver import SourceSignal, solve_forward, stable_dt

CONVERGENCE_DEFAULTS = {
    "order": 4,
    "levels": [[39, 21], [61, 28], [81, 37]],
    "radius": 1.0,
    "square_scale": 0.5,
    "T": 1.0,
    "wave_speed": 1.0,
}

BATHYMETRY_DEFAULTS = {
    "data": {"order": 6, "m_x": 101, "m_y": 51},
    "sim": {"order": 4, "m_x": 31, "m_y": 16},
    "source": [0.25, 0.8],
    "receiver": [0.75, 0.8],
    "sigma": 0.1,
    "T": 4.0,
    "wave_speed": 1.0,
    "gamma": 1e-5,
    "tolerance": 1e-6,
    "max_iterations": 400,
    "snapshots": [0, 5, 20],
    "truth": {"bumps": [[0.35, 0.12, 0.11], [0.70, -0.10, 0.09]]},
    "seed": 0,
}

HORN_DEFAULTS = {
    "wave_speed": 340.0,
    "frequencies": [300.0],
    "amplitude": 1.0,
    "grid": {
        "order": 4, "m_wg": 33, "n_wg": 9, "m_flare": 29,
        "ring_radii": [0.3, 0.55, 0.85, 1.2], "n_rings": [9, 9, 9],
    },
    "n_traversals": 8.0,
    "gamma": 1e-5,
    "tolerance": 1e-6,
    "max_iterations": 300,
    "spectrum": None,
    "threads": 1,
}

GRADIENT_CHECK_DEFAULTS = {
    "order": 4,
    "m_x": 11,
    "m_y": 8,
    "T": 2.0,
    "eps": 1e-5,
    "dt_base_factor": 0.25,
    "dt_levels": 3,
    "gamma": 1e-5,
    "seed": 5,
}


def merge_config(defaults, config):
    out = json.loads(json.dumps(defaults))
    for key, val in (config or {}).items():
        if key not in out and key not in ("out", "experiment", "order", "seed", "threads"):
            raise ConfigurationError(f"unknown config key {key!r}")
        if isinstance(val, dict) and isinstance(out.get(key), dict):
            out[key].update(val)
        else:
            out[key] = val
    return out


# ---------------------------------------------------------------------------
# convergence study on the five-block circle
# ---------------------------------------------------------------------------

@dataclass
class ConvergenceRow:
    N: int
    error: float
    rate: float  # defined from the second row on (NaN first)


def exact_standing_wave(x, y, t):
    return np.sin(3 * np.pi * x) * np.sin(4 * np.pi * y) * np.cos(5 * np.pi * t)


def run_convergence(config=None):
    cfg = merge_config(CONVERGENCE_DEFAULTS, config)
    rows = []
    for m, k in cfg["levels"]:
        system = build_circle_system(
            m=m, k=k, order=cfg["order"], radius=cfg["radius"],
            square_scale=cfg["square_scale"], c=cfg["wave_speed"],
        )
        x = np.concatenate([b.geom.x for b in system.blocks])
        y = np.concatenate([b.geom.y for b in system.blocks])

        def gdata(t):
            return system.constraint_values(lambda px, py: exact_standing_wave(px, py, t))

        w0 = exact_standing_wave(x, y, 0.0)
        dt = stable_dt(system)
        traj = solve_forward(
            system, T=cfg["T"], dt=dt, initial_state=(w0, np.zeros(system.N)),
            dirichlet_data=gdata,
        )
        err = traj.final_state[0] - exact_standing_wave(x, y, cfg["T"])
        e = float(np.sqrt(err @ (system.Hbar * err)))
        rows.append(ConvergenceRow(N=system.N, error=e, rate=float("nan")))
    for i in range(1, len(rows)):
        q = np.log(rows[i - 1].error / rows[i].error) / np.log(
            np.sqrt(rows[i].N / rows[i - 1].N)
        )
        rows[i] = ConvergenceRow(N=rows[i].N, error=rows[i].error, rate=float(q))
    return rows


# ---------------------------------------------------------------------------
# bathymetry reconstruction
# ---------------------------------------------------------------------------

def truth_seabed(x, bumps):
    """Implementation-defined smooth two-bump truth profile (not from data)."""
    x = np.asarray(x, float)
    out = np.zeros_like(x)
    for center, amp, width in bumps:
        out += amp * np.exp(-((x - center) / width) ** 2)
    return out


def synthesize_receiver_data(cfg):
    """Fine-grid forward run against the truth seabed."""
    data_cfg = cfg["data"]
    m_x = data_cfg["m_x"]
    xs = np.linspace(0.0, 1.0, m_x)
    p_true = truth_seabed(xs, cfg["truth"]["bumps"])
    setup = build_bathymetry_system(
        p_true, m_x, data_cfg["m_y"], data_cfg["order"], c=cfg["wave_speed"]
    )
    system = setup.system
    ds = system.point_source(*cfg["source"])
    dr = system.point_source(*cfg["receiver"])
    sig = SourceSignal(kind="ricker", sigma=cfg["sigma"])
    dt = stable_dt(system)
    traj = solve_forward(system, T=cfg["T"], dt=dt, source=(sig, ds), receivers=[dr])
    return traj.times, traj.receiver, p_true


class BathymetryProblem:
    """Loss/gradient evaluator bound to synthetic receiver data."""

    def __init__(self, cfg, data_times, data_values):
        self.cfg = cfg
        self.data_times = data_times
        self.data_values = data_values
        sim = cfg["sim"]
        self.m_x, self.m_y, self.order = sim["m_x"], sim["m_y"], sim["order"]
        self.ops_design = build_first_derivative(self.m_x, 1.0 / (self.m_x - 1), self.order)
        base = build_bathymetry_system(
            np.zeros(self.m_x), self.m_x, self.m_y, self.order, c=cfg["wave_speed"]
        )
        self.dt = stable_dt(base.system)
        self.n_evaluations = 0

    def _run(self, p, store):
        setup = build_bathymetry_system(
            p, self.m_x, self.m_y, self.order, c=self.cfg["wave_speed"]
        )
        system = setup.system
        ds = system.point_source(*self.cfg["source"])
        dr = system.point_source(*self.cfg["receiver"])
        sig = SourceSignal(kind="ricker", sigma=self.cfg["sigma"])
        traj = solve_forward(system, T=self.cfg["T"], dt=self.dt, source=(sig, ds),
                             receivers=[dr], store_states=store)
        return setup, dr, traj

    def loss_only(self, p):
        from .errors import FoldedMeshError

        try:
            _, _, traj = self._run(p, store=False)
        except FoldedMeshError:
            return np.inf
        misfit = traj.receiver - interp_series(traj.times, self.data_times, self.data_values)
        quad = build_time_quadrature(traj.n_steps + 1, traj.dt)
        return 0.5 * float(quad @ misfit**2) + regularization_value(
            self.ops_design, p, self.cfg["gamma"]
        )

    def evaluate(self, p):
        from .errors import FoldedMeshError

        self.n_evaluations += 1
        try:
            setup, dr, traj = self._run(p, store=True)
        except FoldedMeshError:
            return np.inf, np.zeros_like(p)
        misfit = traj.receiver - interp_series(traj.times, self.data_times, self.data_values)
        quad = build_time_quadrature(traj.n_steps + 1, traj.dt)
        J = 0.5 * float(quad @ misfit**2) + regularization_value(
            self.ops_design, p, self.cfg["gamma"]
        )
        design = DesignSystem(setup)
        w_states = [w for w, _ in traj.states]
        rep = compute_gradient(design, w_states, traj.dt, self.cfg["gamma"], p,
                               self.ops_design, point_forcing=(dr, misfit))
        return J, rep.total


def run_bathymetry(config=None, data=None):
    """Synthesize data (unless given), then invert from a flat initial guess."""
    cfg = merge_config(BATHYMETRY_DEFAULTS, config)
    if data is None:
        data_times, data_values, p_true_fine = synthesize_receiver_data(cfg)
    else:
        data_times, data_values = data
        p_true_fine = None
    problem = BathymetryProblem(cfg, data_times, data_values)
    p0 = np.zeros(problem.m_x)
    snapshots = {}
    snap_iters = set(cfg["snapshots"])

    def cb(it, p, J, g):
        if it in snap_iters:
            snapshots[it] = p.copy()

    state = minimize(
        problem.evaluate, p0,
        LossConfig(gamma=cfg["gamma"], tolerance=cfg["tolerance"],
                   max_iterations=cfg["max_iterations"]),
        iteration_callback=cb,
    )
    snapshots[0] = p0
    snapshots[state.n_iter] = state.p.copy()
    xs = np.linspace(0.0, 1.0, problem.m_x)
    return {
        "state": state,
        "snapshots": snapshots,
        "design_grid": xs,
        "truth_on_grid": truth_seabed(xs, cfg["truth"]["bumps"]),
        "config": cfg,
        "n_evaluations": problem.n_evaluations,
        "data": (data_times, data_values),
    }


# ---------------------------------------------------------------------------
# horn flare optimization
# ---------------------------------------------------------------------------

def horn_frequencies(cfg):
    freqs = cfg["frequencies"]
    if isinstance(freqs, dict):
        lo, hi = freqs["band"]
        return np.linspace(lo, hi, int(freqs["count"]))
    return np.asarray(freqs, float)


class HornProblem:
    """Reflection loss over the inflow boundary for a set of frequencies."""

    def __init__(self, cfg):
        self.cfg = cfg
        g = cfg["grid"]
        self.m_flare = g["m_flare"]
        self.order = g["order"]
        self.freqs = horn_frequencies(cfg)
        SourceSignal(kind="horn", amplitudes=(cfg["amplitude"],) * len(self.freqs),
                     frequencies=tuple(self.freqs))  # validates the band
        self.omegas = 2 * np.pi * self.freqs
        self.amps = np.full(len(self.freqs), float(cfg["amplitude"]))
        self.ops_design = build_first_derivative(self.m_flare, 1.0 / (self.m_flare - 1),
                                                 self.order)
        base = self.build(np.zeros(self.m_flare))
        self.dt = stable_dt(base.system)
        c = cfg["wave_speed"]
        extent = g["ring_radii"][-1] + 1.0  # waveguide + flare + outer radius
        self.T = cfg["n_traversals"] * extent / c
        self.n_evaluations = 0

    def build(self, p):
        g = self.cfg["grid"]
        return build_horn_system(
            p, order=g["order"], c=self.cfg["wave_speed"], m_wg=g["m_wg"],
            n_wg=g["n_wg"], m_flare=g["m_flare"],
            ring_radii=tuple(g["ring_radii"]), n_rings=tuple(g["n_rings"]),
        )

    def expand(self, p_int):
        p = np.zeros(self.m_flare)
        p[1:-1] = p_int
        return p

    def _forward(self, p, store, freqs=None, amps=None):
        freqs = self.omegas if freqs is None else 2 * np.pi * np.asarray(freqs)
        amps = self.amps if amps is None else np.asarray(amps, float)
        setup = self.build(p)
        system = setup.system
        coords, apply_edge = system.boundary_forcing_template(
            setup.inflow_block, setup.inflow_side
        )
        xed = coords[:, 0]
        c = system.c
        ks = freqs / c

        def g_inflow(t):
            # 2 sum_j Re(A_j i w_j e^{i(k_j x - w_j t)}) = 2 sum_j A_j w_j sin(w_j t - k_j x)
            out = np.zeros_like(xed)
            for A, om, kj in zip(amps, freqs, ks):
                out += 2.0 * A * om * np.sin(om * t - kj * xed)
            return out

        def target(t):
            # right-going trace sum_j Re(A_j e^{i(-k_j x + w_j t)})
            out = np.zeros_like(xed)
            for A, om, kj in zip(amps, freqs, ks):
                out += A * np.cos(om * t - kj * xed)
            return out

        edge_series = []

        def cb(k, t, w, v):
            blk = system.blocks[setup.inflow_block]
            sl = system.block_slice(setup.inflow_block)
            trace = (blk.e[setup.inflow_side] @ w[sl]) - target(t)
            edge_series.append(trace)

        traj = solve_forward(
            system, T=self.T, dt=self.dt,
            boundary_forcing=lambda t: apply_edge(g_inflow(t)),
            store_states=store, callback=cb,
        )
        He = system.blocks[setup.inflow_block].Hedge[setup.inflow_side]
        return setup, traj, np.array(edge_series), He, apply_edge

    def loss_parts(self, misfit_series, He, n_steps, dt, nf):
        quad = build_time_quadrature(n_steps + 1, dt)
        vals = np.einsum("kj,j,kj->k", misfit_series, He, misfit_series)
        return 0.5 / nf**2 * float(quad @ vals)

    def loss_only(self, p_full, freqs=None, amps=None):
        from .errors import FoldedMeshError

        try:
            setup, traj, series, He, _ = self._forward(p_full, store=False,
                                                       freqs=freqs, amps=amps)
        except FoldedMeshError:
            return np.inf
        nf = len(self.freqs) if freqs is None else len(np.atleast_1d(freqs))
        return self.loss_parts(series, He, traj.n_steps, traj.dt, nf) + (
            regularization_value(self.ops_design, p_full, self.cfg["gamma"])
        )

    def evaluate(self, p_int):
        from .errors import FoldedMeshError

        self.n_evaluations += 1
        p = self.expand(p_int)
        try:
            setup, traj, series, He, _ = self._forward(p, store=True)
        except FoldedMeshError:
            return np.inf, np.zeros_like(p_int)
        nf = len(self.freqs)
        J = self.loss_parts(series, He, traj.n_steps, traj.dt, nf)
        J += regularization_value(self.ops_design, p, self.cfg["gamma"])

        system = setup.system
        blk = system.blocks[setup.inflow_block]
        E_edge = system._embed_edge_rows(setup.inflow_block, blk.e[setup.inflow_side])

        def adjoint_apply(vals):
            return (E_edge.T @ (He * vals)) / (nf**2 * system.Hbar)

        design = DesignSystem(setup)
        w_states = [w for w, _ in traj.states]
        rep = compute_gradient(design, w_states, traj.dt, self.cfg["gamma"], p,
                               self.ops_design,
                               edge_forcing=(adjoint_apply, series))
        return J, rep.total[1:-1]

    def reflection_spectrum(self, p_full, freqs, threads=1):
        """Per-frequency loss of a fixed shape (no regularization)."""
        freqs = np.asarray(freqs, float)

        def one(f):
            return self.loss_only(p_full, freqs=[f], amps=[self.cfg["amplitude"]])

        if threads > 1:
            from concurrent.futures import ThreadPoolExecutor

            with ThreadPoolExecutor(max_workers=threads) as ex:
                return np.array(list(ex.map(one, freqs)))
        return np.array([one(f) for f in freqs])


def run_horn(config=None):
    cfg = merge_config(HORN_DEFAULTS, config)
    problem = HornProblem(cfg)
    p0 = np.zeros(problem.m_flare - 2)
    state = minimize(
        problem.evaluate, p0,
        LossConfig(gamma=cfg["gamma"], tolerance=cfg["tolerance"],
                   max_iterations=cfg["max_iterations"]),
    )
    result = {
        "state": state,
        "p_full": problem.expand(state.p),
        "config": cfg,
        "problem": problem,
        "n_evaluations": problem.n_evaluations,
    }
    if cfg.get("spectrum"):
        lo, hi = cfg["spectrum"]["band"]
        freqs = np.linspace(lo, hi, int(cfg["spectrum"]["count"]))
        result["spectrum_frequencies"] = freqs
        result["spectrum_initial"] = problem.reflection_spectrum(
            np.zeros(problem.m_flare), freqs, threads=cfg.get("threads", 1))
        result["spectrum_optimized"] = problem.reflection_spectrum(
            result["p_full"], freqs, threads=cfg.get("threads", 1))
    return result


# ---------------------------------------------------------------------------
# gradient check driver
# ---------------------------------------------------------------------------

def run_gradient_check(config=None):
    cfg = merge_config(GRADIENT_CHECK_DEFAULTS, config)
    rng = np.random.default_rng(cfg["seed"])
    m_x, m_y, order = cfg["m_x"], cfg["m_y"], cfg["order"]
    p = -0.08 * rng.random(m_x) - 0.02
    ops_design = build_first_derivative(m_x, 1.0 / (m_x - 1), order)
    base = build_bathymetry_system(p, m_x, m_y, order)
    dt0 = stable_dt(base.system) * cfg["dt_base_factor"]
    sig = SourceSignal(kind="ricker", sigma=0.1)

    def run(pv, dt):
        setup = build_bathymetry_system(pv, m_x, m_y, order)
        s = setup.system
        ds = s.point_source(0.25, 0.8)
        dr = s.point_source(0.75, 0.8)
        traj = solve_forward(s, T=cfg["T"], dt=dt, source=(sig, ds), receivers=[dr],
                             store_states=True)
        return setup, dr, traj

    def loss(pv, dt):
        _, _, traj = run(pv, dt)
        quad = build_time_quadrature(traj.n_steps + 1, traj.dt)
        return 0.5 * float(quad @ traj.receiver**2) + regularization_value(
            ops_design, pv, cfg["gamma"])

    rows = []
    for level in range(cfg["dt_levels"]):
        dt = dt0 / 2**level
        setup, dr, traj = run(p, dt)
        design = DesignSystem(setup)
        rep = compute_gradient(design, [w for w, _ in traj.states], traj.dt,
                               cfg["gamma"], p, ops_design,
                               point_forcing=(dr, traj.receiver))
        g_fd = fd_gradient_oracle(lambda q: loss(q, dt), p, eps=cfg["eps"])
        rel = float(np.linalg.norm(rep.total - g_fd) / np.linalg.norm(g_fd))
        rows.append({"dt": traj.dt, "rel_l2_error": rel})
    return {"rows": rows, "config": cfg}


# ---------------------------------------------------------------------------
# output emission
# ---------------------------------------------------------------------------

def _write_csv(path, header, rows):
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(header)
        for row in rows:
            w.writerow([repr(v) if isinstance(v, float) else v for v in row])


def emit_outputs(results, out_dir, experiment, config, timings=None):
    """Write result CSVs plus a manifest (config hash, versions, timings)."""
    os.makedirs(out_dir, exist_ok=True)
    written = []

    def emit(name, header, rows):
        path = os.path.join(out_dir, name)
        _write_csv(path, header, rows)
        written.append(name)

    if experiment == "convergence":
        emit("convergence.csv", ["N", "error", "log10_error", "rate"],
             [(r.N, r.error, float(np.log10(r.error)), r.rate) for r in results])
    elif experiment == "bathymetry":
        state = results["state"]
        emit("iterations.csv", ["iter", "J", "grad_inf", "step"],
             [(it, J, gi, st) for it, J, gi, st in state.history])
        xs = results["design_grid"]
        for it, p in sorted(results["snapshots"].items()):
            emit(f"seabed_iter{it:04d}.csv", ["x", "p"], list(zip(xs, p)))
        emit("seabed_truth.csv", ["x", "p"], list(zip(xs, results["truth_on_grid"])))
        times, values = results["data"]
        emit("receiver_data.csv", ["t", "value"], list(zip(times, values)))
    elif experiment == "horn":
        state = results["state"]
        emit("iterations.csv", ["iter", "J", "grad_inf", "step"],
             [(it, J, gi, st) for it, J, gi, st in state.history])
        m = len(results["p_full"])
        xs = np.linspace(0.0, 1.0, m)
        emit("flare_shape.csv", ["s", "p"], list(zip(xs, results["p_full"])))
        if "spectrum_frequencies" in results:
            emit("reflection_spectrum.csv", ["frequency", "loss_initial", "loss_optimized"],
                 list(zip(results["spectrum_frequencies"],
                          results["spectrum_initial"], results["spectrum_optimized"])))
    elif experiment == "gradient-check":
        emit("gradient_check.csv", ["dt", "rel_l2_error"],
             [(r["dt"], r["rel_l2_error"]) for r in results["rows"]])
    else:
        raise ConfigurationError(f"unknown experiment {experiment!r}")

    manifest = {
        "experiment": experiment,
        "config_sha256": hashlib.sha256(
            json.dumps(config, sort_keys=True).encode()).hexdigest(),
        "package_version": __version__,
        "files": written,
        "timings_seconds": timings or {},
        "written_at": time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime()),
    }
    with open(os.path.join(out_dir, "manifest.json"), "w") as f:
        json.dump(manifest, f, indent=2, sort_keys=True)
    return written + ["manifest.json"]
