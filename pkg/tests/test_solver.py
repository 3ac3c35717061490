"""Forward integration: signals, stability, energy decay, linearity."""

import mpmath
import numpy as np
import pytest

from sbpwave import NumericalError
from sbpwave.geometries import build_bathymetry_system, build_circle_system
from sbpwave.solver import SourceSignal, ricker, solve_forward, stable_dt


@pytest.fixture(scope="module")
def bathy():
    rng = np.random.default_rng(4)
    return build_bathymetry_system(-0.1 * rng.random(13), 13, 9, order=4).system


@pytest.fixture(scope="module")
def bathy_dt(bathy):
    return stable_dt(bathy)


def smooth_random_state(system, seed=0):
    """Low-frequency random field (a few global Fourier modes per block)."""
    rng = np.random.default_rng(seed)
    w = np.zeros(system.N)
    for b_id, blk in enumerate(system.blocks):
        sl = system.block_slice(b_id)
        x, y = blk.geom.x, blk.geom.y
        for _ in range(4):
            kx, ky = rng.integers(1, 3, 2)
            w[sl] += rng.standard_normal() * np.sin(kx * np.pi * x) * np.cos(ky * np.pi * y)
    return w


# ---------------------------------------------------------------------------
# ricker wavelet
# ---------------------------------------------------------------------------

def test_ricker_peak_value():
    # oracle: arbitrary-precision evaluation of 2/(sqrt(3 sigma) pi^(1/4))
    sigma = 0.1
    with mpmath.workdps(40):
        expect = float(2 / (mpmath.sqrt(3 * mpmath.mpf("0.1")) * mpmath.pi ** mpmath.mpf("0.25")))
    assert abs(ricker(0.0, sigma) - expect) <= 1e-15 * expect


def test_ricker_zeros_at_pm_sigma():
    assert ricker(0.1, 0.1) == 0.0
    assert ricker(-0.1, 0.1) == 0.0


def test_ricker_even():
    t = np.linspace(0, 0.5, 11)
    assert np.allclose(ricker(t, 0.13), ricker(-t, 0.13), atol=0)


def test_horn_frequency_band_enforced():
    from sbpwave import ConfigurationError

    with pytest.raises(ConfigurationError):
        SourceSignal(kind="horn", amplitudes=(1.0,), frequencies=(90.0,))


# ---------------------------------------------------------------------------
# stable time step
# ---------------------------------------------------------------------------

def test_stable_dt_scales_with_grid():
    p = np.zeros(13)
    dt_coarse = stable_dt(build_bathymetry_system(p, 13, 9, order=4).system)
    p2 = np.zeros(25)
    dt_fine = stable_dt(build_bathymetry_system(p2, 25, 17, order=4).system)
    ratio = dt_coarse / dt_fine
    assert 1.8 <= ratio <= 2.2


def test_stable_dt_scales_with_wave_speed():
    p = np.zeros(13)
    dt1 = stable_dt(build_bathymetry_system(p, 13, 9, order=4).system)
    dt2 = stable_dt(build_bathymetry_system(p, 13, 9, order=4, c=2.0).system)
    assert abs(dt1 / dt2 - 2.0) <= 0.02


def test_stable_dt_long_run_bounded(bathy, bathy_dt):
    w0 = smooth_random_state(bathy, seed=3)
    traj = solve_forward(
        bathy, T=2.0, dt=bathy_dt, initial_state=(w0, np.zeros(bathy.N)),
        record_energy=True,
    )
    assert np.isfinite(traj.energy).all()
    assert traj.energy[-1] <= traj.energy[0] * (1 + 1e-9)


# ---------------------------------------------------------------------------
# forward solve
# ---------------------------------------------------------------------------

def test_zero_signal_zero_solution(bathy, bathy_dt):
    sig = SourceSignal(kind="custom", func=lambda t: 0.0)
    ds = bathy.point_source(0.25, 0.8)
    dr = bathy.point_source(0.75, 0.8)
    traj = solve_forward(bathy, T=0.5, dt=bathy_dt, source=(sig, ds), receivers=[dr])
    assert np.abs(traj.receiver).max() == 0.0


def test_energy_monotone_decay(bathy, bathy_dt):
    w0 = smooth_random_state(bathy, seed=11)
    traj = solve_forward(
        bathy, T=1.0, dt=bathy_dt,
        initial_state=(w0, np.zeros(bathy.N)), record_energy=True,
    )
    increments = np.diff(traj.energy)
    assert increments.max() <= 1e-10 * traj.energy[0]


def test_linearity(bathy, bathy_dt):
    ds = bathy.point_source(0.25, 0.8)
    dr = bathy.point_source(0.75, 0.8)
    s1 = SourceSignal(kind="ricker", sigma=0.1)
    s2 = SourceSignal(kind="custom", func=lambda t: np.sin(8 * t))
    a, b = 1.3, -0.6
    comb = SourceSignal(kind="custom", func=lambda t: a * s1(t) + b * s2(t))
    kw = dict(T=1.0, dt=bathy_dt, receivers=[dr])
    r1 = solve_forward(bathy, source=(s1, ds), **kw).receiver
    r2 = solve_forward(bathy, source=(s2, ds), **kw).receiver
    rc = solve_forward(bathy, source=(comb, ds), **kw).receiver
    assert np.abs(rc - (a * r1 + b * r2)).max() <= 1e-10 * max(1.0, np.abs(rc).max())


def test_dirichlet_rows_exactly_zero(bathy, bathy_dt):
    ds = bathy.point_source(0.25, 0.8)
    sig = SourceSignal(kind="ricker", sigma=0.1)
    traj = solve_forward(
        bathy, T=0.5, dt=bathy_dt, source=(sig, ds), store_states=True,
    )
    top = bathy.blocks[0].edge_nodes["n"]
    for w, v in traj.states[:: max(1, len(traj.states) // 10)]:
        assert np.abs(w[top]).max() <= 1e-12 * max(1.0, np.abs(w).max())


def test_reciprocity(bathy, bathy_dt):
    src = (0.25, 0.8)
    rcv = (0.75, 0.8)
    sig = SourceSignal(kind="ricker", sigma=0.1)
    d1 = bathy.point_source(*src)
    d2 = bathy.point_source(*rcv)
    fwd = solve_forward(bathy, T=2.0, dt=bathy_dt, source=(sig, d1), receivers=[d2]).receiver
    rev = solve_forward(bathy, T=2.0, dt=bathy_dt, source=(sig, d2), receivers=[d1]).receiver
    scale = np.abs(fwd).max()
    assert np.abs(fwd - rev).max() <= 1e-6 * scale


def test_divergence_reported_with_step():
    system = build_bathymetry_system(np.zeros(13), 13, 9, order=4).system
    dt = 10.0 * stable_dt(system)  # far beyond the stability limit
    w0 = smooth_random_state(system, seed=1)
    with pytest.raises(NumericalError) as err:
        solve_forward(system, T=20.0, dt=dt, initial_state=(w0, np.zeros(system.N)))
    assert err.value.step is not None


def test_temporal_convergence_fourth_order():
    # fixed space grid; halving dt cuts the time-integration error ~16x
    system = build_circle_system(m=13, k=9, order=4)
    w0 = smooth_random_state(system, seed=2)
    w0 = system.project(w0)
    dt0 = stable_dt(system)
    ref = solve_forward(system, T=1.0, dt=dt0 / 16, initial_state=(w0, np.zeros(system.N)),
                        store_states=True).states[-1][0]
    errs = []
    for fac in (0.5, 0.25):
        traj = solve_forward(system, T=1.0, dt=fac * dt0,
                             initial_state=(w0, np.zeros(system.N)), store_states=True)
        errs.append(np.linalg.norm(traj.states[-1][0] - ref))
    ratio = errs[0] / errs[1]
    assert 11.0 <= ratio <= 21.0
