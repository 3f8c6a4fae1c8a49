import numpy as np
import pytest

from crflow import radial as RD
from crflow.errors import FlowBreakdownError
from crflow.flow import (DiskGrid, cfl_bound, ddbar_periodic, flow_step_metric,
                         flow_step_potential, run_disk2d_flow, run_torus_flow,
                         torus_state)


def bumpy_lam0(N, L=1.0, amp=0.05):
    x = np.arange(N) * (L / N)
    X, Y = np.meshgrid(x, x, indexing="ij")
    return np.exp(amp * np.cos(2 * np.pi * X / L) * np.cos(2 * np.pi * Y / L))


def test_flat_torus_stationary():
    state, frames = run_torus_flow(np.ones((16, 16)), 1.0, 0.01)
    assert np.abs(state.omega_t - 1.0).max() == 0.0
    assert np.abs(state.psi).max() == 0.0


def test_torus_reconstruction_identity():
    """omega(t) = omega0 - t Ric0 + ddbar psi holds along the metric flow."""
    state, _ = run_torus_flow(bumpy_lam0(32), 1.0, 0.004)
    assert state.reconstruction_residual() < 1e-8


def test_torus_positivity_and_diagnostics():
    state, frames = run_torus_flow(bumpy_lam0(32), 1.0, 0.003)
    assert all(lam.min() > 0 for _, lam, _ in frames)
    assert len(state.diagnostics) > 0
    assert {"t", "min_lam", "min_scalar"} <= set(state.diagnostics[-1])


def test_metric_vs_potential_equivalence():
    lam0 = bumpy_lam0(32)
    sm, _ = run_torus_flow(lam0, 1.0, 0.004, mode="metric")
    sp, _ = run_torus_flow(lam0, 1.0, 0.004, mode="potential")
    assert np.abs(sm.omega_t - sp.omega_t).max() < 1e-9
    assert np.abs(sm.psi - sp.psi).max() < 1e-9


def test_torus_area_preserved():
    """The n=1 flow preserves the total area (integral of ddbar log lam = 0
    on a periodic chart); the bumpy metric relaxes toward the flat one."""
    lam0 = bumpy_lam0(32, amp=0.08)
    state, _ = run_torus_flow(lam0, 1.0, 0.01)
    assert state.omega_t.mean() == pytest.approx(lam0.mean(), rel=1e-10)
    assert state.omega_t.std() < lam0.std()


def test_cfl_bound_flat_and_scaling():
    assert cfl_bound(1.0, 1.0, 0.1, safety=0.2) == pytest.approx(0.2 * 0.01)
    # doubling resolution quarters dt_max
    a = cfl_bound(1.0, 1.0, 0.1, safety=0.2)
    b = cfl_bound(1.0, 1.0, 0.05, safety=0.2)
    assert a / b == pytest.approx(4.0)
    # stability cap engages for large safety
    assert cfl_bound(1.0, 1.0, 0.1, safety=50.0) == pytest.approx(0.01)


def test_flow_step_rejects_positivity_loss():
    state = torus_state(np.ones((16, 16)), 1.0)
    state.omega_t = np.full((16, 16), 1e-14)
    with pytest.raises(FlowBreakdownError):
        flow_step_metric(state, 1e-5)


def test_potential_step_rejects_nonpositive_reconstruction():
    state = torus_state(bumpy_lam0(16, amp=0.02), 1.0)
    state.psi = -np.ones((16, 16)) * 50.0  # forces lam0 + ddbar psi through 0
    state.psi[0, 0] = 0.0
    with pytest.raises(FlowBreakdownError):
        flow_step_potential(state, 1e-6)


def test_positively_curved_cap_shrinks_and_breaks_down():
    """Fubini-Study-like cap lam = (1+r^2)^-2 has Ric = +2g; the flow is the
    exact homothety lam(t) = (1-2t) lam0, so det g shrinks where Ric > 0 and
    positivity fails at t = 1/2 (surfaced as an explicit breakdown)."""
    fs = lambda r: 1.0 / (1.0 + r**2) ** 2
    boundary = lambda r, t: (1.0 - 2.0 * t) * fs(r)
    run = RD.run_radial_flow(fs, 0.8, 0.2, nodes=32, boundary=boundary)
    assert not run.broken
    mid = run.frames[len(run.frames) // 2]
    assert np.all(mid.lam < run.frames[0].lam)   # d_t det g < 0
    exact = (1.0 - 2.0 * mid.time) * fs(run.grid.r)
    assert np.abs(mid.lam - exact).max() < 1e-6
    run2 = RD.run_radial_flow(fs, 0.8, 0.45, nodes=32, boundary=boundary,
                              min_eig_floor=0.05)
    assert run2.broken
    assert "floor" in run2.breakdown


def test_ddbar_periodic_second_order():
    N1, N2 = 32, 64
    errs = []
    for N in (N1, N2):
        x = np.arange(N) / N
        X, Y = np.meshgrid(x, x, indexing="ij")
        u = np.sin(2 * np.pi * X) * np.cos(4 * np.pi * Y)
        exact = -0.25 * ((2 * np.pi) ** 2 + (4 * np.pi) ** 2) * u
        errs.append(np.abs(ddbar_periodic(u, 1.0 / N) - exact).max())
    assert errs[0] / errs[1] > 3.5


def test_radial_vs_disk2d_homothety():
    """1-D reduction against the masked 2-D grid on the exact homothety."""
    t_end = 0.01
    run = RD.run_radial_flow(RD.poincare_lambda, 0.7, t_end, nodes=128, order=6,
                             boundary=lambda r, t: RD.homothety_lambda(r, t))
    grid = DiskGrid(0.7, 193)
    lam2d, t2d = run_disk2d_flow(grid, RD.poincare_lambda,
                                 lambda R, t: RD.homothety_lambda(R, t), t_end)
    exact = RD.homothety_lambda(grid.R, t2d)
    sel = grid.interior
    assert (np.abs(lam2d[sel] - exact[sel]) / exact[sel]).max() < 1e-8
    fr = run.frames[-1]
    exact_r = RD.homothety_lambda(run.grid.r, fr.time)
    assert (np.abs(fr.lam - exact_r) / exact_r).max() < 1e-8


@pytest.mark.slow
def test_radial_vs_disk2d_perturbed_consistency():
    """Symmetric perturbed data: the radial reduction and the 2-D grid agree
    to 1e-6 after matched refinement (cubic transfer between the grids)."""
    from scipy.interpolate import CubicSpline
    t_end = 0.005
    amp = 0.05

    def lam0(r):
        return RD.perturbed_poincare_lambda(r, amp, support=0.5)

    def boundary(r, t):
        return RD.homothety_lambda(r, t)

    diffs = []
    for nodes, N2 in ((64, 97), (128, 193)):
        run = RD.run_radial_flow(lam0, 0.7, t_end, nodes=nodes, order=4,
                                 boundary=boundary)
        grid = DiskGrid(0.7, N2)
        lam2d, _ = run_disk2d_flow(grid, lam0, boundary, t_end)
        fr = run.frames[-1]
        interp = CubicSpline(run.grid.r, fr.lam)(grid.R[grid.interior])
        diffs.append(np.abs(lam2d[grid.interior] - interp).max())
    assert diffs[1] < diffs[0] / 2.5
    assert diffs[1] < 1e-6
