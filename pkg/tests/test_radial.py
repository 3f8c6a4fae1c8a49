import numpy as np
import pytest

from crflow import radial as RD


def test_homothety_tracking_coarse():
    run = RD.run_radial_flow(RD.poincare_lambda, 0.7, 0.1, nodes=128, order=6,
                             boundary=lambda r, t: RD.homothety_lambda(r, t))
    fr = run.frames[-1]
    exact = RD.homothety_lambda(run.grid.r, fr.time)
    assert np.abs(fr.lam / exact - 1.0).max() < 1e-9


def test_flat_profile_stationary():
    run = RD.run_radial_flow(lambda r: np.ones_like(r), 0.8, 0.05, nodes=64)
    assert np.abs(run.frames[-1].lam - 1.0).max() < 1e-12


def test_potential_run_matches_closed_form():
    """psi for the homothety equals [(1+2t)(log(1+2t)-1)+1]/2, uniformly in
    space (symbolic-oracle value)."""
    grid, psi, lam_rec, t = RD.run_radial_potential_flow(
        RD.poincare_lambda, 0.7, 0.08, nodes=128,
        boundary_psi=lambda r, tt: np.full_like(r, RD.homothety_psi(tt)),
        boundary_lam=lambda r, tt: RD.homothety_lambda(r, tt))
    assert np.abs(psi - RD.homothety_psi(t)).max() < 1e-6
    exact = RD.homothety_lambda(grid.r, t)
    assert np.abs(lam_rec / exact - 1.0).max() < 1e-8


def test_potential_vs_metric_form_agree():
    lam0 = lambda r: RD.perturbed_poincare_lambda(r, 0.05, support=0.5)
    bl = lambda r, t: RD.homothety_lambda(r, t)
    run = RD.run_radial_flow(lam0, 0.7, 0.02, nodes=96, boundary=bl)
    grid, psi, lam_rec, t = RD.run_radial_potential_flow(
        lam0, 0.7, 0.02, nodes=96, boundary_lam=bl, boundary_psi=None)
    # psi ghosts are extrapolated (psi is unknown outside); compare away
    # from the outer ring
    mask = grid.r <= 0.6
    fr = run.frames[-1]
    assert abs(fr.time - t) < 1e-12
    assert np.abs((lam_rec - fr.lam)[mask]).max() < 1e-7


def test_radial_profile_validation():
    with pytest.raises(ValueError):
        RD.RadialProfile(n=2, r_grid=np.array([0.1]), lam=np.array([1.0]))
    with pytest.raises(ValueError):
        RD.RadialProfile(n=1, r_grid=np.array([0.1]), lam=np.array([-1.0]))


def test_radial_flow_step_op():
    grid = RD.RadialGrid(0.7, 64)
    prof = RD.RadialProfile(n=1, r_grid=grid.r, lam=RD.poincare_lambda(grid.r))
    dt = 0.5 * grid.h**2
    RD.radial_flow_step(grid, prof, dt, 0.0,
                        boundary=lambda r, t: RD.homothety_lambda(r, t))
    exact = RD.homothety_lambda(grid.r, dt)
    assert np.abs(prof.lam / exact - 1.0).max() < 1e-9
    assert prof.regularity_residual(grid) < 1e-3


def test_origin_regularity_even_mirror():
    """ddbar of an even smooth profile is accurate through r = 0."""
    grid = RD.RadialGrid(0.5, 64, order=4)
    u = np.cos(grid.r**2)
    # ddbar u = (u'' + u'/r)/4 with u = cos(r^2):
    # u' = -2r sin(r^2), u'' = -2 sin(r^2) - 4r^2 cos(r^2)
    exact = 0.25 * (-4.0 * np.sin(grid.r**2) - 4.0 * grid.r**2 * np.cos(grid.r**2))
    err = np.abs(grid.ddbar(u, np.cos(grid.outer_ghost_radii()**2)) - exact)
    assert err.max() < 1e-7


@pytest.mark.parametrize("bnd", ["trajectory", "ke"])
def test_normalized_two_phase_monotonicities(bnd):
    """Two-phase run: phi' <= 0 and phi' + phi non-increasing (the normalized
    clock starts at the unnormalized t = 1).  Checked both with the exact
    trajectory boundary and with the KE Dirichlet data of convergence runs."""
    p1 = RD.run_radial_flow(RD.poincare_lambda, 0.9, 1.0, nodes=96, order=6,
                            boundary=lambda r, t: RD.homothety_lambda(r, t))
    if bnd == "trajectory":
        b2 = lambda r, s: (2.0 + np.exp(-s)) * RD.poincare_lambda(r)
    else:
        b2 = lambda r, s: RD.ke_lambda(r)
    run = RD.run_normalized_radial(p1.frames[-1].lam, 0.9, 4.0, nodes=96,
                                   order=6, boundary=b2)
    prev = None
    for fr in run.frames:
        assert fr.phi_prime.max() <= 1e-8
        v = fr.phi_prime + fr.phi
        if prev is not None:
            assert (v - prev).max() <= 1e-8
        prev = v
    if bnd == "trajectory":
        # closed form: lam_tilde(s) = (2 + e^-s) * poincare
        fr = run.frames[-1]
        exact = (2.0 + np.exp(-fr.time)) * RD.poincare_lambda(run.grid.r)
        assert np.abs(fr.lam - exact)[run.grid.r <= 0.8].max() < 1e-4


def test_normalize_identity_e_tphi1():
    """omega~(s) = e^-s omega~(0) - (1 - e^-s) Ric(omega~(0)) + ddbar phi~."""
    p1 = RD.run_radial_flow(
        lambda r: RD.perturbed_poincare_lambda(r, 0.05, support=0.5), 0.9, 1.0,
        nodes=96, order=4, boundary=lambda r, t: RD.homothety_lambda(r, t))
    lam1 = p1.frames[-1].lam
    run = RD.run_normalized_radial(lam1, 0.9, 2.0, nodes=96,
                                   boundary=lambda r, s: RD.ke_lambda(r))
    grid = run.grid
    ric0 = -grid.ddbar(np.log(lam1), np.log(RD.homothety_lambda(
        grid.outer_ghost_radii(), 1.0)))
    for fr in run.frames[1:]:
        s = fr.time
        # phi ghosts: phi is unknown outside; compare interior only
        rec = np.exp(-s) * lam1 - (1 - np.exp(-s)) * ric0 + grid.ddbar(fr.phi)
        mask = grid.r <= 0.75
        assert np.abs((rec - fr.lam)[mask]).max() < 5e-3


def test_normalized_run_s0_frame():
    run = RD.run_normalized_radial(RD.ke_lambda, 0.9, 0.5, nodes=32,
                                   boundary=lambda r, s: RD.ke_lambda(r))
    fr0 = run.frames[0]
    assert fr0.time == 0.0
    assert np.abs(fr0.phi).max() == 0.0
    assert np.abs(fr0.phi_prime).max() == 0.0


def test_run_diagnostics_rows_contract():
    run = RD.run_normalized_radial(RD.ke_lambda, 0.8, 0.3, nodes=64,
                                   boundary=lambda r, s: RD.ke_lambda(r),
                                   h_reference=RD.poincare_lambda)
    rows = run.diagnostics_rows()
    keys = {"step", "time", "sup_lambda", "inf_tR", "ke_residual", "min_eig",
            "phi_prime_min", "phi_prime_max"}
    assert all(keys <= set(r) for r in rows)
    assert rows[0]["sup_lambda"] == pytest.approx(0.5, rel=1e-12)
    assert all(r["ke_residual"] < 1e-4 for r in rows)


def test_phi_evolution_residual_independent_differencing():
    """phi' stored along the run must match centered differencing of phi
    across frames (the potential-evolution relation, independently checked)."""
    run = RD.run_normalized_radial(
        lambda r: 3.0 * RD.poincare_lambda(r), 0.9, 1.0, nodes=48,
        boundary=lambda r, s: (2.0 + np.exp(-s)) * RD.poincare_lambda(r),
        frame_ds=0.02)
    frames = run.frames
    worst = 0.0
    for k in range(1, len(frames) - 1):
        ds = frames[k + 1].time - frames[k - 1].time
        fd = (frames[k + 1].phi - frames[k - 1].phi) / ds
        worst = max(worst, float(np.abs(fd - frames[k].phi_prime).max()))
    assert worst < 5e-4  # O(frame_ds^2)


@pytest.fixture(scope="module")
def homothety_run_past_t1():
    return RD.run_radial_flow(
        RD.poincare_lambda, 0.85, float(np.exp(1.2)), nodes=96, order=6,
        boundary=lambda r, t: RD.homothety_lambda(r, t), frame_dt=0.01)


def test_normalize_op_closed_form(homothety_run_past_t1):
    """g~(s) = e^-s (1 + 2 e^s) g0 = (2 + e^-s) g0 for the homothety, with
    ke_residual exactly e^-s/(2 + e^-s) and phi' <= 0."""
    run = homothety_run_past_t1
    lamp = RD.poincare_lambda(run.grid.r)
    for s in (0.0, 0.5, 1.2):
        st = RD.normalize(run, s)
        exact = (2.0 + np.exp(-s)) * lamp
        assert np.abs(st.g_tilde - exact).max() < 1e-5
        assert st.ke_residual == pytest.approx(
            np.exp(-s) / (2.0 + np.exp(-s)), rel=1e-4)
        assert st.phi_tilde_prime.max() <= 1e-8
    st0 = RD.normalize(run, 0.0)
    assert np.abs(st0.phi_tilde).max() == 0.0       # s = 0: phi~ = 0, g~ = g(1)
    assert np.abs(st0.g_tilde - 3.0 * lamp).max() < 1e-5


def test_normalize_op_identity_e_tphi1(homothety_run_past_t1):
    """omega~(s) = e^-s omega~(0) - (1 - e^-s) Ric(omega~(0)) + ddbar phi~."""
    run = homothety_run_past_t1
    grid = run.grid
    lamp = RD.poincare_lambda(grid.r)
    lam1 = 3.0 * lamp
    ric0 = -grid.ddbar(np.log(lam1),
                       np.log(3.0 * RD.poincare_lambda(grid.outer_ghost_radii())))
    st = RD.normalize(run, 1.0)
    es = np.exp(-1.0)
    rec = es * lam1 - (1.0 - es) * ric0 + grid.ddbar(st.phi_tilde)
    mask = grid.r <= 0.7
    assert np.abs((rec - st.g_tilde)[mask]).max() < 1e-3


def test_normalize_op_cross_checks_direct_integration(homothety_run_past_t1):
    run = homothety_run_past_t1
    lamp = RD.poincare_lambda(run.grid.r)
    nrun = RD.run_normalized_radial(
        3.0 * lamp, 0.85, 1.2, nodes=96, order=6, frame_ds=0.1,
        boundary=lambda r, ss: (2.0 + np.exp(-ss)) * RD.poincare_lambda(r))
    st = RD.normalize(run, 1.2)
    fr = [f for f in nrun.frames if abs(f.time - 1.2) < 1e-9][0]
    assert np.abs(st.phi_tilde - fr.phi).max() < 1e-4
    assert np.abs(st.g_tilde - fr.lam).max() < 1e-4


def test_normalize_op_horizon_error(homothety_run_past_t1):
    with pytest.raises(ValueError):
        RD.normalize(homothety_run_past_t1, 5.0)
    run_n = RD.run_normalized_radial(RD.ke_lambda, 0.8, 0.2, nodes=32)
    with pytest.raises(ValueError):
        RD.normalize(run_n, 0.1)
