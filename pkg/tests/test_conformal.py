"""Conformal change laws, checked through two independent code paths:
the transformation formulas versus direct tensor computation on the
transformed provider."""
import numpy as np
import pytest

from crflow import metrics as M
from crflow.curvature import chern_curvature, hsc_max, torsion


def test_identity_factor():
    g = M.torsion_example()
    gc = M.conformal_metric(g, M.constant_field(0.0))
    z = np.array([0.3 + 0.2j, -0.1 + 0.4j])
    assert np.abs(gc.matrix(z) - g.matrix(z)).max() == 0.0
    assert np.abs(gc.d1(z) - g.d1(z)).max() == 0.0
    assert np.abs(gc.d2(z) - g.d2(z)).max() == 0.0


def test_constant_factor_scaling_laws():
    """F = c: curvature tensor scales by e^{2c}, HSC by e^{-2c}, torsion
    components by e^{2c}."""
    c = 0.4
    g = M.torsion_example()
    gc = M.conformal_metric(g, M.constant_field(c))
    z = np.array([0.25 + 0.15j, 0.3 - 0.1j])
    e = np.exp(2 * c)
    p0, pc = chern_curvature(g, z), chern_curvature(gc, z)
    assert np.abs(pc.curvature - e * p0.curvature).max() < 1e-12
    T0, _ = torsion(g, z)
    Tc, _ = torsion(gc, z)
    assert np.abs(Tc - e * T0).max() < 1e-13
    k0 = hsc_max(g, z, samples=512, seed=2).kappa
    kc = hsc_max(gc, z, samples=512, seed=2).kappa
    assert kc == pytest.approx(k0 / e, rel=1e-9)


def test_hsc_law_n1():
    """R-hat_1111 = e^{2F} R_1111 - 2 h-hat_11 F_11 for n = 1 (both paths
    analytic, agreement to 1e-12)."""
    for a in (0.3, -0.2):
        F = M.radial_quadratic_field(a)
        g = M.poincare_disk()
        gc = M.conformal_metric(g, F)
        for r in (0.1, 0.45, 0.7):
            z = np.array([r + 0.2j])
            if abs(z[0]) >= 0.95:
                continue
            direct = chern_curvature(gc, z).curvature[0, 0, 0, 0]
            base = chern_curvature(g, z).curvature[0, 0, 0, 0]
            e = np.exp(2 * F.value(z))
            law = e * base - 2.0 * (e * g.matrix(z)[0, 0]) * F.hess(z)[0, 0]
            assert direct == pytest.approx(law, rel=1e-12)


def test_torsion_law_two_paths_c2():
    base = M.conformal_metric(M.euclidean(2), M.radial_quadratic_field(-0.15))
    F = M.radial_quadratic_field(0.27)
    gc = M.conformal_metric(base, F)
    rng = np.random.default_rng(12)
    for _ in range(5):
        z = (rng.standard_normal(2) + 1j * rng.standard_normal(2)) * 0.4
        T_direct, _ = torsion(gc, z)
        e = np.exp(2 * F.value(z))
        Fd = F.grad(z)
        G = base.matrix(z)
        T_base, _ = torsion(base, z)
        law = 2 * e * (np.einsum('p,kq->pkq', Fd, G)
                       - np.einsum('k,pq->pkq', Fd, G)) + e * T_base
        assert np.abs(T_direct - law).max() < 1e-9


def test_conformal_d2_matches_fd():
    """Product/chain-rule second derivatives vs finite differences of the
    transformed provider (independent validation of the closures)."""
    gc = M.conformal_metric(M.torsion_example(), M.radial_quadratic_field(0.2))
    gfd = M.with_fd_backend(gc, order=4, step=1e-3)
    z = np.array([0.2 - 0.3j, 0.4 + 0.1j])
    assert np.abs(gc.d2(z) - gfd.d2(z)).max() < 1e-7


def test_mobius_pullback_preserves_poincare():
    """phi(z) = (z - a)/(1 - abar z) is an isometry of the disk: the
    pullback of the Poincare metric equals the Poincare metric."""
    g = M.poincare_disk()
    pb = M.mobius_pullback(g, 0.3 + 0.1j)
    rng = np.random.default_rng(6)
    for _ in range(10):
        z = np.array([(rng.standard_normal() + 1j * rng.standard_normal())])
        z *= rng.uniform(0, 0.8) / max(abs(z[0]), 1e-12)
        assert np.abs(pb.matrix(z) - g.matrix(z)).max() < 1e-10
        assert np.abs(pb.d1(z) - g.d1(z)).max() < 1e-9
        assert np.abs(pb.d2(z) - g.d2(z)).max() < 1e-8


def test_mobius_pullback_generic_metric_chain_rule():
    """For a non-invariant metric the pullback closures must still match the
    finite-difference derivatives of the pulled-back values."""
    g = M.poincare_disk(1.3)
    gq = M.conformal_metric(g, M.radial_quadratic_field(0.11))
    pb = M.mobius_pullback(gq, 0.2 - 0.25j)
    pfd = M.with_fd_backend(pb, order=4, step=5e-4)
    z = np.array([0.35 + 0.1j])
    assert np.abs(pb.d1(z) - pfd.d1(z)).max() < 1e-8
    assert np.abs(pb.d2(z) - pfd.d2(z)).max() < 1e-6
