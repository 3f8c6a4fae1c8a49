"""Pointwise tensor engine against closed forms.

Expected values below were frozen from a symbolic-differentiation oracle
(sympy) on the catalog metrics; see test_symbolic_oracle for the live
cross-check.
"""
import itertools

import numpy as np
import pytest

from crflow import metrics as M
from crflow.curvature import (chern_connection, chern_curvature,
                              kahler_identity_residual, torsion)


def poincare_lam(r):
    return 1.0 / (1.0 - r**2) ** 2


def test_connection_flat():
    g = M.euclidean(2)
    gam = chern_connection(g, np.array([0.3 + 0.2j, -0.1 + 0.4j]))
    assert np.abs(gam).max() == 0.0


def test_connection_poincare_frozen_value():
    # symbolic oracle: Gamma^1_11 = 2 zbar / (1 - |z|^2) -> 4/3 at z = 0.5
    g = M.poincare_disk()
    gam = chern_connection(g, np.array([0.5 + 0j]))
    assert gam[0, 0, 0] == pytest.approx(4.0 / 3.0, abs=1e-14)


def test_connection_torsion_example():
    g = M.torsion_example()
    z = np.array([0.3 + 0.4j, 0.1 - 0.2j])
    gam = chern_connection(g, z)
    expect = np.conj(z[0]) / (1.0 + abs(z[0]) ** 2)
    assert gam[1, 0, 1] == pytest.approx(expect, abs=1e-14)


def test_torsion_kahler_vanishes():
    for g in (M.poincare_disk(), M.bergman_ball(2)):
        z = np.full(g.n, 0.2 + 0.1j)
        T, Tm = torsion(g, z)
        assert np.abs(T).max() < 1e-14
        assert np.abs(Tm).max() < 1e-14


def test_torsion_example_components():
    g = M.torsion_example()
    z = np.array([0.3 + 0.4j, 0.1 - 0.2j])
    T, _ = torsion(g, z)
    assert T[0, 1, 1] == pytest.approx(np.conj(z[0]), abs=1e-15)
    # antisymmetry and all other independent components zero
    assert np.abs(T + T.transpose(1, 0, 2)).max() < 1e-15
    T_zeroed = T.copy()
    T_zeroed[0, 1, 1] = T_zeroed[1, 0, 1] = 0.0
    assert np.abs(T_zeroed).max() == 0.0


def test_conformal_torsion_law_radial_factor():
    """T(e^{2F} g) = 2(F_p g_{k qbar} - F_k g_{p qbar}) + e^{2F} T(g)."""
    base = M.torsion_example()
    F = M.radial_quadratic_field(0.23)
    gc = M.conformal_metric(base, F)
    z = np.array([0.25 - 0.15j, 0.35 + 0.05j])
    T_direct, _ = torsion(gc, z)
    e = np.exp(2.0 * F.value(z))
    Fd = F.grad(z)
    G = base.matrix(z)
    T0, _ = torsion(base, z)
    T_law = 2.0 * e * (np.einsum('p,kq->pkq', Fd, G)
                       - np.einsum('k,pq->pkq', Fd, G)) + e * T0
    assert np.abs(T_direct - T_law).max() < 1e-12


def test_curvature_flat():
    pkg = chern_curvature(M.euclidean(2), np.array([0.5 + 1j, -0.3j]))
    assert np.abs(pkg.curvature).max() == 0.0
    assert np.abs(pkg.ricci).max() == 0.0
    assert pkg.scalar == 0.0


@pytest.mark.parametrize("r", [0.0, 0.3, 0.62, 0.9])
def test_curvature_poincare_closed_form(r):
    g = M.poincare_disk()
    pkg = chern_curvature(g, np.array([r + 0j]))
    lam = poincare_lam(r)
    assert pkg.curvature[0, 0, 0, 0] == pytest.approx(-2 * lam**2, rel=1e-13)
    assert pkg.ricci[0, 0] == pytest.approx(-2 * lam, rel=1e-13)
    assert pkg.scalar == pytest.approx(-2.0, abs=1e-12)


def test_bergman_einstein_constant():
    g = M.bergman_ball(2)
    rng = np.random.default_rng(5)
    for _ in range(10):
        z = (rng.standard_normal(2) + 1j * rng.standard_normal(2)) * 0.3
        pkg = chern_curvature(g, z)
        assert np.abs(pkg.ricci + 3.0 * pkg.metric).max() < 1e-12


def test_ricci_routes_agree_for_kahler():
    """-ddbar log det g equals the second-pair trace of the full tensor."""
    for g in (M.poincare_disk(), M.bergman_ball(2)):
        z = np.full(g.n, 0.25 - 0.2j)
        pkg = chern_curvature(g, z)
        Gu = np.linalg.inv(pkg.metric).T
        traced = np.einsum('kl,ijkl->ij', Gu, pkg.curvature)
        assert np.abs(traced - pkg.ricci).max() < 1e-12


def test_reality_of_paired_contractions():
    g = M.conformal_metric(M.torsion_example(), M.radial_quadratic_field(0.3))
    rng = np.random.default_rng(7)
    z = (rng.standard_normal(2) + 1j * rng.standard_normal(2)) * 0.4
    pkg = chern_curvature(g, z)
    for _ in range(50):
        X = rng.standard_normal(2) + 1j * rng.standard_normal(2)
        Y = rng.standard_normal(2) + 1j * rng.standard_normal(2)
        v = np.einsum('ijkl,i,j,k,l->', pkg.curvature, X, np.conj(X), Y, np.conj(Y))
        assert abs(v.imag) < 1e-10 * max(1.0, abs(v))


def test_kahler_symmetry_for_kahler_metrics():
    g = M.bergman_ball(2)
    z = np.array([0.2 + 0.25j, -0.3 + 0.1j])
    R = chern_curvature(g, z).curvature
    for i, j, k, l in itertools.product(range(2), repeat=4):
        assert R[i, j, k, l] == pytest.approx(R[k, j, i, l], abs=1e-12)
        assert R[i, j, k, l] == pytest.approx(R[i, l, k, j], abs=1e-12)


def test_kahler_identity_kahler_case():
    assert kahler_identity_residual(M.bergman_ball(2),
                                    np.array([0.2 + 0.1j, 0.3 - 0.2j])) < 1e-12


def test_kahler_identity_non_kahler_analytic():
    g = M.torsion_example()
    rng = np.random.default_rng(11)
    for _ in range(10):
        z = (rng.standard_normal(2) + 1j * rng.standard_normal(2)) * 0.5
        assert kahler_identity_residual(g, z) < 1e-12


def test_kahler_identity_fd_backend():
    g = M.with_fd_backend(M.torsion_example(), order=4, step=1e-2, max_order=3)
    assert kahler_identity_residual(g, np.array([0.3 + 0.1j, -0.2 + 0.15j])) < 1e-5


@pytest.mark.slow
def test_symbolic_oracle_cross_check():
    """Live sympy differentiation of the Poincare metric vs the closures."""
    sp = pytest.importorskip("sympy")
    z, zb = sp.symbols("z zb")
    lam = (1 - z * zb) ** -2
    d1 = sp.lambdify((z, zb), sp.diff(lam, z))
    d2 = sp.lambdify((z, zb), sp.diff(lam, z, zb))
    g = M.poincare_disk()
    for r in (0.15, 0.55, 0.85):
        pt = np.array([r + 0.1j])
        assert g.d1(pt)[0, 0, 0] == pytest.approx(
            complex(d1(pt[0], np.conj(pt[0]))), rel=1e-12)
        assert g.d2(pt)[0, 0, 0, 0] == pytest.approx(
            complex(d2(pt[0], np.conj(pt[0]))), rel=1e-12)
