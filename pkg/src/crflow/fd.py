"""Central finite differences for point closures in complex coordinates.

Wirtinger combinations of real-direction stencils:

    d_a      = (d_x - i d_y)/2        dbar_a = (d_x + i d_y)/2

Orders 2 and 4 are supported. Functions may return scalars or arrays; the
derivative axes are prepended.
"""
from __future__ import annotations

import numpy as np

_STENCILS = {
    2: (np.array([-1.0, 1.0]) / 2.0, np.array([-1, 1])),
    4: (np.array([1.0, -8.0, 8.0, -1.0]) / 12.0, np.array([-2, -1, 1, 2])),
}


def _real_dir(n, axis):
    """Unit displacement of real coordinate `axis` (0..2n-1) as a complex vector."""
    e = np.zeros(n, dtype=complex)
    if axis < n:
        e[axis] = 1.0
    else:
        e[axis - n] = 1.0j
    return e


def real_derivative(f, z, axis, step, order=4):
    """d f / d x_axis at z by a central stencil (x-axes first, then y-axes)."""
    z = np.asarray(z, dtype=complex)
    coeffs, offsets = _STENCILS[order]
    e = _real_dir(len(z), axis)
    acc = None
    for c, k in zip(coeffs, offsets):
        v = np.asarray(f(z + (k * step) * e), dtype=complex) * c
        acc = v if acc is None else acc + v
    return acc / step


def holomorphic_derivative(f, z, step, order=4):
    """D1[a, ...] = d_a f(z) for every complex direction a."""
    z = np.asarray(z, dtype=complex)
    n = len(z)
    rows = []
    for a in range(n):
        dx = real_derivative(f, z, a, step, order)
        dy = real_derivative(f, z, n + a, step, order)
        rows.append(0.5 * (dx - 1j * dy))
    return np.stack(rows, axis=0)


def antiholomorphic_derivative(f, z, step, order=4):
    """DB[a, ...] = dbar_a f(z)."""
    z = np.asarray(z, dtype=complex)
    n = len(z)
    rows = []
    for a in range(n):
        dx = real_derivative(f, z, a, step, order)
        dy = real_derivative(f, z, n + a, step, order)
        rows.append(0.5 * (dx + 1j * dy))
    return np.stack(rows, axis=0)


def mixed_second_derivative(f, z, step, order=4):
    """D2[a, b, ...] = d_a dbar_b f(z), by nesting the first-order stencils."""
    z = np.asarray(z, dtype=complex)
    n = len(z)

    def dbar(b):
        return lambda w: antiholomorphic_derivative(f, w, step, order)[b]

    rows = []
    for a in range(n):
        cols = [holomorphic_derivative(dbar(b), z, step, order)[a] for b in range(n)]
        rows.append(np.stack(cols, axis=0))
    return np.stack(rows, axis=0)


def mixed_hessian_of_scalar(f, z, step, order=4):
    """H[p, q] = d_p dbar_q f for a real scalar field f; returns (n, n) complex.

    Cheaper than `mixed_second_derivative` for scalars: uses the real Hessian
    stencil once per axis pair.
    """
    z = np.asarray(z, dtype=complex)
    n = len(z)
    m = 2 * n
    coeffs, offsets = _STENCILS[order]

    def fr(zz):
        return float(f(zz))

    diag = np.zeros(m)
    if order == 2:
        d2c, d2o = np.array([1.0, -2.0, 1.0]), np.array([-1, 0, 1])
    else:
        d2c = np.array([-1.0, 16.0, -30.0, 16.0, -1.0]) / 12.0
        d2o = np.array([-2, -1, 0, 1, 2])
    for a in range(m):
        e = _real_dir(n, a)
        diag[a] = sum(c * fr(z + (k * step) * e) for c, k in zip(d2c, d2o)) / step**2

    Hr = np.zeros((m, m))
    np.fill_diagonal(Hr, diag)
    for a in range(m):
        for b in range(a + 1, m):
            ea, eb = _real_dir(n, a), _real_dir(n, b)
            acc = 0.0
            for ca, ka in zip(coeffs, offsets):
                for cb, kb in zip(coeffs, offsets):
                    acc += ca * cb * fr(z + (ka * step) * ea + (kb * step) * eb)
            Hr[a, b] = Hr[b, a] = acc / step**2

    H = np.zeros((n, n), dtype=complex)
    for p in range(n):
        for q in range(n):
            H[p, q] = 0.25 * (Hr[p, q] + Hr[n + p, n + q]
                              + 1j * (Hr[p, n + q] - Hr[n + p, q]))
    return H
