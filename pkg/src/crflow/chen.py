"""ODE comparison oracle for quantities with (d_t - Delta) Q <= -a Q^2 + b.

The spatially-worst case is the Riccati ODE q' = -a q^2 + b, whose
supremum of t q(t) on (0, T] is claimed bounded by

    bound(a, b, T) = (1 + sqrt(1 + 4 a b T^2)) / (2 a).

`chen_ode_oracle` integrates the ODE numerically (adaptive-substep RK4, so
large q0 transients stay stable) and reports the bound's slack; the closed
Riccati solution is exposed separately as a cross-check for the integrator.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np


def chen_bound(alpha, beta, T):
    return (1.0 + np.sqrt(1.0 + 4.0 * alpha * beta * T**2)) / (2.0 * alpha)


def riccati_closed_form(alpha, beta, q0, t):
    """Exact solution of q' = -alpha q^2 + beta, q(0) = q0 (forward in time)."""
    t = np.asarray(t, dtype=float)
    if beta == 0.0:
        return q0 / (1.0 + alpha * q0 * t)
    qs = np.sqrt(beta / alpha)
    w = np.sqrt(alpha * beta)
    e = np.exp(-2.0 * w * t)
    num = (q0 + qs) + (q0 - qs) * e
    den = (q0 + qs) - (q0 - qs) * e
    return qs * num / den


def _integrate_tq_sup(alpha, beta, T, q0, base_steps=2000):
    """Vectorized adaptive RK4; returns sup over step ends of t*q (per case)."""
    alpha = np.atleast_1d(np.asarray(alpha, dtype=float))
    beta = np.broadcast_to(np.asarray(beta, dtype=float), alpha.shape).copy()
    T = np.broadcast_to(np.asarray(T, dtype=float), alpha.shape).copy()
    q = np.broadcast_to(np.asarray(q0, dtype=float), alpha.shape).astype(float).copy()
    t = np.zeros_like(q)
    sup = np.maximum(0.0, t * q)
    dt_base = T / base_steps
    active = t < T

    def f(qq):
        return -alpha * qq**2 + beta

    it = 0
    while active.any():
        it += 1
        if it > 200000:
            raise RuntimeError("chen oracle failed to advance")
        # stiffness-limited local step: |2 alpha q| dt <= 0.4
        scale = 0.4 / (2.0 * alpha * np.maximum(np.abs(q), 1e-30))
        dt = np.minimum(dt_base, scale)
        dt = np.minimum(dt, T - t)
        dt = np.where(active, dt, 0.0)
        k1 = f(q)
        k2 = f(q + 0.5 * dt * k1)
        k3 = f(q + 0.5 * dt * k2)
        k4 = f(q + dt * k3)
        q = q + dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
        t = t + dt
        sup = np.maximum(sup, t * q)
        active = t < T - 1e-15
    return sup


@dataclass
class ChenResult:
    alpha: float
    beta: float
    T: float
    q0: float
    sup_tq: float
    bound: float

    @property
    def slack(self):
        return self.bound - self.sup_tq


def chen_ode_oracle(alpha, beta, T, q0) -> ChenResult:
    """Integrate q' = -alpha q^2 + beta and compare sup t q against the bound."""
    if alpha <= 0 or beta < 0 or T <= 0:
        raise ValueError("need alpha > 0, beta >= 0, T > 0")
    sup = float(_integrate_tq_sup(alpha, beta, T, q0)[0])
    return ChenResult(alpha, beta, T, q0, sup, float(chen_bound(alpha, beta, T)))


def chen_sweep(alphas, betas, Ts, q0s, base_steps=2000):
    """All (alpha, beta, T, q0) combinations at once; returns the worst slack.

    Output: (worst_slack, worst_case_tuple, count).
    """
    A, B, TT, Q = np.meshgrid(alphas, betas, Ts, q0s, indexing="ij")
    A, B, TT, Q = (x.ravel() for x in (A, B, TT, Q))
    sup = _integrate_tq_sup(A, B, TT, Q, base_steps)
    bound = chen_bound(A, B, TT)
    slack = bound - sup
    i = int(np.argmin(slack))
    return float(slack[i]), (float(A[i]), float(B[i]), float(TT[i]), float(Q[i])), len(A)
