"""Radial (U(1)-invariant, n = 1) reduction of the flow on disk charts.

For rotationally invariant g = lam(r) |dz|^2,

    ddbar u = (u_rr + u_r / r) / 4,

so the Chern-Ricci flow is d_t lam = ddbar log lam and the normalized flow
d_s lam = ddbar log lam - lam.  The grid is cell-centered (r_i = (i+1/2) h),
which avoids the coordinate-singular node at r = 0; regularity lam'(0) = 0 is
imposed through even-mirror ghosts across the origin.  The outer boundary is
either Dirichlet data from a supplied field (exact Kahler-Einstein values or
an exact homothety, for convergence runs) or cubic extrapolation from the
interior (for identity checks).

Stencils are 4th or 6th order (two or three ghost cells per side).

Exact references on the disk (checked symbolically):
    homothety      lam(r, t) = (1 + 2t) (1 - r^2)^-2      (Ric = -2 g at t=0)
    KE fixed point lam_KE(r) = 2 (1 - r^2)^-2             (Ric = -g)
    potential      psi(t) = [(1+2t)(log(1+2t) - 1) + 1]/2 (homothety run)
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, List, Optional

import numpy as np

from .errors import FlowBreakdownError
from .flow import cfl_bound

# ---------------------------------------------------------------------------
# exact solutions
# ---------------------------------------------------------------------------


def poincare_lambda(r, factor=1.0):
    return factor / (1.0 - np.asarray(r) ** 2) ** 2


def homothety_lambda(r, t):
    return (1.0 + 2.0 * t) * poincare_lambda(r)


def ke_lambda(r):
    return poincare_lambda(r, 2.0)


def homothety_psi(t, n=1):
    return n * ((1.0 + 2.0 * t) * (np.log(1.0 + 2.0 * t) - 1.0) + 1.0) / 2.0


def perturbed_poincare_lambda(r, amplitude=0.1, support=0.8):
    """(1 + a * bump(r)) * poincare; bump is the C-infinity mollifier."""
    r = np.asarray(r, dtype=float)
    bump = np.zeros_like(r)
    inside = r < support
    x = (r[inside] / support) ** 2
    bump[inside] = np.exp(1.0 - 1.0 / (1.0 - x))
    return (1.0 + amplitude * bump) * poincare_lambda(r)


# ---------------------------------------------------------------------------
# grid
# ---------------------------------------------------------------------------

class RadialGrid:
    """Cell-centered radial grid with 4th/6th-order stencils and ghosts."""

    def __init__(self, r_max: float, nodes: int, order: int = 4):
        if order not in (4, 6):
            raise ValueError("radial stencil order must be 4 or 6")
        self.r_max = float(r_max)
        self.m = int(nodes)
        self.order = order
        self.ng = order // 2  # ghost cells per side
        self.h = self.r_max / self.m
        self.r = (np.arange(self.m) + 0.5) * self.h
        self._rg_outer = self.r_max + (np.arange(self.ng) + 0.5) * self.h
        if order == 4:
            self._w1 = np.array([1.0, -8.0, 0.0, 8.0, -1.0]) / 12.0
            self._w2 = np.array([-1.0, 16.0, -30.0, 16.0, -1.0]) / 12.0
        else:
            self._w1 = np.array([-1.0, 9.0, -45.0, 0.0, 45.0, -9.0, 1.0]) / 60.0
            self._w2 = np.array([2.0, -27.0, 270.0, -490.0, 270.0, -27.0,
                                 2.0]) / 180.0

    def pad(self, u, outer: Optional[np.ndarray] = None):
        """Mirror ghosts across r=0; outer ghosts given or extrapolated."""
        ng = self.ng
        g = np.empty(self.m + 2 * ng, dtype=u.dtype)
        g[ng:ng + self.m] = u
        g[:ng] = u[:ng][::-1]
        if outer is not None:
            g[-ng:] = outer
        else:
            # cubic extrapolation, one ghost at a time
            c = np.array([-1.0, 4.0, -6.0, 4.0])
            for k in range(ng):
                g[self.m + ng + k] = c @ g[self.m + ng + k - 4:self.m + ng + k]
        return g

    def _stencil(self, g, w):
        width = len(w)
        out = w[0] * g[:self.m]
        for j in range(1, width):
            out = out + w[j] * g[j:j + self.m]
        return out

    def d1(self, u, outer=None):
        return self._stencil(self.pad(u, outer), self._w1) / self.h

    def d2(self, u, outer=None):
        return self._stencil(self.pad(u, outer), self._w2) / self.h**2

    def ddbar(self, u, outer=None):
        """(u_rr + u_r/r)/4 with the even-mirror origin closure."""
        g = self.pad(u, outer)
        return 0.25 * (self._stencil(g, self._w2) / self.h**2
                       + self._stencil(g, self._w1) / (self.h * self.r))

    def outer_ghost_radii(self):
        return self._rg_outer


@dataclass
class RadialProfile:
    n: int
    r_grid: np.ndarray
    lam: np.ndarray
    boundary_condition: str = "extrapolate"   # or "dirichlet"

    def __post_init__(self):
        if self.n != 1:
            raise ValueError("radial reduction implemented for n = 1")
        if np.any(self.lam <= 0):
            raise ValueError("metric profile must be positive")

    def regularity_residual(self, grid: RadialGrid) -> float:
        """|lam'(0)| estimated from a cubic fit through the innermost cells;
        vanishes to stencil order for profiles smooth (even) at the origin."""
        c = np.polyfit(grid.r[:4], self.lam[:4], 3)
        return float(abs(c[2]))


# ---------------------------------------------------------------------------
# right-hand sides and stepping
# ---------------------------------------------------------------------------

def _require_positive(grid, v, t, floor):
    """Breakdown when the metric leaves the positive cone (or stalls at it):
    collapse toward zero is surfaced, never smoothed or crawled past."""
    if not np.all(np.isfinite(v)) or np.any(v <= floor):
        bad = int(np.nanargmin(v))
        raise FlowBreakdownError(t, ("r", float(grid.r[bad])),
                                 f"lam={v[bad]:.3e} <= floor {floor:.0e}")


def _ghosts_for(field_fn, grid, t):
    if field_fn is None:
        return None
    return field_fn(grid.outer_ghost_radii(), t)


def radial_rhs(grid: RadialGrid, lam, t, boundary_log=None, normalized=False):
    """d_t lam at the nodes; `boundary_log(r, t)` supplies log-lam ghosts."""
    u = np.log(lam)
    dd = grid.ddbar(u, _ghosts_for(boundary_log, grid, t))
    return dd - lam if normalized else dd


def scalar_curvature(grid: RadialGrid, lam, t=0.0, boundary_log=None):
    """Chern scalar R = -ddbar(log lam)/lam on the nodes."""
    u = np.log(lam)
    return -grid.ddbar(u, _ghosts_for(boundary_log, grid, t)) / lam


def radial_flow_step(grid: RadialGrid, profile: RadialProfile, dt: float,
                     t: float, *, boundary=None, normalized=False):
    """One RK4 step; `boundary(r, t)` gives lam ghost values (Dirichlet mode)."""
    blog = None
    if boundary is not None:
        blog = lambda r, tt: np.log(boundary(r, tt))

    lam = profile.lam

    def f(tt, v):
        if np.any(v <= 0):
            bad = int(np.argmin(v))
            raise FlowBreakdownError(tt, ("r", float(grid.r[bad])),
                                     f"lam={v[bad]:.3e}")
        return radial_rhs(grid, v, tt, blog, normalized)

    k1 = f(t, lam)
    k2 = f(t + 0.5 * dt, lam + 0.5 * dt * k1)
    k3 = f(t + 0.5 * dt, lam + 0.5 * dt * k2)
    k4 = f(t + dt, lam + dt * k3)
    new = lam + (dt / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
    if np.any(new <= 0):
        bad = int(np.argmin(new))
        raise FlowBreakdownError(t + dt, ("r", float(grid.r[bad])),
                                 f"lam={new[bad]:.3e}")
    profile.lam = new
    return profile


# ---------------------------------------------------------------------------
# full runs with frames
# ---------------------------------------------------------------------------

@dataclass
class Frame:
    step: int
    time: float
    lam: np.ndarray
    psi: Optional[np.ndarray] = None
    phi: Optional[np.ndarray] = None          # normalized potential
    phi_prime: Optional[np.ndarray] = None


@dataclass
class RadialRun:
    grid: RadialGrid
    normalized: bool
    frames: List[Frame] = field(default_factory=list)
    broken: bool = False
    breakdown: Optional[str] = None
    h_reference: Optional[Callable] = None    # lam_h(r) for the trace monitor
    boundary: Optional[Callable] = None       # lam(r, t) ghost field of the run
    steps_taken: int = 0

    def frame_times(self):
        return np.array([f.time for f in self.frames])

    def _blog(self):
        if self.boundary is None:
            return None
        return lambda r, tt: np.log(self.boundary(r, tt))

    def ke_residual(self, fr: Frame) -> float:
        """sup |Ric(g) + g|_g with the run's own discrete operator and ghosts."""
        resid = radial_rhs(self.grid, fr.lam, fr.time, self._blog(), True)
        return float(np.max(np.abs(resid / fr.lam)))

    def scalar_field(self, fr: Frame):
        return scalar_curvature(self.grid, fr.lam, fr.time, self._blog())

    def diagnostics_rows(self):
        """Per-frame monitor row: the run CSV contract."""
        rows = []
        lam_h = None
        if self.h_reference is not None:
            lam_h = self.h_reference(self.grid.r)
        for fr in self.frames:
            R = self.scalar_field(fr)
            row = {
                "step": fr.step,
                "time": fr.time,
                "sup_lambda": float(np.max(lam_h / fr.lam)) if lam_h is not None else "",
                "inf_tR": float(np.min(fr.time * R)),
                "min_eig": float(np.min(fr.lam)),
            }
            if self.normalized:
                row["ke_residual"] = self.ke_residual(fr)
                row["phi_prime_min"] = float(np.min(fr.phi_prime))
                row["phi_prime_max"] = float(np.max(fr.phi_prime))
            else:
                row["ke_residual"] = ""
                row["phi_prime_min"] = ""
                row["phi_prime_max"] = ""
            rows.append(row)
        return rows


def run_radial_flow(lam0, r_max, t_end, *, nodes=256, boundary=None,
                    safety=1.0, frame_dt=None, with_potential=False,
                    h_reference=None, max_ric_scale_floor=1.0,
                    order=4, cfl_every=16, min_eig_floor=1e-10) -> RadialRun:
    """Unnormalized radial flow from lam0 (array or callable of r).

    `boundary(r, t)` gives exact Dirichlet ghost values; None extrapolates.
    Frames are captured every `frame_dt` of flow time (default: 50 per run).
    """
    grid = RadialGrid(r_max, nodes, order)
    lam = lam0(grid.r) if callable(lam0) else np.asarray(lam0, float).copy()
    lam00 = lam.copy()
    psi = np.zeros_like(lam) if with_potential else None
    run = RadialRun(grid=grid, normalized=False, h_reference=h_reference,
                    boundary=boundary)
    frame_dt = frame_dt or t_end / 50.0
    blog = None
    if boundary is not None:
        blog = lambda r, tt: np.log(boundary(r, tt))

    t, step, next_frame = 0.0, 0, 0.0
    dt_cfl = None
    while True:
        if t >= next_frame - 1e-14 or t >= t_end - 1e-14:
            run.frames.append(Frame(step, t, lam.copy(),
                                    psi=None if psi is None else psi.copy()))
            next_frame += frame_dt
        if t >= t_end - 1e-14:
            break
        if dt_cfl is None or step % cfl_every == 0:
            R = scalar_curvature(grid, lam, t, blog)
            ric_scale = max(max_ric_scale_floor, float(np.max(np.abs(R))))
            dt_cfl = cfl_bound(float(lam.min()), ric_scale, grid.h, safety)
        dt = min(dt_cfl, t_end - t,
                 next_frame - t if next_frame > t else t_end - t)

        def f(tt, y):
            v = y[0]
            _require_positive(grid, v, tt, min_eig_floor)
            out = [radial_rhs(grid, v, tt, blog, False)]
            if psi is not None:
                out.append(np.log(v / lam00))
            return out

        try:
            y = [lam] if psi is None else [lam, psi]
            k1 = f(t, y)
            k2 = f(t + dt / 2, [a + dt / 2 * b for a, b in zip(y, k1)])
            k3 = f(t + dt / 2, [a + dt / 2 * b for a, b in zip(y, k2)])
            k4 = f(t + dt, [a + dt * b for a, b in zip(y, k3)])
            y = [a + dt / 6 * (b1 + 2 * b2 + 2 * b3 + b4)
                 for a, b1, b2, b3, b4 in zip(y, k1, k2, k3, k4)]
            lam = y[0]
            if psi is not None:
                psi = y[1]
            _require_positive(grid, lam, t + dt, min_eig_floor)
        except FlowBreakdownError as e:
            run.broken = True
            run.breakdown = str(e)
            run.frames.append(Frame(step, t, lam.copy()))
            break
        t += dt
        step += 1
    run.steps_taken = step
    return run


def run_normalized_radial(lam0, r_max, s_end, *, nodes=128, boundary=None,
                          safety=1.0, frame_ds=None, h_reference=None,
                          order=4, cfl_every=16, min_eig_floor=1e-10) -> RadialRun:
    """Normalized flow d_s lam = ddbar log lam - lam, with the potential pair.

    phi solves d_s phi = log(lam/lam(0)) - phi pointwise, so phi' is available
    in closed form at every frame; `boundary(r, s)` supplies Dirichlet ghosts
    for the metric (typically the exact KE profile, s-independent).
    """
    grid = RadialGrid(r_max, nodes, order)
    lam = lam0(grid.r) if callable(lam0) else np.asarray(lam0, float).copy()
    lam_init = lam.copy()
    phi = np.zeros_like(lam)
    run = RadialRun(grid=grid, normalized=True, h_reference=h_reference,
                    boundary=boundary)
    frame_ds = frame_ds or s_end / 50.0
    blog = None
    if boundary is not None:
        blog = lambda r, ss: np.log(boundary(r, ss))

    s, step, next_frame = 0.0, 0, 0.0
    dt_cfl = None
    while True:
        if s >= next_frame - 1e-14 or s >= s_end - 1e-14:
            pprime = np.log(lam / lam_init) - phi
            run.frames.append(Frame(step, s, lam.copy(), phi=phi.copy(),
                                    phi_prime=pprime))
            next_frame += frame_ds
        if s >= s_end - 1e-14:
            break
        if dt_cfl is None or step % cfl_every == 0:
            dt_cfl = cfl_bound(float(lam.min()), 1.0, grid.h, safety)
        dt = min(dt_cfl, s_end - s,
                 next_frame - s if next_frame > s else s_end - s)

        def f(ss, y):
            v, p = y
            _require_positive(grid, v, ss, min_eig_floor)
            return [radial_rhs(grid, v, ss, blog, True),
                    np.log(v / lam_init) - p]

        try:
            y = [lam, phi]
            k1 = f(s, y)
            k2 = f(s + dt / 2, [a + dt / 2 * b for a, b in zip(y, k1)])
            k3 = f(s + dt / 2, [a + dt / 2 * b for a, b in zip(y, k2)])
            k4 = f(s + dt, [a + dt * b for a, b in zip(y, k3)])
            lam, phi = [a + dt / 6 * (b1 + 2 * b2 + 2 * b3 + b4)
                        for a, b1, b2, b3, b4 in zip(y, k1, k2, k3, k4)]
            _require_positive(grid, lam, s + dt, min_eig_floor)
        except FlowBreakdownError as e:
            run.broken = True
            run.breakdown = str(e)
            break
        s += dt
        step += 1
    run.steps_taken = step
    return run


def run_radial_potential_flow(lam0, r_max, t_end, *, nodes=256, boundary_psi=None,
                              boundary_lam=None, safety=1.0, order=4):
    """Potential-form radial flow; returns (grid, psi, lam_reconstructed, t).

    d_t psi = log((lam0 - t Ric0 + ddbar psi)/lam0); the reconstruction
    lam = lam0 - t Ric0 + ddbar psi is the returned metric.  Boundary ghosts
    for psi come from `boundary_psi(r, t)` (exact values) or extrapolation.
    """
    grid = RadialGrid(r_max, nodes, order)
    lam00 = lam0(grid.r) if callable(lam0) else np.asarray(lam0, float).copy()
    blog_lam = None
    if boundary_lam is not None:
        blog_lam = lambda r, tt: np.log(boundary_lam(r, tt))
    ric0 = -grid.ddbar(np.log(lam00), _ghosts_for(blog_lam, grid, 0.0))
    psi = np.zeros_like(lam00)

    def reconstruct(p, tt):
        ghosts = _ghosts_for(boundary_psi, grid, tt)
        return lam00 - tt * ric0 + grid.ddbar(p, ghosts)

    t = 0.0
    while t < t_end - 1e-14:
        lam = reconstruct(psi, t)
        if np.any(lam <= 0):
            raise FlowBreakdownError(t, "radial", "reconstructed form lost positivity")
        dt = min(cfl_bound(float(lam.min()), 2.0, grid.h, safety), t_end - t)

        def f(tt, p):
            rec = reconstruct(p, tt)
            if np.any(rec <= 0):
                raise FlowBreakdownError(tt, "radial",
                                         "reconstructed form lost positivity")
            return np.log(rec / lam00)

        k1 = f(t, psi)
        k2 = f(t + dt / 2, psi + dt / 2 * k1)
        k3 = f(t + dt / 2, psi + dt / 2 * k2)
        k4 = f(t + dt, psi + dt * k3)
        psi = psi + dt / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        t += dt
    return grid, psi, reconstruct(psi, t), t


# ---------------------------------------------------------------------------
# normalization of an unnormalized run
# ---------------------------------------------------------------------------

@dataclass
class NormalizedFlowState:
    """Snapshot of the normalized flow at time s: g~(s) = e^-s g(e^s)."""
    s: float
    g_tilde: np.ndarray
    phi_tilde: np.ndarray
    phi_tilde_prime: np.ndarray
    ke_residual: float


def normalize(run: RadialRun, s: float) -> NormalizedFlowState:
    """Transform an unnormalized run into the normalized state at time s.

    Needs frames covering t in [1, e^s]; the potential

        phi~(s) = e^-s * int_0^s e^tau log(omega~^n(tau)/omega~^n(0)) dtau

    is accumulated by trapezoid over the run's frames in tau = log t.  Raises
    when s is beyond the computed horizon or the run never reached t = 1.
    """
    if run.normalized:
        raise ValueError("run is already normalized")
    t_target = float(np.exp(s))
    times = run.frame_times()
    if times[-1] < t_target - 1e-12 or times[-1] < 1.0 - 1e-12:
        raise ValueError(f"normalize needs frames up to t = e^s = {t_target:.6g}; "
                         f"run reaches t = {times[-1]:.6g}")

    def lam_at(t):
        k = int(np.searchsorted(times, t))
        k = min(max(k, 1), len(times) - 1)
        t0, t1 = times[k - 1], times[k]
        w = 0.0 if t1 == t0 else (t - t0) / (t1 - t0)
        return (1 - w) * run.frames[k - 1].lam + w * run.frames[k].lam

    lam1 = lam_at(1.0)
    taus = np.linspace(0.0, s, max(9, int(np.ceil(s / 0.02)) + 1))
    integrand = []
    for tau in taus:
        lam_t = lam_at(float(np.exp(tau)))
        v = np.log(np.exp(-tau) * lam_t / lam1)      # log(omega~(tau)/omega~(0))
        integrand.append(np.exp(tau) * v)
    phi = np.exp(-s) * np.trapezoid(np.array(integrand), taus, axis=0)

    g_tilde = np.exp(-s) * lam_at(t_target)
    phi_prime = np.log(g_tilde / lam1) - phi
    blog = None
    if run.boundary is not None:
        blog = lambda r, ss: np.log(np.exp(-s) * run.boundary(r, t_target))
    resid = radial_rhs(run.grid, g_tilde, s, blog, True)
    ke = float(np.max(np.abs(resid / g_tilde)))
    return NormalizedFlowState(s, g_tilde, phi, phi_prime, ke)
