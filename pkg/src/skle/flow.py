"""Komatu-Loewner flow: slit motion, point maps, hulls, capacities, traces.

Driven by a pair (xi(t), s(t)) the flow integrates

    dg_t(z)/dt = -2 pi Psi_{s(t)}(g_t(z), xi(t)),   g_0(z) = z,

with classical RK4 on a fixed grid plus recursive step halving near
swallowing events.  The slit motion itself satisfies the analogous equations
for the slit endpoints and is integrated first; kernel solves are memoized
on the quantized (configuration, pole) pair so the per-point flows reuse
them.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import geometry, kernel
from .errors import (
    FitUnstable,
    KernelFailure,
    LeftStateSpace,
    LiftTooSmall,
    StepRejected,
)
from .geometry import SlitConfig

DELTA_SWALLOW = 1e-4
STOP_MARGIN = 1e-6  # lifetime proxy: distance to the state-space boundary


def _config(vec) -> SlitConfig:
    n = len(vec) // 3
    return SlitConfig(tuple(geometry.Slit(vec[j], vec[n + j], vec[2 * n + j]) for j in range(n)))


@dataclass
class DrivingPath:
    """A discretized driving pair t -> (xi(t), s(t)) on a uniform grid.

    ``svec_mid`` holds third-order-accurate midpoint slit states so point
    flows can run full RK4 steps without re-integrating the slits.  The
    lifetime flag records an early stop at the state-space margin.
    """

    dt: float
    xi: np.ndarray  # (K+1,)
    svec: np.ndarray  # (K+1, 3N)
    xi_mid: np.ndarray  # (K,)
    svec_mid: np.ndarray  # (K, 3N)
    alive: bool = True
    provenance: str = "deterministic"
    seed: int | None = None

    @property
    def n_steps(self) -> int:
        return len(self.xi) - 1

    @property
    def horizon(self) -> float:
        return self.n_steps * self.dt

    @property
    def n_slits(self) -> int:
        return self.svec.shape[1] // 3

    def times(self) -> np.ndarray:
        return self.dt * np.arange(len(self.xi))

    def config(self, k: int) -> SlitConfig:
        return _config(self.svec[k])

    def xi_at(self, t: float) -> float:
        k = min(int(round(t / self.dt)), self.n_steps)
        return float(self.xi[k])

    def step_index(self, t: float) -> int:
        k = int(round(t / self.dt))
        if not (0 <= k <= self.n_steps) or abs(k * self.dt - t) > 1e-9 * max(1.0, abs(t)):
            raise ValueError(f"t={t} is not on the driver grid (dt={self.dt})")
        return k


def constant_driver(xi0: float):
    return lambda t: xi0 + 0.0 * np.asarray(t)


def linear_driver(xi0: float, slope: float):
    return lambda t: xi0 + slope * np.asarray(t)


def integrate_slits(xi_path, s0: SlitConfig, dt: float, T: float, stop_margin: float = STOP_MARGIN) -> DrivingPath:
    """Integrate the slit Komatu-Loewner equations under a deterministic driver.

    ``xi_path`` is a callable of t (vectorized or scalar).  RK4 with a fresh
    (memoized) kernel solve per stage; stops early with the lifetime flag
    when the configuration reaches the stopping margin.
    """
    if isinstance(s0, np.ndarray):
        s0 = geometry.validate(s0)
    n_steps = int(round(T / dt))
    svec = np.empty((n_steps + 1, 3 * s0.n))
    svec_mid = np.empty((n_steps, 3 * s0.n))
    svec[0] = s0.vector
    ts = dt * np.arange(n_steps + 1)
    xi = np.asarray(xi_path(ts), dtype=float)
    xi_m = np.asarray(xi_path(ts[:-1] + dt / 2), dtype=float)
    alive = True
    k = 0
    for k in range(n_steps):
        s = svec[k]
        cfg = _config(s)
        if geometry.margin_of(cfg) <= stop_margin:
            alive = False
            break
        try:
            k1 = kernel.solve_cached(cfg, xi[k]).slit_drift()
            k2 = kernel.solve_cached(_config(s + 0.5 * dt * k1), xi_m[k]).slit_drift()
            k3 = kernel.solve_cached(_config(s + 0.5 * dt * k2), xi_m[k]).slit_drift()
            k4 = kernel.solve_cached(_config(s + dt * k3), xi[k + 1]).slit_drift()
        except Exception as exc:  # noqa: BLE001 - any solver failure ends the run
            raise KernelFailure(f"kernel solve failed at t={k * dt:.6g}: {exc}") from exc
        svec_mid[k] = s + 0.25 * dt * (k1 + k2)
        svec[k + 1] = s + dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
        if not np.all(np.isfinite(svec[k + 1])):
            raise LeftStateSpace(k * dt)
    else:
        k = n_steps
    if not alive:
        svec, svec_mid, xi, xi_m = svec[: k + 1], svec_mid[:k], xi[: k + 1], xi_m[:k]
    return DrivingPath(dt, xi, svec, xi_m, svec_mid, alive=alive)


class StateTable:
    """Kernel solutions along a driving path, resolved lazily per stage."""

    def __init__(self, driving: DrivingPath):
        self.d = driving

    def sol(self, k: int, mid: bool = False):
        d = self.d
        if mid:
            return kernel.solve_cached(_config(d.svec_mid[k]), d.xi_mid[k])
        return kernel.solve_cached(d.config(k), d.xi[k])

    def velocity(self, k, mid, z, speed=1.0):
        """-2 pi * speed * Psi at the stage state, vectorized over z."""
        return -2.0 * np.pi * speed * self.sol(k, mid)(z)

    def regular_velocity(self, k, mid, z):
        """-2 pi * (Psi + 1/(pi (z - xi))): the pole-free part of the velocity."""
        return -2.0 * np.pi * self.sol(k, mid).eval_regular(z)


def _rk4_step(table, k, z, dt):
    """One RK4 step of the point flow from grid time k; z is a complex array."""
    k1 = table.velocity(k, False, z)
    k2 = table.velocity(k, True, z + 0.5 * dt * k1)
    k3 = table.velocity(k, True, z + 0.5 * dt * k2)
    k4 = table.velocity(k + 1, False, z + dt * k3)
    return z + dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)


@dataclass
class FlowResult:
    """Trajectories g_t(z) for tracked points with swallowing times."""

    driving: DrivingPath
    points: np.ndarray  # (P,) initial positions
    traj: np.ndarray  # (K+1, P) complex; nan after swallowing
    t_swallow: np.ndarray  # (P,) inf if not swallowed within the horizon
    capacity: np.ndarray | None = None  # (K+1,) a_t samples when requested


def flow_point(z, driving: DrivingPath, collect_traj=True, continue_past_swallow=False):
    """Flow one point (or an array) to the horizon; returns (traj, t_z).

    Swallowing is declared when Im g and |g - xi(t)| both drop below the
    swallow tolerance; the time is then refined by recursive halving to at
    least dt/16.  Entries of the trajectory after the swallow time are NaN.

    With ``continue_past_swallow`` the trajectory is continued through the
    pole passage in the chart w = (g - xi)^2, in which the equation is
    regular (dw/dt = 4 - 4 pi q reg(q) - 2 q xi'), exiting on the right side
    of the driving point; t_z is still reported.  Meaningful only for
    drivers with a time derivative.
    """
    table = StateTable(driving)
    zs = np.atleast_1d(np.asarray(z, dtype=complex))
    res = _flow_many(table, zs, collect_traj, continue_past_swallow)
    if np.isscalar(z) or np.ndim(z) == 0:
        traj = res[0][:, 0] if collect_traj else None
        return traj, float(res[1][0])
    return res


def _near_radius(dt):
    # distance the pole can close within ~5 steps: |g - xi|^2 shrinks at rate ~ 4
    return np.sqrt(20.0 * dt)


def _flow_many(table, zs, collect_traj, continue_past_swallow=False):
    d = table.d
    dt = d.dt
    K = d.n_steps
    P = zs.size
    traj = np.full((K + 1, P), np.nan + 0j) if collect_traj else None
    if collect_traj:
        traj[0] = zs
    cur = zs.copy()
    t_sw = np.full(P, np.inf)
    alive = np.ones(P, dtype=bool)
    r_near = _near_radius(dt)
    for k in range(K):
        xi_now = d.xi[k]
        act = np.nonzero(alive)[0]
        if act.size == 0:
            break
        z = cur[act]
        near = np.abs(z - xi_now) < r_near
        far_idx = act[~near]
        if far_idx.size:
            cur[far_idx] = _rk4_step(table, k, cur[far_idx], dt)
        for p in act[near]:
            znew, tz = _flow_careful(table, k, cur[p], continue_past_swallow)
            if tz is not None and t_sw[p] == np.inf:
                t_sw[p] = tz
            if znew is None:
                alive[p] = False
                cur[p] = np.nan
            else:
                cur[p] = znew
        # post-step swallow check for the vectorized branch
        if far_idx.size:
            znew = cur[far_idx]
            hit = (znew.imag < DELTA_SWALLOW) & (np.abs(znew - d.xi[k + 1]) < DELTA_SWALLOW)
            bad = ~np.isfinite(znew)
            for p, h, b in zip(far_idx, hit, bad):
                if h or b:
                    t_sw[p] = (k + 1) * dt
                    alive[p] = False
                    cur[p] = np.nan
        if collect_traj:
            traj[k + 1, alive] = cur[alive]
    return traj, t_sw


def _flow_careful(table, k, z, continue_past_swallow=False, max_depth=16):
    """Sub-stepped RK4 across one grid step for a point near the pole.

    Returns (z_new, t_z_or_None); z_new is None when the point is swallowed
    and not continued.  Swallowing times are refined to at least dt/16.
    """
    d = table.d
    dt = d.dt
    t0 = k * dt

    def step(z, a, b):
        """RK4 over the fraction [a, b] of the step using frozen stage kernels."""
        h = (b - a) * dt
        mid = a + (b - a) / 2
        k1 = _stage_vel(table, k, a, z)
        k2 = _stage_vel(table, k, mid, z + 0.5 * h * k1)
        k3 = _stage_vel(table, k, mid, z + 0.5 * h * k2)
        k4 = _stage_vel(table, k, b, z + h * k3)
        return z + h / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)

    def xi_frac(a):
        return d.xi[k] + a * (d.xi[k + 1] - d.xi[k])

    def recurse(z, a, b, depth):
        dist = abs(z - xi_frac(a))
        if continue_past_swallow and dist < _near_radius((b - a) * dt):
            return _passage(table, k, z, a, b)
        vel = abs(complex(_stage_vel(table, k, a, np.array(z + 0j))))
        h = (b - a) * dt
        if vel * h > 0.4 * max(dist, 1e-300):
            if depth >= max_depth:
                # halving exhausts only in the singular approach to the pole
                if dist < 50 * DELTA_SWALLOW:
                    return None, t0 + a * dt
                raise StepRejected(
                    f"step halving exhausted at t={t0 + a * dt:.6g}, |g-xi|={dist:.3e}"
                )
            mid = a + (b - a) / 2
            z1, tz = recurse(z, a, mid, depth + 1)
            if z1 is None:
                return None, tz
            z2, tz2 = recurse(z1, mid, b, depth + 1)
            return z2, tz if tz is not None else tz2
        znew = complex(step(np.array(z), a, b))
        if (znew.imag < DELTA_SWALLOW and abs(znew - xi_frac(b)) < DELTA_SWALLOW) or not np.isfinite(znew):
            if depth < max_depth and (b - a) * dt > dt / 16:
                mid = a + (b - a) / 2
                z1, tz = recurse(z, a, mid, depth + 1)
                if z1 is None:
                    return None, tz
                z2, tz2 = recurse(z1, mid, b, depth + 1)
                return z2, tz if tz is not None else tz2
            return None, t0 + b * dt
        return znew, None

    return recurse(complex(z), 0.0, 1.0, 0)


def _passage(table, k, z, a, b, nsub=64):
    """Integrate through the pole in the chart w = (g - xi(t))^2.

    With q = g - xi the equation dw/dt = 4 - 4 pi q reg(xi + q) - 2 q xi'
    is regular through q = 0 (reg is the pole-free part of the kernel).
    The square root is tracked by continuity and exits on the right side;
    the zero crossing of w is reported as the swallowing time.
    """
    d = table.d
    dt = d.dt
    dxi = d.xi[k + 1] - d.xi[k]
    xidot = dxi / dt

    def qfun(w, qref):
        r = np.sqrt(complex(w))
        if abs(qref) < 1e-12:
            return r if r.real >= 0 else -r
        return r if (r * np.conj(qref)).real >= 0 else -r

    qref = z - (d.xi[k] + a * dxi)
    w = qref * qref
    h = (b - a) * dt / nsub
    t_z = None
    for i in range(nsub):
        frac = a + (b - a) * (i + 0.5) / nsub
        kk, mid = _stage_of(table, k, frac)

        def rhs(w):
            q = qfun(w, qref)
            zq = d.xi[k] + frac * dxi + q
            reg = complex(table.regular_velocity(kk, mid, np.array(zq)))
            return 4.0 + 2.0 * q * (reg - xidot)

        k1 = rhs(w)
        k2 = rhs(w + 0.5 * h * k1)
        k3 = rhs(w + 0.5 * h * k2)
        k4 = rhs(w + h * k3)
        w_new = w + h / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
        if t_z is None and w.real < 0.0 <= w_new.real:
            t0 = (k + a) * dt + i * h
            t_z = t0 + h * (-w.real) / max(w_new.real - w.real, 1e-300)
        qref = qfun(w_new, qref)
        w = w_new
    return complex(d.xi[k] + b * dxi + qref), t_z


def _stage_of(table, k, frac):
    if frac < 0.25:
        return k, False
    if frac < 0.75:
        return k, True
    if k + 1 <= table.d.n_steps:
        return k + 1, False
    return k, True


def _passage_reverse(table, j, z, nsub=64):
    """Reverse-time step t_{j+1} -> t_j near the pole, in the w = (g-xi)^2 chart."""
    d = table.d
    dt = d.dt
    dxi = d.xi[j + 1] - d.xi[j]
    xidot = dxi / dt

    def qfun(w, qref):
        r = np.sqrt(complex(w))
        if abs(qref) < 1e-12:
            return r if r.imag >= 0 else -r
        return r if (r * np.conj(qref)).real >= 0 else -r

    qref = z - d.xi[j + 1]
    w = qref * qref
    h = -dt / nsub
    for i in range(nsub):
        frac = 1.0 + (i + 0.5) * h / dt
        kk, mid = _stage_of(table, j, frac)

        def rhs(w):
            q = qfun(w, qref)
            zq = d.xi[j] + frac * dxi + q
            reg = complex(table.regular_velocity(kk, mid, np.array(zq)))
            return 4.0 + 2.0 * q * (reg - xidot)

        k1 = rhs(w)
        k2 = rhs(w + 0.5 * h * k1)
        k3 = rhs(w + 0.5 * h * k2)
        k4 = rhs(w + h * k3)
        w = w + h / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
        qref = qfun(w, qref)
    return complex(d.xi[j] + qref)


def _stage_vel(table, k, frac, z):
    """Velocity at fraction ``frac`` of step k, snapping to the three stage states."""
    if frac < 0.25:
        return table.velocity(k, False, z)
    if frac < 0.75:
        return table.velocity(k, True, z)
    if k + 1 <= table.d.n_steps:
        return table.velocity(k + 1, False, z)
    return table.velocity(k, True, z)


def flow_result(driving: DrivingPath, points, capacity_times=False) -> FlowResult:
    points = np.asarray(points, dtype=complex)
    traj, tsw = flow_point(points, driving)
    caps = None
    if capacity_times:
        ts = driving.times()
        caps = np.array([capacity(driving, t) for t in ts])
    return FlowResult(driving, points, traj, tsw, caps)


def capacity(driving: DrivingPath, t: float, heights=(20.0, 40.0, 80.0)) -> float:
    """Half-plane capacity a_t from the hydrodynamic tail.

    Flows z = iy for the probe heights and fits Re[z (g(z) - z)] = a - c/y^2,
    per the o(1/|z|) normalization; the fit must be internally consistent.
    The capacity law a_t = 2t is validated against this in the test suite.
    """
    k = driving.step_index(t)
    sub = DrivingPath(
        driving.dt,
        driving.xi[: k + 1],
        driving.svec[: k + 1],
        driving.xi_mid[:k],
        driving.svec_mid[:k],
        alive=True,
    )
    zs = 1j * np.asarray(heights, dtype=float)
    traj, tsw = flow_point(zs, sub, collect_traj=True)
    if np.any(np.isfinite(tsw) & (tsw <= t)):
        raise FitUnstable("a capacity probe was swallowed; raise the probe heights")
    g = traj[-1]
    vals = (zs * (g - zs)).real
    ys = np.asarray(heights)
    m = np.vstack([np.ones_like(ys), 1.0 / ys**2]).T
    coef, res, *_ = np.linalg.lstsq(m, vals, rcond=None)
    scatter = float(np.sqrt(res[0])) if res.size else 0.0
    if scatter > 0.05 * max(abs(coef[0]), driving.dt):
        raise FitUnstable(f"capacity tail fit scatter {scatter:.3e}")
    return float(coef[0])


def estimate_m1(driving: DrivingPath, n_sample=6) -> float:
    """Estimate of the kernel bound M1 = sup 2 pi |z - xi| |Psi(z, xi)| on the run.

    Samples rings around the driving point, the slit endpoints, and a far
    ring, on a thinned subset of steps.
    """
    d = driving
    m1 = 2.0  # the pole part alone contributes exactly 2 in the limit z -> xi
    step = max(1, d.n_steps // 12)
    for k in range(0, d.n_steps + 1, step):
        sol = kernel.solve_cached(d.config(k), d.xi[k])
        pts = [d.xi[k] + r * np.exp(1j * th) for r in (0.1, 0.3, 1.0, 3.0, 8.0) for th in np.linspace(0.15, np.pi - 0.15, n_sample)]
        cfg = d.config(k)
        for s in cfg.slits:
            for off in (0.05j, -0.05j, 0.05, -0.05):
                pts.append(s.left + off)
                pts.append(s.right + off)
        pts = np.array([p for p in pts if _config(d.svec[k]).contains(p) and abs(p - d.xi[k]) > 1e-6])
        if pts.size:
            vals = 2 * np.pi * np.abs(pts - d.xi[k]) * np.abs(sol(pts))
            m1 = max(m1, float(np.max(vals)))
    return m1


def hull_radius(driving: DrivingPath, t: float, m1: float | None = None) -> float:
    """R_t = max(sup_{s<=t} |xi(s) - xi(0)|, sqrt(M1 t / 2)); hulls live in B(xi(0), 4 R_t)."""
    k = driving.step_index(t)
    m1 = m1 if m1 is not None else estimate_m1(driving)
    sup_xi = float(np.max(np.abs(driving.xi[: k + 1] - driving.xi[0])))
    return max(sup_xi, np.sqrt(m1 * t / 2.0))


@dataclass
class HullSample:
    """Probe-grid classification of the hull F_t = {z : t_z <= t}."""

    t: float
    probes: np.ndarray  # all probes
    t_swallow: np.ndarray  # per probe
    radius: float  # the 4 R_t containment radius around xi(0)
    center: float  # xi(0)

    @property
    def swallowed(self) -> np.ndarray:
        return self.probes[self.t_swallow <= self.t]

    def boundary_polyline(self):
        """Marching-squares boundary of the swallow-time field (cosmetic)."""
        pts = self.probes
        xs = np.unique(pts.real)
        ys = np.unique(pts.imag)
        fld = (self.t_swallow <= self.t).reshape(ys.size, xs.size).astype(float)
        try:
            from skimage.measure import find_contours

            segs = find_contours(fld, 0.5)
            out = []
            for seg in segs:
                out.append((xs[0] + np.diff(xs).mean() * seg[:, 1]) + 1j * (ys[0] + np.diff(ys).mean() * seg[:, 0]))
            return out
        except Exception:
            mask = fld > 0.5
            edge = mask & ~(
                np.roll(mask, 1, 0) & np.roll(mask, -1, 0) & np.roll(mask, 1, 1) & np.roll(mask, -1, 1)
            )
            return [pts.reshape(mask.shape)[edge]]


def hull(driving: DrivingPath, t: float, probe_resolution: float = 0.05) -> HullSample:
    """Classify a probe grid over B(xi(0), 4 R_t) by swallowing time."""
    driving.step_index(t)
    r = 4.0 * hull_radius(driving, t)
    xi0 = driving.xi[0]
    xs = np.arange(xi0 - r, xi0 + r + probe_resolution / 2, probe_resolution)
    ys = np.arange(probe_resolution, r + probe_resolution / 2, probe_resolution)
    zz = (xs[None, :] + 1j * ys[:, None]).ravel()
    cfg0 = driving.config(0)
    zz = np.array([z for z in zz if cfg0.contains(z)])
    _, tsw = flow_point(zz, driving, collect_traj=False)
    return HullSample(t, zz, tsw, r, float(xi0))


def trace(driving: DrivingPath, t: float, delta_lift: float = 1e-3) -> complex:
    """Approximate curve tip g_t^{-1}(xi(t)) by reverse-time flow from a lifted point."""
    if delta_lift <= 1e-10:
        raise LiftTooSmall(f"lift {delta_lift} below resolvable scale")
    k = driving.step_index(t)
    table = StateTable(driving)
    z = complex(driving.xi[k], delta_lift)
    dt = driving.dt
    r_near = _near_radius(dt)
    for j in range(k - 1, -1, -1):
        if abs(z - driving.xi[j + 1]) < r_near:
            z = _passage_reverse(table, j, z)
            continue
        # reverse-time RK4 through step j: z(t-dt) from z(t)
        k1 = table.velocity(j + 1, False, z)
        k2 = table.velocity(j, True, z - 0.5 * dt * k1)
        k3 = table.velocity(j, True, z - 0.5 * dt * k2)
        k4 = table.velocity(j, False, z - dt * k3)
        z = complex(z - dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4))
    return z
