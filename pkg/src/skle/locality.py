"""Image hulls under canonical maps and the locality experiment.

Given a flow-generated hull A with canonical map Phi_A and a driving path
(xi, s) producing hulls F_t, the image hulls Phi_A(F_t) are governed by a
generalized Komatu-Loewner equation run at speed |h_t'(xi(t))|^2, where h_t
is the canonical map from D_t minus g_t(A) and satisfies the composition
identity  g~_t o Phi_A = h_t o g_t.

The co-evolution below advances the image driver (xi~, s~), the image
capacity a~, and the speed lambda = h'(xi)^2 one base step at a time.  At
each step h_t is evaluated on a small circle around xi(t) by composing
three flows (backward base flow, hull flow, forward image flow); Cauchy
integrals on the circle give h, h', h'', h''' at the driving point.  The
lower half of the circle comes from Schwarz reflection, since h is real on
dH near xi for t below the hull hitting time.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import driver as driver_mod
from . import flow as flow_mod
from . import geometry, kernel, oracle
from .errors import InsideHull, InsufficientPaths, TooCloseToHull, TooManyHits
from .flow import DrivingPath, StateTable, _config
from .geometry import SlitConfig

RING_POINTS = 16  # total Cauchy nodes; the upper half is computed, the rest reflected
RING_MAX = 0.35
RING_MIN = 0.02


# -- flow-generated hulls ---------------------------------------------------


@dataclass
class FlowHull:
    """An H-hull realised as the terminal hull of a Komatu-Loewner flow.

    The canonical map Phi_A of the complement is the terminal flow map, so
    it is evaluable by integrating the flow; the capacity is 2 T_A exactly.
    """

    driving: DrivingPath
    domain0: SlitConfig
    image_config: SlitConfig
    boundary_samples: np.ndarray  # points just outside A, for hitting detection
    image_boundary: np.ndarray  # their images under Phi_A

    @property
    def capacity(self) -> float:
        return 2.0 * self.driving.horizon

    @property
    def is_empty(self) -> bool:
        return self.driving.n_steps == 0


def empty_hull(domain: SlitConfig) -> FlowHull:
    path = DrivingPath(1e-3, np.zeros(1), domain.vector[None, :], np.zeros(0), np.zeros((0, 3 * domain.n)))
    return FlowHull(path, domain, domain, np.zeros(0, dtype=complex), np.zeros(0, dtype=complex))


def grow_hull(domain: SlitConfig, xi_path, T_A: float, dt: float = 1e-3, n_samples: int = 24) -> FlowHull:
    """Grow a hull from a deterministic driver and sample its boundary.

    The boundary samples are trace points gamma(u) for a ladder of u values
    plus the two base points on dH; they track the hull under later flows
    (hitting detection).  Their Phi_A-limits give the boundary interval of
    the image hull on dH.
    """
    if isinstance(domain, np.ndarray):
        domain = geometry.validate(domain)
    if T_A <= 0:
        return empty_hull(domain)
    d = flow_mod.integrate_slits(xi_path, domain, dt, T_A)
    us = T_A * (np.arange(1, n_samples + 1) / n_samples)
    us = np.array([d.dt * max(1, round(u / d.dt)) for u in us])
    samples = np.array([flow_mod.trace(d, u) for u in np.unique(us)])
    feet = _hull_feet(d, d.xi[0])
    samples = np.concatenate([samples, feet])
    image_cfg = _config(d.svec[-1])
    img_feet = np.array([_terminal_value(d, f) for f in feet])
    return FlowHull(d, domain, image_cfg, samples, img_feet)


def _terminal_value(driving, z):
    traj, tsw = flow_mod.flow_point(complex(z), driving)
    return traj[-1]


def _hull_feet(driving, xi0, eps=2e-3):
    """Two dH points bracketing the hull base (not swallowed by T_A)."""
    feet = []
    for sgn in (-1.0, 1.0):
        x = xi0 + sgn * eps
        for _ in range(60):
            _, tz = flow_mod.flow_point(complex(x, 0.0), driving, collect_traj=False)
            if not np.isfinite(tz):
                break
            x = xi0 + (x - xi0) * 1.35
        feet.append(complex(x, 0.0))
    return np.array(feet, dtype=complex)


def segment_hull(domain: SlitConfig, x0: float, T_A: float, dt: float = 1e-3) -> FlowHull:
    """Hull grown by the constant driver at x0 (a vertical slit for N = 0)."""
    return grow_hull(domain, flow_mod.constant_driver(x0), T_A, dt)


def canonical_map(hull: FlowHull, z):
    """Phi_A at points of D \\ A (raises InsideHull on swallowed points)."""
    if hull.is_empty:
        return np.asarray(z, dtype=complex)
    zs = np.atleast_1d(np.asarray(z, dtype=complex))
    traj, tsw = flow_mod.flow_point(zs, hull.driving)
    if np.any(np.isfinite(tsw)):
        raise InsideHull(f"{int(np.sum(np.isfinite(tsw)))} point(s) swallowed by the hull")
    out = traj[-1]
    return out if np.ndim(z) else complex(out[0])


# -- generic speed-modified flows ------------------------------------------


def _march(vel_fn, dist_fn, z, n_sub_limit=2**16, guard=0.15):
    """March z across one unit interval of local time with adaptive halving.

    vel_fn(frac, z): velocity * step for the full step (i.e. already scaled
    by the step size); dist_fn(frac, z): distance scale that a single
    sub-step must not exceed the guard fraction of.
    """
    frac = 0.0
    nsub = 1
    count = 0
    while frac < 1.0 - 1e-12:
        h = 1.0 / nsub
        if frac + h > 1.0:
            h = 1.0 - frac
        v = vel_fn(frac, z)
        step = np.abs(v) * h
        d = dist_fn(frac, z)
        if np.any(step > guard * d) and nsub < n_sub_limit:
            nsub *= 2
            continue
        mid = frac + h / 2
        k1 = v
        k2 = vel_fn(mid, z + 0.5 * h * k1)
        k3 = vel_fn(mid, z + 0.5 * h * k2)
        k4 = vel_fn(frac + h, z + h * k3)
        z = z + h / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
        frac += h
        count += 1
        if count > 4 * n_sub_limit:
            raise TooCloseToHull("adaptive flow step limit exceeded")
        if count % 8 == 0 and nsub > 1:
            nsub //= 2
    return z


def _flow_forward(table: StateTable, z, k0: int, k1: int, speeds=None):
    """Flow an array forward from step k0 to k1 with optional per-step speeds.

    speeds is an array over the driving grid (lambda values); stage speeds
    are interpolated linearly.
    """
    z = np.asarray(z, dtype=complex)
    d = table.d
    dt = d.dt
    for k in range(k0, k1):
        lam0 = 1.0 if speeds is None else speeds[k]
        lam1 = 1.0 if speeds is None else speeds[k + 1]

        def vel(frac, w):
            lam = lam0 + (lam1 - lam0) * frac
            kk, mid = flow_mod._stage_of(table, k, frac)
            return dt * lam * table.velocity(kk, mid, w)

        def dist(frac, w):
            xi = d.xi[k] + frac * (d.xi[k + 1] - d.xi[k])
            return np.abs(w - xi)

        z = _march(vel, dist, z)
    return z


def _flow_backward(table: StateTable, z, k_from: int):
    """Flow an array backward from step k_from to 0 (inverse of the base flow)."""
    z = np.asarray(z, dtype=complex)
    d = table.d
    dt = d.dt
    for k in range(k_from - 1, -1, -1):

        def vel(frac, w):
            # frac runs 0 -> 1 while time runs t_{k+1} -> t_k
            kk, mid = flow_mod._stage_of(table, k, 1.0 - frac)
            return -dt * table.velocity(kk, mid, w)

        def dist(frac, w):
            xi = d.xi[k + 1] + frac * (d.xi[k] - d.xi[k + 1])
            return np.abs(w - xi)

        z = _march(vel, dist, z)
    return z


# -- the image co-evolution -------------------------------------------------


@dataclass
class ImageRun:
    """Image-hull driver (xi~, s~), speed lambda, and capacity curve a~."""

    base: DrivingPath
    hull: FlowHull
    lam: np.ndarray
    xi_im: np.ndarray
    svec_im: np.ndarray
    atil: np.ndarray
    hp: np.ndarray  # h'(xi(t))
    hpp: np.ndarray  # h''(xi(t))
    hppp: np.ndarray  # h'''(xi(t))
    ring: np.ndarray  # ring radius per step
    hit: bool
    n_done: int  # number of completed steps (states 0..n_done)
    xi_im_mid: np.ndarray = field(repr=False, default=None)
    svec_im_mid: np.ndarray = field(repr=False, default=None)

    def image_path(self) -> DrivingPath:
        """The image driver as a DrivingPath on the unchanged clock."""
        k = self.n_done
        return DrivingPath(
            self.base.dt,
            self.xi_im[: k + 1],
            self.svec_im[: k + 1],
            self.xi_im_mid[:k],
            self.svec_im_mid[:k],
            alive=not self.hit,
            provenance="image",
        )

    def capacity_clock(self, t_cap):
        """Map capacity times (a~/2) to base-clock values of (xi_im, interpolated)."""
        k = self.n_done
        a = self.atil[: k + 1]
        xi = self.xi_im[: k + 1]
        return np.interp(2.0 * np.asarray(t_cap), a, xi)

    @property
    def cap_span(self) -> float:
        return float(self.atil[self.n_done]) / 2.0


def build_image_run(base: DrivingPath, hull: FlowHull, ring_cap: float = RING_MAX) -> ImageRun:
    """Co-evolve the image driver along a base driving path.

    Stops early (hit=True) when the flowed hull boundary comes within the
    ring-minimum distance of the driving point, the proxy for tau_A.
    """
    K = base.n_steps
    dt = base.dt
    n3 = base.svec.shape[1]
    lam = np.zeros(K + 1)
    xi_im = np.zeros(K + 1)
    svec_im = np.zeros((K + 1, n3))
    xi_im_mid = np.zeros(K)
    svec_im_mid = np.zeros((K, n3))
    atil = np.zeros(K + 1)
    hp = np.zeros(K + 1)
    hpp = np.zeros(K + 1)
    hppp = np.zeros(K + 1)
    ring = np.zeros(K + 1)

    base_table = StateTable(base)
    hull_table = StateTable(hull.driving) if not hull.is_empty else None
    hull_speeds = None
    asamp = hull.boundary_samples.astype(complex)

    svec_im[0] = hull.image_config.vector
    hit = False
    n_done = 0
    for k in range(K + 1):
        # ring evaluation of h_{t_k} around xi(t_k)
        cfg_k = _config(base.svec[k])
        d_hull = np.min(np.abs(asamp - base.xi[k])) if asamp.size else np.inf
        d_slit = _slit_distance(cfg_k, base.xi[k])
        rho = min(ring_cap, 0.45 * d_hull, 0.45 * d_slit)
        if rho < RING_MIN:
            hit = True
            break
        ring[k] = rho
        if k > 0:
            # predictor: the final image-flow step needs the not-yet-known
            # state at t_k; extrapolate, ring-evaluate, then correct once
            xi_im[k] = 2 * xi_im[k - 1] - xi_im[k - 2] if k > 1 else xi_im[0]
            lam[k] = max(2 * lam[k - 1] - lam[k - 2] if k > 1 else lam[0], 1e-6)
            xi_im_mid[k - 1] = 0.5 * (xi_im[k - 1] + xi_im[k])
        w_pre, theta = _ring_preimages(base_table, hull, hull_table, k, rho)
        image_view = DrivingPath(dt, xi_im[: k + 1], svec_im[: k + 1], xi_im_mid[:k], svec_im_mid[:k])
        for _ in range(2 if k > 0 else 1):
            c = _ring_coeffs(w_pre, theta, image_view, lam[: k + 1], k, rho)
            xi_im[k] = c[0].real
            hp[k] = c[1].real
            hpp[k] = 2.0 * c[2].real
            hppp[k] = 6.0 * c[3].real
            lam[k] = hp[k] * hp[k]
            if k > 0:
                xi_im_mid[k - 1] = 0.5 * (xi_im[k - 1] + xi_im[k])
        if k > 0:
            atil[k] = atil[k - 1] + dt * (lam[k - 1] + lam[k])  # trapezoid of 2 lambda
        n_done = k
        if k == K:
            break
        # advance the image slits with the current speed (frozen over the step)
        s = svec_im[k]
        if n3:
            lam_k = lam[k]
            xi_k = xi_im[k]
            k1 = lam_k * kernel.solve_cached(_config(s), xi_k).slit_drift()
            k2 = lam_k * kernel.solve_cached(_config(s + 0.5 * dt * k1), xi_k).slit_drift()
            k3 = lam_k * kernel.solve_cached(_config(s + 0.5 * dt * k2), xi_k).slit_drift()
            k4 = lam_k * kernel.solve_cached(_config(s + dt * k3), xi_k).slit_drift()
            svec_im_mid[k] = s + 0.25 * dt * (k1 + k2)
            svec_im[k + 1] = s + dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
        # advance the hull boundary samples under the base flow
        if asamp.size:
            asamp = _flow_forward(base_table, asamp, k, k + 1)
    return ImageRun(
        base, hull, lam, xi_im, svec_im, atil, hp, hpp, hppp, ring, hit, n_done, xi_im_mid, svec_im_mid
    )


def _slit_distance(cfg: SlitConfig, x: float) -> float:
    d = np.inf
    for s in cfg.slits:
        dx = max(s.x_left - x, x - s.x_right, 0.0)
        d = min(d, np.hypot(dx, s.y))
    return d


def _ring_preimages(base_table, hull, hull_table, k, rho, n_ring=RING_POINTS):
    """Backward-base plus hull-flow legs of the ring composition.

    Half-offset angles keep every node strictly off the real axis, where the
    backward flow would pass through the welding singularity.
    """
    xi_k = base_table.d.xi[k]
    theta = 2.0 * np.pi * (np.arange(n_ring) + 0.5) / n_ring
    zs = xi_k + rho * np.exp(1j * theta[: n_ring // 2])
    w = _flow_backward(base_table, zs, k)
    if not hull.is_empty:
        w = _flow_forward(hull_table, w, 0, hull.driving.n_steps)
    return w, theta


def _ring_coeffs(w_pre, theta, image_view, lam, k, rho, n_coeff=4):
    """Image-flow leg and Cauchy coefficients c_m of h(xi + w) = sum c_m w^m.

    The lower semicircle is the Schwarz reflection of the upper (h is real
    on dH near the driving point below the hitting time).
    """
    n_ring = len(theta)
    nup = n_ring // 2
    w = w_pre
    if k > 0:
        w = _flow_forward(StateTable(image_view), w, 0, k, speeds=lam)
    vals = np.empty(n_ring, dtype=complex)
    vals[:nup] = w
    vals[nup:] = np.conj(w[::-1])
    ms = np.arange(n_coeff)
    coeffs = np.exp(-1j * np.outer(ms, theta)) @ vals / n_ring
    return coeffs / rho**ms


# -- derived quantities and checks -----------------------------------------


def h_derivatives(image: ImageRun, t: float):
    """(h', h'', h''') at the driving point at a grid time of the run."""
    k = image.base.step_index(t)
    if k > image.n_done:
        raise TooCloseToHull(f"run stopped at step {image.n_done}")
    return image.hp[k], image.hpp[k], image.hppp[k]


def h_map(image: ImageRun, t: float, z):
    """The canonical map h_t of D_t minus g_t(A), by flow composition."""
    k = image.base.step_index(t)
    if k > image.n_done:
        raise TooCloseToHull(f"run stopped at step {image.n_done}")
    zs = np.atleast_1d(np.asarray(z, dtype=complex))
    base_table = StateTable(image.base)
    w = _flow_backward(base_table, zs, k)
    if not image.hull.is_empty:
        w = _flow_forward(StateTable(image.hull.driving), w, 0, image.hull.driving.n_steps)
    if k > 0:
        w = _flow_forward(StateTable(image.image_path()), w, 0, k, speeds=image.lam[: k + 1])
    return w if np.ndim(z) else complex(w[0])


def capacity_rate_check(image: ImageRun, t: float) -> float:
    """Relative residual of the capacity-rate identity da~/dt = 2 h'(xi)^2."""
    k = image.base.step_index(t)
    if not (1 <= k <= image.n_done - 1):
        raise TooCloseToHull("t must be interior to the completed run")
    dt = image.base.dt
    rate = (image.atil[k + 1] - image.atil[k - 1]) / (2 * dt)
    target = 2.0 * image.lam[k]
    return abs(rate - target) / abs(target)


def composition_check(image: ImageRun, t: float, n_probes: int = 10) -> float:
    """Max deviation of the composition identity g~_t o Phi_A = h_t o g_t.

    Probes are preimages of points inside the Cauchy ring, where h_t has an
    independent series representation from the ring coefficients; the other
    side is the direct three-flow composition.
    """
    k = image.base.step_index(t)
    if k > image.n_done:
        raise TooCloseToHull(f"run stopped at step {image.n_done}")
    rho = image.ring[k]
    base_table = StateTable(image.base)
    hull_table = None if image.hull.is_empty else StateTable(image.hull.driving)
    # a denser ring than the co-evolution needs: the series is compared deep
    # inside the disk, so aliasing must be pushed below the probe tolerance
    w_pre, theta = _ring_preimages(base_table, image.hull, hull_table, k, rho, n_ring=32)
    view = image.image_path()
    coeffs = _ring_coeffs(w_pre, theta, view, image.lam[: k + 1], k, rho, n_coeff=12)
    # independent probes at half the ring radius, away from the real axis
    phis = np.pi / 4 + (np.pi / 2) * (np.arange(n_probes) + 0.3) / n_probes
    probe_w = 0.5 * rho * np.exp(1j * phis)
    zs = image.base.xi[k] + probe_w
    pre = _flow_backward(base_table, zs, k)
    if not image.hull.is_empty:
        pre = _flow_forward(hull_table, pre, 0, image.hull.driving.n_steps)
    if k > 0:
        direct = _flow_forward(StateTable(view), pre, 0, k, speeds=image.lam[: k + 1])
    else:
        direct = pre
    series = np.polynomial.polynomial.polyval(probe_w, coeffs)
    return float(np.max(np.abs(direct - series)))


def image_kl_residual(image: ImageRun) -> float:
    """Relative residual of the image-slit Komatu-Loewner equation.

    Central finite differences of the integrated image slit path against
    -2 pi |h'|^2 Psi~ at the image slit endpoints.
    """
    nd = image.n_done
    if image.base.n_slits == 0 or nd < 4:
        return 0.0
    dt = image.base.dt
    worst = 0.0
    for k in range(2, nd - 1, max(1, nd // 8)):
        fd = (image.svec_im[k + 1] - image.svec_im[k - 1]) / (2 * dt)
        sol = kernel.solve_cached(_config(image.svec_im[k]), image.xi_im[k])
        target = image.lam[k] * sol.slit_drift()
        denom = max(np.max(np.abs(target)), 1e-12)
        worst = max(worst, float(np.max(np.abs(fd - target)) / denom))
    return worst


def drift_check(images, coeff, alpha, dt=None):
    """Standardized residual of the image-driver drift identity.

    Pools (d xi~ - predicted drift dt) over paths and steps; under the
    identity the sum is a centered Gaussian with variance sum(lambda alpha^2
    dt), so the returned z-score should be O(1).
    """
    num = 0.0
    var = 0.0
    n_obs = 0
    for image in images:
        base = image.base
        dts = dt or base.dt
        for k in range(image.n_done):
            s = base.svec[k]
            bbm_base = kernel.b_bmd(_config(s), base.xi[k]) if base.n_slits else 0.0
            b_coeff = coeff.drift(base.xi[k], s)
            bbm_img = (
                kernel.b_bmd(_config(image.svec_im[k]), image.xi_im[k]) if base.n_slits else 0.0
            )
            pred = (
                image.hp[k] * (b_coeff + bbm_base)
                + 0.5 * image.hpp[k] * (alpha**2 - 6.0)
                - image.lam[k] * bbm_img
            )
            num += image.xi_im[k + 1] - image.xi_im[k] - pred * dts
            var += image.lam[k] * alpha**2 * dts
            n_obs += 1
    if n_obs == 0:
        raise InsufficientPaths("no usable steps")
    return num / np.sqrt(var)


# -- the locality experiment ------------------------------------------------


@dataclass
class LocalityReport:
    p_value: float
    p_terminal: float
    p_qv: float
    hit_fraction: float
    n_mapped: int
    n_comparison: int
    cap_horizon: float
    alpha: float

    def to_dict(self):
        return {
            "p_value": self.p_value,
            "p_terminal": self.p_terminal,
            "p_qv": self.p_qv,
            "hit_fraction": self.hit_fraction,
            "n_mapped": self.n_mapped,
            "n_comparison": self.n_comparison,
            "cap_horizon": self.cap_horizon,
            "alpha": self.alpha,
        }


def _mapped_path_summary(base_path, hull, m_grid):
    """Capacity span and the xi-check curve of one mapped path."""
    img = build_image_run(base_path, hull)
    if img.hit:
        return None
    return img


def locality_test(
    domain: SlitConfig,
    hull: FlowHull,
    alpha: float,
    n_paths: int,
    T: float,
    seed: int,
    xi0: float = 0.0,
    dt: float = 1e-3,
    n_grid: int = 40,
    hit_cap: float = 0.2,
    workers: int | None = None,
) -> LocalityReport:
    """Two-functional KS test of the locality property.

    Simulates the SKLE with coefficients (alpha, -b_BMD) in the domain, maps
    the hulls through Phi_A and reparametrizes them by half-plane capacity;
    the terminal driving value and the quadratic variation on the capacity
    clock are then compared (two-sample KS, Bonferroni-combined) against a
    fresh simulation started at (Phi_A(xi0), image slits).  Paths hitting
    the hull are discarded and counted.
    """
    from scipy.stats import ks_2samp

    from . import driver as drv

    coeff = drv.spec_const_alpha(alpha, "neg_bmd")
    spans = []
    mapped = []
    hits = 0
    for i in range(n_paths):
        run = drv.simulate(xi0, domain, coeff, T, dt, seed + i)
        if not run.path.alive:
            hits += 1
            continue
        img = build_image_run(run.path, hull)
        if img.hit:
            hits += 1
            continue
        mapped.append(img)
        spans.append(img.cap_span)
    if hits > hit_cap * n_paths:
        raise TooManyHits(hits / n_paths)
    if len(mapped) < max(8, n_paths // 4):
        raise InsufficientPaths(f"only {len(mapped)} usable mapped paths")
    t_cap = 0.9 * min(spans)
    grid = np.linspace(0.0, t_cap, n_grid + 1)
    term_m = np.empty(len(mapped))
    qv_m = np.empty(len(mapped))
    for i, img in enumerate(mapped):
        curve = img.capacity_clock(grid)
        term_m[i] = curve[-1]
        qv_m[i] = float(np.sum(np.diff(curve) ** 2))

    # fresh comparison ensemble in the image domain
    xi0_im = float(canonical_map(hull, complex(xi0)).real) if not hull.is_empty else xi0
    img_cfg = hull.image_config
    feet = hull.image_boundary
    term_c = []
    qv_c = []
    hits_c = 0
    n_comp = n_paths
    for i in range(n_comp):
        run = drv.simulate(xi0_im, img_cfg, coeff, t_cap, dt, seed + 500_000 + i)
        if not run.path.alive:
            hits_c += 1
            continue
        if feet.size and _touches_boundary(run.path, feet):
            hits_c += 1
            continue
        xi_c = np.interp(grid, run.path.times(), run.path.xi)
        term_c.append(xi_c[-1])
        qv_c.append(float(np.sum(np.diff(xi_c) ** 2)))
    if hits_c > hit_cap * n_comp:
        raise TooManyHits(hits_c / n_comp)
    term_c, qv_c = np.asarray(term_c), np.asarray(qv_c)

    r1 = ks_2samp(term_m, term_c)
    r2 = ks_2samp(qv_m, qv_c)
    p = min(1.0, 2.0 * min(r1.pvalue, r2.pvalue))
    return LocalityReport(
        float(p),
        float(r1.pvalue),
        float(r2.pvalue),
        hits / n_paths,
        len(mapped),
        len(term_c),
        float(t_cap),
        float(alpha),
    )


def _touches_boundary(path: DrivingPath, feet, tol=5e-3) -> bool:
    """True when the flow of a boundary-interval endpoint meets the driver."""
    _, tsw = flow_mod.flow_point(feet, path, collect_traj=False)
    return bool(np.any(np.isfinite(tsw)))


# -- capacity comparison (appendix theorem) ---------------------------------


def capacity_comparison(domain: SlitConfig, t_ladder, x0: float = 0.0, h=None):
    """Ratios |a_t - a_t^0| / t for shrinking segment hulls at x0.

    a_t is the half-plane capacity of the segment hull of nominal capacity
    2t in the slit domain (shorted grid); a_t^0 the same in the bare half
    plane.  The ratio must decrease as t -> 0.
    """
    h = h or oracle.DEFAULT_H
    cfg0 = geometry.SlitConfig(())
    out = []
    for t in t_ladder:
        ell = 2.0 * np.sqrt(t)
        a_d = oracle.segment_hull_capacity(domain, x0, ell, h=h)
        a_0 = oracle.segment_hull_capacity(cfg0, x0, ell, h=h)
        out.append(abs(a_d - a_0) / t)
    return np.array(out)
