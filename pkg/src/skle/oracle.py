"""Brute-force oracles: shorted-grid Laplace solver and walk-on-spheres.

The grid solver realises discrete BMD harmonicity directly: the five-point
Laplacian is assembled on a rectangle with Dirichlet data on the frame, and
all nodes of a slit are identified into a single unknown ("shorting"), which
enforces constancy on the slit and Kirchhoff flux balance at the merged
node.  Everything here is deliberately slow and simple; it is the provenance
source for the derived reference values used to validate the kernel and
flow modules.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import HullTooLarge, NonConvergent
from .geometry import SlitConfig
from .kernel import pole_part

DEFAULT_RECT = (-8.0, 8.0, 8.0)
DEFAULT_H = 1.0 / 64.0


@dataclass
class GridField:
    """A solved field on the rectangle [x0, x1] x (0, y1] with spacing h."""

    rect: tuple
    h: float
    values: np.ndarray  # (ny+1, nx+1), row j is height j*h
    snap_error: float = 0.0

    def interp(self, z):
        """Bilinear interpolation at complex points."""
        z = np.asarray(z, dtype=complex)
        x0, x1, y1 = self.rect
        fx = (z.real - x0) / self.h
        fy = z.imag / self.h
        i = np.clip(fx.astype(int), 0, self.values.shape[1] - 2)
        j = np.clip(fy.astype(int), 0, self.values.shape[0] - 2)
        tx, ty = fx - i, fy - j
        v = self.values
        return (
            v[j, i] * (1 - tx) * (1 - ty)
            + v[j, i + 1] * tx * (1 - ty)
            + v[j + 1, i] * (1 - tx) * ty
            + v[j + 1, i + 1] * tx * ty
        )


def _snap_slits(domain: SlitConfig, rect, h):
    """Snap slit segments to grid lines; returns (j, i_l, i_r) per slit and the snap error."""
    x0, x1, y1 = rect
    rows = []
    err = 0.0
    for s in domain.slits:
        j = round(s.y / h)
        il = round((s.x_left - x0) / h)
        ir = round((s.x_right - x0) / h)
        if j <= 0 or j * h >= y1 or il <= 0 or ir >= round((x1 - x0) / h):
            raise HullTooLarge(f"slit {s} does not fit strictly inside {rect}")
        err = max(err, abs(j * h - s.y), abs(x0 + il * h - s.x_left), abs(x0 + ir * h - s.x_right))
        rows.append((j, il, ir))
    return rows, err


def _solve_laplace(domain, boundary_data, rect, h, hull=None, shorted=True, slit_data=None):
    """Assemble and solve the five-point problem.

    boundary_data(x, y): Dirichlet values on the frame (y=0, y=y1, sides).
    hull: optional (nodes, values) with nodes an (M, 2) int array of (i, j)
    grid indices forced to Dirichlet.
    shorted=True merges each slit into one unknown (BMD); shorted=False with
    slit_data treats slits as Dirichlet (plain absorbing BM).
    """
    x0, x1, y1 = rect
    nx = round((x1 - x0) / h)
    ny = round(y1 / h)
    slit_rows, snap_err = _snap_slits(domain, rect, h)

    xs = x0 + h * np.arange(nx + 1)
    ys = h * np.arange(ny + 1)

    dir_mask = np.zeros((ny + 1, nx + 1), dtype=bool)
    dir_mask[0, :] = dir_mask[-1, :] = True
    dir_mask[:, 0] = dir_mask[:, -1] = True
    values = np.zeros((ny + 1, nx + 1))
    xg, yg = np.meshgrid(xs, ys)
    frame = dir_mask.copy()
    values[frame] = boundary_data(xg[frame], yg[frame])

    if hull is not None:
        hn, hv = hull
        values[hn[:, 1], hn[:, 0]] = hv
        dir_mask[hn[:, 1], hn[:, 0]] = True

    group = -np.ones((ny + 1, nx + 1), dtype=np.int64)
    for k, (j, il, ir) in enumerate(slit_rows):
        if shorted:
            group[j, il : ir + 1] = k
        else:
            dir_mask[j, il : ir + 1] = True
            values[j, il : ir + 1] = 0.0 if slit_data is None else slit_data[k]
    group[dir_mask] = -1  # a hull node overrides slit membership

    free = ~dir_mask
    free[0, :] = free[-1, :] = False
    free[:, 0] = free[:, -1] = False

    ids = -np.ones((ny + 1, nx + 1), dtype=np.int64)
    plain = free & (group < 0)
    n_plain = int(plain.sum())
    ids[plain] = np.arange(n_plain)
    n_groups = len(slit_rows) if shorted else 0
    for k in range(n_groups):
        ids[free & (group == k)] = n_plain + k
    n_unk = n_plain + n_groups

    jj, ii = np.nonzero(free)
    rows_all, cols_all, vals_all = [ids[jj, ii]], [ids[jj, ii]], [np.full(jj.size, 4.0)]
    rhs = np.zeros(n_unk)
    for dj, di in ((0, 1), (0, -1), (1, 0), (-1, 0)):
        qj, qi = jj + dj, ii + di
        nb_free = free[qj, qi]
        rows_all.append(ids[jj, ii][nb_free])
        cols_all.append(ids[qj, qi][nb_free])
        vals_all.append(np.full(int(nb_free.sum()), -1.0))
        nb_dir = ~nb_free
        np.add.at(rhs, ids[jj, ii][nb_dir], values[qj[nb_dir], qi[nb_dir]])

    a = sp.coo_matrix(
        (np.concatenate(vals_all), (np.concatenate(rows_all), np.concatenate(cols_all))),
        shape=(n_unk, n_unk),
    ).tocsr()

    u = _sparse_solve(a, rhs)

    values[free] = u[ids[free]]
    res = a @ u - rhs
    if np.max(np.abs(res)) > 1e-9 * max(1.0, np.max(np.abs(rhs))):
        raise NonConvergent(f"residual {np.max(np.abs(res)):.3e}")
    return GridField((x0, x1, y1), h, values, snap_err)


def _sparse_solve(a, rhs):
    n = a.shape[0]
    if n > 40_000:
        try:
            import pyamg

            ml = pyamg.ruge_stuben_solver(a)
            u = ml.solve(rhs, tol=1e-12, accel="cg", maxiter=400)
            if np.max(np.abs(a @ u - rhs)) <= 1e-9 * max(1.0, np.max(np.abs(rhs))):
                return u
        except Exception:
            pass
    return spla.spsolve(a.tocsc(), rhs)


def grid_bmd_harmonic(
    domain: SlitConfig,
    boundary_data,
    rect=DEFAULT_RECT,
    h=DEFAULT_H,
    hull_nodes=None,
    hull_values=0.0,
) -> GridField:
    """Discrete BMD-harmonic extension of the boundary data (slits shorted)."""
    hull = None
    if hull_nodes is not None:
        hull_nodes = np.asarray(hull_nodes, dtype=int)
        hv = np.broadcast_to(np.asarray(hull_values, dtype=float), (hull_nodes.shape[0],))
        hull = (hull_nodes, hv)
    return _solve_laplace(domain, boundary_data, rect, h, hull=hull, shorted=True)


def segment_hull_nodes(rect, h, x, y_top, y_bottom=0.0):
    """Grid nodes of a vertical segment at abscissa x, heights (y_bottom, y_top]."""
    return column_nodes(rect, h, x, round(y_top / h), j_bottom=max(1, round(y_bottom / h)))


def column_nodes(rect, h, x, j_top, j_bottom=1):
    """Grid nodes of the column at abscissa x with explicit top index."""
    x0, _, _ = rect
    i = round((x - x0) / h)
    return np.array([(i, j) for j in range(j_bottom, j_top + 1)], dtype=int)


def _dipole_consistent(domain, rect, h, hull=None, shorted=True, slit_data=None):
    """Solve with self-consistent dipole frame data c * Im z / |z|^2.

    By linearity the field is F0 + c F1 (F0: interior data with a zero
    frame; F1: unit-dipole frame alone), and c must equal the dipole
    coefficient of the combined field, fixing c = fit(F0) / (1 - fit(F1)).
    """

    def zero(x, y):
        return np.zeros_like(np.asarray(x, dtype=float))

    def unit_dipole(x, y):
        r2 = np.maximum(x**2 + y**2, 1e-12)
        return y / r2

    f0 = _solve_laplace(domain, zero, rect, h, hull=hull, shorted=shorted, slit_data=slit_data)
    hull0 = None if hull is None else (hull[0], np.zeros(hull[0].shape[0]))
    data0 = None if slit_data is None else [0.0] * len(slit_data)
    f1 = _solve_laplace(domain, unit_dipole, rect, h, hull=hull0, shorted=shorted, slit_data=data0)
    c0, c1 = _fit_dipole(f0, rect), _fit_dipole(f1, rect)
    c = c0 / (1.0 - c1)
    out = GridField(f0.rect, f0.h, f0.values + c * f1.values, f0.snap_error)
    return out


def harmonic_measure_phi(domain: SlitConfig, i: int, rect=DEFAULT_RECT, h=DEFAULT_H) -> GridField:
    """ABM harmonic measure of slit C_i (all slits absorbing, no shorting).

    The frame carries the leading dipole asymptotic c * Im z / |z|^2 with c
    determined self-consistently, cutting the truncation bias.
    """
    if not (1 <= i <= domain.n):
        raise NonConvergent(f"slit index {i} out of range 1..{domain.n}")
    data = [1.0 if k == i - 1 else 0.0 for k in range(domain.n)]
    return _dipole_consistent(domain, rect, h, shorted=False, slit_data=data)


def _fit_dipole(field, rect, radius=None):
    """Fit c in u ~ c Im z / |z|^2 on an interior ring."""
    x0, x1, y1 = rect
    radius = radius or 0.7 * min(x1, -x0, y1)
    th = np.linspace(0.15, np.pi - 0.15, 60)
    z = radius * np.exp(1j * th)
    u = field.interp(z)
    w = z.imag / radius**2
    return float(np.dot(u, w) / np.dot(w, w))


def grid_bmd_kernel(domain: SlitConfig, xi: float, rect=DEFAULT_RECT, h=DEFAULT_H, sigma=None) -> GridField:
    """Grid approximation of the BMD Poisson kernel K*(., xi).

    The pole is represented by Dirac-smoothed data on dH (a Gaussian bump of
    mass one, width a few cells); the frame carries the half-plane kernel as
    the far-field asymptotic, since y K*(iy, xi) and y K_H(iy, xi) share the
    limit 1/pi.
    """
    sigma = sigma or 4.0 * h

    def data(x, y):
        out = np.where(
            y <= 0.5 * h,
            np.exp(-0.5 * ((x - xi) / sigma) ** 2) / (sigma * np.sqrt(2 * np.pi)),
            pole_part(x + 1j * np.maximum(y, 0.5 * h), xi).imag,
        )
        return out

    return _solve_laplace(domain, data, rect, h, shorted=True)


def im_g_via_hitting(domain: SlitConfig, hull_nodes, z, r_ladder=(4.0, 6.0, 8.0), h=DEFAULT_H, half_width=8.0):
    """Im g_t(z) via the hitting representation r * P*_z(hit height r before the hull).

    One shorted solve per rung (data 1 on the top line, y/r on the sides,
    0 on dH and the hull), then a Richardson step in 1/r.
    """
    z = np.asarray(z, dtype=complex)
    est = []
    for r in r_ladder:
        rect = (-half_width, half_width, float(r))

        def data(x, y, r=r):
            return np.where(y <= 0.5 * h, 0.0, np.where(y >= r - 0.5 * h, 1.0, y / r))

        hn = np.asarray(hull_nodes, dtype=int)
        field = _solve_laplace(domain, data, rect, h, hull=(hn, np.zeros(hn.shape[0])), shorted=True)
        est.append(r * field.interp(z))
    est = np.array(est)
    rs = np.array(r_ladder, dtype=float)
    # Richardson step: eliminate the 1/r (and 1/r^2, given three rungs) tail
    deg = min(len(rs) - 1, 2)
    m = np.vstack([rs**-p for p in range(deg + 1)]).T
    coef, *_ = np.linalg.lstsq(m, est, rcond=None)
    return coef[0]


def hull_capacity_field(domain: SlitConfig, hull_nodes, rect=DEFAULT_RECT, h=DEFAULT_H) -> GridField:
    """BMD-harmonic field with data Im z on the hull and 0 on dH.

    Its ring integral gives the half-plane capacity; the frame carries the
    self-consistent dipole asymptotic (the dipole coefficient of this field
    is the capacity itself).
    """
    hn = np.asarray(hull_nodes, dtype=int)
    hv = hn[:, 1] * h
    return _dipole_consistent(domain, rect, h, hull=(hn, hv), shorted=True)


#: Effective extra length of a discrete absorbing node segment, in units of h,
#: calibrated on the closed-form N=0 capacity of the unit segment (see tests).
TIP_OFFSET = 0.35


def segment_hull_capacity(domain: SlitConfig, x: float, tip: float, rect=DEFAULT_RECT, h=DEFAULT_H, ring_r=4.0) -> float:
    """Capacity of the vertical segment hull [x, x + i*tip] in the domain.

    A node column of top index j acts like a continuum segment of length
    (j + TIP_OFFSET) h, so the ring capacities of the two adjacent snap
    lengths are interpolated linearly to the target tip.
    """
    jf = tip / h - TIP_OFFSET
    j0 = int(np.floor(jf))
    frac = jf - j0
    caps = []
    for j in (j0, j0 + 1):
        nodes = column_nodes(rect, h, x, j)
        fld = _dipole_consistent(domain, rect, h, hull=(nodes, nodes[:, 1] * h), shorted=True)
        caps.append(capacity_via_ring(domain, fld, ring_r))
    return float((1 - frac) * caps[0] + frac * caps[1])


def capacity_via_ring(domain: SlitConfig, hull_field: GridField, r: float) -> float:
    """Half-plane capacity from the ring integral (2R/pi) int h sin(theta) dtheta."""
    x0, x1, y1 = hull_field.rect
    if r >= min(x1, -x0, y1):
        raise HullTooLarge(f"ring radius {r} outside grid {hull_field.rect}")
    n = 720
    th = np.linspace(0.0, np.pi, n + 1)
    z = r * np.exp(1j * th)
    z = z.real + 1j * np.minimum(np.maximum(z.imag, 0.0), y1 - hull_field.h)
    vals = hull_field.interp(z) * np.sin(th)
    from scipy.integrate import simpson

    return float(2.0 * r / np.pi * simpson(vals, x=th))


class WosSampler:
    """Walk-on-spheres estimate of absorbing-BM hitting probabilities.

    Deterministic given the seed; walks stop in an absorption shell of width
    ``delta`` around dH or a slit, escape when they exceed a large height,
    and are capped at ``max_steps`` (counted as escapes).
    """

    def __init__(self, seed=0, max_steps=20_000, delta=1e-4, escape_height=1e3):
        self.seed = int(seed)
        self.max_steps = int(max_steps)
        self.delta = float(delta)
        self.escape_height = float(escape_height)

    def hit_probabilities(self, domain: SlitConfig, z0: complex, n_walks: int):
        """Returns (p, sigma): hit probability and MC error per slit, plus dH/escape.

        p has length N + 1; the last entry is the probability of absorption
        on dH or escape to infinity.
        """
        rng = np.random.default_rng(np.random.Philox(key=self.seed))
        n = domain.n
        segs = [(s.x_left, s.x_right, s.y) for s in domain.slits]
        pos = np.full(n_walks, complex(z0), dtype=complex)
        alive = np.ones(n_walks, dtype=bool)
        hits = np.zeros((n + 1, n_walks), dtype=bool)
        for _ in range(self.max_steps):
            if not alive.any():
                break
            z = pos[alive]
            d = z.imag.copy()
            nearest = np.full(z.size, n)  # n encodes dH
            for k, (xl, xr, y) in enumerate(segs):
                dx = np.maximum(np.maximum(xl - z.real, z.real - xr), 0.0)
                dk = np.hypot(dx, z.imag - y)
                closer = dk < d
                d = np.where(closer, dk, d)
                nearest = np.where(closer, k, nearest)
            absorbed = d < self.delta
            if absorbed.any():
                idx = np.nonzero(alive)[0][absorbed]
                hits[nearest[absorbed], idx] = True
            escaped = (z.imag > self.escape_height) | (np.abs(z.real) > self.escape_height)
            done = absorbed | escaped
            if escaped.any():
                idx = np.nonzero(alive)[0][escaped & ~absorbed]
                hits[n, idx] = True
            ang = rng.uniform(0.0, 2 * np.pi, z.size)
            pos[alive] = z + d * np.exp(1j * ang)
            sub = alive.copy()
            sub[np.nonzero(alive)[0][done]] = False
            alive = sub
        hits[n, alive] = True  # step cap: count as escape
        p = hits.mean(axis=1)
        sigma = np.sqrt(np.maximum(p * (1 - p), 1e-12) / n_walks)
        return p, sigma
