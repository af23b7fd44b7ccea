"""BMD complex Poisson kernel on standard slit domains.

The kernel ``Psi(z, xi)`` is the unique function, analytic in the domain and
vanishing at infinity, whose imaginary part is the Poisson kernel of Brownian
motion with darning: it vanishes on the real axis away from the pole
``xi``, is a constant ``m_j`` on both sides of each slit, has zero flux
around each slit, and behaves like ``-1/(pi (z - xi))`` at the pole.

Representation.  The pole is carried analytically and the correction is a
charge-neutral Cauchy-type layer on each slit.  Writing the cumulative
density on slit ``j`` (center ``c``, half-length ``h``) in the Chebyshev
angle ``s = Re c + h cos(theta)`` as ``R(theta) = sum_m C_m sin(m theta)``,
the layer potential has the closed form

    B_m(z) = (i/2) * (rho(u)^m - rho(u')^m),
    u = (z - c)/h,   u' = (z - conj(c))/h,
    rho(u) = u - sqrt(u^2 - 1) = 1 / (u + sqrt(u-1) sqrt(u+1)),

with ``|rho| <= 1`` off the slit (the Joukowski variable).  The image term
``u'`` makes the imaginary part vanish identically on the real axis, the
``sin`` basis builds in charge neutrality (zero flux), and on the slit
itself ``Im B_m = cos(m theta)/2 - Re(rho(u')^m)/2`` from either side, so
the collocation system for the coefficients and the level constants ``m_j``
is small, dense, and spectrally convergent.

The same machinery with an extra per-slit monopole term (nonzero flux) and
slitwise Dirichlet data solves the plain absorbing-Brownian-motion problems
used by the period matrix and the kernel decomposition cross-check.
"""

from __future__ import annotations

import math
from collections import OrderedDict
from dataclasses import dataclass, field

import numpy as np

from . import geometry
from .errors import AtPole, ExtrapolationUnstable, IllConditioned, NoConvergence, Singular
from .geometry import (
    BOUNDARY,
    ENDPOINT_LEFT,
    ENDPOINT_RIGHT,
    INTERIOR,
    SLIT_LOWER,
    SLIT_UPPER,
    HalfPlanePoint,
    SlitConfig,
)

TOL_SLIT = 1e-6
TOL_BOUNDARY = 1e-6
COND_REGULARIZE = 1e12
COND_CAP = 1e14

_DEFAULT_NCOLL = 48
_DEFAULT_NBASIS = 32
_MAX_NBASIS = 192


def _rho(u):
    """Joukowski variable u - sqrt(u^2-1), branch with |rho| <= 1.

    The form 1/(u + sqrt(u-1) sqrt(u+1)) is cancellation-free for all u off
    the cut [-1, 1]; the sqrt product has its branch cut exactly on the cut.
    """
    return 1.0 / (u + np.sqrt(u - 1.0) * np.sqrt(u + 1.0))


def _sq(u):
    """sqrt(u^2 - 1) with the cut on [-1, 1] and ~ +u at infinity."""
    return np.sqrt(u - 1.0) * np.sqrt(u + 1.0)


def pole_part(z, xi):
    """Complex Poisson kernel of absorbing BM in H: -1/(pi (z - xi))."""
    return -1.0 / (np.pi * (np.asarray(z, dtype=complex) - xi))


def _basis_block(z, center, hl, nbasis):
    """Matrix of B_m(z) values, shape z.shape + (nbasis,), for one slit."""
    z = np.asarray(z, dtype=complex)
    u = (z - center) / hl
    up = (z - np.conj(center)) / hl
    r = _rho(u)[..., None] ** np.arange(1, nbasis + 1)
    rp = _rho(up)[..., None] ** np.arange(1, nbasis + 1)
    return 0.5j * (r - rp)


def _basis_block_on_slit(theta, center, hl, nbasis, lower=False):
    """B_m on the slit itself at Chebyshev angles; side selects e^(-+ i theta)."""
    sgn = 1.0 if lower else -1.0
    r = np.exp(sgn * 1j * theta)[:, None] ** np.arange(1, nbasis + 1)
    x = center.real + hl * np.cos(theta)
    up = (x + 1j * center.imag - np.conj(center)) / hl
    rp = _rho(up)[:, None] ** np.arange(1, nbasis + 1)
    return 0.5j * (r - rp)


@dataclass
class KernelSolution:
    """Evaluator of Psi(., xi) for one fixed domain and pole.

    Immutable after construction; evaluation is vectorised over points.
    """

    config: SlitConfig
    xi: float
    coeffs: np.ndarray  # (N, nbasis) real
    slit_consts: np.ndarray  # (N,) value of Im Psi on each slit
    cond: float
    residual: float
    centers: np.ndarray = field(repr=False, default=None)
    half_lengths: np.ndarray = field(repr=False, default=None)

    def __post_init__(self):
        if self.centers is None:
            self.centers = self.config.centers
        if self.half_lengths is None:
            self.half_lengths = self.config.half_lengths
        self.coeffs = np.asarray(self.coeffs, dtype=float)
        self.coeffs.setflags(write=False)

    # -- evaluation -----------------------------------------------------

    def eval_regular(self, z):
        """The layer-potential part alone: Psi(z) + 1/(pi (z - xi)).

        Analytic across the pole; this is what makes the domain-constant
        extraction stable.
        """
        z = np.asarray(z, dtype=complex)
        out = np.zeros(z.shape, dtype=complex)
        for j in range(self.config.n):
            out += _basis_block(z, self.centers[j], self.half_lengths[j], self.coeffs.shape[1]) @ self.coeffs[j]
        return out

    def __call__(self, z):
        """Psi at interior (or dH) points given as plain complex numbers."""
        z = np.asarray(z, dtype=complex)
        if np.any(z == self.xi):
            raise AtPole(f"evaluation at the pole xi={self.xi}")
        return pole_part(z, self.xi) + self.eval_regular(z)

    def eval(self, p):
        """Psi at a tagged point; slit tags pick the one-sided limit."""
        if isinstance(p, HalfPlanePoint):
            if p.tag == INTERIOR or p.tag == BOUNDARY:
                return complex(self(p.z))
            return complex(self._eval_on_slit(p))
        return self(p)

    def _eval_on_slit(self, p):
        j = p.index
        c, h = self.centers[j], self.half_lengths[j]
        if p.tag == ENDPOINT_LEFT:
            theta = np.pi
        elif p.tag == ENDPOINT_RIGHT:
            theta = 0.0
        else:
            theta = math.acos(min(1.0, max(-1.0, (p.re - c.real) / h)))
        lower = p.tag == SLIT_LOWER
        out = pole_part(p.z, self.xi)
        nb = self.coeffs.shape[1]
        for k in range(self.config.n):
            if k == j:
                blk = _basis_block_on_slit(np.array([theta]), c, h, nb, lower=lower)[0]
            else:
                blk = _basis_block(np.array([p.z]), self.centers[k], self.half_lengths[k], nb)[0]
            out = out + blk @ self.coeffs[k]
        return out

    def im_on_slit(self, j, thetas, lower=False):
        """Im Psi on slit j at Chebyshev angles (residual diagnostics)."""
        c, h = self.centers[j], self.half_lengths[j]
        x = c.real + h * np.cos(thetas)
        z = x + 1j * c.imag
        nb = self.coeffs.shape[1]
        vals = pole_part(z, self.xi)
        for k in range(self.config.n):
            if k == j:
                blk = _basis_block_on_slit(thetas, c, h, nb, lower=lower)
            else:
                blk = _basis_block(z, self.centers[k], self.half_lengths[k], nb)
            vals = vals + blk @ self.coeffs[k]
        return vals.imag

    # -- derived quantities ----------------------------------------------

    def endpoint_values(self):
        """Psi at (left, right) slit endpoints, arrays of shape (N,)."""
        n, nb = self.config.n, self.coeffs.shape[1]
        left = np.empty(n, dtype=complex)
        right = np.empty(n, dtype=complex)
        for j in range(n):
            left[j] = self._eval_on_slit(HalfPlanePoint.endpoint_left(self.config, j))
            right[j] = self._eval_on_slit(HalfPlanePoint.endpoint_right(self.config, j))
        return left, right

    def slit_drift(self):
        """The 3N drift vector of the slit Komatu-Loewner equations.

        Heights move with -2 pi Im Psi (the slit constant); abscissas with
        -2 pi Re Psi at the respective endpoint.
        """
        n = self.config.n
        if n == 0:
            return np.zeros(0)
        left, right = self.endpoint_values()
        out = np.empty(3 * n)
        out[:n] = -2.0 * np.pi * self.slit_consts
        out[n : 2 * n] = -2.0 * np.pi * left.real
        out[2 * n :] = -2.0 * np.pi * right.real
        return out


def solve(
    domain: SlitConfig,
    xi: float,
    n_colloc: int = _DEFAULT_NCOLL,
    n_basis: int = _DEFAULT_NBASIS,
    tol_slit: float = TOL_SLIT,
) -> KernelSolution:
    """Solve the collocation system for Psi(., xi) on the given domain.

    For N = 0 returns the closed-form half-plane kernel.  The basis size is
    doubled automatically (up to a cap) when the slit-constancy residual at
    off-collocation check angles exceeds ``tol_slit``.
    """
    if isinstance(domain, np.ndarray):
        domain = geometry.validate(domain)
    n = domain.n
    if n == 0:
        return KernelSolution(domain, float(xi), np.zeros((0, 0)), np.zeros(0), 1.0, 0.0)

    nb, nc = n_basis, n_colloc
    while True:
        sol = _solve_fixed(domain, float(xi), nc, nb, tol_slit)
        if sol.residual <= tol_slit or nb >= _MAX_NBASIS:
            break
        nb, nc = 2 * nb, 2 * nc
    if sol.residual > tol_slit and sol.residual > 1e-4:
        raise NoConvergence(
            f"slit-constancy residual {sol.residual:.3e} after refinement to {nb} basis functions"
        )
    return sol


def _solve_fixed(domain, xi, nc, nb, tol_slit):
    n = domain.n
    centers, hls = domain.centers, domain.half_lengths
    theta = (np.arange(nc) + 0.5) * np.pi / nc

    ncols = n * nb + n
    a = np.empty((n * nc, ncols))
    rhs = np.empty(n * nc)
    for j in range(n):
        rows = slice(j * nc, (j + 1) * nc)
        x = centers[j].real + hls[j] * np.cos(theta)
        z = x + 1j * centers[j].imag
        for k in range(n):
            if k == j:
                blk = _basis_block_on_slit(theta, centers[j], hls[j], nb)
            else:
                blk = _basis_block(z, centers[k], hls[k], nb)
            a[rows, k * nb : (k + 1) * nb] = blk.imag
        a[rows, n * nb :] = 0.0
        a[rows, n * nb + j] = -1.0
        rhs[rows] = -pole_part(z, xi).imag

    sol, _, _, sv = np.linalg.lstsq(a, rhs, rcond=None)
    cond = sv[0] / sv[-1] if sv[-1] > 0 else np.inf
    if cond > COND_CAP:
        raise IllConditioned(cond)
    if cond > COND_REGULARIZE:
        sol, *_ = np.linalg.lstsq(a, rhs, rcond=1e-12)

    coeffs = sol[: n * nb].reshape(n, nb)
    consts = sol[n * nb :]
    out = KernelSolution(domain, xi, coeffs, consts, cond, 0.0, centers, hls)

    # Im Psi is identical from both slit sides in this representation, so the
    # residual only needs one side, at angles off the collocation set
    check = (np.arange(nc // 2) + 0.21) * 2 * np.pi / nc
    res = 0.0
    for j in range(n):
        vals = out.im_on_slit(j, check)
        res = max(res, float(np.max(np.abs(vals - consts[j]))))
    out.residual = res
    return out


# -- memoized solves ------------------------------------------------------

_MEMO_QUANTUM = 1e-4  # in the endpoint metric; per-coordinate quantum below
_memo: OrderedDict = OrderedDict()
_MEMO_CAP = 200_000


def solve_cached(domain: SlitConfig, xi: float) -> KernelSolution:
    """Memoized solve keyed on the quantized (configuration, pole) pair.

    The quantum is 2.5e-5 per coordinate, i.e. at most 1e-4 in the endpoint
    metric; solves are pure so reuse only perturbs inputs at that scale.
    """
    q = _MEMO_QUANTUM / 4.0
    key = tuple(np.round(domain.vector / q).astype(np.int64)) + (int(round(xi / q)),)
    hit = _memo.get(key)
    if hit is not None:
        _memo.move_to_end(key)
        return hit
    sol = solve(domain, xi)
    _memo[key] = sol
    if len(_memo) > _MEMO_CAP:
        _memo.popitem(last=False)
    return sol


def clear_memo():
    _memo.clear()


def slit_drift(domain: SlitConfig, xi: float) -> np.ndarray:
    """Drift vector b(xi, s) in R^{3N} of the slit Komatu-Loewner equations."""
    return solve_cached(domain, xi).slit_drift()


# -- BMD domain constants --------------------------------------------------


def _ladder(domain, xi, levels=6):
    d = np.inf
    for s in domain.slits:
        d = min(d, abs(complex(xi, 0.0) - s.left), abs(complex(xi, 0.0) - s.right), s.y)
    h0 = min(0.25, 0.1 * d) if np.isfinite(d) else 0.25
    return h0 * 0.5 ** np.arange(levels)


def _richardson(hs, vals, tol):
    """Neville polynomial extrapolation of the ladder values to h = 0."""
    t = [np.asarray(vals, dtype=complex)]
    for k in range(1, len(hs)):
        prev = t[-1]
        fac = hs[:-k] / hs[k:]
        t.append((fac * prev[1:] - prev[:-1]) / (fac - 1.0))
    best = t[-1][0]
    stab = abs(t[-1][0] - t[-2][0]) if len(t) > 1 else 0.0
    if stab > tol:
        raise ExtrapolationUnstable(f"ladder disagreement {stab:.3e} exceeds {tol:.1e}")
    return best


def b_bmd(domain: SlitConfig, xi: float, tol: float = 1e-8) -> float:
    """BMD domain constant: 2 pi times the regular part of Psi at its pole.

    Evaluated on a geometric ladder of offsets xi + i h and Richardson
    extrapolated to h = 0; the result must be real up to ``tol``.
    """
    if isinstance(domain, np.ndarray):
        domain = geometry.validate(domain)
    if domain.n == 0:
        return 0.0
    sol = solve_cached(domain, float(xi))
    hs = _ladder(domain, xi)
    vals = 2.0 * np.pi * sol.eval_regular(xi + 1j * hs)
    out = _richardson(hs, vals, tol)
    if abs(out.imag) > tol:
        raise ExtrapolationUnstable(f"imaginary residue {out.imag:.3e}")
    return float(out.real)


def c_bmd(domain: SlitConfig, xi: float, tol: float = 1e-7) -> float:
    """Second-order BMD domain constant: 2 pi times d/dz of the regular part.

    The derivative is taken by central differences of the regular-part
    evaluator on the same ladder as ``b_bmd``.
    """
    if isinstance(domain, np.ndarray):
        domain = geometry.validate(domain)
    if domain.n == 0:
        return 0.0
    sol = solve_cached(domain, float(xi))
    hs = _ladder(domain, xi)
    delta = max(1e-6, 1e-4 * hs[0])
    w = xi + 1j * hs
    vals = 2.0 * np.pi * (sol.eval_regular(w + delta) - sol.eval_regular(w - delta)) / (2 * delta)
    out = _richardson(hs, vals, tol)
    if abs(out.imag) > tol:
        raise ExtrapolationUnstable(f"imaginary residue {out.imag:.3e}")
    return float(out.real)


# -- absorbing-BM potentials (period matrix, kernel decomposition) ---------


@dataclass
class DirichletSolution:
    """Harmonic function in the slit domain with Dirichlet data on the slits.

    Vanishes on dH and at infinity; represented with a per-slit monopole
    (carrying the flux) plus the neutral Chebyshev layers.  Only the
    imaginary part of the underlying analytic potential is single-valued,
    which is all the absorbing-BM quantities need.
    """

    config: SlitConfig
    monopole: np.ndarray  # (N,)
    coeffs: np.ndarray  # (N, nbasis)

    def value(self, z):
        z = np.asarray(z, dtype=complex)
        out = np.zeros(z.shape)
        nb = self.coeffs.shape[1]
        for j, s in enumerate(self.config.slits):
            c, h = s.center, s.half_length
            u = (z - c) / h
            up = (z - np.conj(c)) / h
            out += 0.5 * self.monopole[j] * (np.log(np.abs(_rho(up))) - np.log(np.abs(_rho(u))))
            out += (_basis_block(z, c, h, nb) @ self.coeffs[j]).imag
        return out

    def dy_on_boundary(self, x):
        """d/dy of the field at a real point (outer-normal data up to sign)."""
        x = np.asarray(x, dtype=float)
        out = np.zeros(x.shape, dtype=complex)
        nb = self.coeffs.shape[1]
        ms = np.arange(1, nb + 1)
        for j, s in enumerate(self.config.slits):
            c, h = s.center, s.half_length
            u = (x - c) / h
            up = (x - np.conj(c)) / h
            squ, squp = _sq(u), _sq(up)
            out += self.monopole[j] * 0.5j * (1.0 / squ - 1.0 / squp) / h
            r = _rho(u)[..., None] ** ms
            rp = _rho(up)[..., None] ** ms
            dlayer = -0.5j / h * ((r / squ[..., None] - rp / squp[..., None]) * ms) @ self.coeffs[j]
            out += dlayer
        # for analytic F = U + iV, d(Im F)/dy = Re F'
        return out.real


def solve_dirichlet(domain: SlitConfig, slit_data, n_colloc=_DEFAULT_NCOLL, n_basis=_DEFAULT_NBASIS):
    """Absorbing-BM boundary value problem: prescribed values on each slit.

    ``slit_data[j]`` is either a scalar or a callable of the abscissa giving
    the Dirichlet value on slit j.  Data may be a matrix (one column per
    right-hand side); a list of DirichletSolution objects is then returned.
    """
    n = domain.n
    if n == 0:
        raise Singular("no slits: the absorbing problem is trivial")
    centers, hls = domain.centers, domain.half_lengths
    nb, nc = n_basis, n_colloc
    theta = (np.arange(nc) + 0.5) * np.pi / nc

    ncols = n * (nb + 1)
    a = np.empty((n * nc, ncols))
    nrhs = len(slit_data[0]) if np.ndim(slit_data[0]) == 1 else 1
    rhs = np.empty((n * nc, nrhs))
    for j in range(n):
        rows = slice(j * nc, (j + 1) * nc)
        x = centers[j].real + hls[j] * np.cos(theta)
        z = x + 1j * centers[j].imag
        for k in range(n):
            cols = slice(k * (nb + 1), (k + 1) * (nb + 1))
            if k == j:
                blk_b = _basis_block_on_slit(theta, centers[j], hls[j], nb).imag
                up = (z - np.conj(centers[j])) / hls[j]
                mono = 0.5 * np.log(np.abs(_rho(up)))  # |rho(u)| = 1 on the slit
            else:
                blk_b = _basis_block(z, centers[k], hls[k], nb).imag
                u = (z - centers[k]) / hls[k]
                up = (z - np.conj(centers[k])) / hls[k]
                mono = 0.5 * (np.log(np.abs(_rho(up))) - np.log(np.abs(_rho(u))))
            a[rows, cols.start] = mono
            a[rows, cols.start + 1 : cols.stop] = blk_b
        d = slit_data[j]
        if callable(d):
            rhs[rows, 0] = d(x)
        else:
            rhs[rows] = np.broadcast_to(np.atleast_1d(d), (nc, nrhs)) if np.ndim(d) else d
    sol, *_ = np.linalg.lstsq(a, rhs, rcond=None)
    sols = []
    for q in range(nrhs):
        mono = sol[:: nb + 1, q].copy()
        coeffs = np.empty((n, nb))
        for k in range(n):
            coeffs[k] = sol[k * (nb + 1) + 1 : (k + 1) * (nb + 1), q]
        sols.append(DirichletSolution(domain, mono, coeffs))
    return sols if nrhs > 1 else sols[0]


def harmonic_measures(domain: SlitConfig):
    """phi_i = harmonic measure of slit i for absorbing BM, i = 1..N."""
    n = domain.n
    eye = np.eye(n)
    # data on slit j is the j-th row: column i is the data of phi_i
    sols = solve_dirichlet(domain, [eye[j] for j in range(n)])
    return sols if isinstance(sols, list) else [sols]


@dataclass
class PeriodMatrix:
    """Periods a_ij of the slit harmonic measures and the inverse b = a^-1.

    Convention: a_ij is the Dirichlet pairing (flux of phi_i into the j-th
    slit), which makes ``a`` symmetric positive definite with positive
    diagonal and ``b`` entrywise nonnegative.
    """

    a: np.ndarray
    b: np.ndarray


def period_matrix(domain: SlitConfig) -> PeriodMatrix:
    """Periods of the harmonic measures phi_i around each slit C_j."""
    n = domain.n
    if n == 0:
        raise Singular("period matrix is empty for N=0")
    phis = harmonic_measures(domain)
    # flux of the representation around slit j is carried entirely by the
    # monopole: pi * monopole_j outward, so a_ij = -pi * monopole_j(phi_i)
    a = np.array([[-np.pi * phis[i].monopole[j] for j in range(n)] for i in range(n)])
    cond = np.linalg.cond(a)
    if not np.isfinite(cond) or cond > 1e12:
        raise Singular(f"period matrix condition {cond:.3e}")
    return PeriodMatrix(a, np.linalg.inv(a))


def kernel_via_decomposition(domain: SlitConfig, z, zeta: float):
    """Im Psi(z, zeta) rebuilt from absorbing-BM quantities alone.

    K* = K_D + sum_l kappa_l phi_l with K_D the absorbing Poisson kernel of
    the domain (half-plane kernel minus its slit-hitting correction) and the
    slit levels kappa = b . (d phi / dy at zeta).  Entirely independent of
    the BMD collocation solve; used as one leg of the three-way kernel
    cross-check.
    """
    z = np.asarray(z, dtype=complex)
    kh = pole_part(z, zeta).imag
    if domain.n == 0:
        return kh
    corr = solve_dirichlet(domain, [lambda x, y=s.y: pole_part(x + 1j * y, zeta).imag for s in domain.slits])
    if not isinstance(corr, list):
        corr = [corr]
    kd = kh - corr[0].value(z)
    phis = harmonic_measures(domain)
    pm = period_matrix(domain)
    dphi = np.array([p.dy_on_boundary(np.array(zeta)) for p in phis])
    kappa = pm.b @ dphi
    out = kd
    for l, p in enumerate(phis):
        out = out + kappa[l] * p.value(z)
    return out
