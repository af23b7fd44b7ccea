"""Driving SDE for stochastic Komatu-Loewner evolutions.

The driving pair (xi(t), s(t)) solves

    d xi = alpha(s - xi_hat) dB + b(s - xi_hat) dt,
    d s_j = b_j(xi, s) dt,

where alpha and b are homogeneous of degree 0 and -1 on the slit space,
``xi_hat`` shifts the 2N abscissa entries by xi, and the slit drifts b_j come
from the kernel module.  Paths are Euler-Maruyama in xi with an RK4 substep
for the slit component (frozen xi within the step); Brownian increments come
from a counter-based generator so runs are reproducible bit for bit and can
be refined pathwise.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import geometry, kernel
from .errors import KernelFailure
from .flow import STOP_MARGIN, DrivingPath, _config
from .geometry import SlitConfig


def shift_vector(svec: np.ndarray, xi: float) -> np.ndarray:
    """s - xi_hat: subtract xi from the 2N abscissa entries, heights fixed."""
    out = svec.copy()
    n = len(svec) // 3
    out[n:] -= xi
    return out


@dataclass(frozen=True)
class CoefficientSpec:
    """Diffusion and drift rules for the driving SDE.

    ``alpha`` and ``b`` are rules of the shifted configuration vector
    s - xi_hat, homogeneous of degree 0 and -1 respectively (a contract,
    spot-checked for the builtins in the tests).  A rule with
    ``absolute=True`` instead receives (xi, s) raw, which deliberately breaks
    translation covariance; this exists only for negative-control runs.
    """

    name: str
    alpha: callable
    b: callable
    absolute: bool = False

    def drift(self, xi, svec):
        if self.absolute:
            return self.b(xi, svec)
        return self.b(shift_vector(svec, xi))

    def diffusion(self, xi, svec):
        return self.alpha(shift_vector(svec, xi))


def alpha_constant(value: float):
    """alpha = const (kappa^(1/2)); trivially homogeneous of degree 0."""
    return lambda sv: value


def b_zero(sv):
    return 0.0


def b_neg_bmd(sv):
    """b = -b_BMD of the shifted configuration (degree -1 by the kernel module)."""
    if len(sv) == 0:
        return 0.0
    return -kernel.b_bmd(_config(sv), 0.0)


def spec_sqrt6_neg_bmd() -> CoefficientSpec:
    return CoefficientSpec("sqrt6_neg_bmd", alpha_constant(np.sqrt(6.0)), b_neg_bmd)


def spec_const_alpha(alpha: float, b: str = "neg_bmd") -> CoefficientSpec:
    bfun = {"neg_bmd": b_neg_bmd, "zero": b_zero}[b]
    return CoefficientSpec(f"alpha={alpha:g},b={b}", alpha_constant(alpha), bfun)


def spec_broken_scaling(alpha: float = 1.0) -> CoefficientSpec:
    """Negative control: b homogeneous of degree 0 instead of -1.

    Normalizes the configuration by its first slit height before taking
    -b_BMD, killing the degree -1 scaling while keeping condition (L).
    """

    def b(sv):
        if len(sv) == 0:
            return 0.0
        y1 = sv[0]
        return -kernel.b_bmd(_config(sv / y1), 0.0)

    return CoefficientSpec(f"broken_scaling(alpha={alpha:g})", alpha_constant(alpha), b)


def spec_broken_translation(alpha: float = 1.0) -> CoefficientSpec:
    """Negative control: drift reads the absolute configuration, not s - xi_hat."""

    def b(xi, svec):
        if len(svec) == 0:
            return 0.0
        return -kernel.b_bmd(_config(svec), 0.0)

    return CoefficientSpec(f"broken_translation(alpha={alpha:g})", alpha_constant(alpha), b, absolute=True)


@dataclass
class SdeRun:
    """One driving-SDE path with its Brownian increments (reproducible)."""

    path: DrivingPath
    increments: np.ndarray
    seed: int
    coeff_name: str


def _brownian_increments(seed: int, n: int, dt: float) -> np.ndarray:
    rng = np.random.default_rng(np.random.Philox(key=seed))
    return rng.standard_normal(n) * np.sqrt(dt)


def _bridge_split(seed: int, level: int, db: np.ndarray, dt: float) -> np.ndarray:
    """Split each increment into two halves with a Brownian bridge draw.

    Keyed on (seed, level) so a refined run is a deterministic function of
    the original seed.
    """
    rng = np.random.default_rng(np.random.Philox(key=(seed << 8) + 17 * level + 3))
    mid = 0.5 * db + 0.5 * np.sqrt(dt) * rng.standard_normal(len(db))
    out = np.empty(2 * len(db))
    out[0::2] = mid
    out[1::2] = db - mid
    return out


def simulate(
    xi0: float,
    s0: SlitConfig,
    coeff: CoefficientSpec,
    T: float,
    dt: float,
    seed: int,
    stop_margin: float = STOP_MARGIN,
    _increments: np.ndarray | None = None,
) -> SdeRun:
    """Euler-Maruyama path of the driving SDE; stops at the lifetime margin.

    The slit component advances with an RK4 substep per time step with xi
    frozen (the slit drift is the dominant cost; the xi diffusion sees it
    only through the slow slit motion).
    """
    if isinstance(s0, np.ndarray):
        s0 = geometry.validate(s0)
    n_steps = int(round(T / dt))
    db = _increments if _increments is not None else _brownian_increments(seed, n_steps, dt)
    n3 = 3 * s0.n
    xi = np.empty(n_steps + 1)
    svec = np.empty((n_steps + 1, n3))
    xi_mid = np.empty(n_steps)
    svec_mid = np.empty((n_steps, n3))
    xi[0] = xi0
    svec[0] = s0.vector
    alive = True
    k = 0
    for k in range(n_steps):
        s = svec[k]
        cfg = _config(s)
        if s0.n and geometry.margin_of(cfg) <= stop_margin:
            alive = False
            break
        a = coeff.diffusion(xi[k], s)
        bd = coeff.drift(xi[k], s)
        step = a * db[k] + bd * dt
        guard = 10.0 * np.sqrt(dt) * max(a, 1e-12)
        if abs(step) > guard:
            # reject and halve: advance xi with two bridge sub-increments
            half = _bridge_split(seed + 1000003 * k, 1, np.array([db[k]]), dt)
            step = 0.0
            for sub in half:
                step += a * sub + bd * (dt / 2)
        xi[k + 1] = xi[k] + step
        if s0.n:
            try:
                k1 = kernel.solve_cached(cfg, xi[k]).slit_drift()
                k2 = kernel.solve_cached(_config(s + 0.5 * dt * k1), xi[k]).slit_drift()
                k3 = kernel.solve_cached(_config(s + 0.5 * dt * k2), xi[k]).slit_drift()
                k4 = kernel.solve_cached(_config(s + dt * k3), xi[k]).slit_drift()
            except Exception as exc:  # noqa: BLE001
                raise KernelFailure(f"kernel solve failed at t={k * dt:.6g}: {exc}") from exc
            svec_mid[k] = s + 0.25 * dt * (k1 + k2)
            svec[k + 1] = s + dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
        else:
            svec_mid[k] = s
            svec[k + 1] = s
        xi_mid[k] = 0.5 * (xi[k] + xi[k + 1])
    else:
        k = n_steps
    if not alive:
        xi, svec, xi_mid, svec_mid = xi[: k + 1], svec[: k + 1], xi_mid[:k], svec_mid[:k]
    path = DrivingPath(dt, xi, svec, xi_mid, svec_mid, alive=alive, provenance="sde", seed=seed)
    return SdeRun(path, db, seed, coeff.name)


def refine(run: SdeRun, coeff: CoefficientSpec, xi0: float, s0: SlitConfig, level: int = 1) -> SdeRun:
    """Re-simulate the same Brownian path at half the step size (bridge split)."""
    dt = run.path.dt / 2.0
    db = _bridge_split(run.seed, level, run.increments, run.path.dt)
    return simulate(xi0, s0, coeff, run.path.horizon, dt, run.seed, _increments=db)


def terminal_xi_ensemble(xi0, s0, coeff, T, dt, n_paths, seed):
    """Terminal xi(T) over an ensemble; censored paths report their last value."""
    out = np.empty(n_paths)
    for i in range(n_paths):
        run = simulate(xi0, s0, coeff, T, dt, seed + i)
        out[i] = run.path.xi[-1]
    return out


def scaling_check(coeff: CoefficientSpec, xi0, s0, c, n_paths, T, dt=1e-3, seed=0):
    """Two-sample KS test of the Brownian scaling property.

    Compares terminal xi(T) of the base ensemble against c^-1 xi_c(c^2 T)
    from the ensemble started at (c xi0, c s0) and run with step c^2 dt (the
    discretizations then correspond exactly under the scaling map).
    Returns (p_value, statistic).
    """
    from scipy.stats import ks_2samp

    if isinstance(s0, np.ndarray):
        s0 = geometry.validate(s0)
    base = terminal_xi_ensemble(xi0, s0, coeff, T, dt, n_paths, seed)
    scaled = terminal_xi_ensemble(c * xi0, geometry.scale(s0, c), coeff, c * c * T, c * c * dt, n_paths, seed + 7_000_003)
    res = ks_2samp(base, scaled / c)
    return float(res.pvalue), float(res.statistic)


def x_homogeneity_check(coeff: CoefficientSpec, xi0, s0, r, n_paths, T, dt=1e-3, seed=0):
    """KS test of homogeneity in the x-direction: shift by r and compare."""
    from scipy.stats import ks_2samp

    if isinstance(s0, np.ndarray):
        s0 = geometry.validate(s0)
    base = terminal_xi_ensemble(xi0, s0, coeff, T, dt, n_paths, seed)
    shifted = terminal_xi_ensemble(xi0 + r, geometry.translate(s0, r), coeff, T, dt, n_paths, seed + 7_000_003)
    res = ks_2samp(base, shifted - r)
    return float(res.pvalue), float(res.statistic)
