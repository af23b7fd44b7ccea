"""Standard slit domains and the parameter space of labeled configurations.

A standard slit domain is the upper half-plane H minus N disjoint horizontal
open segments ("slits").  A configuration is the point
``s = (y_1..y_N, x_1..x_N, xr_1..xr_N)`` in R^{3N}: slit heights, left
endpoint abscissas, right endpoint abscissas.  Configurations are labeled
(ordered): permuting the slits gives a different configuration even though
the underlying domain is the same set.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .errors import Degenerate, ShapeMismatch

#: Margin below which a configuration is rejected as Degenerate even if it is
#: strictly inside the open state space; keeps downstream solvers conditioned.
EPS_MARGIN = 1e-9

INTERIOR = "interior"
BOUNDARY = "boundary"
SLIT_UPPER = "slit-upper"
SLIT_LOWER = "slit-lower"
ENDPOINT_LEFT = "slit-endpoint-left"
ENDPOINT_RIGHT = "slit-endpoint-right"


@dataclass(frozen=True)
class Slit:
    """One horizontal slit: height y > 0 and endpoints x_left < x_right."""

    y: float
    x_left: float
    x_right: float

    @property
    def left(self) -> complex:
        return complex(self.x_left, self.y)

    @property
    def right(self) -> complex:
        return complex(self.x_right, self.y)

    @property
    def center(self) -> complex:
        return complex(0.5 * (self.x_left + self.x_right), self.y)

    @property
    def half_length(self) -> float:
        return 0.5 * (self.x_right - self.x_left)


@dataclass(frozen=True)
class SlitConfig:
    """An ordered tuple of slits; N = 0 is the plain half-plane."""

    slits: tuple[Slit, ...]

    @property
    def n(self) -> int:
        return len(self.slits)

    @property
    def vector(self) -> np.ndarray:
        """Flat R^{3N} vector (y..., x_left..., x_right...); exact round trip."""
        ys = [s.y for s in self.slits]
        xl = [s.x_left for s in self.slits]
        xr = [s.x_right for s in self.slits]
        return np.array(ys + xl + xr, dtype=float)

    @property
    def centers(self) -> np.ndarray:
        """Complex slit centers, shape (N,)."""
        return np.array([s.center for s in self.slits], dtype=complex)

    @property
    def half_lengths(self) -> np.ndarray:
        return np.array([s.half_length for s in self.slits], dtype=float)

    @property
    def heights(self) -> np.ndarray:
        return np.array([s.y for s in self.slits], dtype=float)

    def endpoints(self) -> tuple[np.ndarray, np.ndarray]:
        """Left and right endpoint arrays (complex)."""
        left = np.array([s.left for s in self.slits], dtype=complex)
        right = np.array([s.right for s in self.slits], dtype=complex)
        return left, right

    def to_json(self) -> str:
        return json.dumps(
            {"slits": [{"y": s.y, "x_left": s.x_left, "x_right": s.x_right} for s in self.slits]}
        )

    @staticmethod
    def from_json(text: str) -> "SlitConfig":
        data = json.loads(text)
        slits = data.get("slits", [])
        vec = (
            [float(s["y"]) for s in slits]
            + [float(s["x_left"]) for s in slits]
            + [float(s["x_right"]) for s in slits]
        )
        return validate(np.array(vec))

    def contains(self, z: complex) -> bool:
        """True if z is an interior point of the domain (in H, off all closed slits)."""
        if z.imag <= 0.0:
            return False
        for s in self.slits:
            if z.imag == s.y and s.x_left <= z.real <= s.x_right:
                return False
        return True


def validate(vec, margin: float = EPS_MARGIN) -> SlitConfig:
    """Build a SlitConfig from a flat R^{3N} vector, checking all invariants.

    Raises Degenerate when a height is below the margin, an interval is
    inverted or shorter than the margin, or two same-height slits overlap
    (closed intervals, separated by less than the margin).
    """
    vec = np.asarray(vec, dtype=float).ravel()
    if vec.size % 3 != 0:
        raise Degenerate(f"vector length {vec.size} is not a multiple of 3")
    n = vec.size // 3
    ys, xl, xr = vec[:n], vec[n : 2 * n], vec[2 * n :]
    if not np.all(np.isfinite(vec)):
        raise Degenerate("non-finite entry")
    if np.any(ys <= margin):
        raise Degenerate(f"slit height below margin {margin:g}")
    if np.any(xr - xl <= margin):
        raise Degenerate(f"slit shorter than margin {margin:g}")
    for j in range(n):
        for k in range(j + 1, n):
            if ys[j] == ys[k]:
                gap = max(xl[j] - xr[k], xl[k] - xr[j])
                if gap <= margin:
                    raise Degenerate(f"same-height slits {j} and {k} overlap")
    return SlitConfig(tuple(Slit(ys[j], xl[j], xr[j]) for j in range(n)))


def distance(a: SlitConfig, b: SlitConfig) -> float:
    """Metric on labeled configurations: max_k (|dz_k| + |dz_k^r|)."""
    if a.n != b.n:
        raise ShapeMismatch(f"{a.n} slits vs {b.n} slits")
    if a.n == 0:
        return 0.0
    la, ra = a.endpoints()
    lb, rb = b.endpoints()
    return float(np.max(np.abs(la - lb) + np.abs(ra - rb)))


def scale(s: SlitConfig, c: float) -> SlitConfig:
    """Dilate by c > 0: multiplies every coordinate; the state space is a cone."""
    if c <= 0:
        raise Degenerate(f"scale factor {c} must be positive")
    return SlitConfig(tuple(Slit(c * sl.y, c * sl.x_left, c * sl.x_right) for sl in s.slits))


def translate(s: SlitConfig, r: float) -> SlitConfig:
    """Shift horizontally by r: adds r to the 2N abscissa entries, heights fixed."""
    return SlitConfig(tuple(Slit(sl.y, sl.x_left + r, sl.x_right + r) for sl in s.slits))


def margin_of(s: SlitConfig) -> float:
    """Distance of the configuration from the boundary of the state space.

    The minimum over slit heights, slit lengths, and same-height gaps; used by
    the flow and driver modules as the lifetime stopping proxy.
    """
    if s.n == 0:
        return np.inf
    vals = [sl.y for sl in s.slits] + [sl.x_right - sl.x_left for sl in s.slits]
    for j in range(s.n):
        for k in range(j + 1, s.n):
            a, b = s.slits[j], s.slits[k]
            if a.y == b.y:
                vals.append(max(a.x_left - b.x_right, b.x_left - a.x_right))
    return float(min(vals))


@dataclass(frozen=True)
class HalfPlanePoint:
    """A point of the closed domain with a boundary tag.

    ``tag`` is one of INTERIOR, BOUNDARY (on dH), SLIT_UPPER/SLIT_LOWER (one
    of the two sides of slit ``index``), ENDPOINT_LEFT/ENDPOINT_RIGHT.  Slit
    side tags select the one-sided limit when evaluating analytic functions
    across a slit.
    """

    re: float
    im: float
    tag: str = INTERIOR
    index: int = -1

    @property
    def z(self) -> complex:
        return complex(self.re, self.im)

    @staticmethod
    def interior(z: complex) -> "HalfPlanePoint":
        return HalfPlanePoint(z.real, z.imag, INTERIOR)

    @staticmethod
    def boundary(x: float) -> "HalfPlanePoint":
        return HalfPlanePoint(float(x), 0.0, BOUNDARY)

    @staticmethod
    def slit_upper(cfg: SlitConfig, j: int, x: float) -> "HalfPlanePoint":
        return HalfPlanePoint(float(x), cfg.slits[j].y, SLIT_UPPER, j)

    @staticmethod
    def slit_lower(cfg: SlitConfig, j: int, x: float) -> "HalfPlanePoint":
        return HalfPlanePoint(float(x), cfg.slits[j].y, SLIT_LOWER, j)

    @staticmethod
    def endpoint_left(cfg: SlitConfig, j: int) -> "HalfPlanePoint":
        s = cfg.slits[j]
        return HalfPlanePoint(s.x_left, s.y, ENDPOINT_LEFT, j)

    @staticmethod
    def endpoint_right(cfg: SlitConfig, j: int) -> "HalfPlanePoint":
        s = cfg.slits[j]
        return HalfPlanePoint(s.x_right, s.y, ENDPOINT_RIGHT, j)
