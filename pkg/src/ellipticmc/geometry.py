"""Bounded domains in R^d (d >= 3) via signed distance.

Supported shapes: balls, axis-aligned boxes, annuli (spherical shells) and
implicit domains given by a signed-distance expression. Conventions:

* ``signed_distance(x) < 0`` strictly inside, ``> 0`` strictly outside;
  for the exact shapes it is the Euclidean distance to the boundary, for
  implicit shapes the user guarantees |sd(x)| <= dist(x, boundary).
* ``enclosing_radius`` R is the radius of a ball centered at the origin
  that contains the domain. For the exact shapes it is minimal; implicit
  shapes must supply it (its validity is the user's responsibility).

All operations are pure functions of immutable values and accept either a
single point of shape (d,) or a batch of shape (m, d).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Union

import numpy as np

from . import exprlang
from .errors import ConfigurationError, InputError, NumericalError

_PROJECTION_RTOL = 1e-12  # |sd(projected)| <= 1e-12 * R for exact shapes
_BISECTION_CAP = 200


@dataclass(frozen=True)
class Ball:
    center: np.ndarray
    radius: float

    def signed_distance(self, pts: np.ndarray) -> np.ndarray:
        return np.linalg.norm(pts - self.center, axis=-1) - self.radius

    def project(self, pts: np.ndarray) -> np.ndarray:
        rel = pts - self.center
        nrm = np.linalg.norm(rel, axis=-1, keepdims=True)
        if np.any(nrm == 0.0):
            raise InputError("cannot project the ball center to the boundary")
        return self.center + rel * (self.radius / nrm)

    def min_enclosing_radius(self) -> float:
        return float(np.linalg.norm(self.center) + self.radius)

    def bounding_box(self):
        return self.center - self.radius, self.center + self.radius


@dataclass(frozen=True)
class Box:
    lo: np.ndarray
    hi: np.ndarray

    def signed_distance(self, pts: np.ndarray) -> np.ndarray:
        mid = 0.5 * (self.lo + self.hi)
        half = 0.5 * (self.hi - self.lo)
        q = np.abs(pts - mid) - half
        outside = np.linalg.norm(np.maximum(q, 0.0), axis=-1)
        inside = np.minimum(np.max(q, axis=-1), 0.0)
        return outside + inside

    def project(self, pts: np.ndarray) -> np.ndarray:
        single = pts.ndim == 1
        p = np.atleast_2d(pts).astype(float).copy()
        clipped = np.clip(p, self.lo, self.hi)
        on_or_out = np.any(p != clipped, axis=1)
        p[on_or_out] = clipped[on_or_out]
        # interior points: push the coordinate nearest to a face onto it
        interior = ~on_or_out & (self.signed_distance(p) < 0)
        if np.any(interior):
            q = p[interior]
            d_lo = q - self.lo
            d_hi = self.hi - q
            take_lo = d_lo <= d_hi
            dist = np.where(take_lo, d_lo, d_hi)
            j = np.argmin(dist, axis=1)
            rows = np.arange(len(q))
            q[rows, j] = np.where(take_lo[rows, j], self.lo[j], self.hi[j])
            p[interior] = q
        return p[0] if single else p

    def min_enclosing_radius(self) -> float:
        corner = np.maximum(np.abs(self.lo), np.abs(self.hi))
        return float(np.linalg.norm(corner))

    def bounding_box(self):
        return self.lo, self.hi


@dataclass(frozen=True)
class Annulus:
    center: np.ndarray
    r_in: float
    r_out: float

    def signed_distance(self, pts: np.ndarray) -> np.ndarray:
        rho = np.linalg.norm(pts - self.center, axis=-1)
        return np.maximum(self.r_in - rho, rho - self.r_out)

    def project(self, pts: np.ndarray) -> np.ndarray:
        rel = pts - self.center
        rho = np.linalg.norm(rel, axis=-1, keepdims=True)
        if np.any(rho == 0.0):
            raise InputError("cannot project the annulus center to the boundary")
        target = np.where(rho < 0.5 * (self.r_in + self.r_out), self.r_in, self.r_out)
        return self.center + rel * (target / rho)

    def min_enclosing_radius(self) -> float:
        return float(np.linalg.norm(self.center) + self.r_out)

    def bounding_box(self):
        return self.center - self.r_out, self.center + self.r_out


@dataclass(frozen=True)
class Implicit:
    sd_fn: Callable[[np.ndarray], np.ndarray]
    radius: float  # user-supplied enclosing radius
    source: str = ""

    def signed_distance(self, pts: np.ndarray) -> np.ndarray:
        return np.asarray(self.sd_fn(np.atleast_2d(pts))).reshape(
            () if pts.ndim == 1 else (pts.shape[0],)
        )

    def min_enclosing_radius(self) -> float:
        return self.radius


Shape = Union[Ball, Box, Annulus, Implicit]


@dataclass(frozen=True)
class DomainGeometry:
    """A bounded regular domain D together with its enclosing ball."""

    dimension: int
    shape: Shape
    enclosing_radius: float
    boundary_tolerance: float = field(default=0.0)

    def __post_init__(self):
        if self.dimension < 3:
            raise ConfigurationError(
                f"the solver requires d >= 3, got d = {self.dimension}"
            )
        if self.boundary_tolerance == 0.0:
            object.__setattr__(
                self, "boundary_tolerance", 1e-6 * self.enclosing_radius
            )

    # -- core queries -------------------------------------------------------

    def _check_points(self, x) -> np.ndarray:
        pts = np.asarray(x, dtype=float)
        if pts.shape[-1] != self.dimension:
            raise InputError(
                f"point dimension {pts.shape[-1]} != domain dimension {self.dimension}"
            )
        return pts

    def signed_distance(self, x) -> Union[float, np.ndarray]:
        pts = self._check_points(x)
        sd = self.shape.signed_distance(pts)
        return float(sd) if pts.ndim == 1 else sd

    def contains(self, x) -> Union[bool, np.ndarray]:
        sd = self.signed_distance(x)
        return sd < 0 if isinstance(sd, np.ndarray) else sd < 0

    def project_to_boundary(self, x) -> np.ndarray:
        """Nearest-boundary projection (exact shapes) or signed-distance
        bisection along the numerical gradient (implicit shapes)."""
        pts = self._check_points(x)
        if not isinstance(self.shape, Implicit):
            return self.shape.project(pts)
        single = pts.ndim == 1
        p = np.atleast_2d(pts)
        out = np.array([self._project_implicit(q) for q in p])
        return out[0] if single else out

    def _project_implicit(self, x: np.ndarray) -> np.ndarray:
        eps_b = self.boundary_tolerance
        h = max(1e-7 * self.enclosing_radius, 1e-12)
        sd0 = float(self.shape.signed_distance(x))
        grad = np.array([
            (float(self.shape.signed_distance(x + h * e))
             - float(self.shape.signed_distance(x - h * e))) / (2 * h)
            for e in np.eye(self.dimension)
        ])
        gn = np.linalg.norm(grad)
        if gn == 0.0:
            raise NumericalError("vanishing signed-distance gradient at projection")
        n = grad / gn
        # bracket the zero crossing along +-n
        a, b = 0.0, -sd0
        fa = sd0
        fb = float(self.shape.signed_distance(x + b * n))
        expand = 0
        while fa * fb > 0:
            b *= 1.5
            fb = float(self.shape.signed_distance(x + b * n))
            expand += 1
            if expand > _BISECTION_CAP:
                raise NumericalError("boundary projection failed to bracket the boundary")
        for _ in range(_BISECTION_CAP):
            mid = 0.5 * (a + b)
            fm = float(self.shape.signed_distance(x + mid * n))
            if abs(fm) <= eps_b:
                return x + mid * n
            if fa * fm <= 0:
                b, fb = mid, fm
            else:
                a, fa = mid, fm
        raise NumericalError(
            f"boundary projection did not converge within {_BISECTION_CAP} bisections"
        )

    # -- derived geometry ---------------------------------------------------

    def bounding_box(self):
        if isinstance(self.shape, Implicit):
            r = self.enclosing_radius
            return (np.full(self.dimension, -r), np.full(self.dimension, r))
        return self.shape.bounding_box()

    def interior_grid(self, h: float) -> np.ndarray:
        """Regular lattice anchored at the bounding-box center, keeping the
        points with signed_distance <= -h/2. Ordered lexicographically by
        lattice index. Raises if no point survives."""
        if h <= 0:
            raise ConfigurationError("grid spacing must be positive")
        lo, hi = self.bounding_box()
        mid = 0.5 * (lo + hi)
        axes = []
        for i in range(self.dimension):
            kmax = int(np.floor((hi[i] - mid[i]) / h + 1e-12))
            axes.append(mid[i] + h * np.arange(-kmax, kmax + 1))
        mesh = np.meshgrid(*axes, indexing="ij")
        pts = np.stack([m.ravel() for m in mesh], axis=-1)
        sd = self.shape.signed_distance(pts)
        keep = sd <= -0.5 * h + 1e-12 * self.enclosing_radius
        pts = pts[keep]
        if len(pts) == 0:
            raise ConfigurationError(
                f"interior grid with spacing h={h} is empty; decrease h"
            )
        return pts


def enclosing_ball(domain: DomainGeometry) -> float:
    """Radius R of the origin-centered ball containing D."""
    return domain.enclosing_radius


# ---------------------------------------------------------------------------
# Constructors


def ball(d: int, center=None, radius: float = 1.0,
         boundary_tolerance: float = 0.0) -> DomainGeometry:
    c = np.zeros(d) if center is None else np.asarray(center, dtype=float)
    if c.shape != (d,):
        raise InputError("ball center has wrong dimension")
    if radius <= 0:
        raise ConfigurationError("ball radius must be positive")
    shape = Ball(c, float(radius))
    return DomainGeometry(d, shape, shape.min_enclosing_radius(), boundary_tolerance)


def box(d: int, lo, hi, boundary_tolerance: float = 0.0) -> DomainGeometry:
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    if lo.shape != (d,) or hi.shape != (d,):
        raise InputError("box corners have wrong dimension")
    if np.any(hi <= lo):
        raise ConfigurationError("box corners must satisfy lo < hi componentwise")
    shape = Box(lo, hi)
    return DomainGeometry(d, shape, shape.min_enclosing_radius(), boundary_tolerance)


def annulus(d: int, center=None, r_in: float = 0.5, r_out: float = 1.0,
            boundary_tolerance: float = 0.0) -> DomainGeometry:
    c = np.zeros(d) if center is None else np.asarray(center, dtype=float)
    if c.shape != (d,):
        raise InputError("annulus center has wrong dimension")
    if not 0 < r_in < r_out:
        raise ConfigurationError("annulus radii must satisfy 0 < r_in < r_out")
    shape = Annulus(c, float(r_in), float(r_out))
    return DomainGeometry(d, shape, shape.min_enclosing_radius(), boundary_tolerance)


def implicit(d: int, expression: str, enclosing_radius: float | None = None,
             boundary_tolerance: float = 0.0) -> DomainGeometry:
    """Implicit domain from a signed-distance expression in x1..xd, r.

    The expression is trusted to satisfy the sign convention and the
    |sd| <= Euclidean-distance bound; the enclosing radius must be supplied
    because sup-norm bounds over implicit sets are not computable here.
    """
    if enclosing_radius is None:
        raise ConfigurationError(
            "implicit domains require a user-supplied enclosing radius"
        )
    ast = exprlang.parse(expression, role="domain")

    def sd_fn(pts: np.ndarray) -> np.ndarray:
        vals = exprlang.eval(ast, exprlang.point_bindings(pts))
        return np.broadcast_to(np.asarray(vals, dtype=float), (pts.shape[0],))

    shape = Implicit(sd_fn, float(enclosing_radius), expression)
    return DomainGeometry(d, shape, float(enclosing_radius), boundary_tolerance)
