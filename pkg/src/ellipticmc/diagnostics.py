"""Numerical verification of the analytic hypotheses and solution concepts.

* Green-tight norm ||w||_D = sup_x int_D |w(y)| |x-y|^{2-d} dy and the
  Kato modulus (the same integral restricted to |y-x| <= alpha), both by
  midpoint quadrature with an analytic small-ball patch for the singular
  cell.
* Controlled-convergence classification at boundary points: along an
  approach sequence, either the control k stays bounded and the candidate
  solution h must reach the boundary datum (star), or k blows up and
  h/(1+k) must vanish (star_star).
* A heuristic control function g = min(dist(., S)^{-a}, M) built from a
  declared discontinuity set S, extended harmonically into the domain.
* Weak-form residuals against compactly supported bump test functions,
  with a computed quadrature + Monte Carlo error budget.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Callable, Optional, Sequence, Union

import numpy as np

from . import linear
from .errors import (
    AccuracyWarning,
    ConfigurationWarning,
    InputError,
)
from .fields import Field
from .geometry import DomainGeometry
from .sampling import RngStream

DEFAULT_K_THRESHOLD = 1e3
DEFAULT_TAIL = 4


def sphere_area(d: int) -> float:
    """Surface measure of the unit sphere S^{d-1}."""
    return 2 * math.pi ** (d / 2) / math.gamma(d / 2)


# ---------------------------------------------------------------------------
# Quadrature grid (zero margin: every cell whose center lies in D)


@dataclass(frozen=True)
class QuadratureGrid:
    points: np.ndarray  # (k, d) cell centers
    h: float            # cell edge

    @classmethod
    def build(cls, domain: DomainGeometry, h: float) -> "QuadratureGrid":
        lo, hi = domain.bounding_box()
        mid = 0.5 * (lo + hi)
        axes = []
        for i in range(domain.dimension):
            kmax = int(np.floor((hi[i] - mid[i]) / h + 0.5))
            axes.append(mid[i] + h * np.arange(-kmax, kmax + 1))
        mesh = np.meshgrid(*axes, indexing="ij")
        pts = np.stack([m.ravel() for m in mesh], axis=-1)
        keep = np.asarray(domain.signed_distance(pts)) < 0
        return cls(pts[keep], h)

    @property
    def cell_volume(self) -> float:
        return self.h ** len(self.points[0])


def _singular_ball_value(d: int, radius: float) -> float:
    # int_{|z| < rho} |z|^{2-d} dz = s_d rho^2 / 2 with s_d = |S^{d-1}|
    return sphere_area(d) * radius**2 / 2.0


def _kernel_quadrature(
    grid: QuadratureGrid,
    absw: np.ndarray,
    x: np.ndarray,
    d: int,
    within: Optional[float] = None,
):
    """Midpoint sum of |w(y)| |x-y|^{2-d} over cells, optionally restricted
    to |y-x| <= within. The cell containing x is replaced by the analytic
    small-ball value on the inscribed ball of radius h/2.

    Returns (total, singular_part).
    """
    h = grid.h
    diff = grid.points - x
    r = np.linalg.norm(diff, axis=1)
    own = np.max(np.abs(diff), axis=1) <= 0.5 * h + 1e-12 * h
    mask = ~own
    if within is not None:
        mask &= r <= within
    vol = grid.cell_volume
    with np.errstate(divide="ignore"):
        total = float(np.sum(absw[mask] * r[mask] ** (2 - d)) * vol)
    singular = 0.0
    if own.any():
        j = int(np.flatnonzero(own)[0])
        singular = absw[j] * _singular_ball_value(d, 0.5 * h)
        total += singular
    return total, singular


def _resolve_x_samples(domain, grid, x_samples):
    if x_samples is not None:
        return np.atleast_2d(np.asarray(x_samples, dtype=float))
    # default: a coarse interior sweep; the maximizer of the Green-tight
    # integral for smooth w sits well inside D
    return domain.interior_grid(max(grid.h * 4, domain.enclosing_radius / 4))


def green_tight_norm(
    domain: DomainGeometry,
    w: Callable[[np.ndarray], np.ndarray],
    grid: QuadratureGrid,
    x_samples=None,
) -> float:
    """Lower quadrature estimate of sup_x int_D |w(y)| |x-y|^{2-d} dy."""
    if domain.dimension < 3:
        raise InputError("the Green-tight norm is defined here for d >= 3")
    xs = _resolve_x_samples(domain, grid, x_samples)
    absw = np.abs(np.asarray(w(grid.points), dtype=float))
    best, worst_frac = 0.0, 0.0
    for x in xs:
        total, singular = _kernel_quadrature(grid, absw, x, domain.dimension)
        if total > 0:
            worst_frac = max(worst_frac, singular / total)
        best = max(best, total)
    if worst_frac > 0.10:
        warnings.warn(
            f"singular-cell correction is {worst_frac:.0%} of the total; "
            "refine the quadrature grid",
            AccuracyWarning,
        )
    return best


def kato_modulus(
    w: Callable[[np.ndarray], np.ndarray],
    alpha: float,
    domain: DomainGeometry,
    grid: QuadratureGrid,
    x_samples=None,
) -> float:
    """sup_x int_{|y-x| <= alpha} |w(y)| |y-x|^{2-d} dy, with w extended by
    zero outside D. Non-decreasing in alpha by construction."""
    if alpha <= 0:
        raise InputError("alpha must be positive")
    xs = _resolve_x_samples(domain, grid, x_samples)
    absw = np.abs(np.asarray(w(grid.points), dtype=float))
    best, worst_frac = 0.0, 0.0
    for x in xs:
        total, singular = _kernel_quadrature(
            grid, absw, x, domain.dimension, within=alpha
        )
        if total > 0:
            worst_frac = max(worst_frac, singular / total)
        best = max(best, total)
    if worst_frac > 0.10:
        warnings.warn(
            f"singular-cell correction is {worst_frac:.0%} of the total; "
            "refine the quadrature grid",
            AccuracyWarning,
        )
    return best


def kato_profile(
    w, alpha0: float, halvings: int, domain, grid, x_samples=None
) -> list[tuple[float, float]]:
    """Kato modulus over alpha in {alpha0, alpha0/2, ...}; a decreasing
    profile supports Green-tightness."""
    out = []
    a = alpha0
    for _ in range(halvings + 1):
        out.append((a, kato_modulus(w, a, domain, grid, x_samples)))
        a /= 2
    return out


# ---------------------------------------------------------------------------
# Controlled convergence


@dataclass
class ControlledConvergenceReport:
    boundary_point: np.ndarray
    approach_sequence: np.ndarray
    h_values: np.ndarray
    k_values: np.ndarray
    phi_value: float
    classification: str       # star | star_star | inconclusive
    tail_error: float
    passed: bool

    def record(self) -> dict:
        return {
            "point": [float(v) for v in self.boundary_point],
            "classification": self.classification,
            "tail_error": self.tail_error,
            "pass": self.passed,
        }


FieldOrEstimator = Union[Field, Callable[[np.ndarray], np.ndarray]]


def _evaluate(fe: FieldOrEstimator, pts: np.ndarray) -> np.ndarray:
    if isinstance(fe, Field):
        return np.asarray(fe.interpolate(pts), dtype=float)
    return np.asarray(fe(pts), dtype=float)


def approach_sequence(
    domain: DomainGeometry,
    y: np.ndarray,
    n_terms: int = 12,
    start: float = 0.25,
    decay: float = 0.5,
) -> np.ndarray:
    """Normal (radial, for a ball) approach x_j = y + delta_j * inward
    normal, delta_j = start * R * decay^j."""
    y = np.asarray(y, dtype=float)
    h = 1e-6 * domain.enclosing_radius
    grad = np.array([
        (domain.signed_distance(y + h * e) - domain.signed_distance(y - h * e))
        / (2 * h)
        for e in np.eye(domain.dimension)
    ])
    gn = np.linalg.norm(grad)
    if gn == 0:
        raise InputError("cannot determine an inward normal at the boundary point")
    inward = -grad / gn
    deltas = start * domain.enclosing_radius * decay ** np.arange(n_terms)
    return y + deltas[:, None] * inward[None, :]


def controlled_convergence_check(
    h: FieldOrEstimator,
    k: FieldOrEstimator,
    phi: Callable[[np.ndarray], np.ndarray],
    boundary_points: Sequence[np.ndarray],
    sequences: Sequence[np.ndarray],
    tolerance: float,
    K_threshold: float = DEFAULT_K_THRESHOLD,
    tail: int = DEFAULT_TAIL,
    domain: Optional[DomainGeometry] = None,
) -> list[ControlledConvergenceReport]:
    """Classify each (boundary point, approach sequence) pair.

    If the tail of k stays below ``K_threshold``, the pair is classified
    ``star`` and passes when |mean of the h tail - phi(y)| <= tolerance;
    otherwise it is ``star_star`` and passes when max |h/(1+k)| over the
    tail is <= tolerance. Sequences shorter than the tail are
    ``inconclusive``. Any finite check samples the quantifier over
    approach sets; verdicts are per-sequence only.
    """
    if len(boundary_points) != len(sequences):
        raise InputError("one approach sequence per boundary point is required")
    reports = []
    for y, seq in zip(boundary_points, sequences):
        y = np.asarray(y, dtype=float)
        seq = np.atleast_2d(np.asarray(seq, dtype=float))
        dists = np.linalg.norm(seq - y, axis=1)
        if np.any(np.diff(dists) >= 0):
            raise InputError("approach sequence distances must strictly decrease")
        if domain is not None and dists[-1] >= 1e-3 * domain.enclosing_radius:
            raise InputError(
                "approach sequence must reach within 1e-3 R of the boundary"
            )
        hv = _evaluate(h, seq)
        kv = _evaluate(k, seq)
        phi_y = float(np.asarray(phi(y[None, :]), dtype=float)[0])
        if len(seq) < tail:
            reports.append(ControlledConvergenceReport(
                y, seq, hv, kv, phi_y, "inconclusive", float("nan"), False
            ))
            continue
        k_tail = kv[-tail:]
        h_tail = hv[-tail:]
        if float(np.max(k_tail)) < K_threshold:
            err = abs(float(np.mean(h_tail)) - phi_y)
            reports.append(ControlledConvergenceReport(
                y, seq, hv, kv, phi_y, "star", err, err <= tolerance
            ))
        else:
            err = float(np.max(np.abs(h_tail / (1.0 + k_tail))))
            reports.append(ControlledConvergenceReport(
                y, seq, hv, kv, phi_y, "star_star", err, err <= tolerance
            ))
    return reports


# ---------------------------------------------------------------------------
# Heuristic control function


@dataclass(frozen=True)
class DiscontinuitySet:
    """Finite union of points and circles on the boundary, with a distance
    function; the jump set of the boundary data, declared by the user."""

    components: tuple = ()

    @classmethod
    def from_points(cls, points) -> "DiscontinuitySet":
        return cls((("points", np.atleast_2d(np.asarray(points, float))),))

    @classmethod
    def circle(cls, center, radius: float, axis: int) -> "DiscontinuitySet":
        return cls((("circle", np.asarray(center, float), float(radius), axis),))

    def __add__(self, other: "DiscontinuitySet") -> "DiscontinuitySet":
        return DiscontinuitySet(self.components + other.components)

    @property
    def empty(self) -> bool:
        return not self.components

    def distance(self, pts: np.ndarray) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        if self.empty:
            return np.full(len(pts), np.inf)
        dists = []
        for comp in self.components:
            if comp[0] == "points":
                sites = comp[1]
                d2 = (
                    np.einsum("ij,ij->i", sites, sites)[None, :]
                    - 2.0 * pts @ sites.T
                    + np.einsum("ij,ij->i", pts, pts)[:, None]
                )
                dists.append(np.sqrt(np.maximum(d2.min(axis=1), 0.0)))
            else:
                _, center, radius, axis = comp
                rel = pts - center
                dz = rel[:, axis]
                perp = np.delete(rel, axis, axis=1)
                rho = np.linalg.norm(perp, axis=1)
                dists.append(np.sqrt((rho - radius) ** 2 + dz**2))
        return np.min(np.stack(dists, axis=0), axis=0)


def control_function_heuristic(
    phi: Optional[Callable[[np.ndarray], np.ndarray]],
    S: DiscontinuitySet,
    domain: DomainGeometry,
    a: float = 1.0,
    cap: float = 1e6,
    grid_points: Optional[np.ndarray] = None,
    n_per_point: int = 2000,
    rng: Optional[RngStream] = None,
    threads: int = 1,
):
    """Control candidate g(y) = min(dist(y, S)^{-a}, cap) and its harmonic
    extension k = H_D g on the interior grid.

    The finite cap keeps H_D g finite; k blows up along approaches to S
    only as far as the cap allows, so the classification threshold must
    sit well below it. This is a documented heuristic, not a constructive
    version of the existence proof.
    """
    if not 0 < a <= domain.dimension - 2:
        raise InputError(f"exponent a must lie in (0, {domain.dimension - 2}]")
    if not math.isfinite(cap) or cap <= 0:
        raise InputError("the cap must be finite and positive")
    if S.empty and phi is not None:
        warnings.warn(
            "empty discontinuity set: the heuristic control is identically "
            "zero and cannot witness jumps in the boundary data",
            ConfigurationWarning,
        )

    def g(pts: np.ndarray) -> np.ndarray:
        dist = S.distance(pts)
        if S.empty:
            return np.zeros(len(np.atleast_2d(pts)))
        with np.errstate(divide="ignore"):
            return np.minimum(dist ** (-a), cap)

    if grid_points is None:
        grid_points = domain.interior_grid(domain.enclosing_radius / 4)
    if S.empty:
        k_field = Field.constant(grid_points, 0.0)
    else:
        if rng is None:
            raise InputError("an RngStream is required for the control field")
        k_field = linear.field_harmonic_extension(
            domain, g, grid_points, n_per_point, "wos", rng,
            threads=threads, purpose="control",
        )
    return g, k_field


# ---------------------------------------------------------------------------
# Weak-form residuals


@dataclass(frozen=True)
class BumpFunction:
    """Standard mollifier bump exp(-1/(1 - |x-c|^2/rho^2)) on |x-c| < rho,
    with its analytic Laplacian. Support must stay strictly inside D."""

    center: np.ndarray
    rho: float

    def _s(self, pts: np.ndarray) -> np.ndarray:
        rel = np.atleast_2d(pts) - self.center
        return np.einsum("ij,ij->i", rel, rel) / self.rho**2

    def value(self, pts: np.ndarray) -> np.ndarray:
        s = self._s(pts)
        out = np.zeros_like(s)
        inside = s < 1.0
        out[inside] = np.exp(-1.0 / (1.0 - s[inside]))
        return out

    def laplacian(self, pts: np.ndarray) -> np.ndarray:
        # with w = 1/(1-s): d psi/ds = -w^2 psi, d2 psi/ds2 = (w^4 - 2 w^3) psi,
        # Lap psi = psi/rho^2 * (4 s (w^4 - 2 w^3) - 2 d w^2)
        pts = np.atleast_2d(pts)
        d = pts.shape[1]
        s = self._s(pts)
        out = np.zeros_like(s)
        inside = s < 1.0
        si = s[inside]
        w = 1.0 / (1.0 - si)
        psi = np.exp(-w)
        out[inside] = psi / self.rho**2 * (
            4.0 * si * (w**4 - 2.0 * w**3) - 2.0 * d * w**2
        )
        return out


def default_bumps(domain: DomainGeometry, grid_points: np.ndarray) -> list[BumpFunction]:
    """Three bump profiles anchored at the deepest grid point."""
    sd = np.asarray(domain.signed_distance(grid_points))
    deepest = grid_points[int(np.argmin(sd))]
    depth = float(-sd.min())
    bumps = [
        BumpFunction(deepest, 0.8 * depth),
        BumpFunction(deepest, 0.5 * depth),
    ]
    # one off-center profile
    shift = np.zeros(domain.dimension)
    shift[0] = 0.25 * depth
    bumps.append(BumpFunction(deepest + shift, 0.5 * depth))
    return bumps


@dataclass(frozen=True)
class WeakResidual:
    residual: float
    budget: float
    mc_term: float
    quad_term: float
    bias_term: float

    @property
    def ok(self) -> bool:
        return abs(self.residual) <= self.budget

    def record(self) -> dict:
        return {
            "residual": self.residual,
            "budget": self.budget,
            "mc": self.mc_term,
            "quad": self.quad_term,
            "bias": self.bias_term,
            "pass": self.ok,
        }


def _sublattice_mask(points: np.ndarray, h: float, anchor: np.ndarray) -> np.ndarray:
    k = np.rint((points - anchor) / h)
    return np.all(np.abs(k / 2 - np.rint(k / 2)) < 1e-9, axis=1)


def weak_residual(
    u: Field,
    rhs: Callable[[np.ndarray, np.ndarray], np.ndarray],
    psis: Sequence[BumpFunction],
    h: float,
    domain: DomainGeometry,
    dt_bias: float = 0.0,
    rhs_for_budget: Optional[Callable] = None,
) -> list[WeakResidual]:
    """Residuals r(psi) = 1/2 int u Lap(psi) - int rhs(x, u) psi by midpoint
    quadrature on the field's grid.

    The error budget combines, per test function:
    * 3x the root-sum-square of the Monte Carlo propagation of the field's
      standard errors through the quadrature (the rhs sensitivity is
      measured by central differences of size stderr);
    * a Richardson-style quadrature term |S_h - S_2h| from re-summing on
      the even sublattice;
    * an optional uniform field-bias allowance ``dt_bias`` (e.g. the
      O(sqrt(dt)) Euler-Maruyama boundary shift), propagated without
      cancellation.
    """
    pts = u.points
    vals = u.values
    ses = u.stderrs
    lo, hi = domain.bounding_box()
    anchor = 0.5 * (lo + hi)
    vol = h ** domain.dimension
    sub = _sublattice_mask(pts, h, anchor)
    sens = rhs_for_budget or rhs

    out = []
    for psi in psis:
        if domain.signed_distance(psi.center) + psi.rho >= 0:
            raise InputError("test function support touches the boundary")
        pv = psi.value(pts)
        pl = psi.laplacian(pts)
        f_vals = np.asarray(rhs(pts, vals), dtype=float)
        terms = 0.5 * vals * pl - f_vals * pv
        s_h = float(np.sum(terms) * vol)

        # MC propagation: d(term)/d(u_i) ~ 1/2 lap_i - dF_i, by central diff
        up = np.asarray(sens(pts, vals + ses), dtype=float)
        dn = np.asarray(sens(pts, np.maximum(vals - ses, 1e-300)), dtype=float)
        df = 0.5 * np.abs(up - dn)
        mc = 3.0 * float(np.sqrt(np.sum((vol * (0.5 * np.abs(pl) * ses + df * np.abs(pv))) ** 2)))

        # quadrature: compare with the 2h sublattice midpoint sum
        s_2h = float(np.sum(terms[sub]) * (2 * h) ** domain.dimension)
        quad = abs(s_h - s_2h)

        bias = 0.0
        if dt_bias > 0:
            up_b = np.asarray(sens(pts, vals + dt_bias), dtype=float)
            dn_b = np.asarray(sens(pts, np.maximum(vals - dt_bias, 1e-300)), dtype=float)
            df_b = 0.5 * np.abs(up_b - dn_b)
            bias = float(np.sum(vol * (0.5 * np.abs(pl) * dt_bias + df_b * np.abs(pv))))

        out.append(WeakResidual(s_h, mc + quad + bias, mc, quad, bias))
    return out
