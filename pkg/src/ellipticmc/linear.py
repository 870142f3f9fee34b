"""Linear building blocks: stochastic Dirichlet solution, Green potential,
and the Schrodinger-type representation with a fixed nonpositive weight.

Everything here is a plain Monte Carlo mean over exit experiments:

* ``harmonic_extension``: E^x[f(X(tau_D))], the stochastic solution of the
  Dirichlet problem with boundary data f.
* ``green_potential``: Gq(x) = E^x int_0^{tau_D} q(X_t) dt, the Green
  potential of q via occupation times (no singular kernel quadrature).
* ``schrodinger_solution``: E^x[e_q(tau_D) phi(X(tau_D))] for q <= 0.

The free-space kernel ``green_kernel`` is kept only for the diagnostics
norms; the solver itself never integrates against it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from . import sampling
from .errors import InputError, NumericalError
from .fields import Field
from .geometry import DomainGeometry
from .parallel import map_indexed
from .sampling import RngStream

BoundaryFn = Callable[[np.ndarray], np.ndarray]  # (m, d) -> (m,)
InteriorFn = Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True)
class Estimate:
    value: float
    stderr: float
    n_samples: int


def _mean_estimate(samples: np.ndarray) -> Estimate:
    n = len(samples)
    se = float(samples.std(ddof=1) / math.sqrt(n)) if n >= 2 else float("nan")
    return Estimate(float(samples.mean()), se, n)


@dataclass(frozen=True)
class GreenConstants:
    """c = Gamma(d/2 - 1) / (2 pi^{d/2}), the kernel constant for d >= 3."""

    d: int

    @property
    def c(self) -> float:
        if self.d < 3:
            raise InputError("the kernel constant is defined for d >= 3")
        return math.gamma(self.d / 2 - 1) / (2 * math.pi ** (self.d / 2))


def green_kernel(d: int, v) -> float:
    """Free-space kernel branches by dimension: |v|^{d-2} for d >= 3,
    ln(1/|v|) for d = 2, |v| for d = 1."""
    nrm = float(np.linalg.norm(np.asarray(v, dtype=float)))
    if nrm == 0.0:
        raise NumericalError("green_kernel is singular at v = 0")
    if d >= 3:
        return nrm ** (d - 2)
    if d == 2:
        return math.log(1.0 / nrm)
    if d == 1:
        return nrm
    raise InputError(f"invalid dimension {d}")


def harmonic_extension(
    domain: DomainGeometry,
    f: BoundaryFn,
    x,
    n: int,
    method: str = "wos",
    rng: RngStream = None,
    shell: float = None,
    dt: float = None,
    bridge: bool = False,
) -> Estimate:
    """Monte Carlo estimate of E^x[f(X(tau_D))]."""
    if rng is None:
        raise InputError("an RngStream is required")
    if method == "wos":
        pts, _ = sampling.wos_exit_batch(
            domain, x, shell or sampling.default_shell(domain), rng, n
        )
    elif method == "em":
        pts, _, _ = sampling.em_path_batch(
            domain, x, dt or sampling.default_dt(domain), [], rng, n, bridge
        )
    else:
        raise InputError(f"unknown method {method!r}")
    try:
        vals = np.asarray(f(pts), dtype=float)
    except Exception as exc:
        raise type(exc)(f"boundary data evaluation failed on sampled exit "
                        f"points: {exc}") from exc
    return _mean_estimate(vals)


def green_potential(
    domain: DomainGeometry,
    q: InteriorFn,
    x,
    n: int,
    dt: float,
    rng: RngStream,
    bridge: bool = False,
) -> Estimate:
    """Gq(x) estimated as the mean occupation integral of q until exit."""
    _, _, occ = sampling.em_path_batch(domain, x, dt, [("q", q)], rng, n, bridge)
    return _mean_estimate(occ["q"])


def schrodinger_solution(
    domain: DomainGeometry,
    q: InteriorFn,
    phi: BoundaryFn,
    x,
    n: int,
    dt: float,
    rng: RngStream,
    bridge: bool = False,
) -> Estimate:
    """E^x[e_q(tau_D) phi(X(tau_D))] for bounded q <= 0 and phi >= 0."""

    def q_checked(pts):
        vals = np.asarray(q(pts), dtype=float)
        if np.any(vals > 1e-12):
            raise InputError("schrodinger_solution requires q <= 0 on D")
        return vals

    exits, _, occ = sampling.em_path_batch(
        domain, x, dt, [("q", q_checked)], rng, n, bridge
    )
    payoff = np.asarray(phi(exits), dtype=float)
    if np.any(payoff < 0):
        raise InputError("schrodinger_solution requires phi >= 0 on the boundary")
    return _mean_estimate(np.exp(occ["q"]) * payoff)


def field_harmonic_extension(
    domain: DomainGeometry,
    f: BoundaryFn,
    points: np.ndarray,
    n: int,
    method: str = "wos",
    rng: RngStream = None,
    threads: int = 1,
    purpose: str = "harmonic",
    **kw,
) -> Field:
    """Pointwise harmonic extension over an evaluation point set, one keyed
    stream per point."""
    points = np.atleast_2d(np.asarray(points, dtype=float))

    def one(i: int):
        est = harmonic_extension(
            domain, f, points[i], n, method, rng.keyed(purpose, point=i), **kw
        )
        return est.value, est.stderr

    results = map_indexed(one, len(points), threads)
    vals = np.array([r[0] for r in results])
    ses = np.array([r[1] for r in results])
    return Field(points, vals, ses)
