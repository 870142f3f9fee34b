"""Brownian exit experiments.

Two samplers drive everything downstream:

* walk-on-spheres (``wos_exit`` / ``wos_exit_batch``): samples the exit
  point X(tau_D) exactly in law up to an epsilon-shell. No time
  information, but unbeatable for harmonic extensions.
* Euler-Maruyama paths (``em_path`` / ``em_path_batch``): time-stepped
  X_{k+1} = X_k + sqrt(dt) N(0, I_d), which also carry the exit time and
  left-endpoint Riemann sums of registered integrands along the path,
  i.e. the ingredients of the stopped Feynman-Kac functional
  e_w(tau_D) = exp(int_0^{tau_D} w(X_s) ds).

Exit detection for EM is first-exterior-position (projected), which biases
the exit time up by O(sqrt(dt)). A Brownian-bridge crossing test between
consecutive interior positions is available behind ``bridge=True``
(default off); it reduces the bias to O(dt). Bridge exits are assigned
time (k + 1/2) dt and a half-step occupation contribution.

Randomness is counter-based: every stream is a Philox generator keyed by
(master_seed, stream_key), so identical keys reproduce identical samples
regardless of execution order or thread placement.
"""

from __future__ import annotations

import hashlib
import struct
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np

from .errors import InputError, NumericalError
from .geometry import DomainGeometry

STEP_CAP = 10**6

Integrand = Callable[[np.ndarray], np.ndarray]  # (m, d) points -> (m,) values


# ---------------------------------------------------------------------------
# Reproducible streams


@dataclass(frozen=True)
class RngStream:
    """Counter-based random stream addressed by (master_seed, stream_key).

    The key is conventionally (purpose, point index, iteration index,
    replicate index); shorter tuples are allowed. Batch samplers consume a
    whole stream for their batch and order results by replicate position.
    """

    master_seed: int
    stream_key: tuple = ()

    def keyed(self, purpose: str, point: int = 0, iteration: int = 0,
              replicate: int = 0) -> "RngStream":
        return RngStream(self.master_seed, (purpose, point, iteration, replicate))

    def child(self, *parts) -> "RngStream":
        return RngStream(self.master_seed, self.stream_key + parts)

    def generator(self) -> np.random.Generator:
        h = hashlib.blake2b(digest_size=16)
        h.update(struct.pack("<q", self.master_seed))
        for part in self.stream_key:
            if isinstance(part, str):
                raw = part.encode()
                h.update(b"s" + struct.pack("<I", len(raw)) + raw)
            elif isinstance(part, (int, np.integer)):
                h.update(b"i" + struct.pack("<q", int(part)))
            else:
                raise InputError(f"unsupported stream key part {part!r}")
        key = np.frombuffer(h.digest(), dtype="<u8")
        return np.random.Generator(np.random.Philox(key=key))


def uniform_sphere(gen: np.random.Generator, n: int, d: int) -> np.ndarray:
    """n points uniform on the unit sphere S^{d-1}."""
    v = gen.standard_normal((n, d))
    v /= np.linalg.norm(v, axis=1, keepdims=True)
    return v


# ---------------------------------------------------------------------------
# Samples


@dataclass(frozen=True)
class ExitSample:
    exit_point: np.ndarray
    steps: int


@dataclass(frozen=True)
class PathSample:
    exit_point: np.ndarray
    exit_time: float
    occupation_integrals: Mapping[str, float] = field(default_factory=dict)


def feynman_kac_weight(sample: PathSample, label: str) -> float:
    """exp of the occupation integral for ``label``; in (0, 1] when the
    integrand is nonpositive."""
    try:
        return float(np.exp(sample.occupation_integrals[label]))
    except KeyError:
        raise InputError(f"no occupation integral registered as {label!r}") from None


# ---------------------------------------------------------------------------
# Walk on spheres


def wos_exit_batch(domain: DomainGeometry, x, shell: float,
                   rng: RngStream, n: int) -> tuple[np.ndarray, np.ndarray]:
    """n independent WoS exit points from x. Returns (points (n,d), steps (n,))."""
    x = np.asarray(x, dtype=float)
    sd0 = domain.signed_distance(x)
    if sd0 >= 0:
        raise InputError("walk-on-spheres requires a strictly interior start point")
    if shell <= 0:
        raise InputError("shell width must be positive")
    d = domain.dimension
    gen = rng.generator()

    pos = np.tile(x, (n, 1))
    steps = np.zeros(n, dtype=np.int64)
    out_pts = np.empty((n, d))
    out_steps = np.empty(n, dtype=np.int64)
    idx = np.arange(n)
    total = 0
    while idx.size:
        m = idx.size
        dist = -domain.signed_distance(pos[:m])
        done = dist <= shell
        if np.any(done):
            out_pts[idx[done]] = domain.project_to_boundary(pos[:m][done])
            out_steps[idx[done]] = steps[:m][done]
            keep = ~done
            nk = int(keep.sum())
            pos[:nk] = pos[:m][keep]
            steps[:nk] = steps[:m][keep]
            idx = idx[keep]
            if nk == 0:
                break
            m = nk
            dist = dist[keep]
        pos[:m] += dist[:, None] * uniform_sphere(gen, m, d)
        steps[:m] += 1
        total += 1
        if total > STEP_CAP:
            raise NumericalError(
                "walk-on-spheres exceeded the step cap; "
                "degenerate domain or shell width"
            )
    return out_pts, out_steps


def wos_exit(domain: DomainGeometry, x, shell: float, rng: RngStream) -> ExitSample:
    pts, steps = wos_exit_batch(domain, x, shell, rng, 1)
    return ExitSample(exit_point=pts[0], steps=int(steps[0]))


# ---------------------------------------------------------------------------
# Euler-Maruyama paths with occupation integrals


def em_path_batch(
    domain: DomainGeometry,
    x,
    dt: float,
    integrands: Sequence[tuple[str, Integrand]],
    rng: RngStream,
    n: int,
    bridge: bool = False,
    step_cap: int = STEP_CAP,
):
    """n EM paths from x until exit.

    Returns (exit_points (n,d), exit_times (n,), occ dict label -> (n,)).
    Occupation integrals are left-endpoint sums over pre-exit steps; the
    integrands are evaluated at interior positions only.
    """
    x = np.asarray(x, dtype=float)
    if domain.signed_distance(x) >= 0:
        raise InputError("EM paths require a strictly interior start point")
    if dt <= 0:
        raise InputError("dt must be positive")
    d = domain.dimension
    labels = [lab for lab, _ in integrands]
    if len(set(labels)) != len(labels):
        raise InputError("duplicate integrand labels")
    gen = rng.generator()
    sqdt = np.sqrt(dt)
    gap_cut = 20.0 * dt  # bridge crossing prob < 4e-18 beyond this

    pos = np.tile(x, (n, 1))
    tau = np.zeros(n)
    occ = {lab: np.zeros(n) for lab in labels}
    dist = np.full(n, max(-domain.signed_distance(x), 0.0))
    idx = np.arange(n)
    out_pts = np.empty((n, d))
    out_tau = np.empty(n)
    out_occ = {lab: np.empty(n) for lab in labels}

    k = 0
    while idx.size:
        m = idx.size
        if labels:
            try:
                w_here = {lab: np.asarray(fn(pos[:m]), dtype=float)
                          for lab, fn in integrands}
            except Exception as exc:
                raise type(exc)(
                    f"integrand evaluation failed at step {k} "
                    f"({m} live paths): {exc}"
                ) from exc
        pos[:m] += gen.standard_normal((m, d)) * sqdt
        sd = np.asarray(domain.signed_distance(pos[:m]))
        exited = sd >= 0.0
        tau[:m] += dt
        dnew = np.maximum(-sd, 0.0)

        crossed = np.zeros(m, dtype=bool)
        if bridge:
            gap = dist[:m] * dnew
            near = (gap < gap_cut) & ~exited
            nn = int(near.sum())
            if nn:
                u = gen.random(nn)
                hit = u < np.exp(-2.0 * gap[near] / dt)
                crossed[np.flatnonzero(near)[hit]] = True
                tau[:m][crossed] -= 0.5 * dt

        for lab in labels:
            w = w_here[lab]
            contrib = w * dt
            contrib[crossed] = 0.5 * dt * w[crossed]
            occ[lab][:m] += contrib

        done = exited | crossed
        if np.any(done):
            # bridge exits are still interior but within O(sqrt(dt)) of the
            # boundary, so projecting the landing point is accurate enough
            fin = np.flatnonzero(done)
            out_pts[idx[fin]] = domain.project_to_boundary(pos[:m][fin])
            out_tau[idx[fin]] = tau[:m][fin]
            for lab in labels:
                out_occ[lab][idx[fin]] = occ[lab][:m][fin]
            keep = ~done
            nk = int(keep.sum())
            pos[:nk] = pos[:m][keep]
            tau[:nk] = tau[:m][keep]
            dist[:nk] = dnew[keep]
            for lab in labels:
                occ[lab][:nk] = occ[lab][:m][keep]
            idx = idx[keep]
        else:
            dist[:m] = dnew
        k += 1
        if k > step_cap:
            raise NumericalError(
                f"EM path exceeded the step cap ({step_cap}); "
                "dt too small or degenerate domain"
            )
    return out_pts, out_tau, out_occ


def em_path(domain: DomainGeometry, x, dt: float,
            integrands: Sequence[tuple[str, Integrand]],
            rng: RngStream, bridge: bool = False) -> PathSample:
    pts, taus, occ = em_path_batch(domain, x, dt, integrands, rng, 1, bridge)
    return PathSample(
        exit_point=pts[0],
        exit_time=float(taus[0]),
        occupation_integrals={lab: float(v[0]) for lab, v in occ.items()},
    )


def boundary_sample(domain: DomainGeometry, n: int, rng: RngStream) -> np.ndarray:
    """n points on the boundary of D, used for sup/inf estimation of
    boundary data. Exact shapes are sampled by their natural surface
    measures; implicit shapes fall back to rejection near the boundary
    followed by projection."""
    from .geometry import Annulus, Ball, Box, Implicit

    gen = rng.generator()
    d = domain.dimension
    shape = domain.shape
    if isinstance(shape, Ball):
        return shape.center + shape.radius * uniform_sphere(gen, n, d)
    if isinstance(shape, Annulus):
        # split by surface area r^{d-1}
        w_out = shape.r_out ** (d - 1)
        w_in = shape.r_in ** (d - 1)
        n_out = int(round(n * w_out / (w_out + w_in)))
        pts = np.concatenate([
            shape.center + shape.r_out * uniform_sphere(gen, n_out, d),
            shape.center + shape.r_in * uniform_sphere(gen, n - n_out, d),
        ])
        return pts
    if isinstance(shape, Box):
        widths = shape.hi - shape.lo
        areas = np.array([
            np.prod(np.delete(widths, i)) for i in range(d) for _ in (0, 1)
        ])
        faces = gen.choice(2 * d, size=n, p=areas / areas.sum())
        pts = shape.lo + gen.random((n, d)) * widths
        for f in range(2 * d):
            axis, side = divmod(f, 2)
            m = faces == f
            pts[m, axis] = shape.lo[axis] if side == 0 else shape.hi[axis]
        return pts
    if isinstance(shape, Implicit):
        out = []
        lo, hi = domain.bounding_box()
        band = 0.05 * domain.enclosing_radius
        guard = 0
        while sum(len(o) for o in out) < n:
            cand = lo + gen.random((4 * n, d)) * (hi - lo)
            sd = np.asarray(domain.signed_distance(cand))
            near = np.abs(sd) <= band
            if near.any():
                out.append(np.array([
                    domain.project_to_boundary(c) for c in cand[near]
                ]))
            guard += 1
            if guard > 200:
                raise NumericalError(
                    "could not sample the implicit boundary; "
                    "check the signed-distance expression"
                )
        return np.concatenate(out)[:n]
    raise InputError(f"unsupported shape {type(shape).__name__}")


def default_shell(domain: DomainGeometry) -> float:
    return 1e-4 * domain.enclosing_radius


def default_dt(domain: DomainGeometry) -> float:
    # sqrt(dt) <= 1e-2 R
    return (1e-2 * domain.enclosing_radius) ** 2
