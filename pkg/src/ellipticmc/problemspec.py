"""Problem instances: domain + F + U + phi + b, with hypothesis audits.

A problem file is a strict JSON document (unknown keys are fatal, keys are
case-sensitive):

    {
      "dimension": 3,
      "domain":   {"shape": "ball", "center": [0,0,0], "radius": 1.0},
      "F":   "u^2",
      "U":   "2",
      "phi": "1",
      "b":   2.0,
      "solver":      {"grid_h": 0.5, "paths": 1000, "dt": 1e-4,
                      "tol": 0.01, "max_iter": 25, "seed": 0,
                      "bridge": false, "growth": 1.0},
      "diagnostics": {"discontinuity_set": [...], "sequences": {...},
                      "control": {"exponent": 1.0, "cap": 1e6},
                      "K_threshold": 1e3, "tolerance": 0.05}
    }

``b`` may be omitted or "inf" (then the gate sup phi < b is vacuous).
Boundary data phi is written in the ambient coordinates x1..xd. The
standing hypotheses (0 <= F(x,u) <= U(x) u, U > 0, phi >= 0 bounded,
sup phi < b) cannot be checked symbolically for expressions, so
``validate`` audits them statistically on seeded samples and records the
seed and sample sizes in the report.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field as dc_field
from pathlib import Path
from typing import Optional, Union

import numpy as np

from . import diagnostics, exprlang, geometry, nonlinear, sampling
from .errors import ConfigurationError, HypothesisViolation, InputError
from .geometry import DomainGeometry
from .sampling import RngStream


@dataclass(frozen=True)
class SolverConfig:
    grid_h: Optional[float] = None     # default: R / 4
    paths: int = 1000
    dt: Optional[float] = None         # default: (1e-2 R)^2
    tol: float = 1e-2
    max_iter: int = 25
    seed: int = 0
    bridge: bool = False
    growth: float = 1.0


@dataclass(frozen=True)
class SequenceConfig:
    boundary_points: Optional[tuple] = None   # default: seeded random points
    n_terms: int = 12
    start: float = 0.25
    decay: float = 0.5
    n_points: int = 5


@dataclass(frozen=True)
class DiagnosticsConfig:
    discontinuity_set: diagnostics.DiscontinuitySet = dc_field(
        default_factory=diagnostics.DiscontinuitySet
    )
    sequences: SequenceConfig = dc_field(default_factory=SequenceConfig)
    control_exponent: float = 1.0
    control_cap: float = 1e6
    K_threshold: float = 1e3
    tolerance: float = 0.05


@dataclass(frozen=True)
class ProblemSpec:
    dimension: int
    domain: DomainGeometry
    F_src: str
    U_src: str
    phi_src: str
    b: float = math.inf
    solver: SolverConfig = dc_field(default_factory=SolverConfig)
    diag: DiagnosticsConfig = dc_field(default_factory=DiagnosticsConfig)
    analytic_reference_src: Optional[str] = None
    F_ast: exprlang.ExprAst = None
    U_ast: exprlang.ExprAst = None
    phi_ast: exprlang.ExprAst = None

    def __post_init__(self):
        if self.F_ast is None:
            object.__setattr__(self, "F_ast", exprlang.parse(self.F_src, "F"))
        if self.U_ast is None:
            object.__setattr__(self, "U_ast", exprlang.parse(self.U_src, "U"))
        if self.phi_ast is None:
            object.__setattr__(self, "phi_ast", exprlang.parse(self.phi_src, "phi"))
        if not (self.b > 0):
            raise ConfigurationError("b must be positive (possibly infinite)")

    # -- expression evaluation with guaranteed (m,) shape --------------------

    def _eval(self, ast, pts: np.ndarray, u=None) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        out = exprlang.eval(ast, exprlang.point_bindings(pts, u))
        return np.broadcast_to(np.asarray(out, dtype=float), (len(pts),)).copy()

    def F(self, pts, u) -> np.ndarray:
        return self._eval(self.F_ast, pts, u)

    def U(self, pts) -> np.ndarray:
        return self._eval(self.U_ast, pts)

    def phi(self, pts) -> np.ndarray:
        return self._eval(self.phi_ast, pts)

    def analytic_reference(self, pts) -> Optional[np.ndarray]:
        if self.analytic_reference_src is None:
            return None
        ast = exprlang.parse(self.analytic_reference_src, "U")
        return self._eval(ast, pts)


# ---------------------------------------------------------------------------
# Strict schema loading


def _reject_unknown(obj: dict, allowed: set, path: str) -> None:
    for key in obj:
        if key not in allowed:
            raise ConfigurationError(f"unknown key {path}.{key!r}")


def _require(obj: dict, key: str, path: str):
    if key not in obj:
        raise ConfigurationError(f"missing required key {path}.{key!r}")
    return obj[key]


def _domain_from_dict(d: int, obj: dict) -> DomainGeometry:
    shape = _require(obj, "shape", "$.domain")
    if shape == "ball":
        _reject_unknown(obj, {"shape", "center", "radius"}, "$.domain")
        return geometry.ball(d, obj.get("center"), obj.get("radius", 1.0))
    if shape == "box":
        _reject_unknown(obj, {"shape", "lo", "hi"}, "$.domain")
        return geometry.box(d, _require(obj, "lo", "$.domain"),
                            _require(obj, "hi", "$.domain"))
    if shape == "annulus":
        _reject_unknown(obj, {"shape", "center", "r_in", "r_out"}, "$.domain")
        return geometry.annulus(d, obj.get("center"),
                                _require(obj, "r_in", "$.domain"),
                                _require(obj, "r_out", "$.domain"))
    if shape == "implicit":
        _reject_unknown(
            obj, {"shape", "expression", "enclosing_radius", "boundary_tolerance"},
            "$.domain",
        )
        return geometry.implicit(
            d, _require(obj, "expression", "$.domain"),
            obj.get("enclosing_radius"), obj.get("boundary_tolerance", 0.0),
        )
    raise ConfigurationError(f"unknown domain shape {shape!r}")


def _domain_to_dict(domain: DomainGeometry) -> dict:
    s = domain.shape
    if isinstance(s, geometry.Ball):
        return {"shape": "ball", "center": list(s.center), "radius": s.radius}
    if isinstance(s, geometry.Box):
        return {"shape": "box", "lo": list(s.lo), "hi": list(s.hi)}
    if isinstance(s, geometry.Annulus):
        return {"shape": "annulus", "center": list(s.center),
                "r_in": s.r_in, "r_out": s.r_out}
    return {"shape": "implicit", "expression": s.source,
            "enclosing_radius": s.radius,
            "boundary_tolerance": domain.boundary_tolerance}


def _solver_from_dict(obj: dict) -> SolverConfig:
    allowed = {"grid_h", "paths", "dt", "tol", "max_iter", "seed", "bridge", "growth"}
    _reject_unknown(obj, allowed, "$.solver")
    return SolverConfig(**{k: obj[k] for k in allowed if k in obj})


def _discontinuity_from_list(items: list) -> diagnostics.DiscontinuitySet:
    out = diagnostics.DiscontinuitySet()
    for i, item in enumerate(items):
        kind = _require(item, "type", f"$.diagnostics.discontinuity_set[{i}]")
        if kind == "circle":
            _reject_unknown(item, {"type", "center", "radius", "axis"},
                            f"$.diagnostics.discontinuity_set[{i}]")
            out = out + diagnostics.DiscontinuitySet.circle(
                item["center"], item["radius"], item["axis"]
            )
        elif kind == "points":
            _reject_unknown(item, {"type", "points"},
                            f"$.diagnostics.discontinuity_set[{i}]")
            out = out + diagnostics.DiscontinuitySet.from_points(item["points"])
        else:
            raise ConfigurationError(
                f"unknown discontinuity component type {kind!r}"
            )
    return out


def _discontinuity_to_list(S: diagnostics.DiscontinuitySet) -> list:
    out = []
    for comp in S.components:
        if comp[0] == "points":
            out.append({"type": "points",
                        "points": [list(p) for p in comp[1]]})
        else:
            out.append({"type": "circle", "center": list(comp[1]),
                        "radius": comp[2], "axis": comp[3]})
    return out


def _diag_from_dict(obj: dict) -> DiagnosticsConfig:
    allowed = {"discontinuity_set", "sequences", "control", "K_threshold", "tolerance"}
    _reject_unknown(obj, allowed, "$.diagnostics")
    kw = {}
    if "discontinuity_set" in obj:
        kw["discontinuity_set"] = _discontinuity_from_list(obj["discontinuity_set"])
    if "sequences" in obj:
        seq = obj["sequences"]
        seq_allowed = {"boundary_points", "n_terms", "start", "decay", "n_points"}
        _reject_unknown(seq, seq_allowed, "$.diagnostics.sequences")
        seq_kw = {k: seq[k] for k in seq_allowed if k in seq}
        if "boundary_points" in seq_kw:
            seq_kw["boundary_points"] = tuple(
                tuple(map(float, p)) for p in seq_kw["boundary_points"]
            )
        kw["sequences"] = SequenceConfig(**seq_kw)
    if "control" in obj:
        ctl = obj["control"]
        _reject_unknown(ctl, {"exponent", "cap"}, "$.diagnostics.control")
        if "exponent" in ctl:
            kw["control_exponent"] = ctl["exponent"]
        if "cap" in ctl:
            kw["control_cap"] = ctl["cap"]
    if "K_threshold" in obj:
        kw["K_threshold"] = obj["K_threshold"]
    if "tolerance" in obj:
        kw["tolerance"] = obj["tolerance"]
    return DiagnosticsConfig(**kw)


_TOP_KEYS = {
    "dimension", "domain", "F", "U", "phi", "b",
    "solver", "diagnostics", "analytic_reference",
}


def from_dict(obj: dict) -> ProblemSpec:
    _reject_unknown(obj, _TOP_KEYS, "$")
    d = _require(obj, "dimension", "$")
    if not isinstance(d, int) or isinstance(d, bool):
        raise ConfigurationError("$.dimension must be an integer")
    domain = _domain_from_dict(d, _require(obj, "domain", "$"))
    b_raw = obj.get("b", math.inf)
    b = math.inf if b_raw in ("inf", None) else float(b_raw)
    return ProblemSpec(
        dimension=d,
        domain=domain,
        F_src=_require(obj, "F", "$"),
        U_src=_require(obj, "U", "$"),
        phi_src=_require(obj, "phi", "$"),
        b=b,
        solver=_solver_from_dict(obj.get("solver", {})),
        diag=_diag_from_dict(obj.get("diagnostics", {})),
        analytic_reference_src=obj.get("analytic_reference"),
    )


def to_dict(spec: ProblemSpec) -> dict:
    """Canonical dict form; load(save(spec)) rebuilds an identical spec."""
    out = {
        "dimension": spec.dimension,
        "domain": _domain_to_dict(spec.domain),
        "F": spec.F_src,
        "U": spec.U_src,
        "phi": spec.phi_src,
        "b": "inf" if math.isinf(spec.b) else spec.b,
        "solver": {
            "grid_h": spec.solver.grid_h, "paths": spec.solver.paths,
            "dt": spec.solver.dt, "tol": spec.solver.tol,
            "max_iter": spec.solver.max_iter, "seed": spec.solver.seed,
            "bridge": spec.solver.bridge, "growth": spec.solver.growth,
        },
        "diagnostics": {
            "discontinuity_set": _discontinuity_to_list(spec.diag.discontinuity_set),
            "sequences": {
                "boundary_points": (
                    None if spec.diag.sequences.boundary_points is None
                    else [list(p) for p in spec.diag.sequences.boundary_points]
                ),
                "n_terms": spec.diag.sequences.n_terms,
                "start": spec.diag.sequences.start,
                "decay": spec.diag.sequences.decay,
                "n_points": spec.diag.sequences.n_points,
            },
            "control": {"exponent": spec.diag.control_exponent,
                        "cap": spec.diag.control_cap},
            "K_threshold": spec.diag.K_threshold,
            "tolerance": spec.diag.tolerance,
        },
    }
    if spec.analytic_reference_src is not None:
        out["analytic_reference"] = spec.analytic_reference_src
    # drop None-valued solver/sequence entries so defaults stay implicit
    out["solver"] = {k: v for k, v in out["solver"].items() if v is not None}
    seqs = out["diagnostics"]["sequences"]
    out["diagnostics"]["sequences"] = {k: v for k, v in seqs.items() if v is not None}
    return out


def load(path: Union[str, Path]) -> ProblemSpec:
    path = Path(path)
    try:
        obj = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ConfigurationError(f"problem file {path} is not valid JSON: {exc}")
    if not isinstance(obj, dict):
        raise ConfigurationError("problem file must contain a JSON object")
    return from_dict(obj)


def save(spec: ProblemSpec, path: Union[str, Path]) -> None:
    Path(path).write_text(
        json.dumps(to_dict(spec), indent=2, sort_keys=True) + "\n",
        encoding="utf-8",
    )


# ---------------------------------------------------------------------------
# Hypothesis audits


@dataclass(frozen=True)
class CheckResult:
    name: str
    ok: bool
    detail: str
    witness: Optional[list] = None


@dataclass
class ValidationReport:
    items: list
    seed: int
    sample_sizes: dict
    lam: Optional[nonlinear.LambdaSpace] = None
    lipschitz: Optional[float] = None
    contraction: Optional[nonlinear.ContractionReport] = None

    @property
    def passed(self) -> bool:
        return all(item.ok for item in self.items)

    def record(self) -> dict:
        return {
            "passed": self.passed,
            "seed": self.seed,
            "sample_sizes": self.sample_sizes,
            "checks": [
                {"name": i.name, "ok": i.ok, "detail": i.detail,
                 **({"witness": i.witness} if i.witness is not None else {})}
                for i in self.items
            ],
            **({"contraction": self.contraction.record()}
               if self.contraction else {}),
        }


def _interior_sample(domain: DomainGeometry, n: int, gen) -> np.ndarray:
    lo, hi = domain.bounding_box()
    out = []
    got = 0
    guard = 0
    while got < n:
        cand = lo + gen.random((2 * n, domain.dimension)) * (hi - lo)
        keep = np.asarray(domain.signed_distance(cand)) < 0
        out.append(cand[keep])
        got += int(keep.sum())
        guard += 1
        if guard > 500:
            raise ConfigurationError("interior rejection sampling failed; "
                                     "is the domain empty?")
    return np.concatenate(out)[:n]


def validate(
    spec: ProblemSpec,
    n_fu: int = 10_000,
    n_boundary: int = 4096,
    n_interior: int = 4096,
    rng: Optional[RngStream] = None,
) -> ValidationReport:
    """Audit the standing hypotheses and the contraction gate.

    Statistical audits use the given stream (default: the solver seed), so
    the report is reproducible; every failed check carries a witness.
    """
    if rng is None:
        rng = RngStream(spec.solver.seed)
    items = []
    domain = spec.domain
    gen = rng.child("validate").generator()

    # phi >= 0, bounded, sup phi < b
    ys = sampling.boundary_sample(domain, n_boundary, rng.child("validate-phi"))
    phi_vals = spec.phi(ys)
    finite = np.all(np.isfinite(phi_vals))
    if not finite or np.any(phi_vals < 0):
        j = int(np.argmin(phi_vals if finite else np.isfinite(phi_vals)))
        items.append(CheckResult(
            "phi_nonnegative_bounded", False,
            f"phi = {phi_vals[j]:g} at a sampled boundary point",
            list(ys[j]),
        ))
    else:
        items.append(CheckResult(
            "phi_nonnegative_bounded", True,
            f"phi in [{phi_vals.min():g}, {phi_vals.max():g}] "
            f"on {n_boundary} boundary samples", None,
        ))
    sup_phi = float(phi_vals.max())
    items.append(CheckResult(
        "sup_phi_below_b", bool(sup_phi < spec.b),
        f"sup phi = {sup_phi:g} vs b = {spec.b:g}", None,
    ))

    # U > 0 on D
    xs = _interior_sample(domain, n_interior, gen)
    u_dom = spec.U(xs)
    if np.any(u_dom <= 0) or not np.all(np.isfinite(u_dom)):
        j = int(np.argmin(u_dom))
        items.append(CheckResult(
            "U_positive", False, f"U = {u_dom[j]:g} at an interior point",
            list(xs[j]),
        ))
    else:
        items.append(CheckResult(
            "U_positive", True,
            f"U in [{u_dom.min():g}, {u_dom.max():g}] on {n_interior} samples",
            None,
        ))

    # 0 <= F(x, u) <= U(x) u on D x (0, b)
    xf = _interior_sample(domain, n_fu, gen)
    u_hi = spec.b if math.isfinite(spec.b) else max(2.0 * sup_phi, 1.0)
    uf = gen.random(n_fu) * u_hi
    uf = np.maximum(uf, 1e-12 * u_hi)
    f_vals = spec.F(xf, uf)
    bound = spec.U(xf) * uf
    bad = (f_vals < -1e-12) | (f_vals > bound * (1 + 1e-9) + 1e-12)
    if np.any(bad):
        j = int(np.flatnonzero(bad)[0])
        items.append(CheckResult(
            "F_nonneg_dominated", False,
            f"F = {f_vals[j]:g} outside [0, U u] = [0, {bound[j]:g}] "
            f"at u = {uf[j]:g}",
            list(xf[j]) + [float(uf[j])],
        ))
    else:
        items.append(CheckResult(
            "F_nonneg_dominated", True,
            f"0 <= F <= U u on {n_fu} samples of D x (0, "
            f"{'b' if math.isfinite(spec.b) else f'{u_hi:g}'})", None,
        ))

    # gamma_0 > 0, lambda bounds, Lipschitz constant, contraction condition
    lam = lipschitz = contraction = None
    try:
        lam = nonlinear.lambda_bounds(
            spec, domain, boundary_n=n_boundary, rng=rng.child("validate-lam")
        )
        items.append(CheckResult(
            "gamma0_positive", True,
            f"gamma_0 = {lam.gamma0:g}, beta = {lam.beta:g}, "
            f"Lambda = [{lam.m:g}, {lam.m_tilde:g}]", None,
        ))
    except HypothesisViolation as exc:
        items.append(CheckResult("gamma0_positive", False, str(exc), None))

    if lam is not None:
        xs_lip = nonlinear.default_lipschitz_x_samples(
            domain, rng.child("validate-lip")
        )
        lipschitz = nonlinear.lipschitz_constant(spec, lam, xs_lip)
        contraction = nonlinear.contraction_report(spec, domain, lipschitz, lam)
        items.append(CheckResult(
            "contraction_condition", contraction.condition_ok,
            f"C = {contraction.C:g}, C_tilde = {contraction.C_tilde:g} "
            f"(need sup phi < d / (R^2 C) = "
            f"{math.inf if contraction.C == 0 else contraction.d / (contraction.R**2 * contraction.C):g})",
            None,
        ))

    return ValidationReport(
        items=items,
        seed=rng.master_seed,
        sample_sizes={"F_audit": n_fu, "boundary": n_boundary,
                      "interior": n_interior},
        lam=lam,
        lipschitz=lipschitz,
        contraction=contraction,
    )
