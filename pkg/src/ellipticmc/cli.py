"""Command-line driver.

    ellipticmc validate --problem p.json [--out DIR]
    ellipticmc solve    --problem p.json [--out DIR] [...]
    ellipticmc linear   --problem p.json [--out DIR]
    ellipticmc diagnose --problem p.json [--out DIR]

Exit codes: 0 ok, 1 input error, 2 hypothesis failure, 3 non-convergence.
Flag overrides (--seed, --grid-h, --paths, --dt, --tol, --max-iter) patch
the problem file's solver block; the effective configuration lands in
every output header. The worker pool size (--threads) never changes
numerical output because all randomness flows through keyed streams.
"""

from __future__ import annotations

import argparse
import dataclasses
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import diagnostics, io, linear, nonlinear, problemspec, sampling
from .errors import EllipticMCError, HypothesisViolation, InputError
from .sampling import RngStream

EXIT_OK = 0
EXIT_INPUT = 1
EXIT_HYPOTHESIS = 2
EXIT_NO_CONVERGENCE = 3


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ellipticmc", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("validate", "solve", "linear", "diagnose"):
        p = sub.add_parser(name)
        p.add_argument("--problem", required=True, help="problem file (JSON)")
        p.add_argument("--out", default=".", help="output directory")
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--threads", type=int, default=os.cpu_count() or 1)
        p.add_argument("--grid-h", type=float, default=None, dest="grid_h")
        p.add_argument("--paths", type=int, default=None)
        p.add_argument("--dt", type=float, default=None)
        p.add_argument("--tol", type=float, default=None)
        p.add_argument("--max-iter", type=int, default=None, dest="max_iter")
        p.add_argument("--force", action="store_true",
                       help="run even if validation fails")
    return parser


def _effective_solver(spec, args) -> problemspec.SolverConfig:
    overrides = {
        k: getattr(args, k)
        for k in ("seed", "grid_h", "paths", "dt", "tol", "max_iter")
        if getattr(args, k) is not None
    }
    return dataclasses.replace(spec.solver, **overrides)


def _meta(args, spec, solver) -> dict:
    cfg = dataclasses.asdict(solver)
    cfg["grid_h"] = cfg["grid_h"] or spec.domain.enclosing_radius / 4
    cfg["dt"] = cfg["dt"] or sampling.default_dt(spec.domain)
    return {
        "problem_sha256": io.file_sha256(args.problem),
        "seed": solver.seed,
        "command": args.command,
        "solver": cfg,
    }


def _load(args):
    spec = problemspec.load(args.problem)
    solver = _effective_solver(spec, args)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    return spec, solver, out_dir


def run_validate(args) -> int:
    spec, solver, out_dir = _load(args)
    report = problemspec.validate(spec, rng=RngStream(solver.seed))
    io.write_json(out_dir / "validation.json", report.record(),
                  _meta(args, spec, solver))
    for item in report.items:
        print(f"{'PASS' if item.ok else 'FAIL'}  {item.name}: {item.detail}")
    return EXIT_OK if report.passed else EXIT_HYPOTHESIS


def run_solve(args) -> int:
    spec, solver, out_dir = _load(args)
    rng = RngStream(solver.seed)
    report = problemspec.validate(spec, rng=rng)
    io.write_json(out_dir / "validation.json", report.record(),
                  _meta(args, spec, solver))
    if not report.passed:
        if not args.force:
            print("validation failed; rerun with --force to solve anyway",
                  file=sys.stderr)
            return EXIT_HYPOTHESIS
        print("=" * 60, file=sys.stderr)
        print("WARNING: validation failed; results are outside the",
              file=sys.stderr)
        print("contraction guarantee and may be meaningless.", file=sys.stderr)
        print("=" * 60, file=sys.stderr)

    t0 = time.monotonic()
    field, trace = nonlinear.picard_solve(
        spec, spec.domain,
        init="m_tilde",
        tol=solver.tol,
        max_iter=solver.max_iter,
        n_per_point=solver.paths,
        dt=solver.dt,
        rng=rng,
        grid_h=solver.grid_h,
        growth=solver.growth,
        lam=report.lam,
        report=report.contraction,
        override=args.force,
        bridge=solver.bridge,
        threads=args.threads,
    )
    wall = time.monotonic() - t0

    meta = _meta(args, spec, solver)
    io.write_field_csv(out_dir / "field.csv", field, meta)
    io.write_records(out_dir / "trace.jsonl", trace.records(), meta)
    summary = {
        "C_tilde": report.contraction.C_tilde if report.contraction else None,
        "iterations": trace.iterations,
        "final_residual": trace.sup_diffs[-1] if trace.sup_diffs else None,
        "converged": trace.converged,
    }
    io.write_json(out_dir / "summary.json", summary, meta)
    # wall time goes to the console only: output files must be bit-identical
    # across reruns
    print(f"solve: {trace.iterations} iterations, "
          f"final sup-diff {summary['final_residual']:.3g}, "
          f"converged={trace.converged}, wall {wall:.1f}s")
    return EXIT_OK if trace.converged else EXIT_NO_CONVERGENCE


def run_linear(args) -> int:
    spec, solver, out_dir = _load(args)
    rng = RngStream(solver.seed)
    grid_h = solver.grid_h or spec.domain.enclosing_radius / 4
    pts = spec.domain.interior_grid(grid_h)
    field = linear.field_harmonic_extension(
        spec.domain, spec.phi, pts, solver.paths, "wos", rng,
        threads=args.threads, purpose="linear",
    )
    io.write_field_csv(out_dir / "linear_field.csv", field,
                       _meta(args, spec, solver))
    print(f"linear: harmonic extension of phi on {len(pts)} grid points")
    return EXIT_OK


def _mc_estimator(domain, f, n, rng, purpose):
    """Sequential, deterministically keyed batch estimator for sequence
    evaluation (one stream per call, one child per point)."""
    calls = [0]

    def estimate(pts: np.ndarray) -> np.ndarray:
        pts = np.atleast_2d(pts)
        call_id = calls[0]
        calls[0] += 1
        vals = []
        for j, p in enumerate(pts):
            est = linear.harmonic_extension(
                domain, f, p, n, "wos",
                rng.child(purpose, call_id, j),
            )
            vals.append(est.value)
        return np.array(vals)

    return estimate


def run_diagnose(args) -> int:
    spec, solver, out_dir = _load(args)
    rng = RngStream(solver.seed)
    meta = _meta(args, spec, solver)
    domain = spec.domain
    dcfg = spec.diag

    # Green-tight norm and Kato profile of the dominating factor U
    quad = diagnostics.QuadratureGrid.build(domain, domain.enclosing_radius / 20)
    norm_U = diagnostics.green_tight_norm(domain, spec.U, quad)
    profile = diagnostics.kato_profile(
        spec.U, 0.5 * domain.enclosing_radius, 4, domain, quad
    )
    io.write_json(out_dir / "green_tight.json", {
        "green_tight_norm_U": norm_U,
        "kato_profile": [{"alpha": a, "value": v} for a, v in profile],
        "kato_decreasing": all(
            profile[i + 1][1] < profile[i][1] for i in range(len(profile) - 1)
        ),
    }, meta)

    # controlled convergence at declared or seeded boundary points
    seq_cfg = dcfg.sequences
    if seq_cfg.boundary_points is not None:
        points = [np.asarray(p, dtype=float) for p in seq_cfg.boundary_points]
    else:
        points = list(sampling.boundary_sample(
            domain, seq_cfg.n_points, rng.child("diagnose-points")
        ))
    sequences = [
        diagnostics.approach_sequence(
            domain, y, seq_cfg.n_terms, seq_cfg.start, seq_cfg.decay
        )
        for y in points
    ]
    h_est = _mc_estimator(domain, spec.phi, solver.paths, rng, "diag-h")
    if dcfg.discontinuity_set.empty:
        k_est = lambda pts: np.zeros(len(np.atleast_2d(pts)))
    else:
        g, _ = diagnostics.control_function_heuristic(
            spec.phi, dcfg.discontinuity_set, domain,
            dcfg.control_exponent, dcfg.control_cap,
            n_per_point=solver.paths, rng=rng.child("diag-control-field"),
        )
        k_est = _mc_estimator(domain, g, solver.paths, rng, "diag-k")
    reports = diagnostics.controlled_convergence_check(
        h_est, k_est, spec.phi, points, sequences,
        tolerance=dcfg.tolerance, K_threshold=dcfg.K_threshold, domain=domain,
    )
    io.write_records(out_dir / "controlled_convergence.jsonl",
                     (r.record() for r in reports), meta)

    # weak residual of the solved field (reuse an existing field.csv if present)
    field_path = out_dir / "field.csv"
    grid_h = solver.grid_h or domain.enclosing_radius / 4
    if field_path.exists():
        field = io.read_field_csv(field_path)
    else:
        vreport = problemspec.validate(spec, rng=rng)
        if not vreport.passed and not args.force:
            print("validation failed; cannot solve for a field to diagnose",
                  file=sys.stderr)
            return EXIT_HYPOTHESIS
        field, _ = nonlinear.picard_solve(
            spec, domain, tol=solver.tol, max_iter=solver.max_iter,
            n_per_point=solver.paths, dt=solver.dt, rng=rng,
            grid_h=grid_h, lam=vreport.lam, report=vreport.contraction,
            override=args.force, bridge=solver.bridge, threads=args.threads,
        )
    bumps = diagnostics.default_bumps(domain, field.points)
    residuals = diagnostics.weak_residual(
        field, spec.F, bumps, grid_h, domain,
        dt_bias=0.6 * np.sqrt(solver.dt or sampling.default_dt(domain)),
    )
    io.write_records(out_dir / "weak_residuals.jsonl",
                     (r.record() for r in residuals), meta)

    n_pass = sum(r.passed for r in reports)
    print(f"diagnose: ||U||_D = {norm_U:.4g}; "
          f"{n_pass}/{len(reports)} controlled-convergence checks passed; "
          f"{sum(r.ok for r in residuals)}/{len(residuals)} weak residuals "
          "within budget")
    return EXIT_OK


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    runner = {
        "validate": run_validate,
        "solve": run_solve,
        "linear": run_linear,
        "diagnose": run_diagnose,
    }[args.command]
    try:
        return runner(args)
    except HypothesisViolation as exc:
        print(f"hypothesis failure: {exc}", file=sys.stderr)
        return EXIT_HYPOTHESIS
    except (EllipticMCError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
