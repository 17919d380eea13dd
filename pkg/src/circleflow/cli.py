"""Command-line front end.

Exit codes: 0 success/converged, 1 input error, 2 non-convergence or failed check.
"""

from __future__ import annotations

import argparse
import logging
import math
import sys
from pathlib import Path

import numpy as np

from . import analysis, io
from .complex import HALF_PI, KINDS, ComplexError, extract_ball, lattice_generator
from .flow import FlowConfig, FlowTrace, LevelStopped, integrate_finite, solve_exhaustion
from .geometry import DomainError, curvatures, u_from_radius
from .plot import emit_plot
from .variational import newton_solve

log = logging.getLogger("circleflow")

EXIT_OK, EXIT_INPUT, EXIT_FAIL = 0, 1, 2


def _common(p: argparse.ArgumentParser, targets=True, solver=False):
    p.add_argument("--input", help="complex JSON file")
    p.add_argument("--kind", choices=[k for k in KINDS if k != "custom"], help="generate a lattice ball instead of reading --input")
    p.add_argument("--n", type=int, help="ball radius for --kind")
    p.add_argument("--root", help="lattice root vertex id (default 0,0)")
    p.add_argument("--theta-const", type=float, default=HALF_PI, help="edge angle for generated lattices (radians)")
    if targets:
        g = p.add_mutually_exclusive_group()
        g.add_argument("--target-const", type=float, help="constant prescribed curvature")
        g.add_argument("--target-file", help="JSON map {vertex_id: T_hat}")
    r = p.add_mutually_exclusive_group()
    r.add_argument("--r0-const", type=float, help="constant initial radius in (0, pi/2); default pi/4")
    r.add_argument("--r0-file", help="JSON map {vertex_id: r0}")
    if solver:
        p.add_argument("--dt", type=float, default=0.05)
        p.add_argument("--t-end", type=float, default=1e4)
        p.add_argument("--tol", type=float, default=1e-10)
        p.add_argument("--integrator", choices=["euler", "rk4", "adaptive"], default="adaptive")
    p.add_argument("--out-dir", default=".", help="directory for outputs")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="circleflow", description="Circle patterns with prescribed total geodesic curvature.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="write a lattice ball as complex JSON")
    p.add_argument("--kind", choices=[k for k in KINDS if k != "custom"], required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--root")
    p.add_argument("--theta-const", type=float, default=HALF_PI)
    p.add_argument("--out-dir", default=".")

    p = sub.add_parser("check", help="check conditions (S1)-(S3)")
    _common(p)
    p.add_argument("--mode", choices=["auto", "brute", "sampled"], default="auto")

    p = sub.add_parser("flow", help="integrate the curvature flow")
    _common(p, solver=True)

    p = sub.add_parser("newton", help="damped Newton on the convex potential")
    _common(p, solver=True)
    p.add_argument("--max-iter", type=int, default=100)

    p = sub.add_parser("exhaust", help="truncated flows on nested lattice balls")
    p.add_argument("--kind", choices=[k for k in KINDS if k != "custom"], required=True)
    p.add_argument("--n", type=int, required=True, help="largest ball radius")
    p.add_argument("--n-min", type=int, help="smallest ball radius (default window radius + 1)")
    p.add_argument("--window-radius", type=int, default=0)
    p.add_argument("--root")
    p.add_argument("--theta-const", type=float, default=HALF_PI)
    p.add_argument("--target-const", type=float, required=True)
    p.add_argument("--r0-const", type=float)
    p.add_argument("--dt", type=float, default=0.05)
    p.add_argument("--t-end", type=float, default=5.0, help="horizon tau")
    p.add_argument("--integrator", choices=["euler", "rk4", "adaptive"], default="adaptive")
    p.add_argument("--out-dir", default=".")

    p = sub.add_parser("validate", help="finite-difference check of the curvature Jacobian")
    _common(p, targets=False)
    p.add_argument("--step", type=float, default=1e-6)
    p.add_argument("--tol", type=float, default=1e-6)
    return parser


# --- argument resolution --------------------------------------------------------


def _generator(args):
    return lattice_generator(args.kind, args.root, args.theta_const)


def _complex(args):
    if args.input and args.kind:
        raise io.InputError("give either --input or --kind, not both")
    if args.input:
        return io.read_complex(args.input)
    if args.kind:
        if args.n is None:
            raise io.InputError("--kind needs --n")
        return extract_ball(_generator(args), args.n)
    raise io.InputError("need --input or --kind/--n")


def _targets(args, cx):
    if getattr(args, "target_file", None):
        return io.read_vertex_map(args.target_file, cx, "target")
    if args.target_const is None:
        raise io.InputError("need --target-const or --target-file")
    if not math.isfinite(args.target_const):
        raise io.InputError("--target-const must be finite")
    return np.full(cx.n_vertices, args.target_const)


def _r0_const(args) -> float:
    r0 = HALF_PI / 2 if args.r0_const is None else args.r0_const
    if not (0 < r0 < HALF_PI):
        raise io.InputError(f"--r0-const must lie in (0, pi/2), got {r0!r}")
    return r0


def _initial_u(args, cx) -> np.ndarray:
    if getattr(args, "r0_file", None):
        r = io.read_vertex_map(args.r0_file, cx, "initial radius")
        bad = np.flatnonzero(~((r > 0) & (r < HALF_PI)))
        if bad.size:
            raise io.InputError(f"{args.r0_file}: field {cx.vertex_ids[bad[0]]!r}: radius must lie in (0, pi/2)")
        return u_from_radius(r)
    return np.full(cx.n_vertices, float(u_from_radius(_r0_const(args))))


def _config(args) -> FlowConfig:
    try:
        return FlowConfig(integrator=args.integrator, dt=args.dt, t_end=args.t_end, residual_tol=getattr(args, "tol", 1e-10))
    except ValueError as exc:
        raise io.InputError(str(exc)) from None


def _out(args) -> Path:
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


# --- commands -------------------------------------------------------------------


def cmd_gen(args) -> int:
    if args.n < 0:
        raise io.InputError("--n must be >= 0")
    cx = extract_ball(_generator(args), args.n)
    path = io.write_complex(cx, _out(args) / "complex.json")
    print(f"{path}: {cx.n_vertices} vertices, {cx.n_edges} edges")
    return EXIT_OK


def cmd_check(args) -> int:
    cx = _complex(args)
    tv = _targets(args, cx)
    state0 = _initial_u(args, cx) if (args.r0_const is not None or args.r0_file) else None
    mode = args.mode
    if mode == "auto":
        mode = "brute" if cx.n_vertices <= analysis.BRUTE_MAX_VERTICES else "sampled"
    report = analysis.check_conditions(cx, tv, state0, mode=mode)
    path = io.write_json(report.to_json(), _out(args) / "condition_report.json")
    if report.ok:
        print(f"{path}: conditions hold (min S2 slack {report.s2_min_slack})")
        return EXIT_OK
    if not report.s1_ok:
        print(f"S1 fails at vertex {report.s1_violation!r}")
    if not report.s2_ok:
        print(f"S2 fails at U = {report.s2_violation} (slack {report.s2_slack:.6g})")
    if report.s3_ok is False:
        print(f"S3 fails at vertex {report.s3_violation!r}")
    return EXIT_FAIL


def _write_solver_outputs(out: Path, trace: FlowTrace, payload: dict, title: str):
    io.write_trace_csv(trace, out / "trace.csv")
    io.write_json(payload, out / "report.json")
    emit_plot(trace, out / "residual.svg", title)


def cmd_flow(args) -> int:
    cx = _complex(args)
    tv = _targets(args, cx)
    u0 = _initial_u(args, cx)
    trace, report = integrate_finite(cx, tv, u0, frozen=cx.boundary, config=_config(args))
    diag = analysis.verify_trace(trace, tv, cx, eps=10 * max(args.tol, 1e-10))
    payload = {"report": report.to_json(), "diagnostics": diag.to_json()}
    _write_solver_outputs(_out(args), trace, payload, "flow: residual sup-norm")
    print(f"flow {report.status}: {report.steps} steps, t={report.t_final:.6g}, residual {report.final_residual:.3e}")
    return EXIT_OK if report.converged else EXIT_FAIL


def cmd_newton(args) -> int:
    cx = _complex(args)
    tv = _targets(args, cx)
    u0 = _initial_u(args, cx)
    iterates = []
    state, report = newton_solve(
        cx, tv, u0, tol=args.tol, max_iter=args.max_iter, frozen=cx.boundary,
        callback=lambda k, s: iterates.append(s.u.copy()),
    )
    U = np.asarray(iterates)
    T = np.asarray([curvatures(u, cx) for u in U])
    fz = cx.mask(cx.boundary)
    trace = FlowTrace(cx.vertex_ids, np.arange(len(U), dtype=float), U, T, tv, fz, cx.theta_sum())
    _write_solver_outputs(_out(args), trace, {"report": report.to_json()}, "newton: residual sup-norm")
    print(f"newton {report.status}: {report.steps} iterations, residual {report.final_residual:.3e}")
    return EXIT_OK if report.converged else EXIT_FAIL


def cmd_exhaust(args) -> int:
    gen = _generator(args)
    n_min = args.window_radius + 1 if args.n_min is None else args.n_min
    if args.n < n_min:
        raise io.InputError(f"--n ({args.n}) must be >= the smallest level ({n_min})")
    u0 = float(u_from_radius(_r0_const(args)))
    config = FlowConfig(integrator=args.integrator, dt=args.dt, t_end=args.t_end)
    out = _out(args)
    try:
        report = solve_exhaustion(gen, args.target_const, u0, args.t_end, range(n_min, args.n + 1), args.window_radius, config)
    except LevelStopped as exc:
        io.write_json({"error": str(exc), "level": exc.n, "report": exc.report.to_json()}, out / "exhaustion.json")
        print(str(exc))
        return EXIT_FAIL
    io.write_json(report.to_json(), out / "exhaustion.json")
    finest = report.levels[-1].trace
    io.write_trace_csv(finest, out / "trace.csv")
    emit_plot(finest, out / "residual.svg", f"exhaustion n={report.levels[-1].n}: residual sup-norm")
    for a, b, d in report.comparisons:
        print(f"sup |u[{a}] - u[{b}]| on window = {d:.3e}")
    return EXIT_OK


def cmd_validate(args) -> int:
    cx = _complex(args)
    u0 = _initial_u(args, cx)
    try:
        res = analysis.fd_validate(cx, u0, step=args.step, tol=args.tol)
    except ValueError as exc:
        raise io.InputError(str(exc)) from None
    io.write_json(res.to_json(), _out(args) / "validation.json")
    print(f"jacobian vs finite differences: max deviation {res.max_deviation:.3e} ({'pass' if res.passed else 'FAIL'})")
    return EXIT_OK if res.passed else EXIT_FAIL


COMMANDS = {
    "gen": cmd_gen,
    "check": cmd_check,
    "flow": cmd_flow,
    "newton": cmd_newton,
    "exhaust": cmd_exhaust,
    "validate": cmd_validate,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except (io.InputError, ComplexError, DomainError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
