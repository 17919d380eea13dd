"""Combinatorial Ricci flow ``du_i/dt = -(T_i - T_hat_i)`` and its exhaustion scheme.

Integration happens in ``u = ln cot r`` so radii stay in (0, pi/2) without
clamping.  Frozen vertices keep their initial value for the whole run, which
is how a finite ball of an infinite complex is integrated: the outer ring is
held fixed while every interior vertex sees its complete star.
"""

from __future__ import annotations

import logging
import time
from dataclasses import asdict, dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np

from .complex import ComplexError, ComplexTopology, InfiniteComplexGenerator, TargetCurvature, extract_ball
from .geometry import PatternState, as_u, assemble_jacobian, curvatures, radius_from_u

log = logging.getLogger(__name__)

INTEGRATORS = ("euler", "rk4", "adaptive")
CONVERGED, HORIZON_REACHED, GUARD_TRIPPED = "converged", "horizon_reached", "guard_tripped"
EXHAUSTION_SAMPLES = 64


class LevelStopped(RuntimeError):
    """A truncated flow stopped (guard trip) before reaching the exhaustion horizon."""

    def __init__(self, n: int, report: "SolveReport"):
        super().__init__(f"level {n} stopped at t={report.t_final:g} before tau ({report.status})")
        self.n = n
        self.report = report


@dataclass(frozen=True)
class FlowConfig:
    integrator: str = "adaptive"
    dt: float = 0.05
    t_end: float = 1e4
    residual_tol: float = 1e-10
    u_guard: float = 50.0
    record_every: int = 1
    # upper cap for adaptive steps; matters only where the Jacobian bound is loose
    dt_max: float = 1.0

    def __post_init__(self):
        if self.integrator not in INTEGRATORS:
            raise ValueError(f"unknown integrator {self.integrator!r}; expected one of {', '.join(INTEGRATORS)}")
        for name in ("dt", "t_end", "residual_tol", "u_guard", "dt_max"):
            val = getattr(self, name)
            if not (val > 0 and np.isfinite(val)):
                raise ValueError(f"{name} must be positive and finite, got {val!r}")
        if int(self.record_every) < 1:
            raise ValueError("record_every must be >= 1")


def target_values(targets, cx: ComplexTopology) -> np.ndarray:
    t = targets.values if isinstance(targets, TargetCurvature) else np.asarray(targets, dtype=float)
    if t.shape != (cx.n_vertices,):
        raise ComplexError(f"targets have {t.size} entries but the complex has {cx.n_vertices} vertices")
    return t


def frozen_mask(frozen, cx: ComplexTopology) -> np.ndarray:
    if frozen is None:
        return np.zeros(cx.n_vertices, dtype=bool)
    if isinstance(frozen, np.ndarray) and frozen.dtype == bool:
        if frozen.shape != (cx.n_vertices,):
            raise ComplexError("frozen mask does not match the complex")
        return frozen.copy()
    return cx.mask(frozen)


def residual(state, cx: ComplexTopology, targets) -> np.ndarray:
    """Per-vertex ``T_i - T_hat_i``; also the gradient of the potential."""
    return curvatures(as_u(state, cx), cx) - target_values(targets, cx)


def _field(u, cx, tv, frozen):
    f = tv - curvatures(u, cx)
    if not np.all(np.isfinite(f)):
        raise FloatingPointError("non-finite flow field")
    f[frozen] = 0.0
    return f


def _advance(u, f0, h, cx, tv, frozen, method):
    if method == "euler":
        return u + h * f0
    k2 = _field(u + 0.5 * h * f0, cx, tv, frozen)
    k3 = _field(u + 0.5 * h * k2, cx, tv, frozen)
    k4 = _field(u + h * k3, cx, tv, frozen)
    return u + (h / 6.0) * (f0 + 2.0 * k2 + 2.0 * k3 + k4)


def step(state, cx: ComplexTopology, targets, dt: float, method: str = "euler", frozen=None) -> PatternState:
    """One explicit Euler or classical RK4 step of the flow."""
    if not dt > 0:
        raise ValueError(f"dt must be positive, got {dt!r}")
    if method not in ("euler", "rk4"):
        raise ValueError(f"unknown step method {method!r}")
    u = as_u(state, cx)
    tv = target_values(targets, cx)
    fz = frozen_mask(frozen, cx)
    new = _advance(u, _field(u, cx, tv, fz), dt, cx, tv, fz, method)
    new[fz] = u[fz]
    return PatternState(new)


def stable_dt(u, cx: ComplexTopology, active=None) -> float:
    """0.5 / max_i sum_j |L_ij| over active rows; inf when the complex has no edges."""
    L = assemble_jacobian(u, cx)
    rows = np.asarray(abs(L).sum(axis=1)).ravel()
    if active is not None:
        rows = rows[active]
    m = rows.max() if rows.size else 0.0
    return 0.5 / m if m > 0 else np.inf


@dataclass
class FlowTrace:
    """Sampled flow history; row ``k`` of ``u`` and ``T`` belongs to ``times[k]``."""

    vertex_ids: tuple
    times: np.ndarray
    u: np.ndarray
    T: np.ndarray
    targets: np.ndarray
    frozen: np.ndarray
    theta_sum: np.ndarray | None = None

    def __len__(self):
        return len(self.times)

    @property
    def residual(self) -> np.ndarray:
        return self.T - self.targets

    @property
    def residual_norm(self) -> np.ndarray:
        active = ~self.frozen
        if not active.any():
            return np.zeros(len(self.times))
        return np.abs(self.residual[:, active]).max(axis=1)

    @property
    def r(self) -> np.ndarray:
        return radius_from_u(self.u)

    def state(self, k: int) -> PatternState:
        return PatternState(self.u[k])

    @property
    def final(self) -> PatternState:
        return self.state(-1)


@dataclass
class SolveReport:
    status: str
    steps: int
    final_residual: float
    wall_time: float
    t_final: float = 0.0
    method: str = ""
    extra: dict = field(default_factory=dict)

    @property
    def converged(self) -> bool:
        return self.status == CONVERGED

    def to_json(self) -> dict:
        return asdict(self)


class _Recorder:
    def __init__(self):
        self.t, self.u, self.T = [], [], []

    def add(self, t, u, T):
        self.t.append(t)
        self.u.append(u.copy())
        self.T.append(T.copy())

    def trace(self, cx, tv, frozen) -> FlowTrace:
        return FlowTrace(
            vertex_ids=cx.vertex_ids,
            times=np.asarray(self.t, dtype=float),
            u=np.asarray(self.u, dtype=float).reshape(len(self.t), cx.n_vertices),
            T=np.asarray(self.T, dtype=float).reshape(len(self.t), cx.n_vertices),
            targets=tv.copy(),
            frozen=frozen.copy(),
            theta_sum=cx.theta_sum(),
        )


def integrate_finite(
    cx: ComplexTopology,
    targets,
    init,
    frozen=(),
    config: FlowConfig | None = None,
    sample_times: Sequence[float] | None = None,
    stop_on_converge: bool = True,
) -> tuple[FlowTrace, SolveReport]:
    """Integrate the flow with ``frozen`` vertices held at their initial values.

    Stops on ``||T - T_hat||_inf <= residual_tol`` over the free vertices,
    at ``t_end``, or as soon as some ``|u_i|`` exceeds ``u_guard``; a guard
    trip is reported in the status rather than raised.  ``sample_times``
    forces the integrator to land on (and record) those times exactly.
    """
    config = config or FlowConfig()
    tic = time.perf_counter()
    tv = target_values(targets, cx)
    fz = frozen_mask(frozen, cx)
    active = ~fz
    u = np.array(as_u(init, cx), dtype=float)
    u0_frozen = u[fz].copy()
    method = "rk4" if config.integrator == "adaptive" else config.integrator

    forced = np.unique(np.asarray(sample_times if sample_times is not None else [], dtype=float))
    forced = forced[(forced > 0) & (forced <= config.t_end)]
    fi = 0

    rec = _Recorder()
    T = curvatures(u, cx)
    f = np.where(fz, 0.0, tv - T)
    norm = float(np.abs(f[active]).max()) if active.any() else 0.0
    rec.add(0.0, u, T)

    t, steps, status, h_prev = 0.0, 0, HORIZON_REACHED, None
    if stop_on_converge and norm <= config.residual_tol:
        status = CONVERGED
    while status != CONVERGED and t < config.t_end:
        if config.integrator == "adaptive":
            h = min(stable_dt(u, cx, active), config.dt_max)
            h = min(h, config.dt if h_prev is None else 2.0 * h_prev)
        else:
            h = config.dt
        t_next = t + h
        landing = None
        if fi < len(forced) and t_next >= forced[fi] - 1e-12 * max(1.0, forced[fi]):
            t_next, landing = float(forced[fi]), fi
        if t_next >= config.t_end - 1e-12 * max(1.0, config.t_end):
            t_next = float(config.t_end)
        h = t_next - t
        if h <= 0:
            # duplicate or already-passed sample time
            fi += 1
            continue
        u = _advance(u, f, h, cx, tv, fz, method)
        u[fz] = u0_frozen
        t, steps, h_prev = t_next, steps + 1, h
        if landing is not None:
            fi = landing + 1
        if not np.all(np.isfinite(u)):
            raise FloatingPointError(f"non-finite state at t={t:g}")

        T = curvatures(u, cx)
        f = np.where(fz, 0.0, tv - T)
        norm = float(np.abs(f[active]).max()) if active.any() else 0.0

        tripped = bool(np.any(np.abs(u) > config.u_guard))
        done = tripped or (stop_on_converge and norm <= config.residual_tol) or t >= config.t_end
        if landing is not None or done or steps % config.record_every == 0:
            rec.add(t, u, T)
        if tripped:
            status = GUARD_TRIPPED
            break
        if stop_on_converge and norm <= config.residual_tol:
            status = CONVERGED

    trace = rec.trace(cx, tv, fz)
    report = SolveReport(
        status=status,
        steps=steps,
        final_residual=norm,
        wall_time=time.perf_counter() - tic,
        t_final=t,
        method=f"flow/{config.integrator}",
    )
    log.debug("flow finished: %s after %d steps, residual %.3e", status, steps, norm)
    return trace, report


# --- exhaustion ----------------------------------------------------------------


@dataclass
class ExhaustionLevel:
    n: int
    n_vertices: int
    report: SolveReport
    trace: FlowTrace
    window_u: np.ndarray


@dataclass
class ExhaustionReport:
    window_ids: tuple
    sample_times: np.ndarray
    levels: list
    comparisons: list
    extrapolated: dict

    @property
    def sup_differences(self) -> np.ndarray:
        return np.asarray([c[2] for c in self.comparisons], dtype=float)

    def to_json(self) -> dict:
        return {
            "window": list(self.window_ids),
            "n_samples": int(len(self.sample_times)),
            "tau": float(self.sample_times[-1]) if len(self.sample_times) else 0.0,
            "levels": [
                {"n": lv.n, "n_vertices": lv.n_vertices, "report": lv.report.to_json()} for lv in self.levels
            ],
            "comparisons": [{"n": a, "n_next": b, "sup_difference": d} for a, b, d in self.comparisons],
            "extrapolated_window_u": {str(k): v for k, v in self.extrapolated.items()},
        }


def _rule(rule) -> Callable:
    if callable(rule):
        return rule
    value = float(rule)
    return lambda v: value


def _aitken(a, b, c):
    d1, d2 = b - a, c - b
    denom = d2 - d1
    out = c.copy()
    ok = (np.abs(denom) > 1e-300) & (np.abs(d2) < np.abs(d1))
    out[ok] = c[ok] - d2[ok] ** 2 / denom[ok]
    return out


def solve_exhaustion(
    gen: InfiniteComplexGenerator,
    targets_rule,
    init_rule,
    tau: float,
    n_range: Iterable[int],
    window_radius: int,
    config: FlowConfig | None = None,
    n_samples: int = EXHAUSTION_SAMPLES,
) -> ExhaustionReport:
    """Run truncated flows on B(root, n) for each n and compare them on a fixed window.

    ``targets_rule`` and ``init_rule`` map a vertex id to T_hat and u(0)
    (a plain number means a constant rule).  Each comparison is the sup over
    window vertices and ``n_samples`` uniform times in [0, tau] of
    ``|u^[n] - u^[n']|`` for consecutive levels.
    """
    levels_n = sorted(set(int(n) for n in n_range))
    if not levels_n:
        raise ValueError("n_range is empty")
    if window_radius < 0 or window_radius >= levels_n[0]:
        raise ValueError(f"window radius {window_radius} must be smaller than the smallest ball radius {levels_n[0]}")
    base = config or FlowConfig()
    config = FlowConfig(**{**asdict(base), "t_end": float(tau)})
    t_rule, u_rule = _rule(targets_rule), _rule(init_rule)
    window = extract_ball(gen, window_radius).vertex_ids
    times = np.linspace(0.0, float(tau), n_samples)

    levels = []
    for n in levels_n:
        cx = extract_ball(gen, n)
        tv = np.array([t_rule(v) for v in cx.vertex_ids], dtype=float)
        u0 = np.array([u_rule(v) for v in cx.vertex_ids], dtype=float)
        trace, report = integrate_finite(
            cx, tv, u0, frozen=cx.boundary, config=config, sample_times=times, stop_on_converge=False
        )
        rows = np.searchsorted(trace.times, times)
        if not np.allclose(trace.times[np.minimum(rows, len(trace.times) - 1)], times, rtol=0, atol=1e-9):
            raise LevelStopped(n, report)
        cols = [cx.index[v] for v in window]
        levels.append(ExhaustionLevel(n, cx.n_vertices, report, trace, trace.u[np.ix_(rows, cols)]))
        log.info("exhaustion level n=%d: %d vertices, %d steps", n, cx.n_vertices, report.steps)

    comparisons = [
        (a.n, b.n, float(np.abs(a.window_u - b.window_u).max())) for a, b in zip(levels, levels[1:])
    ]
    if len(levels) >= 3:
        final = _aitken(*(lv.window_u[-1] for lv in levels[-3:]))
    else:
        final = levels[-1].window_u[-1].copy()
    extrapolated = {v: float(x) for v, x in zip(window, final)}
    return ExhaustionReport(tuple(window), times, levels, comparisons, extrapolated)
