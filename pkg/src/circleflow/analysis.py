"""Solvability checks, trace diagnostics, derivative validation and a graph maximum-principle harness."""

from __future__ import annotations

from dataclasses import asdict, dataclass, field
from typing import Callable

import numpy as np

from .complex import ComplexError, ComplexTopology
from .flow import FlowConfig, FlowTrace, integrate_finite, residual, target_values
from .geometry import as_u, assemble_jacobian, curvatures
from .variational import newton_solve

BRUTE_MAX_VERTICES = 22
_CHUNK = 1 << 15
SIGN_EPS = 1e-8


# --- (S1)/(S2)/(S3) ------------------------------------------------------------


@dataclass
class ConditionReport:
    """Outcome of the solvability checks.

    (S2) is read with E(U) = edges having at least one endpoint in U, so its
    slack is ``2 * sum_{E(U)} theta - sum_U T_hat``; a violation has slack <= 0.
    Among violators the smallest subset is reported, ties broken by slack.
    """

    mode: str
    s1_ok: bool
    s1_violation: object = None
    s2_ok: bool = True
    s2_violation: list | None = None
    s2_slack: float | None = None
    s2_min_slack: float | None = None
    s2_min_subset: list | None = None
    subsets_checked: int = 0
    s3_ok: bool | None = None
    s3_violation: object = None

    @property
    def ok(self) -> bool:
        return self.s1_ok and self.s2_ok and self.s3_ok is not False

    def to_json(self) -> dict:
        out = asdict(self)
        out["ok"] = self.ok
        out["exhaustive"] = self.mode == "brute"
        return out


def _subset_slacks(bits: np.ndarray, cx: ComplexTopology, tv: np.ndarray) -> np.ndarray:
    touched = bits[:, cx.edge_i] | bits[:, cx.edge_j]
    return 2.0 * (touched @ cx.edge_theta) - bits @ tv


class _S2Tracker:
    def __init__(self):
        self.count = 0
        self.min_slack, self.min_bits = np.inf, None
        self.viol_key, self.viol_bits = None, None

    def update(self, bits, slack):
        if not len(slack):
            return
        self.count += len(slack)
        k = int(np.argmin(slack))
        if slack[k] < self.min_slack:
            self.min_slack, self.min_bits = float(slack[k]), bits[k].copy()
        bad = np.flatnonzero(slack <= 0.0)
        if bad.size:
            sizes = bits[bad].sum(axis=1)
            order = np.lexsort((slack[bad], sizes))
            b = bad[order[0]]
            key = (int(sizes[order[0]]), float(slack[b]))
            if self.viol_key is None or key < self.viol_key:
                self.viol_key, self.viol_bits = key, bits[b].copy()


def check_conditions(cx: ComplexTopology, targets, state0=None, mode: str = "brute", n_samples: int = 4096, seed: int = 0) -> ConditionReport:
    """Check (S1) positivity, (S2) subset bounds and, given ``state0``, (S3) T(0) >= T_hat.

    ``brute`` enumerates all 2^|V| - 1 nonempty subsets and is exhaustive;
    ``sampled`` draws ``n_samples`` random subsets plus every singleton and
    the full vertex set.
    """
    tv = target_values(targets, cx)
    n = cx.n_vertices
    ids = cx.vertex_ids

    nonpos = np.flatnonzero(tv <= 0)
    s1_ok = nonpos.size == 0
    s1_violation = None if s1_ok else ids[nonpos[0]]

    tracker = _S2Tracker()
    if mode == "brute":
        if n > BRUTE_MAX_VERTICES:
            raise ComplexError(f"brute-force mode supports at most {BRUTE_MAX_VERTICES} vertices, got {n}")
        shifts = np.arange(n, dtype=np.int64)
        total = (1 << n) - 1
        for start in range(1, total + 1, _CHUNK):
            masks = np.arange(start, min(start + _CHUNK, total + 1), dtype=np.int64)
            bits = ((masks[:, None] >> shifts) & 1).astype(bool)
            tracker.update(bits, _subset_slacks(bits, cx, tv))
    elif mode == "sampled":
        rng = np.random.default_rng(seed)
        parts = [np.eye(n, dtype=bool), np.ones((1, n), dtype=bool), rng.random((n_samples, n)) < 0.5]
        bits = np.concatenate(parts)
        bits = bits[bits.any(axis=1)]
        tracker.update(bits, _subset_slacks(bits, cx, tv))
    else:
        raise ValueError(f"unknown mode {mode!r}")

    def to_ids(b):
        return None if b is None else [ids[k] for k in np.flatnonzero(b)]

    report = ConditionReport(
        mode=mode,
        s1_ok=s1_ok,
        s1_violation=s1_violation,
        s2_ok=tracker.viol_bits is None,
        s2_violation=to_ids(tracker.viol_bits),
        s2_slack=None if tracker.viol_key is None else tracker.viol_key[1],
        s2_min_slack=None if tracker.min_bits is None else tracker.min_slack,
        s2_min_subset=to_ids(tracker.min_bits),
        subsets_checked=tracker.count,
    )
    if state0 is not None:
        short = np.flatnonzero(curvatures(as_u(state0, cx), cx) < tv)
        report.s3_ok = short.size == 0
        report.s3_violation = None if report.s3_ok else ids[short[0]]
    return report


# --- trace diagnostics -----------------------------------------------------------


@dataclass
class TraceDiagnostics:
    dominance_applicable: bool
    dominance_ok: bool
    dominance_violation: tuple | None
    monotone_ok: bool
    monotone_violation: tuple | None
    bound_ok: bool
    bound_violation: tuple | None
    apriori_ok: bool
    apriori_violation: tuple | None
    decay_times: list = field(repr=False, default_factory=list)
    decay_norms: list = field(repr=False, default_factory=list)
    decay_rate: float | None = None

    @property
    def passed(self) -> bool:
        ok = self.bound_ok and self.apriori_ok
        if self.dominance_applicable:
            ok = ok and self.dominance_ok and self.monotone_ok
        return ok

    def to_json(self) -> dict:
        out = asdict(self)
        out["passed"] = self.passed
        return out


def _first(mask: np.ndarray, ids) -> tuple | None:
    """(sample index, vertex id) of the first True entry in row-major order."""
    hits = np.argwhere(mask)
    if not len(hits):
        return None
    k, v = hits[0]
    return int(k), ids[v]


def verify_trace(trace: FlowTrace, targets=None, cx: ComplexTopology | None = None, eps: float = 1e-9) -> TraceDiagnostics:
    """Audit a flow trace against the qualitative properties of the flow.

    Checks (a) T(t) >= T_hat - eps whenever T(0) >= T_hat, (b) every u_i is
    nonincreasing up to eps, (c) T_i < 2 sum theta at every sample, and the
    a priori bounds |du/dt| <= 2 sum theta + |T_hat| and
    |u(t)| <= |u(0)| + t (2 sum theta + |T_hat|).  Frozen vertices are skipped.
    """
    if len(trace) == 0:
        raise ValueError("empty trace")
    tv = trace.targets if targets is None else (target_values(targets, cx) if cx is not None else np.asarray(targets, float))
    if cx is not None:
        theta_sum = cx.theta_sum()
    elif trace.theta_sum is not None:
        theta_sum = trace.theta_sum
    else:
        raise ValueError("need the complex or a trace carrying theta sums")
    ids = trace.vertex_ids
    free = ~trace.frozen
    T, u, t = trace.T, trace.u, trace.times

    applicable = bool(np.all(T[0, free] >= tv[free]))
    below = (T < tv - eps) & free
    dominance_violation = _first(below, ids)

    du = np.diff(u, axis=0)
    monotone_violation = _first((du > eps) & free, ids)
    if monotone_violation is not None:
        monotone_violation = (monotone_violation[0] + 1, monotone_violation[1])

    with_edges = theta_sum > 0
    bound_violation = _first((T >= 2.0 * theta_sum) & with_edges, ids)

    rate_cap = 2.0 * theta_sum + np.abs(tv)
    field_bad = (np.abs(T - tv) > rate_cap + eps) & free
    if len(t) > 1:
        dt = np.diff(t)[:, None]
        quotient_bad = np.zeros_like(field_bad)
        quotient_bad[1:] = (np.abs(du) > dt * rate_cap + eps) & free
        field_bad |= quotient_bad
    linear_bad = np.abs(u) > np.abs(u[0]) + t[:, None] * rate_cap + eps
    apriori_violation = _first(field_bad | linear_bad, ids)

    norms = trace.residual_norm
    rate = None
    keep = norms > 1e-13
    if norms[0] > 0 and keep.sum() >= 3 and np.ptp(t[keep]) > 0:
        slope = np.polyfit(t[keep], np.log(norms[keep]), 1)[0]
        rate = float(-slope)

    return TraceDiagnostics(
        dominance_applicable=applicable,
        dominance_ok=dominance_violation is None,
        dominance_violation=dominance_violation,
        monotone_ok=monotone_violation is None,
        monotone_violation=monotone_violation,
        bound_ok=bound_violation is None,
        bound_violation=bound_violation,
        apriori_ok=apriori_violation is None,
        apriori_violation=apriori_violation,
        decay_times=[float(x) for x in t],
        decay_norms=[float(x) for x in norms],
        decay_rate=rate,
    )


# --- finite-difference validation ------------------------------------------------


@dataclass
class FDValidation:
    passed: bool
    max_deviation: float
    worst_entry: tuple | None
    step: float
    tol: float

    def to_json(self) -> dict:
        return asdict(self)


def fd_jacobian(cx: ComplexTopology, u, step: float) -> np.ndarray:
    u = np.asarray(u, dtype=float)
    n = cx.n_vertices
    J = np.empty((n, n))
    for k in range(n):
        e = np.zeros(n)
        e[k] = step
        J[:, k] = (curvatures(u + e, cx) - curvatures(u - e, cx)) / (2.0 * step)
    return J


def fd_validate(cx: ComplexTopology, state, step: float = 1e-6, tol: float = 1e-6) -> FDValidation:
    """Compare the analytic curvature Jacobian with central differences of T."""
    if not (0 < step <= 1e-3):
        raise ValueError(f"step out of range (0, 1e-3]: {step!r}")
    u = as_u(state, cx)
    dev = np.abs(assemble_jacobian(u, cx).toarray() - fd_jacobian(cx, u, step))
    if dev.size == 0:
        return FDValidation(True, 0.0, None, step, tol)
    k = np.unravel_index(np.argmax(dev), dev.shape)
    worst = float(dev[k])
    return FDValidation(worst < tol, worst, (cx.vertex_ids[k[0]], cx.vertex_ids[k[1]]), step, tol)


# --- maximum principle -------------------------------------------------------------


class MaxPrincipleError(ValueError):
    pass


@dataclass
class MaxPrincipleSystem:
    """Linear parabolic system df/dt = Delta_w f + g f on a finite truncated graph.

    ``weights`` and ``g`` are arrays (constant in time) or callables of t
    returning per-edge and per-vertex arrays.  ``held`` vertices form the
    buffer ring and stay at 0.
    """

    n_vertices: int
    edges: np.ndarray
    weights: np.ndarray | Callable
    g: np.ndarray | Callable
    f0: np.ndarray
    tau: float
    weight_bound: float
    g_bound: float
    held: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.intp))

    def __post_init__(self):
        self.edges = np.asarray(self.edges, dtype=np.intp).reshape(-1, 2)
        self.f0 = np.asarray(self.f0, dtype=float)
        self.held = np.asarray(self.held, dtype=np.intp)
        if self.f0.shape != (self.n_vertices,):
            raise MaxPrincipleError("f0 does not match the vertex count")
        if np.any(self.f0 > 0):
            raise MaxPrincipleError(f"f(0) must be <= 0; vertex {int(np.argmax(self.f0))} has {self.f0.max():g}")
        if np.any(self.f0[self.held] != 0):
            raise MaxPrincipleError("held buffer vertices must start at 0")
        if not self.tau > 0:
            raise MaxPrincipleError("tau must be positive")

    def weights_at(self, t):
        w = self.weights(t) if callable(self.weights) else self.weights
        return np.broadcast_to(np.asarray(w, dtype=float), (len(self.edges),))

    def g_at(self, t):
        g = self.g(t) if callable(self.g) else self.g
        return np.broadcast_to(np.asarray(g, dtype=float), (self.n_vertices,))


@dataclass
class MaxPrincipleResult:
    max_f: float
    max_by_step: np.ndarray = field(repr=False)
    steps: int
    f_final: np.ndarray = field(repr=False)

    @property
    def sign_preserved(self) -> bool:
        return self.max_f <= SIGN_EPS


def max_principle_sim(system: MaxPrincipleSystem, dt: float) -> MaxPrincipleResult:
    """Forward-Euler evolution of df/dt = Delta_w f + g f, tracking max f.

    Every step verifies the hypotheses: weights nonnegative with row sums
    below ``weight_bound``, g <= ``g_bound``, dt * sum_j w_ij < 0.5, and
    dt * max(0, -g_i) <= 0.5 (keeps the explicit update order-preserving).
    """
    if not dt > 0:
        raise MaxPrincipleError("dt must be positive")
    n = system.n_vertices
    a, b = system.edges[:, 0], system.edges[:, 1]
    steps = int(np.ceil(system.tau / dt - 1e-12))
    f = system.f0.copy()
    maxima = np.empty(steps + 1)
    maxima[0] = f.max() if n else -np.inf
    t = 0.0
    for k in range(steps):
        h = min(dt, system.tau - t)
        w = system.weights_at(t)
        if np.any(w < 0):
            raise MaxPrincipleError(f"step {k}: negative weight on edge {int(np.argmin(w))}")
        wsum = np.zeros(n)
        np.add.at(wsum, a, w)
        np.add.at(wsum, b, w)
        over = np.flatnonzero(wsum >= system.weight_bound)
        if over.size:
            raise MaxPrincipleError(f"step {k}: weight sum {wsum[over[0]]:g} at vertex {int(over[0])} exceeds bound {system.weight_bound:g}")
        g = system.g_at(t)
        if np.any(g > system.g_bound):
            v = int(np.argmax(g))
            raise MaxPrincipleError(f"step {k}: g={g[v]:g} at vertex {v} exceeds bound {system.g_bound:g}")
        stiff = np.flatnonzero(h * wsum >= 0.5)
        if stiff.size:
            raise MaxPrincipleError(f"step {k}: dt * weight sum >= 0.5 at vertex {int(stiff[0])}")
        damp = np.flatnonzero(h * np.maximum(0.0, -g) > 0.5)
        if damp.size:
            raise MaxPrincipleError(f"step {k}: dt * |g| > 0.5 at vertex {int(damp[0])}")
        lap = np.zeros(n)
        diff = w * (f[b] - f[a])
        np.add.at(lap, a, diff)
        np.add.at(lap, b, -diff)
        f = f + h * (lap + g * f)
        f[system.held] = 0.0
        t += h
        maxima[k + 1] = f.max()
    return MaxPrincipleResult(float(maxima.max()), maxima, steps, f)


# --- cross-solver agreement --------------------------------------------------------


@dataclass
class AgreementReport:
    comparable: bool
    u_difference: float | None
    flow_residual: float
    newton_residual: float
    flow_status: str
    newton_status: str
    u_flow: np.ndarray = field(repr=False)
    u_newton: np.ndarray = field(repr=False)

    def to_json(self) -> dict:
        out = asdict(self)
        out["u_flow"] = [float(x) for x in self.u_flow]
        out["u_newton"] = [float(x) for x in self.u_newton]
        return out


def flow_vs_newton(cx: ComplexTopology, targets, init, config: FlowConfig | None = None, tol: float = 1e-10, max_iter: int = 100) -> AgreementReport:
    """Solve with both the flow and Newton and compare the limits in u."""
    trace, frep = integrate_finite(cx, targets, init, config=config or FlowConfig(residual_tol=tol))
    state, nrep = newton_solve(cx, targets, init, tol=tol, max_iter=max_iter)
    u_flow = trace.u[-1]
    comparable = frep.converged and nrep.converged
    return AgreementReport(
        comparable=comparable,
        u_difference=float(np.abs(u_flow - state.u).max()) if comparable else None,
        flow_residual=float(np.abs(residual(u_flow, cx, targets)).max()) if cx.n_vertices else 0.0,
        newton_residual=nrep.final_residual,
        flow_status=frep.status,
        newton_status=nrep.status,
        u_flow=u_flow,
        u_newton=state.u,
    )
