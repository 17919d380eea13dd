"""Convex potential whose gradient is ``T - T_hat``, and a damped Newton solver for it.

Each edge carries the closed 1-form ``T_ei du_i + T_ej du_j``; its potential
has no closed antiderivative, so it is integrated numerically along an
axis-aligned two-segment path from a base point.  Single edges go through
adaptive quadrature; whole-complex sums use a vectorised composite
Gauss-Legendre rule on the same paths.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np
import scipy.linalg
import scipy.sparse.linalg as spla
from scipy import integrate

from .complex import HALF_PI, ComplexTopology
from .flow import CONVERGED, GUARD_TRIPPED, HORIZON_REACHED, SolveReport, frozen_mask, residual, target_values
from .geometry import PatternState, _half_angle_sc, _sincos_u, as_u, assemble_jacobian

QUAD_EPS = 1e-13
ARMIJO_C = 1e-4
BACKTRACK = 0.5
_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(16)
PANEL = 0.25  # longest composite panel, in u units


def _t_edge(theta, u_i, u_j):
    """Edge contribution to T at the first endpoint, in u-coordinates."""
    si, ci = _sincos_u(u_i)
    sj, cj = _sincos_u(u_j)
    return _half_angle_sc(theta, si, ci, sj, cj) * ci


def _quad(fun, a, b):
    if a == b:
        return 0.0
    val, _ = integrate.quad(fun, a, b, epsabs=QUAD_EPS, epsrel=QUAD_EPS, limit=200)
    return val


def edge_potential(theta_e: float, u_i: float, u_j: float, base=(0.0, 0.0), order: str = "ij") -> float:
    """Line integral of the edge 1-form from ``base`` to ``(u_i, u_j)``.

    ``order="ij"`` moves u_i first, then u_j; ``"ji"`` takes the other
    L-path, which must agree because the form is closed.
    """
    if not (0 < theta_e <= HALF_PI + 1e-12):
        raise ValueError("theta out of range (0, pi/2]")
    bi, bj = float(base[0]), float(base[1])
    if order == "ij":
        seg1 = _quad(lambda s: _t_edge(theta_e, s, bj), bi, u_i)
        seg2 = _quad(lambda s: _t_edge(theta_e, s, u_i), bj, u_j)
    elif order == "ji":
        seg1 = _quad(lambda s: _t_edge(theta_e, s, bi), bj, u_j)
        seg2 = _quad(lambda s: _t_edge(theta_e, s, u_j), bi, u_i)
    else:
        raise ValueError(f"unknown path order {order!r}")
    return seg1 + seg2


def _segment_integrals(theta, fixed, a, b):
    """Integral of _t_edge(theta, s, fixed) over s in [a, b], all edges at once."""
    length = b - a
    panels = max(1, int(np.ceil(np.abs(length).max(initial=0.0) / PANEL)))
    edges = np.linspace(0.0, 1.0, panels + 1)
    x = (0.5 * (edges[1:, None] - edges[:-1, None]) * (_GL_NODES + 1.0) + edges[:-1, None]).ravel()
    w = (0.5 * (edges[1:, None] - edges[:-1, None]) * _GL_WEIGHTS).ravel()
    s = a[:, None] + x[None, :] * length[:, None]
    vals = _t_edge(theta[:, None], s, fixed[:, None])
    return length * (vals @ w)


def edge_potentials(cx: ComplexTopology, u, base) -> np.ndarray:
    """Per-edge potentials along the ``ij`` path, vectorised over the complex."""
    i, j, th = cx.edge_i, cx.edge_j, cx.edge_theta
    seg1 = _segment_integrals(th, base[j], base[i], u[i])
    seg2 = _segment_integrals(th, u[i], base[j], u[j])
    return seg1 + seg2


@dataclass(frozen=True)
class PotentialValue:
    value: float
    base_point: PatternState


def total_potential(state, cx: ComplexTopology, targets, base_state=None) -> PotentialValue:
    """Sum of edge potentials minus ``sum T_hat_v u_v``, normalised to vanish at ``base_state``."""
    u = as_u(state, cx)
    base = np.zeros(cx.n_vertices) if base_state is None else as_u(base_state, cx)
    tv = target_values(targets, cx)
    total = float(edge_potentials(cx, u, base).sum()) if cx.n_edges else 0.0
    total -= float(tv @ (u - base))
    return PotentialValue(total, PatternState(base))


def potential_change(u, direction, s, cx, tv) -> float:
    """E(u + s p) - E(u) as the integral of the gradient along the segment."""
    nodes = 0.5 * s * (_GL_NODES + 1.0)
    acc = 0.0
    for x, w in zip(nodes, _GL_WEIGHTS):
        acc += w * float(residual(u + x * direction, cx, tv) @ direction)
    return 0.5 * s * acc


def _newton_direction(u, g, cx, free):
    L = assemble_jacobian(u, cx)
    # isolated vertices have a zero Hessian row; they take the plain gradient component
    flat = free & (L.diagonal() == 0)
    free = free & ~flat
    H = L[free][:, free]
    p = np.zeros_like(g)
    p[flat] = -g[flat]
    try:
        if H.shape[0] == 0:
            pass
        elif H.shape[0] <= 200:
            p[free] = scipy.linalg.solve(H.toarray(), -g[free], assume_a="sym")
        else:
            p[free] = spla.spsolve(H.tocsc(), -g[free])
    except (np.linalg.LinAlgError, scipy.linalg.LinAlgError, RuntimeError, ValueError):
        return None
    if not np.all(np.isfinite(p)) or float(g @ p) >= 0:
        return None
    return p


def newton_solve(
    cx: ComplexTopology, targets, init, tol: float = 1e-10, max_iter: int = 100, callback=None, frozen=None, u_guard: float = 50.0
):
    """Damped Newton descent on the potential with Armijo backtracking.

    The Hessian is the curvature Jacobian.  When it is singular or yields no
    descent direction, the iteration falls back to a steepest-descent step.
    ``callback(k, state)`` sees every iterate including the initial one.
    ``frozen`` vertices keep their initial value and are left out of the
    residual norm, matching :func:`integrate_finite`.  Like the flow, the
    iteration stops with ``guard_tripped`` once some ``|u_i|`` exceeds
    ``u_guard``; that is what happens when no solution exists.

    Returns ``(PatternState, SolveReport)``.
    """
    tic = time.perf_counter()
    tv = target_values(targets, cx)
    u = np.array(as_u(init, cx), dtype=float)
    free = ~frozen_mask(frozen, cx)

    def gradient(x):
        g = residual(x, cx, tv)
        g[~free] = 0.0
        return g, (float(np.abs(g).max()) if g.size else 0.0)

    g, norm = gradient(u)
    if callback:
        callback(0, PatternState(u))
    fallbacks = 0
    status = CONVERGED if norm <= tol else HORIZON_REACHED
    k = 0
    while status != CONVERGED and k < max_iter:
        p = _newton_direction(u, g, cx, free)
        if p is None:
            fallbacks += 1
            p = -g
        slope = float(g @ p)
        s = 1.0
        for _ in range(60):
            if potential_change(u, p, s, cx, tv) <= ARMIJO_C * s * slope:
                break
            s *= BACKTRACK
        u_next = u + s * p
        k += 1
        if not np.all(np.isfinite(u_next)) or np.any(np.abs(u_next) > u_guard):
            status = GUARD_TRIPPED
            if np.all(np.isfinite(u_next)):
                u = u_next
                g, norm = gradient(u)
            break
        u = u_next
        g, norm = gradient(u)
        if callback:
            callback(k, PatternState(u))
        if norm <= tol:
            status = CONVERGED
    report = SolveReport(
        status=status,
        steps=k,
        final_residual=norm,
        wall_time=time.perf_counter() - tic,
        t_final=float(k),
        method="newton",
        extra={"gradient_fallbacks": fallbacks},
    )
    return PatternState(u), report
