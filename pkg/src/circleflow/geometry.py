"""Spherical-trigonometry kernels for circle patterns.

Radii live in (0, pi/2) and are parametrised by ``u = ln cot r``.  For an
edge with intersection angle ``theta`` the angle swept at ``v_i`` by the
edge quadrilateral follows from the cotangent four-part formula

    cot(Theta_i / 2) = (cot r_j sin r_i + cos r_i cos theta) / sin theta

which is evaluated here in atan2 form, clear of any division.  Every function
broadcasts over numpy arrays.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
import scipy.sparse as sp

from .complex import HALF_PI, ComplexError, ComplexTopology


class DomainError(ValueError):
    pass


def radius_from_u(u):
    return np.arctan(np.exp(-np.asarray(u, dtype=float)))


def u_from_radius(r):
    r = np.asarray(r, dtype=float)
    return np.log(np.cos(r) / np.sin(r))


def _sincos_u(u):
    """sin r and cos r straight from u, keeping full relative precision near 0 and pi/2."""
    u = np.asarray(u, dtype=float)
    with np.errstate(over="ignore"):
        s = 1.0 / np.sqrt(1.0 + np.exp(2.0 * u))
        c = 1.0 / np.sqrt(1.0 + np.exp(-2.0 * u))
    return s, c


def _scalar(x):
    x = np.asarray(x)
    return x[()] if x.ndim == 0 else x


def _check_domain(theta, r_i, r_j):
    theta, r_i, r_j = np.broadcast_arrays(*(np.asarray(x, dtype=float) for x in (theta, r_i, r_j)))
    if not np.all((theta > 0) & (theta <= HALF_PI + 1e-12)):
        raise DomainError("theta out of range (0, pi/2]")
    for r in (r_i, r_j):
        if not np.all((r > 0) & (r < HALF_PI)):
            raise DomainError("radius out of range (0, pi/2)")
    return theta, r_i, r_j


def _half_angle_sc(theta, si, ci, sj, cj):
    # tan(Theta_i/2) = sin(theta) sin r_j / (sin r_i cos r_j + cos r_i sin r_j cos theta)
    num = np.sin(theta) * sj
    den = si * cj + ci * sj * np.cos(theta)
    return 2.0 * np.arctan2(num, den)


def half_angle(theta_e, r_i, r_j):
    """Angle Theta(e, v_i) in (0, pi) subtended at v_i; swap the radii for v_j."""
    theta, r_i, r_j = _check_domain(theta_e, r_i, r_j)
    return _scalar(_half_angle_sc(theta, np.sin(r_i), np.cos(r_i), np.sin(r_j), np.cos(r_j)))


def edge_curvatures(theta_e, r_i, r_j):
    """Contributions ``(T_ei, T_ej)`` of one edge to the two endpoint curvatures."""
    theta, r_i, r_j = _check_domain(theta_e, r_i, r_j)
    si, ci, sj, cj = np.sin(r_i), np.cos(r_i), np.sin(r_j), np.cos(r_j)
    return _scalar(_half_angle_sc(theta, si, ci, sj, cj) * ci), _scalar(_half_angle_sc(theta, sj, cj, si, ci) * cj)


def lens_area(theta_e, r_i, r_j):
    """Spherical area of the intersection of the two disks (Gauss-Bonnet)."""
    t_i, t_j = edge_curvatures(theta_e, r_i, r_j)
    return _scalar(2.0 * np.asarray(theta_e, dtype=float) - t_i - t_j)


def _partials_sc(theta, si, ci, sj, cj):
    """d(T_ei)/du_i, d(T_ei)/du_j by differentiating the atan2 form and chaining dr/du = -sin r cos r."""
    st, ct = np.sin(theta), np.cos(theta)
    num = st * sj
    den = si * cj + ci * sj * ct
    q = num * num + den * den
    ang = 2.0 * np.arctan2(num, den)
    dden_dri = ci * cj - si * sj * ct
    dden_drj = -si * sj + ci * cj * ct
    dang_dri = -2.0 * num * dden_dri / q
    dang_drj = 2.0 * (den * st * cj - num * dden_drj) / q
    dT_dri = dang_dri * ci - ang * si
    dT_drj = dang_drj * ci
    return dT_dri * (-si * ci), dT_drj * (-sj * cj)


def edge_jacobian(theta_e, r_i, r_j):
    """Return ``(dT_ei/du_i, dT_ei/du_j, dT_ej/du_i, dT_ej/du_j)``."""
    theta, r_i, r_j = _check_domain(theta_e, r_i, r_j)
    si, ci, sj, cj = np.sin(r_i), np.cos(r_i), np.sin(r_j), np.cos(r_j)
    a_ii, a_ij = _partials_sc(theta, si, ci, sj, cj)
    b_jj, b_ji = _partials_sc(theta, sj, cj, si, ci)
    return tuple(_scalar(x) for x in (a_ii, a_ij, b_ji, b_jj))


# --- per-complex quantities --------------------------------------------------


@dataclass(frozen=True)
class PatternState:
    """Log-cotangent radius coordinates ``u_i = ln cot r_i`` in complex vertex order."""

    u: np.ndarray

    def __post_init__(self):
        u = np.array(self.u, dtype=float)
        if u.ndim != 1 or not np.all(np.isfinite(u)):
            raise DomainError("pattern state must be a finite 1-d array")
        u.setflags(write=False)
        object.__setattr__(self, "u", u)

    @classmethod
    def from_radii(cls, r) -> "PatternState":
        r = np.atleast_1d(np.asarray(r, dtype=float))
        if not np.all((r > 0) & (r < HALF_PI)):
            raise DomainError("radius out of range (0, pi/2)")
        return cls(u_from_radius(r))

    @property
    def r(self) -> np.ndarray:
        return radius_from_u(self.u)

    def __len__(self):
        return len(self.u)


def as_u(state, cx: ComplexTopology | None = None) -> np.ndarray:
    u = state.u if isinstance(state, PatternState) else np.asarray(state, dtype=float)
    if cx is not None and u.shape != (cx.n_vertices,):
        raise ComplexError(f"state has {u.size} entries but the complex has {cx.n_vertices} vertices")
    return u


class EdgeTerms(NamedTuple):
    """Per-edge arrays: half angles, curvature contributions and u-partials."""

    angle_i: np.ndarray
    angle_j: np.ndarray
    t_i: np.ndarray
    t_j: np.ndarray
    d_ii: np.ndarray
    d_ij: np.ndarray
    d_ji: np.ndarray
    d_jj: np.ndarray


def edge_terms(u, cx: ComplexTopology, derivatives: bool = False) -> EdgeTerms:
    s, c = _sincos_u(u)
    i, j, th = cx.edge_i, cx.edge_j, cx.edge_theta
    si, ci, sj, cj = s[i], c[i], s[j], c[j]
    ai = _half_angle_sc(th, si, ci, sj, cj)
    aj = _half_angle_sc(th, sj, cj, si, ci)
    if derivatives:
        d_ii, d_ij = _partials_sc(th, si, ci, sj, cj)
        d_jj, d_ji = _partials_sc(th, sj, cj, si, ci)
    else:
        d_ii = d_ij = d_ji = d_jj = None
    return EdgeTerms(ai, aj, ai * ci, aj * cj, d_ii, d_ij, d_ji, d_jj)


def cone_angles(state, cx: ComplexTopology) -> np.ndarray:
    u = as_u(state, cx)
    et = edge_terms(u, cx)
    alpha = np.zeros(cx.n_vertices)
    np.add.at(alpha, cx.edge_i, et.angle_i)
    np.add.at(alpha, cx.edge_j, et.angle_j)
    return alpha


def curvatures(state, cx: ComplexTopology) -> np.ndarray:
    """Total geodesic curvature T_i at every vertex, summed over incident edges."""
    u = as_u(state, cx)
    et = edge_terms(u, cx)
    T = np.zeros(cx.n_vertices)
    np.add.at(T, cx.edge_i, et.t_i)
    np.add.at(T, cx.edge_j, et.t_j)
    return T


@dataclass(frozen=True)
class VertexGeometry:
    alpha: float
    k: float
    l: float
    T: float
    T_edge_sum: float


def vertex_geometry(state, cx: ComplexTopology, v) -> VertexGeometry:
    if v not in cx.index:
        raise ComplexError(f"unknown vertex {v!r}")
    u = as_u(state, cx)
    k = cx.index[v]
    et = edge_terms(u, cx)
    inc = np.asarray(cx.adjacency[k], dtype=np.intp)
    at_i = cx.edge_i[inc] == k
    alpha = float(np.sum(np.where(at_i, et.angle_i[inc], et.angle_j[inc])))
    t_sum = float(np.sum(np.where(at_i, et.t_i[inc], et.t_j[inc])))
    s, c = _sincos_u(u[k])
    s, c = float(s), float(c)
    kappa = float(np.exp(u[k]))
    return VertexGeometry(alpha=alpha, k=kappa, l=alpha * s, T=alpha * c, T_edge_sum=t_sum)


def assemble_jacobian(state, cx: ComplexTopology) -> sp.csr_matrix:
    """Sparse symmetric matrix L_ij = dT_i/du_j."""
    u = as_u(state, cx)
    n = cx.n_vertices
    et = edge_terms(u, cx, derivatives=True)
    i, j = cx.edge_i, cx.edge_j
    rows = np.concatenate([i, j, i, j])
    cols = np.concatenate([i, j, j, i])
    vals = np.concatenate([et.d_ii, et.d_jj, et.d_ij, et.d_ji])
    L = sp.coo_matrix((vals, (rows, cols)), shape=(n, n)).tocsr()
    L.sum_duplicates()
    return L
