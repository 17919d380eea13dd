"""Finite cellular decompositions weighted by intersection angles.

Only the 1-skeleton (vertices, edges, edge angles) drives any computation;
faces are carried for validation and export.  Infinite lattices are exposed
through :class:`InfiniteComplexGenerator`, whose combinatorial balls give a
nested exhaustion.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field
from typing import Callable, Hashable, Iterable, Mapping, Sequence

import numpy as np

HALF_PI = 0.5 * math.pi
# JSON round-trips of pi/2 are exact, but hand-written decimals may overshoot by an ulp or two
_THETA_SLACK = 1e-12

VertexId = Hashable


class ComplexError(ValueError):
    """Raised when a complex or generator rule is malformed."""


@dataclass(frozen=True, eq=False)
class ComplexTopology:
    """Validated simple graph with intersection angles in (0, pi/2].

    ``boundary`` marks vertices on the outer ring of an extracted ball; it is
    empty for complexes that are not truncations of an infinite lattice.
    """

    vertex_ids: tuple
    edges: tuple
    faces: tuple | None = None
    boundary: frozenset = frozenset()

    index: dict = field(init=False, repr=False)
    adjacency: tuple = field(init=False, repr=False)
    edge_i: np.ndarray = field(init=False, repr=False)
    edge_j: np.ndarray = field(init=False, repr=False)
    edge_theta: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        index = {}
        for k, v in enumerate(self.vertex_ids):
            if isinstance(v, bool) or not isinstance(v, (str, int)):
                raise ComplexError(f"vertex id {v!r} must be a string or an integer")
            if v in index:
                raise ComplexError(f"duplicate vertex id {v!r}")
            index[v] = k

        adjacency = [[] for _ in self.vertex_ids]
        seen = set()
        ei, ej, th = [], [], []
        for k, (a, b, theta) in enumerate(self.edges):
            if a not in index or b not in index:
                raise ComplexError(f"edges[{k}]: unknown vertex in ({a!r}, {b!r})")
            if a == b:
                raise ComplexError(f"edges[{k}]: self-loop at {a!r}")
            key = frozenset((a, b))
            if key in seen:
                raise ComplexError(f"edges[{k}]: duplicate edge ({a!r}, {b!r})")
            seen.add(key)
            theta = float(theta)
            if not (theta > 0.0 and theta <= HALF_PI + _THETA_SLACK) or not math.isfinite(theta):
                raise ComplexError(f"edges[{k}]: theta out of range (0, pi/2]: {theta!r}")
            ia, ib = index[a], index[b]
            adjacency[ia].append(k)
            adjacency[ib].append(k)
            ei.append(ia)
            ej.append(ib)
            th.append(min(theta, HALF_PI))

        if self.faces is not None:
            for k, face in enumerate(self.faces):
                if len(face) < 2:
                    raise ComplexError(f"faces[{k}]: needs at least two vertices")
                for v in face:
                    if v not in index:
                        raise ComplexError(f"faces[{k}]: unknown vertex {v!r}")
                for a, b in zip(face, face[1:] + face[:1]):
                    if frozenset((a, b)) not in seen:
                        raise ComplexError(f"faces[{k}]: ({a!r}, {b!r}) is not an edge")

        for v in self.boundary:
            if v not in index:
                raise ComplexError(f"boundary vertex {v!r} is not in the complex")

        object.__setattr__(self, "index", index)
        object.__setattr__(self, "adjacency", tuple(tuple(a) for a in adjacency))
        object.__setattr__(self, "edge_i", np.asarray(ei, dtype=np.intp))
        object.__setattr__(self, "edge_j", np.asarray(ej, dtype=np.intp))
        object.__setattr__(self, "edge_theta", np.asarray(th, dtype=float))
        for arr in (self.edge_i, self.edge_j, self.edge_theta):
            arr.setflags(write=False)

    @property
    def n_vertices(self) -> int:
        return len(self.vertex_ids)

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    def degree(self, v) -> int:
        return len(self.adjacency[self.index[v]])

    def neighbors(self, v) -> list:
        k = self.index[v]
        out = []
        for e in self.adjacency[k]:
            a, b, _ = self.edges[e]
            out.append(b if a == v else a)
        return out

    def theta_sum(self) -> np.ndarray:
        """Per-vertex sum of incident edge angles."""
        s = np.zeros(self.n_vertices)
        np.add.at(s, self.edge_i, self.edge_theta)
        np.add.at(s, self.edge_j, self.edge_theta)
        return s

    def mask(self, vertices: Iterable) -> np.ndarray:
        m = np.zeros(self.n_vertices, dtype=bool)
        for v in vertices:
            if v not in self.index:
                raise ComplexError(f"unknown vertex {v!r}")
            m[self.index[v]] = True
        return m

    def to_json(self) -> dict:
        out = {
            "vertices": list(self.vertex_ids),
            "edges": [[a, b, float(t)] for a, b, t in self.edges],
        }
        if self.faces is not None:
            out["faces"] = [list(f) for f in self.faces]
        if self.boundary:
            out["boundary"] = [v for v in self.vertex_ids if v in self.boundary]
        return out

    def same_as(self, other: "ComplexTopology") -> bool:
        return (
            self.vertex_ids == other.vertex_ids
            and self.edges == other.edges
            and self.faces == other.faces
            and self.boundary == other.boundary
        )


def build_complex(vertices: Sequence, edges_with_theta: Iterable, faces=None, boundary=()) -> ComplexTopology:
    """Validate and index a finite complex.

    ``edges_with_theta`` holds ``(a, b, theta)`` triples with theta in radians.
    """
    edges = []
    for k, e in enumerate(edges_with_theta):
        try:
            a, b, theta = e
        except (TypeError, ValueError):
            raise ComplexError(f"edges[{k}]: expected [a, b, theta], got {e!r}") from None
        if isinstance(theta, bool) or not isinstance(theta, (int, float, np.floating, np.integer)):
            raise ComplexError(f"edges[{k}]: theta must be a number, got {theta!r}")
        edges.append((a, b, float(theta)))
    face_tuple = None if faces is None else tuple(tuple(f) for f in faces)
    return ComplexTopology(tuple(vertices), tuple(edges), face_tuple, frozenset(boundary))


def complex_from_json(data: Mapping) -> ComplexTopology:
    if not isinstance(data, Mapping):
        raise ComplexError("complex JSON must be an object")
    for key in ("vertices", "edges"):
        if key not in data:
            raise ComplexError(f"missing field {key!r}")
        if not isinstance(data[key], list):
            raise ComplexError(f"field {key!r} must be a list")
    return build_complex(data["vertices"], data["edges"], data.get("faces"), data.get("boundary", ()))


@dataclass(frozen=True)
class TargetCurvature:
    """Prescribed total geodesic curvature per vertex, in complex order."""

    values: np.ndarray

    @classmethod
    def constant(cls, cx: ComplexTopology, value: float) -> "TargetCurvature":
        return cls(np.full(cx.n_vertices, float(value)))

    @classmethod
    def from_mapping(cls, cx: ComplexTopology, mapping: Mapping) -> "TargetCurvature":
        return cls(vertex_values(cx, mapping, "target"))

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim != 1 or not np.all(np.isfinite(v)):
            raise ComplexError("target curvatures must be a finite 1-d array")
        object.__setattr__(self, "values", v)


def vertex_values(cx: ComplexTopology, mapping: Mapping, what: str = "value") -> np.ndarray:
    """Order a ``{vertex_id: value}`` mapping by the complex.

    JSON object keys are strings, so integer ids are also matched by their
    decimal form.
    """
    by_str = {str(v): k for k, v in enumerate(cx.vertex_ids)}
    out = np.full(cx.n_vertices, np.nan)
    for key, val in mapping.items():
        k = cx.index.get(key, by_str.get(str(key)))
        if k is None:
            raise ComplexError(f"{what} for unknown vertex {key!r}")
        out[k] = float(val)
    missing = [cx.vertex_ids[k] for k in np.flatnonzero(np.isnan(out))]
    if missing:
        raise ComplexError(f"{what} missing for vertex {missing[0]!r}")
    return out


# --- infinite lattices -------------------------------------------------------

_TRI_DIRS = ((1, 0), (0, 1), (-1, 1), (-1, 0), (0, -1), (1, -1))
_SQ_DIRS = ((1, 0), (0, 1), (-1, 0), (0, -1))

KINDS = ("triangular-disk", "square-grid", "custom")


def _parse_xy(v) -> tuple[int, int]:
    a, b = str(v).split(",")
    return int(a), int(b)


def _xy(a: int, b: int) -> str:
    return f"{a},{b}"


@dataclass(frozen=True)
class InfiniteComplexGenerator:
    """Locally finite infinite complex, explored from ``root`` by breadth-first search.

    For ``custom`` generators, ``rule(v)`` returns the neighbours of ``v`` as
    ``(w, theta)`` pairs; symmetry of the rule is checked on extraction.
    Lattice vertex ids are ``"a,b"`` strings of integer lattice coordinates.
    """

    kind: str
    root: VertexId
    theta: float = HALF_PI
    rule: Callable | None = None

    def neighbors(self, v) -> list[tuple]:
        if self.kind == "triangular-disk":
            q, r = _parse_xy(v)
            return [(_xy(q + dq, r + dr), self.theta) for dq, dr in _TRI_DIRS]
        if self.kind == "square-grid":
            x, y = _parse_xy(v)
            return [(_xy(x + dx, y + dy), self.theta) for dx, dy in _SQ_DIRS]
        return [(w, float(t)) for w, t in self.rule(v)]

    def faces_in(self, ball: set) -> list[tuple]:
        faces = []
        if self.kind == "triangular-disk":
            for v in sorted(ball, key=_parse_xy):
                q, r = _parse_xy(v)
                for tri in (
                    (_xy(q, r), _xy(q + 1, r), _xy(q, r + 1)),
                    (_xy(q, r), _xy(q + 1, r - 1), _xy(q + 1, r)),
                ):
                    if all(w in ball for w in tri):
                        faces.append(tri)
        elif self.kind == "square-grid":
            for v in sorted(ball, key=_parse_xy):
                x, y = _parse_xy(v)
                sq = (_xy(x, y), _xy(x + 1, y), _xy(x + 1, y + 1), _xy(x, y + 1))
                if all(w in ball for w in sq):
                    faces.append(sq)
        return faces

    def extract(self, n: int) -> ComplexTopology:
        return extract_ball(self, n)


def lattice_generator(kind: str, root=None, theta: float = HALF_PI, rule: Callable | None = None) -> InfiniteComplexGenerator:
    if kind not in KINDS:
        raise ComplexError(f"unsupported generator kind {kind!r}; expected one of {', '.join(KINDS)}")
    if not (0.0 < theta <= HALF_PI + _THETA_SLACK):
        raise ComplexError(f"theta out of range (0, pi/2]: {theta!r}")
    theta = min(float(theta), HALF_PI)
    if kind == "custom":
        if rule is None or root is None:
            raise ComplexError("custom generators need both a root and a neighbour rule")
        return InfiniteComplexGenerator(kind, root, theta, rule)
    if root is None:
        root = "0,0"
    try:
        _parse_xy(root)
    except ValueError:
        raise ComplexError(f"lattice root must look like 'a,b', got {root!r}") from None
    return InfiniteComplexGenerator(kind, root, theta)


def _checked_neighbors(gen: InfiniteComplexGenerator, v) -> list[tuple]:
    nbrs = gen.neighbors(v)
    seen = set()
    for w, t in nbrs:
        if w == v:
            raise ComplexError(f"rule gives a self-loop at {v!r}")
        if w in seen:
            raise ComplexError(f"rule lists neighbour {w!r} of {v!r} twice")
        seen.add(w)
        back = [bt for bw, bt in gen.neighbors(w) if bw == v]
        if len(back) != 1:
            raise ComplexError(f"inconsistent adjacency: {w!r} is a neighbour of {v!r} but not vice versa")
        if abs(back[0] - t) > 1e-12:
            raise ComplexError(f"inconsistent theta on edge ({v!r}, {w!r}): {t!r} vs {back[0]!r}")
    return nbrs


def ball_distances(gen: InfiniteComplexGenerator, n: int) -> dict:
    """Graph distance from the root for every vertex of B(root, n), in BFS order."""
    if n < 0:
        raise ComplexError(f"ball radius must be >= 0, got {n}")
    dist = {gen.root: 0}
    queue = deque([gen.root])
    while queue:
        v = queue.popleft()
        if dist[v] == n:
            continue
        for w, _ in _checked_neighbors(gen, v):
            if w not in dist:
                dist[w] = dist[v] + 1
                queue.append(w)
    return dist


def extract_ball(gen: InfiniteComplexGenerator, n: int) -> ComplexTopology:
    """Induced subcomplex on B(root, n); vertices at distance exactly n are boundary."""
    dist = ball_distances(gen, n)
    order = list(dist)
    pos = {v: k for k, v in enumerate(order)}
    edges = []
    for v in order:
        for w, t in _checked_neighbors(gen, v):
            if w in pos and pos[w] > pos[v]:
                edges.append((v, w, t))
    boundary = [v for v, d in dist.items() if d == n]
    faces = gen.faces_in(set(order)) if gen.kind != "custom" else None
    return build_complex(order, edges, faces, boundary)
