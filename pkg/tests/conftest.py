import math

import numpy as np
import pytest

from circleflow.complex import build_complex

HALF_PI = math.pi / 2

# Independent high-precision values (mpmath at 40 digits, cotangent form with acot,
# plain bisection for the uniform octahedron radius).
HALF_ANGLE_SYM = 1.910633236249018556  # 2 atan(sqrt 2)
EDGE_T_SYM = 1.351021717712079926
LENS_AREA_SYM = 0.439549218165633386
DEG6_T = 8.106130306272479556
OCTA_R_STAR = 1.127435343339071181
OCTA_U_STAR = -0.744665884633647726


def octahedron():
    V = list(range(6))
    # antipodal pairs (0,1), (2,3), (4,5) are the only non-edges
    E = [(a, b, HALF_PI) for a in V for b in V if a < b and a // 2 != b // 2]
    F = [(a, b, c) for a in (0, 1) for b in (2, 3) for c in (4, 5)]
    return build_complex(V, E, F)


def one_edge(theta=HALF_PI):
    return build_complex(["a", "b"], [("a", "b", theta)])


def random_complex(rng, n_vertices=None, p=0.45, theta_lo=0.2):
    """Connected random simple graph with random edge angles in [theta_lo, pi/2]."""
    n = int(rng.integers(2, 13)) if n_vertices is None else n_vertices
    perm = rng.permutation(n)
    pairs = {tuple(sorted((int(perm[k]), int(perm[rng.integers(0, k)])))) for k in range(1, n)}
    for a in range(n):
        for b in range(a + 1, n):
            if rng.random() < p:
                pairs.add((a, b))
    edges = [(f"v{a}", f"v{b}", float(rng.uniform(theta_lo, HALF_PI))) for a, b in sorted(pairs)]
    return build_complex([f"v{k}" for k in range(n)], edges)


@pytest.fixture
def octa():
    return octahedron()


@pytest.fixture
def edge():
    return one_edge()


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def random_mp_system(rng):
    """Lattice truncation B(n) with the outer three rings held at 0 as a buffer.

    Weights and g vary in time; the bounds handed to the harness are the
    true suprema, and every step size used below keeps dt * sum w < 0.5.
    """
    from circleflow.analysis import MaxPrincipleSystem
    from circleflow.complex import ball_distances, lattice_generator

    kind = ["triangular-disk", "square-grid"][int(rng.integers(0, 2))]
    n = int(rng.integers(4, 9))
    gen = lattice_generator(kind)
    dist = ball_distances(gen, n)
    order = list(dist)
    index = {v: k for k, v in enumerate(order)}
    edges = np.array(
        [(index[v], index[w]) for v in order for w, _ in gen.neighbors(v) if w in index and index[v] < index[w]]
    )
    held = np.array([index[v] for v, d in dist.items() if d >= n - 2])
    degree = 6 if kind == "triangular-disk" else 4
    f0 = -rng.uniform(0, 1, len(order)) * (rng.random(len(order)) < 0.8)
    f0[held] = 0.0
    W = float(rng.uniform(0.1, 1.5))
    C0 = float(rng.uniform(-1, 3))
    phase = rng.uniform(0, 2 * np.pi, len(edges))
    gphase = rng.uniform(0, 2 * np.pi, len(order))
    return MaxPrincipleSystem(
        n_vertices=len(order),
        edges=edges,
        weights=lambda t: W * (0.5 + 0.5 * np.sin(t + phase)),
        g=lambda t: C0 - 1.5 * (1 + np.cos(2 * t + gphase)),
        f0=f0,
        tau=float(rng.uniform(1, 5)),
        weight_bound=degree * W + 1e-9,
        g_bound=C0,
        held=held,
    )
