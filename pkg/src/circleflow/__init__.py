"""Circle patterns with prescribed total geodesic curvature in spherical geometry.

Finite complexes are solved by the combinatorial Ricci flow or by Newton's
method on a convex potential; infinite lattices are approached through flows
on nested combinatorial balls.
"""

from .complex import (
    ComplexError,
    ComplexTopology,
    InfiniteComplexGenerator,
    TargetCurvature,
    build_complex,
    extract_ball,
    lattice_generator,
)
from .flow import FlowConfig, FlowTrace, SolveReport, integrate_finite, residual, solve_exhaustion, step
from .geometry import (
    PatternState,
    assemble_jacobian,
    edge_curvatures,
    edge_jacobian,
    half_angle,
    lens_area,
    vertex_geometry,
)
from .variational import edge_potential, newton_solve, total_potential

__version__ = "0.1.0"
