"""Finite-volume solver for degenerate parabolic problems on graded meshes."""

from dul.solver.kernels import BACKEND
from dul.solver.mesh import Mesh1D, MeshError, build_mesh
from dul.solver.operator import (
    CLAMP,
    DIRICHLET,
    FLUX_NONE,
    BoundaryTreatment,
    GridFunction,
    ProblemSpec,
    apply_operator,
    assemble,
)
from dul.solver.stepping import (
    BlowUp,
    CFLViolation,
    Trajectory,
    residual,
    solve,
    step_theta,
    subsolution_check,
)

__all__ = [
    "BACKEND", "Mesh1D", "MeshError", "build_mesh", "CLAMP", "DIRICHLET", "FLUX_NONE",
    "BoundaryTreatment", "GridFunction", "ProblemSpec", "apply_operator", "assemble",
    "BlowUp", "CFLViolation", "Trajectory", "residual", "solve", "step_theta", "subsolution_check",
]
