"""Boundary-integral eigenvalue solver for oblique transmission and delta interactions.

Negative eigenvalues of the Schroedinger operators H_alpha (oblique
transmission condition) and Q_beta (delta interaction) on a closed curve,
and of the associated Dirac operator, are computed from characteristic
equations for the modified-Helmholtz single-layer operator S(lambda).
"""

__version__ = "0.1.0"

from .errors import ObliqueError  # noqa: E402
from .geometry import (  # noqa: E402
    CurveDescriptor,
    CurveMesh,
    build_broken_line,
    build_circle,
    build_corner_loop,
)
from .layer_operators import assemble_slp, assemble_theta, eval_potential  # noqa: E402
from .spectral_solver import (  # noqa: E402
    EigenResult,
    SolverOptions,
    solve_dirac,
    solve_h_alpha,
    solve_q_beta,
)
from .asymptotics import corner_constant, sweep_alpha, sweep_beta, transfer_check  # noqa: E402

__all__ = [
    "ObliqueError",
    "CurveDescriptor",
    "CurveMesh",
    "build_circle",
    "build_corner_loop",
    "build_broken_line",
    "assemble_slp",
    "assemble_theta",
    "eval_potential",
    "EigenResult",
    "SolverOptions",
    "solve_h_alpha",
    "solve_q_beta",
    "solve_dirac",
    "sweep_alpha",
    "sweep_beta",
    "corner_constant",
    "transfer_check",
]
