"""Hybridized discontinuous Galerkin solver for the viscous Burgers equation.

The scheme approximates the scalar unknown, its flux (minus the gradient) and
the scalar's trace on mesh faces by discontinuous piecewise polynomials of
degrees k, k-1 and l (l = k or k-1). Interior unknowns are eliminated element
by element, leaving a sparse system in the face trace; implicit time stepping
is backward Euler (transport frozen at the previous level) or a two-stage
third-order DIRK scheme with an inner fixed-point iteration.
"""

from .basis import QuadratureRule, ReferenceBasis, eval_basis, make_basis, make_quadrature
from .cases import ManufacturedCase, make_case
from .condensed import (
    GlobalTraceSystem,
    StepParams,
    TraceSolveError,
    assemble_condensed,
    recover_fields,
    solve_step,
    solve_trace,
)
from .diagnostics import (
    EnergyMonitor,
    StabilityTrace,
    assemble_monolithic,
    check_stability,
    solve_monolithic,
)
from .harness import (
    ConvergenceReport,
    DtRule,
    emit_report,
    face_degree,
    parse_dt_rule,
    run_convergence,
)
from .local_forms import (
    ConvectionBlocks,
    Discretization,
    LocalElementSystem,
    apply_lifting,
    build_discretization,
    build_local_convection,
    build_local_linear,
)
from .mesh import Mesh, build_uniform_mesh, dump_mesh, element_geometry
from .projections import (
    ErrorPair,
    FieldState,
    project_element_scalar,
    project_element_vector,
    project_face,
    relative_errors,
    triple_norm,
)
from .timestepping import (
    ButcherTable,
    TimeGrid,
    initial_state,
    make_dirk23_table,
    run_backward_euler,
    run_dirk23,
)

__all__ = [
    "ButcherTable",
    "ConvectionBlocks",
    "ConvergenceReport",
    "Discretization",
    "DtRule",
    "EnergyMonitor",
    "ErrorPair",
    "FieldState",
    "GlobalTraceSystem",
    "LocalElementSystem",
    "ManufacturedCase",
    "Mesh",
    "QuadratureRule",
    "ReferenceBasis",
    "StabilityTrace",
    "StepParams",
    "TimeGrid",
    "TraceSolveError",
    "apply_lifting",
    "assemble_condensed",
    "assemble_monolithic",
    "build_discretization",
    "build_local_convection",
    "build_local_linear",
    "build_uniform_mesh",
    "check_stability",
    "dump_mesh",
    "element_geometry",
    "emit_report",
    "eval_basis",
    "face_degree",
    "initial_state",
    "make_basis",
    "make_case",
    "make_dirk23_table",
    "make_quadrature",
    "parse_dt_rule",
    "project_element_scalar",
    "project_element_vector",
    "project_face",
    "recover_fields",
    "relative_errors",
    "run_backward_euler",
    "run_convergence",
    "run_dirk23",
    "solve_monolithic",
    "solve_step",
    "solve_trace",
    "triple_norm",
]
