"""Static condensation onto the interior-face trace and field recovery.

Each implicit step solves one linear system: the flux and scalar unknowns are
eliminated element by element (one dense factorization of the combined block
per element), leaving a sparse nonsymmetric system in the interior-face trace
coefficients. Boundary faces carry no unknowns; known boundary data, when
present, is folded into the right-hand side.
"""

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .local_forms import Discretization
from .projections import FieldState

SOLVE_RESIDUAL_TOL = 1e-10


class TraceSolveError(RuntimeError):
    """Raised when the condensed solve cannot meet its residual contract."""


@dataclass(frozen=True)
class StepParams:
    """Data of one linearized implicit solve.

    alpha is the reaction coefficient (1/dt for backward Euler, 1/(a_ii dt)
    for a DIRK stage, 0 only for the steady diagnostic mode); `load` is the
    assembled moment vector of the right-hand side against the scalar basis;
    `transport` holds the frozen advecting state (None for pure diffusion);
    `boundary_trace` optionally supplies known trace data on boundary faces.
    """

    viscosity: float
    alpha: float
    load: np.ndarray
    transport: np.ndarray | None = None
    boundary_trace: np.ndarray | None = None

    def __post_init__(self):
        if self.viscosity <= 0:
            raise ValueError("viscosity must be positive")
        if self.alpha < 0:
            raise ValueError("alpha must be nonnegative")


@dataclass
class GlobalTraceSystem:
    disc: Discretization
    matrix: sp.csc_matrix
    rhs: np.ndarray
    elem_d: np.ndarray   # (E, nx, nx) combined (flux, scalar) blocks
    elem_g: np.ndarray   # (E, nx, F*nl) trace coupling
    elem_b: np.ndarray   # (E, nx) local right-hand sides
    boundary_trace: np.ndarray | None = None
    _lu: object = field(default=None, repr=False)


def _linear_base(disc, viscosity, alpha):
    """Transport-independent pieces of the local systems, cached per (nu, alpha)."""
    key = (viscosity, alpha)
    cached = disc._step_cache.get(key)
    if cached is not None:
        return cached
    mesh = disc.mesh
    E = mesh.num_elements
    F = mesh.dim + 1
    nq, nu_, nl = disc.n_q, disc.n_u, disc.n_l
    nx = nq + nu_
    nhat = F * nl

    d0 = np.zeros((E, nx, nx))
    idx = np.arange(nq)
    d0[:, idx, idx] = disc.det_j[:, None]
    d0[:, :nq, nq:] = -disc.cu
    d0[:, nq:, :nq] = viscosity * np.transpose(disc.cu, (0, 2, 1))
    iu = np.arange(nu_)
    d0[:, nq + iu, nq + iu] = alpha * disc.det_j[:, None]
    d0[:, nq:, nq:] += viscosity * disc.s_uu

    g0 = np.zeros((E, nx, nhat))
    chat = disc.chat.transpose(0, 2, 1, 3).reshape(E, nq, nhat)
    g0[:, :nq, :] = chat
    g0[:, nq:, :] = -viscosity * disc.s_uhat.transpose(0, 2, 1, 3).reshape(E, nu_, nhat)

    h0 = np.zeros((E, nhat, nx))
    h0[:, :, :nq] = -viscosity * chat.transpose(0, 2, 1)
    h0[:, :, nq:] = -viscosity * disc.s_uhat.transpose(0, 1, 3, 2).reshape(E, nhat, nu_)

    l_diag = viscosity * np.repeat(disc.s_hh, nl, axis=1)  # (E, nhat)

    base = (d0, g0, h0, l_diag)
    disc._step_cache.clear()
    disc._step_cache[key] = base
    return base


def assemble_condensed(disc: Discretization, params: StepParams) -> GlobalTraceSystem:
    """Form the condensed trace system for one linearized implicit step."""
    mesh = disc.mesh
    E = mesh.num_elements
    nq, nu_ = disc.n_q, disc.n_u
    nhat = (mesh.dim + 1) * disc.n_l

    d0, g0, h0, l_diag = _linear_base(disc, params.viscosity, params.alpha)
    D = d0.copy()
    G = g0.copy()
    H = h0.copy()
    if params.transport is not None:
        n_uu, n_uhat = disc.transport_blocks(np.asarray(params.transport, dtype=float))
        D[:, nq:, nq:] += n_uu
        flat = n_uhat.transpose(0, 2, 1, 3).reshape(E, nu_, nhat)
        G[:, nq:, :] += flat
        H[:, :, nq:] -= flat.transpose(0, 2, 1)

    b = np.zeros((E, nq + nu_))
    b[:, nq:] = params.load
    if params.boundary_trace is not None:
        known = disc.gather_trace(
            np.zeros(disc.n_trace_dofs), boundary_values=params.boundary_trace
        ).reshape(E, nhat)
        b -= np.einsum("exh,eh->ex", G, known)

    try:
        dig = np.linalg.solve(D, np.concatenate([G, b[:, :, None]], axis=2))
    except np.linalg.LinAlgError as exc:
        # find the offending element for the error report
        for e in range(E):
            try:
                np.linalg.solve(D[e], b[e])
            except np.linalg.LinAlgError:
                raise TraceSolveError(f"local factorization failed on element {e}") from exc
        raise TraceSolveError("local factorization failed") from exc
    dinv_g = dig[:, :, :-1]
    dinv_b = dig[:, :, -1]

    schur = -np.einsum("ehx,exg->ehg", H, dinv_g)
    idx = np.arange(nhat)
    schur[:, idx, idx] += l_diag
    rhs_elem = -np.einsum("ehx,ex->eh", H, dinv_b)

    data, rows, cols = disc.scatter_matrix_entries(schur)
    n = disc.n_trace_dofs
    matrix = sp.coo_matrix((data, (rows, cols)), shape=(n, n)).tocsc()
    rhs = disc.scatter_vector(rhs_elem)
    return GlobalTraceSystem(
        disc=disc,
        matrix=matrix,
        rhs=rhs,
        elem_d=D,
        elem_g=G,
        elem_b=b,
        boundary_trace=params.boundary_trace,
    )


def solve_trace(system: GlobalTraceSystem) -> np.ndarray:
    """Direct sparse solve of the trace system with an explicit residual check."""
    rhs = system.rhs
    if system.matrix.shape[0] == 0:
        return np.zeros(0)
    try:
        # the trace pattern is structurally symmetric; AT+A ordering wins
        lu = spla.splu(system.matrix, permc_spec="MMD_AT_PLUS_A")
        x = lu.solve(rhs)
    except RuntimeError as exc:
        mat = system.matrix
        raise TraceSolveError(
            f"sparse factorization failed: shape={mat.shape}, nnz={mat.nnz}, "
            f"max|A|={abs(mat).max() if mat.nnz else 0.0:.3e}"
        ) from exc
    system._lu = lu
    rhs_norm = np.linalg.norm(rhs)
    if rhs_norm == 0.0:
        if np.linalg.norm(x) != 0.0:
            raise TraceSolveError("nonzero solution for zero right-hand side")
        return x
    residual = np.linalg.norm(system.matrix @ x - rhs) / rhs_norm
    if residual > SOLVE_RESIDUAL_TOL:
        x = x + lu.solve(rhs - system.matrix @ x)  # one refinement pass
        residual = np.linalg.norm(system.matrix @ x - rhs) / rhs_norm
        if residual > SOLVE_RESIDUAL_TOL:
            raise TraceSolveError(f"trace solve residual {residual:.3e} above tolerance")
    return x


def recover_fields(system: GlobalTraceSystem, trace: np.ndarray, t: float) -> FieldState:
    """Back-substitute the eliminated flux and scalar unknowns."""
    disc = system.disc
    mesh = disc.mesh
    E = mesh.num_elements
    nq = disc.n_q
    nhat = (mesh.dim + 1) * disc.n_l
    # known boundary data is already folded into elem_b, so gather with zeros
    local = disc.gather_trace(trace)
    rhs = system.elem_b - np.einsum(
        "exh,eh->ex", system.elem_g, local.reshape(E, nhat)
    )
    x = np.linalg.solve(system.elem_d, rhs[:, :, None])[:, :, 0]
    q = x[:, :nq].reshape(E, mesh.dim, disc.n_qs)
    u = x[:, nq:]
    return FieldState(t=t, u=u, q=q, trace=np.asarray(trace, dtype=float).reshape(-1, disc.n_l))


def solve_step(disc, params, t):
    """Assemble, solve and recover one implicit step."""
    system = assemble_condensed(disc, params)
    trace = solve_trace(system)
    return recover_fields(system, trace, t)
