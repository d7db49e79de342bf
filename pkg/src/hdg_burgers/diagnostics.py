"""Verification utilities: uncondensed reference solves and stability monitors.

The monolithic assembly builds the full (flux, scalar, trace) block system on
tiny meshes so the condensation path can be checked against a dense solve.
The energy monitor accumulates the per-step norms entering the discrete
energy estimate; `check_stability` turns them into a regression-style verdict
with an explicit slack factor (the estimate hides a constant).
"""

from dataclasses import dataclass, field

import numpy as np

from .condensed import StepParams
from .local_forms import Discretization
from .projections import FieldState, triple_norm

MONOLITHIC_MAX_ELEMENTS = 16


@dataclass
class MonolithicSystem:
    disc: Discretization
    matrix: np.ndarray
    rhs: np.ndarray
    n_flux: int
    n_scalar: int
    n_trace: int


def assemble_monolithic(disc: Discretization, params: StepParams) -> MonolithicSystem:
    """Dense unreduced block system over all (flux, scalar, trace) unknowns."""
    mesh = disc.mesh
    E = mesh.num_elements
    if E > MONOLITHIC_MAX_ELEMENTS:
        raise ValueError(
            f"monolithic assembly is a dense oracle, limited to "
            f"{MONOLITHIC_MAX_ELEMENTS} elements (got {E})"
        )
    nq, nu_, nl = disc.n_q, disc.n_u, disc.n_l
    F = mesh.dim + 1
    nQ, nU, nT = E * nq, E * nu_, disc.n_trace_dofs
    n = nQ + nU + nT
    A = np.zeros((n, n))
    b = np.zeros(n)

    nu_visc = params.viscosity
    if params.transport is not None:
        n_uu, n_uhat = disc.transport_blocks(np.asarray(params.transport, dtype=float))
    else:
        n_uu = np.zeros((E, nu_, nu_))
        n_uhat = np.zeros((E, F, nu_, nl))

    for e in range(E):
        det = disc.det_j[e]
        sq = slice(e * nq, (e + 1) * nq)
        su = slice(nQ + e * nu_, nQ + (e + 1) * nu_)
        # flux row: mass against flux, minus divergence coupling, plus trace
        A[sq, sq] += det * np.eye(nq)
        A[sq, su] += -disc.cu[e]
        # scalar row
        A[su, sq] += nu_visc * disc.cu[e].T
        A[su, su] += params.alpha * det * np.eye(nu_) + nu_visc * disc.s_uu[e] + n_uu[e]
        b[su] += params.load[e]
        for f in range(F):
            start = disc.trace_index[e, f, 0]
            if start < 0:
                continue
            st = slice(nQ + nU + start, nQ + nU + start + nl)
            A[sq, st] += disc.chat[e, f]
            A[su, st] += -nu_visc * disc.s_uhat[e, f] + n_uhat[e, f]
            # trace row tested against this element's contribution
            A[st, sq] += -nu_visc * disc.chat[e, f].T
            A[st, su] += -nu_visc * disc.s_uhat[e, f].T - n_uhat[e, f].T
            A[st, st] += nu_visc * disc.s_hh[e, f] * np.eye(nl)
    return MonolithicSystem(disc, A, b, nQ, nU, nT)


def solve_monolithic(system: MonolithicSystem, t: float) -> FieldState:
    disc = system.disc
    E = disc.mesh.num_elements
    x = np.linalg.solve(system.matrix, system.rhs)
    nQ, nU = system.n_flux, system.n_scalar
    q = x[:nQ].reshape(E, disc.mesh.dim, disc.n_qs)
    u = x[nQ:nQ + nU].reshape(E, disc.n_u)
    trace = x[nQ + nU:].reshape(-1, disc.n_l)
    return FieldState(t=t, u=u, q=q, trace=trace)


@dataclass
class StabilityTrace:
    """Per-step data entering the discrete energy estimate."""

    dt: float
    viscosity: float
    u_norms: list = field(default_factory=list)          # ||u^n||, n = 0..N
    dissipation_cum: list = field(default_factory=list)  # nu dt sum |||.|||^2
    forcing_cum: list = field(default_factory=list)      # (dt/nu) sum ||f^i||^2

    def validate(self):
        arrays = map(np.asarray, (self.u_norms, self.dissipation_cum, self.forcing_cum))
        return all(np.all(np.isfinite(a)) and np.all(a >= 0) for a in arrays)


class EnergyMonitor:
    """Collects the norms used by the stability check during a run."""

    def __init__(self):
        self.trace = None
        self._disc = None
        self._case = None
        self._grid = None
        self._diss = 0.0
        self._forc = 0.0

    def start(self, disc, case, grid, state):
        self._disc, self._case, self._grid = disc, case, grid
        self._diss = 0.0
        self._forc = 0.0
        self.trace = StabilityTrace(dt=grid.dt, viscosity=case.viscosity)
        self.trace.u_norms.append(disc.scalar_l2_norm(state.u))
        self.trace.dissipation_cum.append(0.0)
        self.trace.forcing_cum.append(0.0)

    def record(self, n, state):
        disc, case, grid = self._disc, self._case, self._grid
        tn = triple_norm(disc, state.u, state.trace)
        self._diss += case.viscosity * grid.dt * tn * tn
        self._forc += (grid.dt / case.viscosity) * disc.function_l2_norm_sq(
            case.forcing, state.t
        )
        self.trace.u_norms.append(disc.scalar_l2_norm(state.u))
        self.trace.dissipation_cum.append(self._diss)
        self.trace.forcing_cum.append(self._forc)


@dataclass(frozen=True)
class StabilityVerdict:
    passed: bool
    margin: float        # max over steps of lhs / (slack * rhs)
    worst_step: int
    monotone: bool | None = None


def check_stability(trace: StabilityTrace, slack=10.0, expect_decay=False):
    """Bounded-by-data check: ||u^n||^2 + dissipation <= slack * (||u^0||^2 + forcing).

    With `expect_decay` the scalar norms must additionally be nonincreasing
    (the zero-forcing specialization).
    """
    if not trace.validate():
        return StabilityVerdict(False, float("inf"), -1, None)
    u = np.asarray(trace.u_norms)
    lhs = u[1:] ** 2 + np.asarray(trace.dissipation_cum)[1:]
    rhs = u[0] ** 2 + np.asarray(trace.forcing_cum)[1:]
    floor = max(u[0] ** 2, 1e-300)
    ratios = lhs / np.maximum(slack * rhs, slack * floor * 1e-16)
    worst = int(np.argmax(ratios)) + 1
    margin = float(ratios.max()) if len(ratios) else 0.0
    passed = margin <= 1.0
    monotone = None
    if expect_decay:
        monotone = bool(np.all(np.diff(u) <= 1e-13 * max(u[0], 1.0)))
        passed = passed and monotone
    return StabilityVerdict(passed, margin, worst, monotone)
