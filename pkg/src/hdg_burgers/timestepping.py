"""Fully discrete drivers: linearized backward Euler and DIRK(2,3).

Backward Euler freezes the transport field at the previous time level, so
each step is a single linear solve. The DIRK stages are fully implicit and
are solved by a fixed-point (Oseen) iteration that refreezes the transport
at the previous iterate until the relative change drops below tolerance.
"""

import warnings
from dataclasses import dataclass
from math import sqrt

import numpy as np

from .condensed import StepParams, solve_step
from .local_forms import Discretization
from .projections import FieldState, project_element_scalar, project_face


@dataclass(frozen=True)
class TimeGrid:
    final_time: float
    steps: int

    def __post_init__(self):
        if self.steps < 1:
            raise ValueError("need at least one time step")
        if self.final_time <= 0:
            raise ValueError("final time must be positive")

    @property
    def dt(self):
        return self.final_time / self.steps

    def time(self, n):
        return n * self.dt


@dataclass(frozen=True)
class ButcherTable:
    """Two-stage diagonally implicit table (the upper-right entry is zero)."""

    a11: float
    a21: float
    a22: float
    b1: float
    b2: float
    c1: float
    c2: float

    def order_condition_values(self):
        """The four order-condition sums; (1, 1/2, 1/3, 1/6) up to round-off
        for a third-order two-stage scheme."""
        return (
            self.b1 + self.b2,
            self.b1 * self.c1 + self.b2 * self.c2,
            self.b1 * self.c1 ** 2 + self.b2 * self.c2 ** 2,
            self.b2 * (self.a21 * self.c1 + self.a22 * self.c2)
            + self.b1 * self.a11 * self.c1,
        )


def make_dirk23_table():
    """Two-stage, third-order, A-stable diagonally implicit table
    (gamma fixed at the larger root of the order conditions)."""
    gamma = (3.0 + sqrt(3.0)) / 6.0
    return ButcherTable(
        a11=gamma,
        a21=1.0 - 2.0 * gamma,
        a22=gamma,
        b1=0.5,
        b2=0.5,
        c1=gamma,
        c2=1.0 - gamma,
    )


class OseenNonConvergence(UserWarning):
    pass


def initial_state(disc: Discretization, case) -> FieldState:
    """Projected initial data; the flux starts from the lifting of the pair."""
    u0 = project_element_scalar(disc.mesh, case.initial, disc.k)
    trace0 = project_face(disc.mesh, case.initial, disc.l)
    local = disc.gather_trace(trace0)
    q0 = -disc.lifting(u0, local)
    return FieldState(t=0.0, u=u0, q=q0, trace=trace0)


def _step_load(disc, case, t, extra=None):
    load = disc.load_vector(case.forcing, t)
    if extra is not None:
        load = load + disc.det_j[:, None] * extra
    return load


def run_backward_euler(disc, case, grid, convection=True, monitor=None, on_step=None):
    """March the linearized backward Euler scheme; returns the final state."""
    state = initial_state(disc, case)
    if monitor is not None:
        monitor.start(disc, case, grid, state)
    dt = grid.dt
    alpha = 1.0 / dt
    for n in range(1, grid.steps + 1):
        t_n = grid.time(n)
        params = StepParams(
            viscosity=case.viscosity,
            alpha=alpha,
            load=_step_load(disc, case, t_n, extra=alpha * state.u),
            transport=state.u if convection else None,
        )
        try:
            state = solve_step(disc, params, t_n)
        except Exception as exc:
            raise RuntimeError(f"backward Euler failed at step {n}") from exc
        if monitor is not None:
            monitor.record(n, state)
        if on_step is not None:
            on_step(n, state)
    return state


def _oseen_stage(disc, case, t_stage, alpha, z, u_start, convection,
                 oseen_tol, oseen_max):
    """Solve one fully implicit stage by refreezing the transport field."""
    load = _step_load(disc, case, t_stage, extra=z)
    transport = u_start
    state = None
    for it in range(1, oseen_max + 1):
        params = StepParams(
            viscosity=case.viscosity,
            alpha=alpha,
            load=load,
            transport=transport if convection else None,
        )
        state = solve_step(disc, params, t_stage)
        change = disc.scalar_l2_norm(state.u - transport)
        scale = max(disc.scalar_l2_norm(state.u), 1e-30)
        if not convection or change / scale <= oseen_tol:
            return state, it
        transport = state.u
    warnings.warn(
        f"stage iteration stopped at {oseen_max} sweeps, relative change "
        f"{change / scale:.3e}",
        OseenNonConvergence,
    )
    return state, oseen_max


def run_dirk23(disc, case, grid, table=None, oseen_tol=1e-10, oseen_max=50,
               convection=True, monitor=None, on_step=None):
    """March the two-stage third-order DIRK scheme; returns the final state.

    The accepted trace is carried as the same linear combination of stage
    traces as the flux and scalar updates, which keeps the flux equal to the
    lifting of the accepted pair at every step.
    """
    if table is None:
        table = make_dirk23_table()
    if oseen_tol <= 0 or oseen_max < 1:
        raise ValueError("invalid stage iteration controls")
    state = initial_state(disc, case)
    if monitor is not None:
        monitor.start(disc, case, grid, state)
    dt = grid.dt
    a11, a21, a22 = table.a11, table.a21, table.a22
    alpha1 = 1.0 / (a11 * dt)
    alpha2 = 1.0 / (a22 * dt)
    for n in range(grid.steps):
        t_n = grid.time(n)
        try:
            z1 = alpha1 * state.u
            stage1, _ = _oseen_stage(
                disc, case, t_n + table.c1 * dt, alpha1, z1, state.u,
                convection, oseen_tol, oseen_max,
            )
            z2 = alpha2 * state.u + (a21 / a22) * (alpha1 * stage1.u - z1)
            stage2, _ = _oseen_stage(
                disc, case, t_n + table.c2 * dt, alpha2, z2, state.u,
                convection, oseen_tol, oseen_max,
            )
        except Exception as exc:
            raise RuntimeError(f"DIRK step failed at step {n + 1}") from exc

        def derivative(y1, y2, y0):
            f1 = (y1 - y0) / (a11 * dt)
            f2 = (y2 - y0) / (a22 * dt) - (a21 / a22) * f1
            return table.b1 * f1 + table.b2 * f2

        t_next = grid.time(n + 1)
        state = FieldState(
            t=t_next,
            u=state.u + dt * derivative(stage1.u, stage2.u, state.u),
            q=state.q + dt * derivative(stage1.q, stage2.q, state.q),
            trace=state.trace + dt * derivative(stage1.trace, stage2.trace, state.trace),
        )
        if monitor is not None:
            monitor.record(n + 1, state)
        if on_step is not None:
            on_step(n + 1, state)
    return state
