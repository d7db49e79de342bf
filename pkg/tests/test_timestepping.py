"""Time integrators: Butcher data, decay, dense linear oracles, identities."""

import numpy as np
import pytest

from hdg_burgers import (
    Discretization,
    StepParams,
    TimeGrid,
    apply_lifting,
    assemble_monolithic,
    build_uniform_mesh,
    initial_state,
    make_case,
    make_dirk23_table,
    run_backward_euler,
    run_dirk23,
)
from hdg_burgers.cases import ManufacturedCase


def zero_case(dim, nu=1.0):
    zero = lambda x, t: np.zeros(len(x))
    zero_vec = lambda x, t: np.zeros((len(x), dim))
    return ManufacturedCase(0, dim, nu, 1.0, zero, zero_vec, zero, zero)


def bump_case(dim, nu=1.0):
    # zero forcing, nonzero initial data: forcing fields are all zero but the
    # initial scalar is a smooth bump
    def u(x, t):
        prod = np.ones(len(x))
        for c in range(dim):
            prod *= np.sin(np.pi * x[:, c])
        return 0.3 * prod if t == 0.0 else np.zeros(len(x))

    zero = lambda x, t: np.zeros(len(x))
    zero_vec = lambda x, t: np.zeros((len(x), dim))
    case = ManufacturedCase(0, dim, nu, 1.0, zero, zero_vec, zero, zero)
    return case, lambda x: 0.3 * np.prod(np.sin(np.pi * x), axis=1)


def test_time_grid():
    grid = TimeGrid(1.0, 4)
    assert grid.dt == 0.25
    assert grid.time(4) == pytest.approx(1.0, abs=0)
    with pytest.raises(ValueError):
        TimeGrid(1.0, 0)


def test_butcher_order_conditions():
    table = make_dirk23_table()
    vals = table.order_condition_values()
    targets = (1.0, 0.5, 1.0 / 3.0, 1.0 / 6.0)
    for v, t in zip(vals, targets):
        assert abs(v - t) < 1e-14
    assert table.a11 == pytest.approx(0.788675134594813, abs=1e-15)
    # the smaller root also solves the conditions; the table pins the larger
    gamma_small = (3.0 - np.sqrt(3.0)) / 6.0
    assert table.a11 > 0.5 > gamma_small
    b1, b2, c1s, c2s = 0.5, 0.5, gamma_small, 1 - gamma_small
    assert b1 * c1s ** 2 + b2 * c2s ** 2 == pytest.approx(1 / 3, abs=1e-14)


def test_zero_data_stays_zero_backward_euler():
    mesh = build_uniform_mesh(2, 2)
    disc = Discretization(mesh, 1, 1)
    case = zero_case(2)
    state = run_backward_euler(disc, case, TimeGrid(1.0, 5))
    assert np.abs(state.u).max() == 0.0
    assert np.abs(state.q).max() == 0.0


def test_zero_data_stays_zero_dirk():
    mesh = build_uniform_mesh(2, 2)
    disc = Discretization(mesh, 1, 1)
    case = zero_case(2)
    sweeps = []
    import hdg_burgers.timestepping as ts
    orig = ts._oseen_stage

    def counting(*args, **kwargs):
        state, its = orig(*args, **kwargs)
        sweeps.append(its)
        return state, its

    ts._oseen_stage = counting
    try:
        state = run_dirk23(disc, case, TimeGrid(1.0, 4))
    finally:
        ts._oseen_stage = orig
    assert np.abs(state.u).max() == 0.0
    assert all(s == 1 for s in sweeps)


def test_energy_decay_without_forcing():
    mesh = build_uniform_mesh(2, 4)
    disc = Discretization(mesh, 1, 1)
    _, u0 = bump_case(2)

    class BumpCase:
        dim, viscosity, final_time = 2, 1.0, 1.0
        initial = staticmethod(u0)
        forcing = staticmethod(lambda x, t: np.zeros(len(x)))

    norms = []
    def record(n, state):
        norms.append(disc.scalar_l2_norm(state.u))
    final = run_backward_euler(disc, BumpCase, TimeGrid(1.0, 50), on_step=record)
    norms = np.array(norms)
    assert np.all(np.diff(norms) <= 1e-14), "scalar norm must not increase"
    assert norms[-1] < norms[0]
    assert disc.scalar_l2_norm(final.u) <= norms[0]


def dense_reduction(disc, viscosity):
    """Reduce the steady three-field operator onto the scalar block."""
    E = disc.mesh.num_elements
    params = StepParams(
        viscosity=viscosity, alpha=0.0,
        load=np.zeros((E, disc.n_u)), transport=None,
    )
    mono = assemble_monolithic(disc, params)
    A = mono.matrix
    nq, nu_ = mono.n_flux, mono.n_scalar
    iq = slice(0, nq)
    iu = slice(nq, nq + nu_)
    it = slice(nq + nu_, A.shape[0])
    # eliminate flux and trace: y = [q; t], solve block system for y(u)
    Ayy = np.block([[A[iq, iq], A[iq, it]], [A[it, iq], A[it, it]]])
    Ayu = np.vstack([A[iq, iu], A[it, iu]])
    Auy = np.hstack([A[iu, iq], A[iu, it]])
    K = A[iu, iu] - Auy @ np.linalg.solve(Ayy, Ayu)
    mass = np.repeat(disc.det_j, disc.n_u)
    return K, mass


def test_backward_euler_matches_dense_implicit_euler():
    mesh = build_uniform_mesh(2, 2)
    disc = Discretization(mesh, 1, 1)
    case = make_case(1, 1.0)
    grid = TimeGrid(1.0, 20)
    state = run_backward_euler(disc, case, grid, convection=False)

    K, mass = dense_reduction(disc, case.viscosity)
    E = mesh.num_elements
    u = initial_state(disc, case).u.reshape(-1)
    dt = grid.dt
    lhs = np.diag(mass / dt) + K
    for n in range(1, grid.steps + 1):
        load = disc.load_vector(case.forcing, grid.time(n)).reshape(-1)
        u = np.linalg.solve(lhs, load + mass * u / dt)
    assert np.abs(state.u.reshape(-1) - u).max() < 1e-9


def test_dirk_matches_dense_sdirk_oracle():
    mesh = build_uniform_mesh(2, 2)
    disc = Discretization(mesh, 1, 1)
    case = make_case(1, 1.0)
    grid = TimeGrid(1.0, 10)
    state = run_dirk23(disc, case, grid, convection=False)

    # classical two-stage SDIRK on the dense reduced ODE  M u' + K u = F(t)
    K, mass = dense_reduction(disc, case.viscosity)
    tb = make_dirk23_table()
    u = initial_state(disc, case).u.reshape(-1)
    dt = grid.dt

    def F(t):
        return disc.load_vector(case.forcing, t).reshape(-1)

    for n in range(grid.steps):
        t_n = grid.time(n)
        lhs1 = np.diag(mass / (tb.a11 * dt)) + K
        u1 = np.linalg.solve(lhs1, F(t_n + tb.c1 * dt) + mass * u / (tb.a11 * dt))
        f1 = (u1 - u) / (tb.a11 * dt)
        lhs2 = np.diag(mass / (tb.a22 * dt)) + K
        z2 = mass * u / (tb.a22 * dt) + mass * (tb.a21 / tb.a22) * f1
        u2 = np.linalg.solve(lhs2, F(t_n + tb.c2 * dt) + z2)
        f2 = (u2 - u) / (tb.a22 * dt) - (tb.a21 / tb.a22) * f1
        u = u + dt * (tb.b1 * f1 + tb.b2 * f2)
    assert np.abs(state.u.reshape(-1) - u).max() < 1e-9


def test_lifting_identity_every_accepted_step():
    mesh = build_uniform_mesh(2, 2)
    case = make_case(1, 1.0)
    for runner in (run_backward_euler, run_dirk23):
        disc = Discretization(mesh, 1, 1)
        residuals = []

        def check(n, state):
            lift = apply_lifting(disc, state.u, state.trace.ravel())
            scale = max(1.0, float(np.abs(state.q).max()))
            residuals.append(np.abs(state.q + lift).max() / scale)

        runner(disc, case, TimeGrid(1.0, 10), on_step=check)
        assert len(residuals) == 10
        assert max(residuals) <= 1e-9


def test_temporal_orders_on_fixed_mesh():
    # backward Euler is first order, the two-stage scheme is third order
    mesh = build_uniform_mesh(2, 2)
    disc = Discretization(mesh, 1, 1)
    case = make_case(1, 1.0)
    ref = run_dirk23(disc, case, TimeGrid(1.0, 256))
    errs_be, errs_rk = [], []
    for N in (16, 32, 64):
        be = run_backward_euler(disc, case, TimeGrid(1.0, N))
        rk = run_dirk23(disc, case, TimeGrid(1.0, N))
        errs_be.append(disc.scalar_l2_norm(be.u - ref.u))
        errs_rk.append(disc.scalar_l2_norm(rk.u - ref.u))
    order_be = np.log2(errs_be[1] / errs_be[2])
    order_rk = np.log2(errs_rk[1] / errs_rk[2])
    assert 0.8 < order_be < 1.2
    assert order_rk > 2.5


def test_determinism_bit_identical():
    mesh = build_uniform_mesh(2, 2)
    case = make_case(1, 1.0)
    runs = []
    for _ in range(2):
        disc = Discretization(mesh, 1, 1)
        state = run_backward_euler(disc, case, TimeGrid(1.0, 8))
        runs.append(state)
    assert np.array_equal(runs[0].u, runs[1].u)
    assert np.array_equal(runs[0].q, runs[1].q)
    assert np.array_equal(runs[0].trace, runs[1].trace)


def test_oseen_warning_on_iteration_cap():
    mesh = build_uniform_mesh(2, 2)
    disc = Discretization(mesh, 1, 1)
    case = make_case(1, 0.01)
    with pytest.warns(UserWarning, match="stage iteration"):
        run_dirk23(disc, case, TimeGrid(1.0, 2), oseen_tol=1e-15, oseen_max=1)


def test_invalid_controls_rejected():
    mesh = build_uniform_mesh(2, 1)
    disc = Discretization(mesh, 1, 1)
    case = make_case(1, 1.0)
    with pytest.raises(ValueError):
        run_dirk23(disc, case, TimeGrid(1.0, 2), oseen_tol=-1.0)
    with pytest.raises(ValueError):
        run_dirk23(disc, case, TimeGrid(1.0, 2), oseen_max=0)
