"""Static condensation against the dense monolithic oracle, plus recovery checks."""

import numpy as np
import pytest

from hdg_burgers import (
    Discretization,
    StepParams,
    TraceSolveError,
    apply_lifting,
    assemble_condensed,
    assemble_monolithic,
    build_uniform_mesh,
    project_element_scalar,
    project_element_vector,
    project_face,
    recover_fields,
    solve_monolithic,
    solve_step,
    solve_trace,
)


def random_params(disc, rng, alpha=3.0, viscosity=0.7):
    E = disc.mesh.num_elements
    return StepParams(
        viscosity=viscosity,
        alpha=alpha,
        load=rng.standard_normal((E, disc.n_u)),
        transport=0.5 * rng.standard_normal((E, disc.n_u)),
    )


def test_trace_system_dimension():
    mesh = build_uniform_mesh(2, 1)
    disc = Discretization(mesh, 1, 1)
    params = StepParams(
        viscosity=1.0, alpha=1.0, load=np.zeros((2, disc.n_u)), transport=None
    )
    system = assemble_condensed(disc, params)
    assert system.matrix.shape == (2, 2)  # one interior edge, two P1 face dofs


def test_zero_data_gives_zero_solution():
    mesh = build_uniform_mesh(2, 2)
    disc = Discretization(mesh, 1, 1)
    params = StepParams(
        viscosity=1.0, alpha=2.0,
        load=np.zeros((mesh.num_elements, disc.n_u)), transport=None,
    )
    state = solve_step(disc, params, t=0.0)
    assert np.abs(state.u).max() == 0.0
    assert np.abs(state.q).max() == 0.0
    assert np.abs(state.trace).max() == 0.0


@pytest.mark.parametrize("dim,M,k,l", [
    (2, 1, 1, 1), (2, 1, 1, 0), (2, 2, 1, 1), (2, 2, 1, 0),
    (2, 1, 2, 2), (2, 1, 2, 1), (2, 2, 2, 2), (2, 2, 2, 1),
    (3, 1, 1, 1), (3, 1, 2, 1),
])
def test_condensed_matches_monolithic(dim, M, k, l):
    rng = np.random.default_rng(dim * 100 + M * 10 + k)
    mesh = build_uniform_mesh(dim, M)
    disc = Discretization(mesh, k, l)
    params = random_params(disc, rng)
    ref = solve_monolithic(assemble_monolithic(disc, params), t=0.0)
    state = solve_step(disc, params, t=0.0)
    scale = max(np.abs(ref.u).max(), 1e-30)
    assert np.abs(state.u - ref.u).max() / scale < 1e-10
    scale_q = max(np.abs(ref.q).max(), 1e-30)
    assert np.abs(state.q - ref.q).max() / scale_q < 1e-10
    scale_t = max(np.abs(ref.trace).max(), 1e-30)
    assert np.abs(state.trace - ref.trace).max() / scale_t < 1e-10


def test_recovered_flux_satisfies_lifting_identity():
    rng = np.random.default_rng(23)
    mesh = build_uniform_mesh(2, 2)
    disc = Discretization(mesh, 2, 1)
    state = solve_step(disc, random_params(disc, rng), t=0.0)
    lift = apply_lifting(disc, state.u, state.trace.ravel())
    resid = np.abs(state.q + lift).max()
    assert resid <= 1e-10 * max(np.abs(state.q).max(), 1.0)


def test_full_residual_of_uncondensed_system():
    rng = np.random.default_rng(29)
    mesh = build_uniform_mesh(2, 2)
    disc = Discretization(mesh, 1, 1)
    params = random_params(disc, rng)
    state = solve_step(disc, params, t=0.0)
    mono = assemble_monolithic(disc, params)
    E = mesh.num_elements
    x = np.concatenate([
        state.q.reshape(E * disc.n_q),
        state.u.reshape(E * disc.n_u),
        state.trace.reshape(-1),
    ])
    resid = mono.matrix @ x - mono.rhs
    assert np.linalg.norm(resid) <= 1e-9 * max(np.linalg.norm(mono.rhs), 1.0)


def test_solve_residual_contract():
    rng = np.random.default_rng(31)
    mesh = build_uniform_mesh(2, 3)
    disc = Discretization(mesh, 1, 1)
    system = assemble_condensed(disc, random_params(disc, rng))
    trace = solve_trace(system)
    resid = np.linalg.norm(system.matrix @ trace - system.rhs)
    assert resid <= 1e-10 * np.linalg.norm(system.rhs)


def test_reaction_dominant_limit_returns_scaled_load():
    # huge reaction, tiny viscosity: the condensed step acts like the
    # identity on the scalar, u ~ load / (alpha * mass), trace stays bounded
    rng = np.random.default_rng(37)
    mesh = build_uniform_mesh(2, 2)
    disc = Discretization(mesh, 1, 1)
    E = mesh.num_elements
    alpha = 1e8
    target = rng.standard_normal((E, disc.n_u))
    params = StepParams(
        viscosity=1e-6, alpha=alpha,
        load=alpha * disc.det_j[:, None] * target, transport=None,
    )
    state = solve_step(disc, params, t=0.0)
    assert np.abs(state.u - target).max() < 1e-6 * np.abs(target).max()
    assert np.abs(state.trace).max() < 10 * np.abs(target).max()


def test_steady_diffusion_reproduces_linear_solution():
    # alpha = 0 diagnostic with known boundary trace: a globally linear exact
    # solution is captured exactly by the k = 1 scheme
    mesh = build_uniform_mesh(2, 2)
    disc = Discretization(mesh, 1, 1)
    f = lambda x: 0.25 + 2.0 * x[:, 0] - 1.5 * x[:, 1]
    grad = np.array([2.0, -1.5])
    boundary = project_face(mesh, f, 1, all_faces=True)
    params = StepParams(
        viscosity=0.7,
        alpha=0.0,
        load=np.zeros((mesh.num_elements, disc.n_u)),
        transport=None,
        boundary_trace=boundary,
    )
    state = solve_step(disc, params, t=0.0)
    u_exact = project_element_scalar(mesh, f, 1)
    assert np.abs(state.u - u_exact).max() < 1e-10
    q_exact = project_element_vector(mesh, lambda x: np.tile(-grad, (len(x), 1)), 0)
    assert np.abs(state.q - q_exact).max() < 1e-10


def test_monolithic_counting_and_size_guard():
    mesh = build_uniform_mesh(2, 1)
    disc = Discretization(mesh, 1, 1)
    params = StepParams(
        viscosity=1.0, alpha=1.0, load=np.zeros((2, disc.n_u)), transport=None
    )
    mono = assemble_monolithic(disc, params)
    # 2 elements x (2 flux dofs + 3 scalar dofs) + 1 interior edge x 2 = 12
    assert mono.matrix.shape == (12, 12)
    big = Discretization(build_uniform_mesh(2, 3), 1, 1)
    with pytest.raises(ValueError):
        assemble_monolithic(
            big,
            StepParams(viscosity=1.0, alpha=1.0,
                       load=np.zeros((18, big.n_u)), transport=None),
        )


def test_params_validation():
    with pytest.raises(ValueError):
        StepParams(viscosity=0.0, alpha=1.0, load=np.zeros((2, 3)))
    with pytest.raises(ValueError):
        StepParams(viscosity=1.0, alpha=-1.0, load=np.zeros((2, 3)))


def test_trace_sparsity_bound():
    mesh = build_uniform_mesh(2, 4)
    disc = Discretization(mesh, 1, 1)
    params = StepParams(
        viscosity=1.0, alpha=4.0,
        load=np.zeros((mesh.num_elements, disc.n_u)), transport=None,
    )
    system = assemble_condensed(disc, params)
    n_blocks = system.matrix.nnz / (disc.n_l ** 2)
    assert n_blocks <= mesh.num_elements * (mesh.dim + 1) ** 2
