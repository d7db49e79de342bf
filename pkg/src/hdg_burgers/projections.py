"""Element and face L2 projections, discrete norms and error measures."""

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .basis import make_basis, make_quadrature
from .local_forms import Discretization

ZERO_NORM_FLOOR = 1e-14


@dataclass(frozen=True)
class FieldState:
    """Coefficient vectors of (flux, scalar, face trace) at one time level.

    Boundary faces carry no trace unknowns; `trace` covers interior faces only.
    """

    t: float
    u: np.ndarray      # (E, n_u)
    q: np.ndarray      # (E, dim, n_qs)
    trace: np.ndarray  # (n_interior_faces, n_l)

    def __post_init__(self):
        if self.u.ndim != 2 or self.q.ndim != 3 or self.trace.ndim != 2:
            raise ValueError("inconsistent field state shapes")
        if self.q.shape[0] != self.u.shape[0]:
            raise ValueError("flux and scalar fields disagree on element count")


def _element_points(mesh, rule):
    coords = mesh.vertices[mesh.elements]
    origins = coords[:, 0]
    jac = np.transpose(coords[:, 1:] - coords[:, :1], (0, 2, 1))
    det = np.linalg.det(jac)
    pts = origins[:, None, :] + np.einsum("ecm,qm->eqc", jac, rule.points)
    return pts, det


def _eval_field(f, pts, t=None):
    E, Q, d = pts.shape
    flat = pts.reshape(E * Q, d)
    vals = np.asarray(f(flat) if t is None else f(flat, t), dtype=float)
    if vals.shape[0] != E * Q:
        raise ValueError("field evaluation returned wrong number of values")
    return vals.reshape((E, Q) + vals.shape[1:])


def project_element_scalar(mesh, f, degree, rule_degree=None):
    """Elementwise L2 projection of a scalar field onto P_degree."""
    basis = make_basis(mesh.dim, degree)
    rule = make_quadrature(mesh.dim, rule_degree or max(2 * degree, degree + 6))
    pts, _ = _element_points(mesh, rule)
    vals = _eval_field(f, pts)
    phi = basis.eval(rule.points)
    # orthonormal reference basis: the Jacobian cancels between mass and moment
    return np.einsum("eq,q,qi->ei", vals, rule.weights, phi)


def project_element_vector(mesh, f, degree, rule_degree=None):
    """Componentwise elementwise L2 projection of a vector field."""
    basis = make_basis(mesh.dim, degree)
    rule = make_quadrature(mesh.dim, rule_degree or max(2 * degree, degree + 6))
    pts, _ = _element_points(mesh, rule)
    vals = _eval_field(f, pts)  # (E, Q, dim)
    phi = basis.eval(rule.points)
    return np.einsum("eqc,q,qi->eci", vals, rule.weights, phi)


def project_face(mesh, f, degree, rule_degree=None, all_faces=False):
    """Facewise L2 projection onto P_degree of the face parametrization.

    Boundary faces are projected and then dropped (the trace space is pinned
    to zero there); pass `all_faces=True` to keep them for diagnostics.
    """
    basis = make_basis(mesh.dim - 1, degree)
    rule = make_quadrature(mesh.dim - 1, rule_degree or max(2 * degree, degree + 6))
    coords = mesh.vertices[mesh.faces]
    v0 = coords[:, 0]
    edges = coords[:, 1:] - v0[:, None, :]
    pts = v0[:, None, :] + np.einsum("qm,fmc->fqc", rule.points, edges)
    nf, Q, d = pts.shape
    vals = np.asarray(f(pts.reshape(nf * Q, d)), dtype=float).reshape(nf, Q)
    chi = basis.eval(rule.points)
    coeffs = np.einsum("fq,q,qm->fm", vals, rule.weights, chi)
    if all_faces:
        return coeffs
    return coeffs[mesh.interior_faces()]


def triple_norm(disc: Discretization, u, trace):
    """Energy seminorm of a (scalar, trace) pair: lifting plus penalized jump."""
    u = np.asarray(u, dtype=float)
    local = disc.gather_trace(np.asarray(trace, dtype=float))
    lift = disc.lifting(u, local)
    lift_sq = disc.flux_l2_norm_sq(lift)
    jump_sq = disc.trace_jump_sq(u, local)
    return float(np.sqrt(lift_sq + jump_sq))


class ErrorPair(NamedTuple):
    err_u: float
    err_q: float
    absolute: bool


def relative_errors(disc: Discretization, state: FieldState, exact_u, exact_grad,
                    t=None, rule_degree=None):
    """Relative L2 errors of the scalar and flux fields against exact data.

    The scalar error is measured against the elementwise L2 projection of the
    exact solution (the discrete-norm convention of the reference tables; the
    projection component is orthogonal to the scalar space and would otherwise
    dominate the superconvergent part at low degree). The flux error is
    measured against minus the exact gradient directly. When the exact scalar
    norm is below 1e-14 the absolute errors are reported and flagged.
    """
    mesh = disc.mesh
    if t is None:
        t = state.t
    degree = rule_degree or min(2 * disc.k + 8, 14)
    rule = make_quadrature(mesh.dim, degree)
    pts, det = _element_points(mesh, rule)
    w = rule.weights

    ue = _eval_field(exact_u, pts, t)
    u_proj = np.einsum("eq,q,qi->ei", ue, w, disc.basis_u.eval(rule.points))
    err_u = disc.scalar_l2_norm(u_proj - state.u)
    norm_u = float(np.sqrt(np.sum(det * ((ue ** 2) @ w))))

    psi = disc.basis_q.eval(rule.points)
    qh = np.einsum("eci,qi->eqc", state.q, psi)
    qe = -_eval_field(exact_grad, pts, t)
    diff = qe - qh
    err_q = float(np.sqrt(np.sum(det * np.einsum("eqc,eqc,q->e", diff, diff, w))))
    norm_q = float(np.sqrt(np.sum(det * np.einsum("eqc,eqc,q->e", qe, qe, w))))

    if norm_u < ZERO_NORM_FLOOR:
        return ErrorPair(err_u, err_q, True)
    return ErrorPair(err_u / norm_u, err_q / norm_q if norm_q > 0 else err_q, False)
