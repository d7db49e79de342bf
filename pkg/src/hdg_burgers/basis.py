"""Orthonormal polynomial bases and quadrature rules on reference simplices.

Reference cells: the unit interval [0,1], the unit triangle {x,y>=0, x+y<=1}
and the unit tetrahedron {x,y,z>=0, x+y+z<=1}.
"""

import functools
import itertools
from dataclasses import dataclass
from math import comb

import numpy as np
from scipy.special import roots_jacobi

MAX_DEGREE = 4
MAX_QUAD_DEGREE = 14

_REF_MEASURE = {1: 1.0, 2: 0.5, 3: 1.0 / 6.0}


def simplex_measure(dim):
    """Measure of the reference simplex (1, 1/2, 1/6 for dim 1, 2, 3)."""
    if dim not in _REF_MEASURE:
        raise ValueError(f"unsupported dimension {dim}")
    return _REF_MEASURE[dim]


def _monomial_exponents(dim, degree):
    exps = []
    for total in range(degree + 1):
        for combo in itertools.combinations_with_replacement(range(dim), total):
            e = [0] * dim
            for c in combo:
                e[c] += 1
            exps.append(tuple(e))
    # stable order: ascending total degree, lexicographic within
    exps = sorted(set(exps), key=lambda e: (sum(e), e))
    return np.array(exps, dtype=int)


def _as_points(dim, points):
    pts = np.asarray(points, dtype=float)
    if dim == 1 and pts.ndim == 1:
        pts = pts[:, None]
    if pts.ndim != 2 or pts.shape[1] != dim:
        raise ValueError(f"points must have shape (n, {dim})")
    return pts


def _eval_monomials(exps, pts):
    return np.prod(pts[:, None, :] ** exps[None, :, :], axis=2)


def _eval_monomial_grads(exps, pts):
    npts, dim = pts.shape
    nmono = exps.shape[0]
    grads = np.zeros((npts, nmono, dim))
    for c in range(dim):
        e = exps.copy()
        fac = e[:, c].astype(float)
        active = fac > 0
        if not np.any(active):
            continue
        e_red = e[active].copy()
        e_red[:, c] -= 1
        grads[:, active, c] = fac[active] * np.prod(
            pts[:, None, :] ** e_red[None, :, :], axis=2
        )
    return grads


@dataclass(frozen=True)
class ReferenceBasis:
    """Orthonormal basis of P_degree on the reference simplex.

    Member i is sum_j coeffs[i, j] * monomial_j; the Gram matrix w.r.t. the
    reference-simplex L2 inner product is the identity.
    """

    dim: int
    degree: int
    exponents: np.ndarray
    coeffs: np.ndarray

    @property
    def size(self):
        return self.coeffs.shape[0]

    def eval(self, points):
        pts = _as_points(self.dim, points)
        return _eval_monomials(self.exponents, pts) @ self.coeffs.T

    def eval_grad(self, points):
        pts = _as_points(self.dim, points)
        mono_grads = _eval_monomial_grads(self.exponents, pts)
        return np.einsum("pmc,nm->pnc", mono_grads, self.coeffs)


@dataclass(frozen=True)
class QuadratureRule:
    """Positive-weight rule on the reference simplex, exact to `degree`."""

    dim: int
    degree: int
    points: np.ndarray
    weights: np.ndarray


def _gauss_01(n):
    x, w = np.polynomial.legendre.leggauss(n)
    return (x + 1.0) / 2.0, w / 2.0


def _jacobi_01(n, alpha):
    # nodes/weights for weight (1-t)^alpha on [0,1], normalized so that
    # sum(w) = integral of (1-t)^alpha over [0,1]
    x, w = roots_jacobi(n, alpha, 0.0)
    return (x + 1.0) / 2.0, w / 2.0 ** (alpha + 1)


@functools.lru_cache(maxsize=None)
def make_quadrature(dim, degree):
    """Conical-product rule on the reference simplex, exact to `degree`."""
    if dim not in (1, 2, 3):
        raise ValueError(f"unsupported dimension {dim}")
    if not 0 <= degree <= MAX_QUAD_DEGREE:
        raise ValueError(f"quadrature exactness {degree} outside [0, {MAX_QUAD_DEGREE}]")
    n = max(1, (degree + 2) // 2)
    if dim == 1:
        x, w = _gauss_01(n)
        return QuadratureRule(1, degree, x[:, None].copy(), w.copy())
    xu, wu = _gauss_01(n)
    xv, wv = _jacobi_01(n, 1.0)
    if dim == 2:
        u, v = np.meshgrid(xu, xv, indexing="ij")
        pts = np.column_stack([(u * (1.0 - v)).ravel(), v.ravel()])
        wts = np.outer(wu, wv).ravel()
        return QuadratureRule(2, degree, pts, wts)
    xw, ww = _jacobi_01(n, 2.0)
    u, v, t = np.meshgrid(xu, xv, xw, indexing="ij")
    pts = np.column_stack(
        [
            (u * (1.0 - v) * (1.0 - t)).ravel(),
            (v * (1.0 - t)).ravel(),
            t.ravel(),
        ]
    )
    wts = (wu[:, None, None] * wv[None, :, None] * ww[None, None, :]).ravel()
    return QuadratureRule(3, degree, pts, wts)


@functools.lru_cache(maxsize=None)
def make_basis(dim, degree):
    """Orthonormalized polynomial basis of total degree <= `degree`."""
    if dim not in (1, 2, 3):
        raise ValueError(f"unsupported dimension {dim}")
    if not 0 <= degree <= MAX_DEGREE:
        raise ValueError(f"basis degree {degree} outside [0, {MAX_DEGREE}]")
    exps = _monomial_exponents(dim, degree)
    rule = make_quadrature(dim, min(2 * degree, MAX_QUAD_DEGREE))
    vals = _eval_monomials(exps, rule.points)
    coeffs = np.eye(exps.shape[0])
    # two Gram-Schmidt passes (via Cholesky) for machine-level orthonormality
    for _ in range(2):
        basis_vals = vals @ coeffs.T
        gram = basis_vals.T @ (rule.weights[:, None] * basis_vals)
        chol = np.linalg.cholesky(gram)
        coeffs = np.linalg.solve(chol, coeffs)
    basis = ReferenceBasis(dim, degree, exps, coeffs)
    assert basis.size == comb(degree + dim, dim)
    return basis


def eval_basis(basis, points):
    """Values and reference-coordinate gradients at the given points."""
    return basis.eval(points), basis.eval_grad(points)
