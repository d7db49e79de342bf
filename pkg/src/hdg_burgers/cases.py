"""Manufactured solutions and the forcing synthesized from the PDE.

All cases vanish on the boundary of the unit square/cube for all times, so
the homogeneous trace space of the scheme applies directly. Derivatives are
hand-coded; the forcing is evaluated pointwise as
u_t - nu * lap(u) + u * sum_c du/dx_c (the transport field has equal
components, so its dot product with the gradient collapses to a sum).
"""

from dataclasses import dataclass
from typing import Callable

import numpy as np

DEFAULT_VISCOSITY = {1: 1.0, 2: 0.1, 3: 1.0}


@dataclass(frozen=True)
class ManufacturedCase:
    """Closed-form exact solution with the derivative fields the harness needs."""

    example: int
    dim: int
    viscosity: float
    final_time: float
    u: Callable          # (points (n, d), t) -> (n,)
    grad_u: Callable     # (points (n, d), t) -> (n, d)
    lap_u: Callable      # (points (n, d), t) -> (n,)
    u_t: Callable        # (points (n, d), t) -> (n,)

    def forcing(self, x, t):
        grad_sum = self.grad_u(x, t).sum(axis=1)
        return self.u_t(x, t) - self.viscosity * self.lap_u(x, t) + self.u(x, t) * grad_sum

    def initial(self, x):
        return self.u(x, 0.0)


def _case_decaying_quartic(nu):
    # 2D, u = exp(-t) x(x-1) y(y-1)
    def u(x, t):
        return np.exp(-t) * x[:, 0] * (x[:, 0] - 1.0) * x[:, 1] * (x[:, 1] - 1.0)

    def grad(x, t):
        gx = (2.0 * x[:, 0] - 1.0) * x[:, 1] * (x[:, 1] - 1.0)
        gy = x[:, 0] * (x[:, 0] - 1.0) * (2.0 * x[:, 1] - 1.0)
        return np.exp(-t) * np.column_stack([gx, gy])

    def lap(x, t):
        return np.exp(-t) * 2.0 * (
            x[:, 1] * (x[:, 1] - 1.0) + x[:, 0] * (x[:, 0] - 1.0)
        )

    def dudt(x, t):
        return -u(x, t)

    return ManufacturedCase(1, 2, nu, 1.0, u, grad, lap, dudt)


def _case_tanh_layer(nu):
    # 2D, u = (exp(t)-1) * g(x) g(y) with g(s) = s tanh((1-s)/nu)
    def g(s):
        return s * np.tanh((1.0 - s) / nu)

    def dg(s):
        th = np.tanh((1.0 - s) / nu)
        return th - s / nu * (1.0 - th * th)

    def d2g(s):
        th = np.tanh((1.0 - s) / nu)
        sech2 = 1.0 - th * th
        return -2.0 / nu * sech2 - 2.0 * s / (nu * nu) * th * sech2

    def u(x, t):
        return (np.exp(t) - 1.0) * g(x[:, 0]) * g(x[:, 1])

    def grad(x, t):
        a = np.exp(t) - 1.0
        return a * np.column_stack(
            [dg(x[:, 0]) * g(x[:, 1]), g(x[:, 0]) * dg(x[:, 1])]
        )

    def lap(x, t):
        a = np.exp(t) - 1.0
        return a * (d2g(x[:, 0]) * g(x[:, 1]) + g(x[:, 0]) * d2g(x[:, 1]))

    def dudt(x, t):
        return np.exp(t) * g(x[:, 0]) * g(x[:, 1])

    return ManufacturedCase(2, 2, nu, 1.0, u, grad, lap, dudt)


def _case_decaying_bump_3d(nu):
    # 3D, u = exp(-t) x(1-x) y(1-y) z(1-z)
    def h(s):
        return s * (1.0 - s)

    def u(x, t):
        return np.exp(-t) * h(x[:, 0]) * h(x[:, 1]) * h(x[:, 2])

    def grad(x, t):
        hx, hy, hz = h(x[:, 0]), h(x[:, 1]), h(x[:, 2])
        dhx = 1.0 - 2.0 * x[:, 0]
        dhy = 1.0 - 2.0 * x[:, 1]
        dhz = 1.0 - 2.0 * x[:, 2]
        return np.exp(-t) * np.column_stack([dhx * hy * hz, hx * dhy * hz, hx * hy * dhz])

    def lap(x, t):
        hx, hy, hz = h(x[:, 0]), h(x[:, 1]), h(x[:, 2])
        return np.exp(-t) * (-2.0) * (hy * hz + hx * hz + hx * hy)

    def dudt(x, t):
        return -u(x, t)

    return ManufacturedCase(3, 3, nu, 1.0, u, grad, lap, dudt)


_BUILDERS = {
    1: _case_decaying_quartic,
    2: _case_tanh_layer,
    3: _case_decaying_bump_3d,
}


def make_case(example, nu=None):
    """Manufactured case by id (1: 2D decaying quartic, 2: 2D tanh layers,
    3: 3D decaying bump); nu defaults to the value used in the verification
    tables."""
    if example not in _BUILDERS:
        raise ValueError(f"unknown example id {example}")
    if nu is None:
        nu = DEFAULT_VISCOSITY[example]
    if nu <= 0:
        raise ValueError("viscosity must be positive")
    return _BUILDERS[example](nu)
