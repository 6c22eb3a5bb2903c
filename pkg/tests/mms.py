"""Shared manufactured solution for solver and identity verification.

u  = U(y) + a sin(x - t) y^2 e^{-y},   U = u_inf (1 - e^{-y/2})
rho = 1 + c cos(x - t/2) e^{-y}

v is the exact divergence-free partner and (S_rho, S_u) are the
closed-form residuals of the regularized system on these fields, so
feeding them to the solver as sources makes (u, rho) an exact solution.
"""

import numpy as np

from prandtl_lab.grid import ScalarField, ddy
from prandtl_lab.unsteady import UnsteadyState, recover_v

A = 0.05
C = 0.1
U_INF = 4.0


def _parts(y):
    U = U_INF * (1 - np.exp(-y / 2))
    Up = (U_INF / 2) * np.exp(-y / 2)
    Upp = -(U_INF / 4) * np.exp(-y / 2)
    P = y ** 2 * np.exp(-y)
    Pp = (2 * y - y ** 2) * np.exp(-y)
    Ppp = (2 - 4 * y + y ** 2) * np.exp(-y)
    R = 2 - (y ** 2 + 2 * y + 2) * np.exp(-y)
    return U, Up, Upp, P, Pp, Ppp, R


def u_exact(t, x, y):
    U, _, _, P, _, _, _ = _parts(y)
    return U + A * np.sin(x - t) * P


def v_exact(t, x, y):
    *_, R = _parts(y)
    return -A * np.cos(x - t) * R


def rho_exact(t, x, y):
    return 1 + C * np.cos(x - 0.5 * t) * np.exp(-y)


def make_sources(eps):
    """(S_rho, S_u) callables for the system at regularization eps."""

    def S_u(t, x, y):
        U, Up, Upp, P, Pp, Ppp, _ = _parts(y)
        phi = x - t
        ut = -A * np.cos(phi) * P
        ux = A * np.cos(phi) * P
        uy = Up + A * np.sin(phi) * Pp
        uyy = Upp + A * np.sin(phi) * Ppp
        uxx = -A * np.sin(phi) * P
        return (ut + u_exact(t, x, y) * ux + v_exact(t, x, y) * uy
                - eps * uxx - uyy / rho_exact(t, x, y))

    def S_rho(t, x, y):
        psi = x - 0.5 * t
        rt = 0.5 * C * np.sin(psi) * np.exp(-y)
        rx = -C * np.sin(psi) * np.exp(-y)
        ry = -C * np.cos(psi) * np.exp(-y)
        rxx = -C * np.cos(psi) * np.exp(-y)
        return (rt + u_exact(t, x, y) * rx + v_exact(t, x, y) * ry - eps * rxx)

    return S_rho, S_u


def exact_state(grid, t):
    """UnsteadyState sampled from the manufactured fields at time t."""
    X = grid.x_nodes[:, None]
    Y = grid.y_nodes[None, :]
    u = ScalarField(grid, u_exact(t, X, Y) + 0 * X)
    rho = ScalarField(grid, rho_exact(t, X, Y) + 0 * X)
    return UnsteadyState(t, rho, u, recover_v(u), ddy(u, 1), 1.0, U_INF)
