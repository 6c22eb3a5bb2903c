"""Cancellation variables and verification of the derived identities.

The tangential-energy obstruction is the term d_x^s v, which loses one x
derivative.  The good unknowns

    g_w  = d_y w / w            g_rho = d_y rho / w
    w_g  = d_x^s w  - g_w  d_x^s u
    rho_g= d_x^s rho - g_rho d_x^s u

cancel it: w_g and rho_g satisfy transport-diffusion equations whose
right sides (the Q terms below) contain no derivative of order s+1 in x
acting on v.  This module builds the unknowns and numerically verifies

  * the quotient identity  w_g = w d_y(d_x^s u / w),
  * the evolution equations of w_g and rho_g (residual form, with the
    time derivative by centered differencing over three states),
  * the wall boundary reduction
    d_y^3 w|_0 = (rho w d_x w)|_0 + (2 d_y rho / rho * d_y^2 w)|_0.

All Q terms are evaluated from spatial derivatives of a single state;
optional manufactured-solution sources (S_rho, S_u) enter exactly where
the time derivatives of rho and w were substituted during the
derivation.
"""

import numpy as np
from scipy.special import comb

from .errors import DegeneracyError, UsageError
from .grid import ScalarField, ddx, ddy


class GoodUnknowns:
    def __init__(self, s_order, g_w, g_rho, w_g, rho_g):
        self.s_order = int(s_order)
        self.g_w = g_w
        self.g_rho = g_rho
        self.w_g = w_g
        self.rho_g = rho_g


class GoodUnknownResidual:
    def __init__(self, which, residual_norm, grid_h):
        self.which = which
        self.residual_norm = float(residual_norm)
        self.grid_h = float(grid_h)

    def __repr__(self):
        return f"GoodUnknownResidual({self.which}: {self.residual_norm:.6g} at h={self.grid_h:.4g})"


def _check_lower_bound(state, delta_bl, sigma):
    wy = state.w.values * state.grid.weight[None, :] ** sigma
    m = float(wy.min())
    if m < delta_bl:
        raise DegeneracyError(
            f"weighted vorticity minimum {m:g} below delta_bl = {delta_bl:g}",
            minimum=m)


def compute_good_unknowns(state, s, delta_bl, sigma=3.0):
    """All four cancellation fields at tangential order s."""
    _check_lower_bound(state, delta_bl, sigma)
    grid = state.grid
    w = state.w.values
    g_w = ddy(state.w, 1).values / w
    g_rho = ddy(state.rho, 1).values / w
    dxs_u = ddx(state.u, s).values
    w_g = ddx(state.w, s).values - g_w * dxs_u
    rho_g = ddx(state.rho, s).values - g_rho * dxs_u
    return GoodUnknowns(s, ScalarField(grid, g_w), ScalarField(grid, g_rho),
                        ScalarField(grid, w_g), ScalarField(grid, rho_g))


def verify_quotient_identity(state, s, delta_bl=1e-10, sigma=3.0):
    """Residual of w_g = w d_y(d_x^s u / w) in discrete L2."""
    _check_lower_bound(state, delta_bl, sigma)
    grid = state.grid
    w = state.w.values
    gu = compute_good_unknowns(state, s, delta_bl, sigma)
    quot = ScalarField(grid, ddx(state.u, s).values / w)
    rhs = w * ddy(quot, 1).values
    res = np.sqrt(grid.integrate((gu.w_g.values - rhs) ** 2))
    return GoodUnknownResidual("quotient_identity", res, grid.y_nodes[1])


class _Ops:
    """Derivative shorthand over one state's raw arrays."""

    def __init__(self, state):
        self.grid = state.grid
        self.rho = state.rho.values
        self.u = state.u.values
        self.v = state.v.values
        self.w = state.w.values
        self.b = 1.0 / self.rho  # 1/rho

    def dx(self, vals, k=1):
        if k == 0:
            return vals
        return ddx(ScalarField(self.grid, np.asarray(vals)), k).values

    def dy(self, vals, k=1):
        out = np.asarray(vals)
        for _ in range(k):
            out = out @ self.grid.ddy_matrix(1).T
        return out


def _q_terms(which, op, s, eps, sources=None):
    """Right side of the w_g (which='wg') or rho_g ('rhog') equation.

    sources, if given, is (S_rho, S_u) sampled on the grid; S_w = d_y S_u
    is inserted where the w equation was substituted and S_rho where the
    density equation was.
    """
    u, v, w, b, rho = op.u, op.v, op.w, op.b, op.rho
    dx, dy = op.dx, op.dy
    C = lambda k: comb(s, k, exact=True)
    g_w = dy(w) / w
    g_rho = dy(rho) / w

    S_rho = S_u = S_w = 0.0
    if sources is not None:
        S_rho, S_u = sources
        S_w = dy(S_u)

    if which == "wg":
        # Q1, Q2: tangential commutators of the w and u equations
        Q1 = -sum(C(k) * dx(u, k) * dx(w, s + 1 - k) for k in range(1, s + 1)) \
             - sum(C(k) * dx(v, k) * dx(dy(w), s - k) for k in range(1, s))
        Q2 = -sum(C(k) * dx(u, k) * dx(u, s + 1 - k) for k in range(1, s + 1)) \
             - sum(C(k) * dx(v, k) * dx(w, s - k) for k in range(1, s))
        # Q3: normal-diffusion commutator (includes the eps cross term)
        comm = sum(C(k) * dx(b, k) * dx(dy(w), s - k) for k in range(1, s + 1)) \
            if s >= 1 else 0.0
        Q3 = (-dy(comm)
              - dy(b * dx(u, s) * dy(g_w))
              - dx(w, s) * dy(b * g_w)
              + comm * g_w
              - 2.0 * eps * dx(u, s + 1) * dx(g_w))
        # Q4: transport of g_w with d_t w substituted from the w equation
        brace = -u * dx(w) - v * dy(w) + dy(b * dy(w)) + S_w
        Q4 = ((1.0 / w) * dy(brace)
              - (dy(w) / w ** 2) * brace
              + u * (dx(dy(w)) / w - dy(w) * dx(w) / w ** 2)
              + v * (dy(w, 2) / w - dy(w) ** 2 / w ** 2)
              - eps * dx(g_w, 2)
              + eps * dy(dx(w, 2)) / w
              - eps * dy(w) * dx(w, 2) / w ** 2)
        rhs = Q1 - Q2 * g_w - Q3 - Q4 * dx(u, s)
        if sources is not None:
            rhs = rhs + dx(S_w, s) - g_w * dx(S_u, s)
        return rhs

    if which == "rhog":
        Q2 = -sum(C(k) * dx(u, k) * dx(u, s + 1 - k) for k in range(1, s + 1)) \
             - sum(C(k) * dx(v, k) * dx(w, s - k) for k in range(1, s))
        Q5 = -sum(C(k) * dx(u, k) * dx(rho, s + 1 - k) for k in range(1, s + 1)) \
             - sum(C(k) * dx(v, k) * dx(dy(rho), s - k) for k in range(1, s))
        Q6 = Q2 + dx(b * dy(w), s)
        paren = -u * dx(w) - v * dy(w) + dy(b * dy(w)) + eps * dx(w, 2) + S_w
        Q7 = (-dy(u * dx(rho) + v * dy(rho) - eps * dx(rho, 2) - S_rho) / w
              - (dy(rho) / w ** 2) * paren
              + u * (dx(dy(rho)) / w - dy(rho) * dx(w) / w ** 2)
              + v * (dy(rho, 2) / w - dy(rho) * dy(w) / w ** 2)
              - eps * dx(g_rho, 2))
        rhs = Q5 - Q6 * g_rho - Q7 * dx(u, s) + 2.0 * eps * dx(u, s + 1) * dx(g_rho)
        if sources is not None:
            rhs = rhs + dx(S_rho, s) - g_rho * dx(S_u, s)
        return rhs

    raise UsageError(f"unknown equation selector {which!r}")


def _interior_l2(grid, vals):
    """Discrete L2 over y in [4 h_y, y_max/2].

    The first few rows are excluded because the residual stacks up to
    three d_y applications, so the one-sided boundary stencils pollute a
    band of that many cells, not just the wall row.
    """
    y = grid.y_nodes
    mask = (y >= y[4]) & (y <= grid.y_max / 2)
    wy = np.zeros_like(y)
    dy = np.diff(y)
    wy[:-1] += 0.5 * dy
    wy[1:] += 0.5 * dy
    return float(np.sqrt(grid.dx * np.sum(vals[:, mask] ** 2 * wy[mask][None, :])))


def residual_good_unknown_equation(which, states, params, s, delta_bl=1e-10,
                                   sigma=3.0, sources=None):
    """L2 residual of the good-unknown evolution equation at the middle
    of three equally spaced states.

    sources, if given, is a pair of callables (S_rho(t,x,y), S_u(t,x,y))
    matching the forcing fed to the solver.
    """
    if len(states) != 3:
        raise UsageError("need exactly three consecutive states")
    t0, t1, t2 = (st.t for st in states)
    if abs((t1 - t0) - (t2 - t1)) > 1e-12 * max(abs(t2 - t0), 1.0):
        raise UsageError("states must be equally spaced in time")
    dt = t1 - t0
    mid = states[1]
    grid = mid.grid
    _check_lower_bound(mid, delta_bl, sigma)

    def unknown(st):
        gu = compute_good_unknowns(st, s, delta_bl, sigma)
        return gu.w_g.values if which == "wg" else gu.rho_g.values

    f_prev, f_mid, f_next = (unknown(st) for st in states)
    dtf = (f_next - f_prev) / (2.0 * dt)

    op = _Ops(mid)
    src_fields = None
    if sources is not None:
        X = grid.x_nodes[:, None]
        Y = grid.y_nodes[None, :]
        src_fields = (np.broadcast_to(sources[0](mid.t, X, Y), f_mid.shape).astype(float),
                      np.broadcast_to(sources[1](mid.t, X, Y), f_mid.shape).astype(float))
    rhs = _q_terms(which, op, s, params.eps, src_fields)

    fld = ScalarField(grid, f_mid)
    lhs = (dtf + op.u * ddx(fld, 1).values + op.v * ddy(fld, 1).values
           - params.eps * ddx(fld, 2).values)
    if which == "wg":
        flux = ScalarField(grid, op.b * ddy(fld, 1).values)
        lhs = lhs - ddy(flux, 1).values
    res = _interior_l2(grid, lhs - rhs)
    return GoodUnknownResidual(f"{which}_equation", res, grid.y_nodes[1])


def verify_boundary_reduction_1(state):
    """Sup over x of the wall identity
    d_y^3 w|_0 - (rho w d_x w)|_0 - (2 d_y rho / rho d_y^2 w)|_0."""
    grid = state.grid
    if grid.ny < 8:
        raise UsageError("need at least 8 wall-normal nodes")
    w3 = grid.wall_weights(3, 7)
    w2 = grid.wall_weights(2, 6)
    w1 = grid.wall_weights(1, 5)
    wv = state.w.values
    rv = state.rho.values
    lhs = wv[:, :7] @ w3
    dxw0 = ddx(state.w, 1).values[:, 0]
    dyrho0 = rv[:, :5] @ w1
    d2w0 = wv[:, :6] @ w2
    rhs = rv[:, 0] * wv[:, 0] * dxw0 + 2.0 * dyrho0 / rv[:, 0] * d2w0
    res = float(np.abs(lhs - rhs).max())
    return GoodUnknownResidual("boundary_reduction_1", res, grid.y_nodes[1])
