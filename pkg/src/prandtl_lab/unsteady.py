"""Time integration of the tangentially regularized unsteady system

    d_t rho + u d_x rho + v d_y rho - eps d_x^2 rho = 0
    d_t u   + u d_x u   + v d_y u   - eps d_x^2 u - (1/rho) d_y^2 u = 0
    v = - int_0^y d_x u dy',   u|_{y=0} = 0,  (rho, u) -> (rho_inf, u_inf)

by IMEX splitting: explicit second-order advection, exact Fourier
damping for the eps d_x^2 term, Crank-Nicolson tridiagonal solve per
x-column for the normal diffusion (coefficient frozen at the current
density).  The density is transported semi-Lagrangially with the result
clamped to the previous range, which enforces the discrete maximum
principle exactly.
"""

import numpy as np
from scipy.integrate import cumulative_trapezoid
from scipy.interpolate import CubicSpline
from scipy.linalg import solve_banded
from scipy.ndimage import map_coordinates, spline_filter1d

from .errors import BlowUpError, DataError, StepError, UsageError
from .grid import ScalarField, ddx, ddy, fd_weights

BLOWUP_SUP = 1e6
BLOWUP_RHO_MIN = 1e-8


class UnsteadyParams:
    """Solver parameters for the regularized unsteady system."""

    def __init__(self, eps=1e-3, rho_inf=1.0, u_inf=2.0, dt=1e-3, t_final=0.1,
                 cfl_max=0.8, s_order=2, upwind_blend=0.0, farfield_tol=1e-2):
        if dt <= 0 or eps < 0 or rho_inf <= 0 or u_inf <= 0:
            raise UsageError("need dt > 0, eps >= 0, rho_inf > 0, u_inf > 0")
        if not 1 <= s_order <= 6:
            raise UsageError("s_order must be in 1..6")
        self.eps = float(eps)
        self.rho_inf = float(rho_inf)
        self.u_inf = float(u_inf)
        self.dt = float(dt)
        self.t_final = float(t_final)
        self.cfl_max = float(cfl_max)
        self.s_order = int(s_order)
        self.upwind_blend = float(upwind_blend)
        self.farfield_tol = float(farfield_tol)


class UnsteadyState:
    """(rho, u, v, w) at time t; w = d_y u is diagnostic."""

    def __init__(self, t, rho, u, v, w, rho_inf, u_inf):
        self.t = float(t)
        self.rho = rho
        self.u = u
        self.v = v
        self.w = w
        self.rho_inf = float(rho_inf)
        self.u_inf = float(u_inf)

    @property
    def grid(self):
        return self.u.grid


def recover_v(u):
    """v(x, y) = -int_0^y d_x u dy' (cumulative trapezoid); v(., 0) = 0."""
    dxu = ddx(u, 1).values
    v = -cumulative_trapezoid(dxu, u.grid.y_nodes, axis=1, initial=0.0)
    return ScalarField(u.grid, v)


def init_unsteady(rho0, u0, params):
    """Validated state at t = 0 with v recovered and w computed."""
    grid = u0.grid
    if rho0.values.min() <= 0:
        raise DataError("initial density must be strictly positive")
    if np.abs(u0.values[:, 0]).max() > 1e-12:
        raise DataError("u0 violates the no-slip condition at y = 0")
    tol = params.farfield_tol
    if np.abs(u0.values[:, -1] - params.u_inf).max() > tol:
        raise DataError(f"u0 does not reach u_inf = {params.u_inf:g} at y_max "
                        f"within tolerance {tol:g}")
    if np.abs(rho0.values[:, -1] - params.rho_inf).max() > tol:
        raise DataError(f"rho0 does not reach rho_inf = {params.rho_inf:g} at "
                        f"y_max within tolerance {tol:g}")
    return UnsteadyState(0.0, rho0, u0, recover_v(u0), ddy(u0, 1),
                         params.rho_inf, params.u_inf)


def _ddy_blended(grid, vals, v_vals, blend):
    """Centered d_y with an optional first-order upwind admixture."""
    centered = vals @ grid.ddy_matrix(1).T
    if blend == 0.0:
        return centered
    up = np.empty_like(vals)
    dy_b = np.diff(grid.y_nodes)
    back = np.empty_like(vals)
    back[:, 1:] = (vals[:, 1:] - vals[:, :-1]) / dy_b
    back[:, 0] = centered[:, 0]
    fwd = np.empty_like(vals)
    fwd[:, :-1] = (vals[:, 1:] - vals[:, :-1]) / dy_b
    fwd[:, -1] = centered[:, -1]
    up = np.where(v_vals >= 0, back, fwd)
    return (1.0 - blend) * centered + blend * up


def _spectral_ddx(grid, vals):
    k = np.fft.rfftfreq(grid.nx, d=1.0 / grid.nx)
    fac = 1j * k
    if grid.nx % 2 == 0:
        fac[-1] = 0.0
    return np.fft.irfft(np.fft.rfft(vals, axis=0) * fac[:, None], n=grid.nx, axis=0)


def _eps_damp(grid, vals, eps, dt):
    """Exact integrating factor for d_t f = eps d_x^2 f."""
    if eps == 0.0:
        return vals
    k = np.fft.rfftfreq(grid.nx, d=1.0 / grid.nx)
    damp = np.exp(-eps * k ** 2 * dt)
    return np.fft.irfft(np.fft.rfft(vals, axis=0) * damp[:, None], n=grid.nx, axis=0)


def _dealias(grid, vals):
    """Zero the top third of tangential Fourier modes.

    The semi-Lagrangian interpolation deposits grid-scale noise in x that
    later spectral derivatives amplify by k^s; the usual 2/3-rule filter
    removes it while leaving resolved modes untouched."""
    spec = np.fft.rfft(vals, axis=0)
    k = np.fft.rfftfreq(grid.nx, d=1.0 / grid.nx)
    spec[k > grid.nx / 3.0, :] = 0.0
    return np.fft.irfft(spec, n=grid.nx, axis=0)


def _interp_field(grid, vals, xq, yq):
    """Interpolating cubic B-spline evaluation at points (xq, yq);
    periodic in x (padded columns), clamped in y.

    Queries in index space: x is uniform, y goes through the node table
    so stretched grids work.  The B-spline reproduces nodal values
    exactly, which keeps repeated semi-Lagrangian steps from drifting.
    """
    # prefilter each axis with its own boundary rule (periodic in x,
    # clamped in y), then evaluate without refiltering
    coef = spline_filter1d(vals, order=3, axis=0, mode="grid-wrap")
    coef = spline_filter1d(coef, order=3, axis=1, mode="nearest")
    pad = 3
    padded = np.concatenate([coef[-pad:], coef, coef[:pad]], axis=0)
    ix = np.mod(np.broadcast_to(xq, vals.shape), grid.x_period) / grid.dx + pad
    yc = np.clip(np.broadcast_to(yq, vals.shape), 0.0, grid.y_max)
    iy = np.interp(yc, grid.y_nodes, np.arange(grid.ny))
    return map_coordinates(padded, [ix, iy], order=3, mode="nearest",
                           prefilter=False)


def _tridiag_interior(grid):
    """Sub/diag/super arrays of the interior rows of d_y^2 (cached)."""
    if not hasattr(grid, "_d2_tri"):
        D2 = grid.ddy_matrix(2)
        n = grid.ny
        lo = np.zeros(n)
        di = np.zeros(n)
        up = np.zeros(n)
        for i in range(1, n - 1):
            lo[i] = D2[i, i - 1]
            di[i] = D2[i, i]
            up[i] = D2[i, i + 1]
        grid._d2_tri = (lo, di, up)
    return grid._d2_tri


def _diffuse_cn(grid, vals, coeff_cols, dt, bc0, bc1):
    """Crank-Nicolson solve of d_t f = a(x, y) d_y^2 f per x-column with
    Dirichlet values bc0 at y = 0 and bc1 at y_max."""
    lo, di, up = _tridiag_interior(grid)
    n = grid.ny
    out = np.empty_like(vals)
    for i in range(vals.shape[0]):
        a = 0.5 * dt * coeff_cols[i]
        rhs = vals[i].copy()
        rhs[1:-1] += a[1:-1] * (lo[1:-1] * vals[i, :-2] + di[1:-1] * vals[i, 1:-1]
                                + up[1:-1] * vals[i, 2:])
        rhs[0] = bc0[i]
        rhs[-1] = bc1[i]
        # banded matrix with identity rows at both boundaries
        ab = np.zeros((3, n))
        ab[1, :] = 1.0
        ab[1, 1:-1] = 1.0 - a[1:-1] * di[1:-1]
        ab[0, 2:] = -a[1:-1] * up[1:-1]
        ab[2, :-2] = -a[1:-1] * lo[1:-1]
        out[i] = solve_banded((1, 1), ab, rhs)
    return out


def step_unsteady(state, params, forcing=None, bc_top=None):
    """One IMEX step; forcing, if given, is a pair of callables
    (S_rho(t, x, y), S_u(t, x, y)) for manufactured-solution runs, and
    bc_top(t, x) supplies the exact top boundary value of u (default:
    the advected value is carried, which suits decayed far fields)."""
    grid = state.grid
    dt = params.dt
    rho_n = state.rho.values
    u_n = state.u.values
    v_n = state.v.values

    sup = max(np.abs(u_n).max(), np.abs(v_n).max(), np.abs(rho_n).max())
    if sup > BLOWUP_SUP:
        raise BlowUpError(f"field sup-norm {sup:g} exceeds blow-up threshold", t=state.t)
    if rho_n.min() < BLOWUP_RHO_MIN:
        raise BlowUpError(f"density minimum {rho_n.min():g} below threshold", t=state.t)

    cfl = np.abs(u_n).max() * dt / grid.dx + np.abs(v_n).max() * dt / grid.dy_min
    if cfl > params.cfl_max:
        raise StepError(
            f"advective CFL {cfl:.3g} exceeds limit {params.cfl_max:g}",
            suggested_dt=0.9 * dt * params.cfl_max / cfl)

    X = grid.x_nodes[:, None]
    Y = grid.y_nodes[None, :]

    def S_u(t):
        return forcing[1](t, X, Y) if forcing is not None else 0.0

    def S_rho(t):
        return forcing[0](t, X, Y) if forcing is not None else 0.0

    # --- momentum: Heun advection (velocity frozen at step start) ---
    def adv_u(vals):
        return -(u_n * _spectral_ddx(grid, vals)
                 + v_n * _ddy_blended(grid, vals, v_n, params.upwind_blend))

    f0 = adv_u(u_n) + S_u(state.t)
    u_pred = u_n + dt * f0
    u_star = u_n + 0.5 * dt * (f0 + adv_u(u_pred) + S_u(state.t + dt))
    u_star = _eps_damp(grid, u_star, params.eps, dt)

    # --- density: semi-Lagrangian along a midpoint foot, range-clamped ---
    x_mid = X - 0.5 * dt * u_n
    y_mid = Y - 0.5 * dt * v_n
    u_mid = _interp_field(grid, u_n, x_mid, y_mid)
    v_mid = _interp_field(grid, v_n, x_mid, y_mid)
    feet_x = X - dt * u_mid
    feet_y = np.clip(Y - dt * v_mid, 0.0, grid.y_max)
    rho_new = _dealias(grid, _interp_field(grid, rho_n, feet_x, feet_y))
    if forcing is None:
        # sourceless transport obeys the maximum principle exactly
        np.clip(rho_new, rho_n.min(), rho_n.max(), out=rho_new)
    rho_new = _eps_damp(grid, rho_new, params.eps, dt)
    if forcing is not None:
        rho_new = rho_new + dt * S_rho(state.t + 0.5 * dt)

    # --- normal diffusion, implicit per column, 1/rho frozen ---
    coeff = 1.0 / rho_n
    bc0 = np.zeros(grid.nx)
    # the top boundary carries the advected value: pinning it to u_inf
    # would kink d_y^3 u wherever the data sit slightly below u_inf
    bc1 = u_star[:, -1]
    if bc_top is not None:
        bc1 = np.broadcast_to(bc_top(state.t + dt, grid.x_nodes),
                              (grid.nx,)).astype(float)
    u_new = _diffuse_cn(grid, u_star, coeff, dt, bc0, bc1)
    u_new[:, 0] = bc0

    u_field = ScalarField(grid, u_new)
    return UnsteadyState(state.t + dt, ScalarField(grid, rho_new), u_field,
                         recover_v(u_field), ddy(u_field, 1),
                         state.rho_inf, state.u_inf)


def heat_oracle(rho_const, u0_1d, y_nodes, t, dt_main=None, refine=4):
    """Independent Crank-Nicolson oracle for the x-independent,
    constant-density reduction rho d_t u = d_y^2 u.

    Solved at `refine`-times the caller's y-resolution and (when dt_main
    is given) a tenth of the caller's time step, then sampled back onto
    y_nodes.
    """
    if rho_const <= 0:
        raise UsageError("rho_const must be positive")
    y = np.asarray(y_nodes, float)
    u0 = np.asarray(u0_1d, float)
    if t == 0:
        return u0.copy()
    ny = len(y)
    idx = np.linspace(0, ny - 1, refine * (ny - 1) + 1)
    y_f = np.interp(idx, np.arange(ny), y)
    u = CubicSpline(y, u0)(y_f)
    n_steps = max(200, int(np.ceil(t / (dt_main / 10.0))) if dt_main else 1000)
    dt = t / n_steps
    n = len(y_f)
    # second-order d_y^2 on the refined nodes (interior three-point)
    lo = np.zeros(n)
    di = np.zeros(n)
    up = np.zeros(n)
    for i in range(1, n - 1):
        w = fd_weights(y_f[i], y_f[i - 1:i + 2], 2)[2]
        lo[i], di[i], up[i] = w
    a = 0.5 * dt / rho_const
    ab = np.zeros((3, n))
    ab[1, :] = 1.0
    ab[1, 1:-1] = 1.0 - a * di[1:-1]
    ab[0, 2:] = -a * up[1:-1]
    ab[2, :-2] = -a * lo[1:-1]
    bc0, bc1 = 0.0, u0[-1]
    for _ in range(n_steps):
        rhs = u.copy()
        rhs[1:-1] += a * (lo[1:-1] * u[:-2] + di[1:-1] * u[1:-1] + up[1:-1] * u[2:])
        rhs[0] = bc0
        rhs[-1] = bc1
        u = solve_banded((1, 1), ab, rhs)
    return CubicSpline(y_f, u)(y)


class UnsteadyRun:
    """Snapshots, energy reports and the empirically detected life span."""

    def __init__(self, snapshots, reports, status, t0_empirical, failure=None):
        self.snapshots = snapshots
        self.reports = reports
        self.status = status
        self.t0_empirical = float(t0_empirical)
        self.failure = failure


def run_unsteady(init, params, monitors):
    """Integrate to t_final or the first monitor failure.

    `monitors` is a MonitorConfig; energy reports are recorded every
    snapshot_every steps and at both endpoints.  T0 is the last recorded
    time at which min(w <y>^sigma) >= delta_bl and kappa1 <= rho <= kappa2.
    """
    from .monitors import energy_report

    state = init
    n_steps = int(round(params.t_final / params.dt))
    snapshots = [state]
    reports = [energy_report(state, monitors)]
    t0 = state.t
    status = "completed"
    failure = None

    def bounds_ok(rep):
        return (rep.min_w_sigma >= monitors.delta_bl
                and monitors.kappa1 <= rep.rho_min
                and rep.rho_max <= monitors.kappa2)

    if not bounds_ok(reports[0]):
        return UnsteadyRun(snapshots, reports, "life_span_exceeded", t0,
                           failure="initial data violates monitor bounds")

    for k in range(n_steps):
        state = step_unsteady(state, params)
        if (k + 1) % monitors.snapshot_every == 0 or k == n_steps - 1:
            rep = energy_report(state, monitors)
            snapshots.append(state)
            reports.append(rep)
            if not bounds_ok(rep):
                status = "life_span_exceeded"
                failure = (f"monitor bound failed at t = {state.t:.6g}: "
                           f"min_w_sigma = {rep.min_w_sigma:.6g}, "
                           f"rho range [{rep.rho_min:.6g}, {rep.rho_max:.6g}]")
                break
            t0 = state.t
    return UnsteadyRun(snapshots, reports, status, t0, failure)
