"""Marching solver for the steady system in quotient variables.

With x time-like, the steady equations are rewritten in terms of the
quotient q = v/u.  A theta-regularized Picard iteration produces the
solution: iterate k transports the density along the previous quotient,
recovers d_y q^k from the conserved first integral

    rho^k (u^{k-1} + theta)^2 d_y q^k + d_y^2 u^k = r0,
    r0 = rho0 (2 u0 theta + theta^2) d_y q0,

and advances u^k by d_x u^k = -d_y(u^{k-1} q^k) with a Heun march.
The theta schedule continues the converged slab down to theta = 0,
each stage warm-starting from the previous one.

Monitored quantities: wall slope d_y u(x, 0), the density floor, the
near-wall linear lower bound u >= lambda0 y, and the bulk floor
u >= xi0; the largest x with all monitors green is the empirical
life span.
"""

import numpy as np
from scipy.integrate import cumulative_trapezoid
from scipy.interpolate import PchipInterpolator
from scipy.special import comb

from .errors import (
    ConfigurationError,
    DataError,
    DegeneracyError,
    IterationDivergenceError,
    LifeSpanExceeded,
    StepError,
    UsageError,
)
from .initial_data import _profile_d2_matrix, check_compat, wall_derivative
from .grid import fd_weights

DENOM_FLOOR = 1e-12


class SteadyParams:
    """March length, step, regularization schedule and thresholds."""

    def __init__(self, L=0.1, dx=1e-3, theta_schedule=(1e-1, 1e-2, 1e-3, 0.0),
                 m=3, sigma_tilde=2.0, lambda0=None, xi0=None, kappa3=None,
                 delta_nb=None, picard_tol=1e-9, picard_max_iters=40):
        if L < 0 or dx <= 0:
            raise ConfigurationError("need L >= 0 and dx > 0")
        if m < 3:
            raise ConfigurationError("m must be at least 3")
        if sigma_tilde < 2.0:
            raise ConfigurationError("sigma_tilde must be at least 2")
        sched = tuple(float(t) for t in theta_schedule)
        if any(t < 0 for t in sched) or any(
                b >= a for a, b in zip(sched, sched[1:])):
            raise ConfigurationError(
                "theta_schedule must be strictly decreasing and nonnegative")
        self.L = float(L)
        self.dx = float(dx)
        self.theta_schedule = sched
        self.m = int(m)
        self.sigma_tilde = float(sigma_tilde)
        self.lambda0 = lambda0
        self.xi0 = xi0
        self.kappa3 = kappa3
        self.delta_nb = delta_nb
        self.picard_tol = float(picard_tol)
        self.picard_max_iters = int(picard_max_iters)


class SteadyState:
    """One x-station: profiles over y, with d_y q kept for residual checks."""

    def __init__(self, x, rho, u, q, dyq):
        self.x = float(x)
        self.rho = np.asarray(rho, float)
        self.u = np.asarray(u, float)
        self.q = np.asarray(q, float)
        self.dyq = np.asarray(dyq, float)


class PicardDiagnostics:
    def __init__(self, theta, r0, k_done, phi_series, contraction_ratio,
                 diff_form_residual, r0_residual_max):
        self.theta = float(theta)
        self.r0 = np.asarray(r0, float)
        self.k_done = int(k_done)
        self.phi_series = np.asarray(phi_series, float)
        self.contraction_ratio = float(contraction_ratio)
        self.diff_form_residual = float(diff_form_residual)
        self.r0_residual_max = float(r0_residual_max)


class SteadyRun:
    """Converged slab plus per-theta diagnostics and monitor summaries."""

    def __init__(self, slab, diagnostics, theta_distances, L_a, X_series,
                 Y_series, lambda0, xi0, delta_nb):
        self.slab = slab
        self.diagnostics = diagnostics
        self.theta_distances = list(theta_distances)
        self.L_a = float(L_a)
        self.X_series = np.asarray(X_series, float)
        self.Y_series = np.asarray(Y_series, float)
        self.lambda0 = float(lambda0)
        self.xi0 = float(xi0)
        self.delta_nb = float(delta_nb)


def _l2_weights(y):
    """Trapezoid quadrature weights for discrete L2 norms over y."""
    w = np.gradient(np.asarray(y, float))
    w[0] *= 0.5
    w[-1] *= 0.5
    return w


_D1_CACHE = {}


def _profile_d1_matrix(y):
    """Second-order d/dy matrix for a 1D profile (cached per node set)."""
    key = (len(y), float(y[1]), float(y[-1]))
    if key not in _D1_CACHE:
        n = len(y)
        D = np.zeros((n, n))
        for i in range(n):
            if i == 0:
                cols = np.arange(3)
            elif i == n - 1:
                cols = np.arange(n - 3, n)
            else:
                cols = np.arange(i - 1, i + 2)
            D[i, cols] = fd_weights(y[i], y[cols], 1)[1]
        _D1_CACHE[key] = D
    return _D1_CACHE[key]


def _curvature_quotient(rho0, u0, y):
    """d_y^2 u0 / (rho0 u0^2) with the removable wall value set to 0.

    Finite only when the wall compatibility conditions hold; a value
    that keeps growing toward the wall signals their violation.
    """
    y = np.asarray(y, float)
    rho0 = np.asarray(rho0, float)
    u0 = np.asarray(u0, float)
    d2 = _profile_d2_matrix(y) @ u0
    integrand = np.zeros_like(u0)
    integrand[1:] = d2[1:] / (rho0[1:] * u0[1:] ** 2)
    # incompatible data make the integrand diverge like a negative power
    # of y at the wall; fit the local power law on the first nodes
    probe = np.abs(integrand[1:6])
    if probe.min() > 1e-10 * (1.0 + np.abs(integrand).max()):
        slope = np.polyfit(np.log(y[1:6]), np.log(probe), 1)[0]
        if slope < -0.5:
            raise DataError(
                "d_y^2 u0 / u0^2 grows toward the wall: compatibility "
                "conditions violated, q0 integral divergent")
    return integrand


def build_q0(rho0, u0, y):
    """q0(y) = -int_0^y d_y^2 u0 / (rho0 u0^2); q0(0) = 0."""
    integrand = _curvature_quotient(rho0, u0, y)
    return -cumulative_trapezoid(integrand, np.asarray(y, float), initial=0.0)


def advect_density(rho_prev, q_prev, dx, y):
    """Transport rho one station along dX/dx = q (semi-Lagrangian).

    Monotone cubic interpolation at the characteristic feet y - dx q,
    result clamped to the previous range; feet below the wall by less
    than one cell are reflected, deeper ones are an error.
    """
    y = np.asarray(y, float)
    rho_prev = np.asarray(rho_prev, float)
    q_prev = np.asarray(q_prev, float)
    feet = y - dx * q_prev
    if feet.min() < -(y[1] - y[0]):
        raise StepError(
            f"characteristic foot {feet.min():g} below the wall by more than "
            "one cell; reduce dx", suggested_dt=0.5 * dx)
    feet = np.abs(feet)
    feet = np.minimum(feet, y[-1])
    out = PchipInterpolator(y, rho_prev)(feet)
    return np.clip(out, rho_prev.min(), rho_prev.max())


def _dyq_from_integral(r0, d2u, rho, u_prev, theta, y, lam0):
    """d_y q from the first integral.

    Near the wall, u + theta is of order lambda0 y and the division
    amplifies the O(h^2) noise of the discrete d_y^2 u without bound as
    theta shrinks.  The quotient is therefore evaluated only where
    u + theta clears a wall scale (a few cells of slope lambda0) and
    continued to the wall by quadratic extrapolation of the smooth
    d_y q profile.
    """
    h = y[1] - y[0]
    u_eff = u_prev + theta
    u_safe = max(theta, 8.0 * lam0 * h, np.sqrt(DENOM_FLOOR))
    safe = u_eff >= u_safe
    idx = np.flatnonzero(safe)
    if idx.size < 4 or not safe[idx[0]:].all():
        raise DegeneracyError(
            "rho (u + theta)^2 degenerates away from the wall",
            minimum=float((rho * u_eff ** 2).min()))
    dyq = np.zeros_like(rho)
    dyq[safe] = (r0[safe] - d2u[safe]) / (rho[safe] * u_eff[safe] ** 2)
    j0 = idx[0]
    if j0 > 0:
        # least-squares quadratic over a wider stencil damps the residual
        # noise of the safe nodes instead of amplifying it toward the wall
        j1 = min(j0 + 8, len(y))
        coef = np.polyfit(y[j0:j1], dyq[j0:j1], 2)
        dyq[:j0] = np.polyval(coef, y[:j0])
    return dyq


def compute_r0(rho0, u0, y, theta):
    """First-integral constant: r0 = rho0 (2 u0 theta + theta^2) d_y q0
    with d_y q0 taken in its closed form -d_y^2 u0 / (rho0 u0^2)."""
    dyq0 = -_curvature_quotient(rho0, u0, y)
    return np.asarray(rho0, float) * (2.0 * np.asarray(u0, float) * theta
                                      + theta ** 2) * dyq0


def picard_step(prev_slab, params, data, theta):
    """One Picard iterate: a full slab marched from the previous one.

    data is (rho0, u0, q0, r0, y).  The previous slab supplies u^{k-1}
    and q^{k-1} at every station.
    """
    rho0, u0, q0, r0, y = data
    D1 = _profile_d1_matrix(y)
    D2 = _profile_d2_matrix(y)
    dx = params.dx
    lam0 = params.lambda0

    dyq0 = _dyq_from_integral(r0, D2 @ u0, rho0, u0, theta, y, lam0)
    q0_int = cumulative_trapezoid(dyq0, y, initial=0.0)
    slab = [SteadyState(0.0, rho0, u0, q0_int, dyq0)]

    for j in range(len(prev_slab) - 1):
        cur = slab[-1]
        pj, pj1 = prev_slab[j], prev_slab[j + 1]
        q_char = 0.5 * (pj.q + pj1.q)
        rho_next = advect_density(cur.rho, q_char, dx, y)

        flux_j = D1 @ (pj.u * cur.q)
        u_star = cur.u - dx * flux_j
        u_star[0] = 0.0
        dyq_star = _dyq_from_integral(r0, D2 @ u_star, rho_next, pj1.u, theta,
                                      y, lam0)
        q_star = cumulative_trapezoid(dyq_star, y, initial=0.0)
        u_next = cur.u - 0.5 * dx * (flux_j + D1 @ (pj1.u * q_star))
        u_next[0] = 0.0
        dyq_next = _dyq_from_integral(r0, D2 @ u_next, rho_next, pj1.u, theta,
                                      y, lam0)
        q_next = cumulative_trapezoid(dyq_next, y, initial=0.0)

        x_next = pj1.x
        if wall_derivative(y, u_next, 1, 5) < lam0:
            raise LifeSpanExceeded(
                f"wall slope fell below lambda0 = {lam0:g}", where=x_next)
        slab.append(SteadyState(x_next, rho_next, u_next, q_next, dyq_next))
    return slab


def check_r0(slab, prev_slab, r0, theta, y):
    """Max over stations of the discrete-L2 first-integral residual
    rho^k (u^{k-1} + theta)^2 d_y q^k + d_y^2 u^k - r0."""
    D2 = _profile_d2_matrix(y)
    wy = _l2_weights(y)
    worst = 0.0
    for st, pv in zip(slab, prev_slab):
        res = st.rho * (pv.u + theta) ** 2 * st.dyq + D2 @ st.u - r0
        worst = max(worst, float(np.sqrt(np.sum(res ** 2 * wy))))
    return worst


def _diff_form_residual(slab, prev_slab, theta, y):
    """Interior L2 residual of the differentiated first integral
    d_y{rho (u_prev + theta)^2 d_y q} + d_y^3 u = 0 shifted by d_y r0."""
    D1 = _profile_d1_matrix(y)
    D2 = _profile_d2_matrix(y)
    wy = _l2_weights(y)
    mask = (y >= y[4]) & (y <= 0.5 * y[-1])
    worst = 0.0
    for st, pv in zip(slab, prev_slab):
        lhs = D1 @ (st.rho * (pv.u + theta) ** 2 * st.dyq + D2 @ st.u)
        worst = max(worst, float(np.sqrt(np.sum(lhs[mask] ** 2 * wy[mask]))))
    return worst


def _slab_distance(a, b):
    return max(
        max(np.abs(sa.u - sb.u).max(), np.abs(sa.q - sb.q).max(),
            np.abs(sa.rho - sb.rho).max())
        for sa, sb in zip(a, b))


def estimate_wall_constants(data, params):
    """(lambda0, delta_nb, xi0) from the initial profile.

    lambda0 = u0'(0)/4; delta_nb is the largest y below which
    u0 >= 2 lambda0 y holds; xi0 is half the minimum of u0 beyond
    delta_nb / 2 (the data satisfy u0 >= 2 xi0 there).
    """
    y, u0 = data.y, data.u0
    if data.analytic_derivs is not None and 1 in data.analytic_derivs:
        slope = data.analytic_derivs[1]
    else:
        slope = wall_derivative(y, u0, 1, 5)
    lam0 = slope / 4.0
    ok = u0[1:] >= 2.0 * lam0 * y[1:]
    bad = np.flatnonzero(~ok)
    delta_nb = y[-1] if bad.size == 0 else y[bad[0]]
    region = y >= 0.5 * delta_nb
    xi0 = 0.5 * float(u0[region].min())
    return float(lam0), float(delta_nb), float(xi0)


def _resolve_params(data, params):
    lam0, delta_nb, xi0 = estimate_wall_constants(data, params)
    if params.lambda0 is None:
        params.lambda0 = lam0
    if params.delta_nb is None:
        params.delta_nb = delta_nb
    if params.xi0 is None:
        params.xi0 = xi0
    if params.kappa3 is None:
        params.kappa3 = 0.5 * float(data.rho0.min())
    return params


def detect_life_span(slab, params, y):
    """Largest x with all pointwise monitors green."""
    lam0 = params.lambda0
    near = (y > 0) & (y <= params.delta_nb)
    bulk = y >= 0.5 * params.delta_nb
    L_a = 0.0
    for st in slab:
        ok = (wall_derivative(y, st.u, 1, 5) >= 2.0 * lam0
              and st.rho.min() >= params.kappa3
              and np.all(st.u[near] >= lam0 * y[near])
              and np.all(st.u[bulk] >= params.xi0))
        if not ok:
            break
        L_a = st.x
    return L_a


def run_steady(data, params):
    """Theta-continued Picard solve; returns a SteadyRun."""
    if not check_compat(data).overall_pass:
        raise DataError("initial data fail the wall compatibility conditions")
    params = _resolve_params(data, params)
    y = data.y
    rho0, u0 = data.rho0, data.u0
    if rho0.min() < params.kappa3:
        raise DataError(f"rho0 falls below kappa3 = {params.kappa3:g}")
    q0 = build_q0(rho0, u0, y)
    n_sta = int(round(params.L / params.dx))
    xs = params.dx * np.arange(n_sta + 1)

    dyq0 = -_curvature_quotient(rho0, u0, y)
    slab = [SteadyState(x, rho0, u0, q0, dyq0) for x in xs]
    diagnostics = []
    theta_distances = []
    prev_theta_slab = None

    for theta in params.theta_schedule:
        r0 = compute_r0(rho0, u0, y, theta)
        phi = []
        bad_streak = 0
        k = 0
        r0_res_max = 0.0
        for k in range(1, params.picard_max_iters + 1):
            new_slab = picard_step(slab, params, (rho0, u0, q0, r0, y), theta)
            phi.append(_slab_distance(new_slab, slab))
            r0_res_max = max(r0_res_max,
                             check_r0(new_slab, slab, r0, theta, y))
            slab = new_slab
            if len(phi) >= 2 and phi[-2] > 0:
                ratio = phi[-1] / phi[-2]
                bad_streak = bad_streak + 1 if ratio >= 1.0 else 0
                if bad_streak >= 3:
                    raise IterationDivergenceError(
                        f"Picard iteration not contracting at theta = {theta:g}"
                        f" (ratio {ratio:g} for 3 consecutive iterates)")
            if phi[-1] < params.picard_tol:
                break
        ratios = [b / a for a, b in zip(phi, phi[1:]) if a > 0]
        contraction = max(ratios) if ratios else 0.0
        dfr = _diff_form_residual(slab, slab, theta, y)
        diagnostics.append(
            PicardDiagnostics(theta, r0, k, phi, contraction, dfr, r0_res_max))
        if prev_theta_slab is not None:
            theta_distances.append(_slab_distance(slab, prev_theta_slab))
        prev_theta_slab = slab

    L_a = detect_life_span(slab, params, y)
    X_series, Y_series = [], []
    for j in range(params.m, len(slab)):
        X, Y = energy_XY(slab[j - params.m:j + 1], params,
                         rho_inf=float(rho0[-1]), u_inf=float(u0[-1]), y=y)
        X_series.append(X)
        Y_series.append(Y)
    return SteadyRun(slab, diagnostics, theta_distances, L_a,
                     X_series, Y_series, params.lambda0, params.xi0,
                     params.delta_nb)


def _backward_dx(window, attr, order, dx):
    """Backward x-difference of the named profile at the last station."""
    n = len(window)
    if order >= n:
        raise UsageError("window too short for the requested x-derivative")
    vals = np.zeros_like(getattr(window[-1], attr))
    for i in range(order + 1):
        c = (-1.0) ** i * comb(order, i, exact=True)
        vals = vals + c * getattr(window[-1 - i], attr)
    return vals / dx ** order


def energy_XY(window, params, rho_inf, u_inf, y):
    """(X, Y) energy pair at the last station of an (m+1)-window.

    X sums weighted squares of mixed derivatives of the density
    fluctuation and of sqrt(rho) u d_y d^alpha q, plus the velocity
    fluctuation and its shear; Y is the dissipation analogue with
    sqrt(u) d_y^2 d^alpha q.  x-derivatives come from backward
    differences over the window, so exactly m orders are available.
    """
    if len(window) < params.m + 1:
        raise UsageError(f"window must hold m + 1 = {params.m + 1} stations")
    window = window[-(params.m + 1):]
    dx_steps = [b.x - a.x for a, b in zip(window, window[1:])]
    dxs = dx_steps[0]
    if any(abs(d - dxs) > 1e-12 * max(1.0, abs(dxs)) for d in dx_steps):
        raise UsageError("window stations must be equally spaced in x")
    y = np.asarray(y, float)
    last = window[-1]
    wy = _l2_weights(y)
    weight = (1.0 + y) ** params.sigma_tilde
    D1 = _profile_d1_matrix(y)
    D2 = _profile_d2_matrix(y)

    def l2sq(vals):
        return float(np.sum(vals ** 2 * wy))

    def y_derivs(base, orders):
        out = [base]
        for _ in range(orders):
            out.append(D1 @ out[-1])
        return out

    sq_rho_u = np.sqrt(last.rho) * last.u
    sq_u = np.sqrt(np.maximum(last.u, 0.0))
    X = l2sq(last.u - u_inf) + l2sq(D1 @ (last.u - u_inf))
    Y = 0.0
    for a1 in range(params.m + 1):
        da_rho = _backward_dx(window, "rho", a1, dxs)
        if a1 == 0:
            da_rho = da_rho - rho_inf
        da_q = _backward_dx(window, "q", a1, dxs)
        rho_ders = y_derivs(da_rho, params.m - a1)
        q_ders = y_derivs(da_q, params.m - a1)
        for a2 in range(params.m - a1 + 1):
            X += l2sq(rho_ders[a2])
            X += l2sq(sq_rho_u * (D1 @ q_ders[a2]) * weight)
            Y += l2sq(sq_u * (D2 @ q_ders[a2]) * weight)
    return X, Y


def stability_functional(slabA, slabB, sigma_tilde, y):
    """Series over x of |(sqrt(rho1) u2 d_y qt <y>^sigma, rho-diff)|^2
    with qt = (v1 - v2)/u2 and v = u q."""
    if len(slabA) != len(slabB) or len(slabA[0].u) != len(slabB[0].u):
        raise UsageError("slabs must share grid and station count")
    D1 = _profile_d1_matrix(y)
    wy = _l2_weights(y)
    weight = (1.0 + y) ** sigma_tilde
    out = []
    for sa, sb in zip(slabA, slabB):
        qt = np.zeros_like(sa.q)
        qt[1:] = (sa.u[1:] * sa.q[1:] - sb.u[1:] * sb.q[1:]) / sb.u[1:]
        dyqt = D1 @ qt
        f = (np.sum((np.sqrt(sa.rho) * sb.u * dyqt * weight) ** 2 * wy)
             + np.sum((sa.rho - sb.rho) ** 2 * wy))
        out.append(float(f))
    return np.asarray(out)


def stability_check(runA, runB, delta, sigma_tilde, y):
    """(envelope_ok, fitted_growth) for two runs differing by delta.

    delta = 0 demands bitwise-identical slabs.  Otherwise the functional
    must admit F(x) <= (F(0+) + c delta^2) e^{C x} with fitted C.
    """
    slabA, slabB = runA.slab, runB.slab
    if len(slabA) != len(slabB) or len(slabA[0].u) != len(slabB[0].u):
        raise UsageError("runs must share grid and station count")
    if delta == 0.0:
        same = all(
            np.array_equal(sa.u, sb.u) and np.array_equal(sa.rho, sb.rho)
            and np.array_equal(sa.q, sb.q)
            for sa, sb in zip(slabA, slabB))
        return same, 0.0
    F = stability_functional(slabA, slabB, sigma_tilde, y)
    xs = np.array([st.x for st in slabA])
    base = max(F[0], 1e-4 * delta ** 2)
    with np.errstate(divide="ignore"):
        grow = np.log(np.maximum(F, 1e-300) / base)
    pos = xs > 0
    C = float(np.max(grow[pos] / xs[pos])) if pos.any() else 0.0
    C = max(C, 0.0)
    envelope = base * np.exp(C * xs)
    ok = bool(np.all(F <= envelope * (1.0 + 1e-9)))
    return ok, C
