"""Initial-data construction and wall compatibility checks.

The solvers need velocity data that is exactly linear near the wall
(u0 = lambda*y with wall derivatives of order 2..5 all zero) so the
corner (x, y) = (0, 0) stays regular.  Closed-form profiles such as
tanh or erf fail this at third order, so the builder glues an exact
linear segment to an exponential far-field approach through a C^m
smoothstep blend.
"""

import numpy as np
from scipy.integrate import cumulative_trapezoid
from scipy.special import comb

from .errors import ConfigurationError, ConstructionError, DataError, UsageError
from .grid import ScalarField, ddy, fd_weights


def validate_weights(gamma, sigma):
    """True iff (gamma, sigma) lie in the admissible weight region."""
    return bool(gamma > 1.5 and gamma + 0.5 < sigma <= 2.0 * gamma - 1.0)


class InitialData1D:
    """Wall-normal profiles (rho0, u0) with optional exact wall derivatives."""

    def __init__(self, y, rho0, u0, analytic_derivs=None, u_inf=None):
        self.y = np.asarray(y, float)
        self.rho0 = np.asarray(rho0, float)
        self.u0 = np.asarray(u0, float)
        self.analytic_derivs = analytic_derivs  # dict order -> wall value
        self.u_inf = float(u_inf) if u_inf is not None else float(self.u0[-1])
        if self.rho0.min() <= 0:
            raise DataError("density profile must be strictly positive")
        if abs(self.u0[0]) > 1e-12:
            raise DataError(f"u0(0) = {self.u0[0]:g} violates the no-slip condition")


class CompatEntry:
    def __init__(self, name, value, threshold, passed):
        self.name = name
        self.value = float(value)
        self.threshold = float(threshold)
        self.passed = bool(passed)

    def __repr__(self):
        tag = "pass" if self.passed else "FAIL"
        return f"{self.name}: value={self.value:.3e} thr={self.threshold:.3e} [{tag}]"


class CompatReport:
    """Per-condition wall compatibility results."""

    def __init__(self, entries, overall_order_m):
        self.entries = entries
        self.overall_order_m = int(overall_order_m)

    @property
    def overall_pass(self):
        return all(e.passed for e in self.entries)

    def first_failure(self):
        for e in self.entries:
            if not e.passed:
                return e.name
        return None

    def as_rows(self):
        return [(e.name, e.value, e.threshold, e.passed) for e in self.entries]

    def __repr__(self):
        lines = [f"CompatReport(order m={self.overall_order_m}, "
                 f"{'PASS' if self.overall_pass else 'FAIL'})"]
        lines += [f"  {e!r}" for e in self.entries]
        return "\n".join(lines)


def _smoothstep(t, m):
    """Polynomial step: 0 -> 1 on [0, 1] with m vanishing derivatives at
    both ends."""
    t = np.clip(t, 0.0, 1.0)
    s = np.zeros_like(t)
    for k in range(m + 1):
        s += comb(m + k, k, exact=True) * comb(2 * m + 1, m - k, exact=True) * (-t) ** k
    return t ** (m + 1) * s


def build_u0_blend(lam, u_inf, y_c, m, y, rho0=None):
    """Monotone profile: exactly lam*y on [0, y_c], C^m blend on
    [y_c, 2*y_c], exponential approach to u_inf beyond.

    The far branch osculates the linear segment to first order
    (F(y_c) = lam*y_c, F'(y_c) = lam), which keeps the blend monotone.
    """
    if m > 6 or m < 1:
        raise ConfigurationError("blend smoothness m must be in 1..6")
    if lam * y_c >= u_inf:
        raise ConfigurationError(
            f"wall segment reaches {lam * y_c:g} >= u_inf = {u_inf:g}")
    y = np.asarray(y, float)
    b = lam / (u_inf - lam * y_c)
    far = u_inf - (u_inf - lam * y_c) * np.exp(-b * np.maximum(y - y_c, 0.0))
    blend = _smoothstep((y - y_c) / y_c, m)
    u0 = np.where(y <= y_c, lam * y, (1.0 - blend) * lam * y + blend * far)
    if np.any(np.diff(u0) <= 0):
        raise ConstructionError("blended profile is not strictly monotone",
                                achieved=float(np.diff(u0).min()))
    derivs = {0: 0.0, 1: float(lam), 2: 0.0, 3: 0.0, 4: 0.0, 5: 0.0}
    rho0 = np.ones_like(y) if rho0 is None else np.asarray(rho0, float)
    return InitialData1D(y, rho0, u0, analytic_derivs=derivs, u_inf=u_inf)


def wall_derivative(y, f, order, npts):
    """One-sided derivative of a profile at y = 0 from its first npts nodes."""
    w = fd_weights(0.0, y[:npts], order)[order]
    return float(w @ f[:npts])


def _stencil_estimate(y, f, order):
    """(value, error estimate) of d^order f / dy^order at the wall via two
    one-sided stencil widths (Richardson-style difference)."""
    coarse = wall_derivative(y, f, order, order + 3)
    fine = wall_derivative(y, f, order, order + 4)
    return fine, abs(fine - coarse)


def quotient_curvature_profile(data):
    """Integrand d_y^2 u0 / (rho0 u0^2) with the removable wall value set
    to 0 (finite exactly when the compatibility conditions hold)."""
    y, u0, rho0 = data.y, data.u0, data.rho0
    d2 = np.empty_like(u0)
    D = _profile_d2_matrix(y)
    d2[:] = D @ u0
    out = np.zeros_like(u0)
    out[1:] = d2[1:] / (rho0[1:] * u0[1:] ** 2)
    return out


_D2_CACHE = {}


def _profile_d2_matrix(y):
    """Second-order d^2/dy^2 matrix for a 1D profile (cached per node set)."""
    key = (len(y), float(y[1]), float(y[-1]))
    if key not in _D2_CACHE:
        n = len(y)
        D = np.zeros((n, n))
        for i in range(n):
            if i == 0:
                cols = np.arange(4)
            elif i == n - 1:
                cols = np.arange(n - 4, n)
            else:
                cols = np.arange(i - 1, i + 2)
            D[i, cols] = fd_weights(y[i], y[cols], 2)[2]
        _D2_CACHE[key] = D
    return _D2_CACHE[key]


def check_compat(data, m=3, kappa3=None):
    """Wall compatibility report for (rho0, u0) through fifth order plus
    the corner condition on v0.

    Thresholds are 10x the estimated stencil truncation error (exact-zero
    tests are meaningless on grids); analytic wall derivatives bypass the
    stencils when supplied.
    """
    y, u0, rho0 = data.y, data.u0, data.rho0
    if len(y) < 8:
        raise UsageError("need at least 8 near-wall nodes for fifth-derivative stencils")
    if kappa3 is None:
        kappa3 = 0.5 * float(rho0.min())
    scale = max(abs(data.u_inf), 1.0)
    entries = []

    def wall(order):
        if data.analytic_derivs is not None and order in data.analytic_derivs:
            return data.analytic_derivs[order], 1e-12 * scale
        val, err = _stencil_estimate(y, u0, order)
        return val, err

    v0, e0 = wall(0)
    entries.append(CompatEntry("u0(0) = 0", v0, 10 * e0 + 1e-10 * scale, abs(v0) <= 10 * e0 + 1e-10 * scale))
    v1, e1 = wall(1)
    entries.append(CompatEntry("u0'(0) > 0", v1, 10 * e1 + 1e-10 * scale, v1 > 10 * e1 + 1e-10 * scale))
    for order, name in [(2, "u0''(0) = 0"), (3, "d3 u0(0) = 0"),
                        (4, "d4 u0(0) = 0"), (5, "d5 u0(0) = 0")]:
        v, e = wall(order)
        thr = 10 * e + 1e-8 * scale
        entries.append(CompatEntry(name, v, thr, abs(v) <= thr))

    # v0 = -u0 * int_0^y d_y^2 u0 / (rho0 u0^2); its third wall derivative
    # must vanish at the corner
    integrand = quotient_curvature_profile(data)
    v_wall = -u0 * cumulative_trapezoid(integrand, y, initial=0.0)
    v3, ev3 = _stencil_estimate(y, v_wall, 3)
    thr3 = 10 * ev3 + 1e-6 * scale
    entries.append(CompatEntry("d3 v0(0) = 0", v3, thr3, abs(v3) <= thr3))

    rmin = float(rho0.min())
    entries.append(CompatEntry("rho0 >= kappa3", rmin, kappa3, rmin >= kappa3))
    return CompatReport(entries, m)


class UnsteadyData:
    """2D initial fields plus the far-field constants they approach."""

    def __init__(self, rho0, u0, rho_inf, u_inf, base):
        self.rho0 = rho0
        self.u0 = u0
        self.rho_inf = float(rho_inf)
        self.u_inf = float(u_inf)
        self.base = base


def build_unsteady_data(weights, delta_bl, kappa1, kappa2, amplitude, grid,
                        lam=0.8, y_c=1.0, u_inf=2.0, m=5):
    """Admissible 2D data: density inside [2*kappa1, kappa2/2], velocity a
    monotone base profile plus a tangential perturbation, vorticity
    bounded below by 2*delta_bl in the weighted sense."""
    if not validate_weights(weights.gamma, weights.sigma):
        raise ConfigurationError("invalid weight parameters")
    lo, hi = 2.0 * kappa1, kappa2 / 2.0
    if lo >= hi:
        raise ConfigurationError(
            f"empty admissible density band: 2*kappa1 = {lo:g} >= kappa2/2 = {hi:g}")
    if not 0.0 <= amplitude <= 1.0:
        raise ConfigurationError("amplitude must lie in [0, 1]")
    rho_inf = 0.5 * (lo + hi)
    half = 0.5 * (hi - lo)
    x = grid.x_nodes[:, None]
    y = grid.y_nodes[None, :]
    rho_vals = rho_inf + amplitude * half * np.cos(x) * np.exp(-y)
    rho0 = ScalarField(grid, np.broadcast_to(rho_vals, (grid.nx, grid.ny)).copy())

    base = build_u0_blend(lam, u_inf, y_c, m, grid.y_nodes)
    u_vals = base.u0[None, :] + amplitude * np.sin(x) * y ** 2 * np.exp(-y)
    u0 = ScalarField(grid, np.broadcast_to(u_vals, (grid.nx, grid.ny)).copy())

    w0 = ddy(u0, 1)
    min_w_sigma = float(np.min(w0.values * grid.weight[None, :] ** weights.sigma))
    if min_w_sigma < 2.0 * delta_bl:
        raise ConstructionError(
            f"weighted vorticity minimum {min_w_sigma:g} below 2*delta_bl = "
            f"{2 * delta_bl:g}", achieved=min_w_sigma)
    return UnsteadyData(rho0, u0, rho_inf, u_inf, base)
