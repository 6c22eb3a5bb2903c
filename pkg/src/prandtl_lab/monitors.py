"""Energy and dissipation functionals, pointwise monitors, envelopes.

The solver's life-span criterion is phrased through three monitored
quantities: the weighted vorticity minimum min(w <y>^sigma), the density
range, and the weighted energy

    E = sum_{|a| <= s_max, a1 <= s_max-1} |d^a w <y>^{gamma+a2}|^2
      + sum_{|a| <= s_max, a1 <= s_max-1} |d^a (rho - rho_inf) <y>^{sigma+a2}|^2
      + |rho_g <y>^gamma|^2 + |w_g <y>^gamma|^2
      + sup_grid sum_{|a| <= 2} <y>^{2 sigma + 2 a2} |d^a w|^2

with the companion dissipation

    D = sum |d_y d^a w <y>^{gamma+a2}|^2 + |d_y w_g <y>^gamma|^2.

A variant E2 relaxes the tangential restriction to a1 <= s_max on the
vorticity terms and replaces the good-unknown terms by the single
|d_x^s (rho - rho_inf) <y>^gamma|^2; both are reported.  The pointwise
sup term is interpreted as an L-infinity quantity (the display it comes
from omits the norm symbol).

Envelope checks: the vorticity minimum must stay above
(1 - lambda t e^{lambda t}) kappa and the pointwise energy below
(E_linf(0) + C t) e^{lambda t} with fitted constants.
"""

import numpy as np
from scipy.optimize import brentq

from .errors import ConfigurationError, DegeneracyError, UsageError
from .good_unknowns import compute_good_unknowns
from .grid import ScalarField, WeightParams, ddy, dmixed

ENVELOPE_RTOL = 1e-9


class MonitorConfig:
    """Thresholds and cadence for the in-run monitors."""

    def __init__(self, weights, delta_bl, kappa1, kappa2, s_max=2,
                 snapshot_every=10, strict=False):
        if not isinstance(weights, WeightParams):
            raise ConfigurationError("weights must be a WeightParams instance")
        if delta_bl <= 0:
            raise ConfigurationError("delta_bl must be positive")
        if not 0 < kappa1 < kappa2:
            raise ConfigurationError("need 0 < kappa1 < kappa2")
        if s_max < 1:
            raise ConfigurationError("s_max must be at least 1")
        if snapshot_every < 1:
            raise ConfigurationError("snapshot_every must be at least 1")
        self.weights = weights
        self.delta_bl = float(delta_bl)
        self.kappa1 = float(kappa1)
        self.kappa2 = float(kappa2)
        self.s_max = int(s_max)
        self.snapshot_every = int(snapshot_every)
        self.strict = bool(strict)


class EnergyReport:
    """One monitor snapshot; serializes to a single CSV row."""

    def __init__(self, t, E_w_terms, E_rho_terms, E_goodunknown, E_linf,
                 D_total, min_w_sigma, rho_min, rho_max, E2_total,
                 goodunknown_missing=False):
        self.t = float(t)
        self.E_w_terms = float(E_w_terms)
        self.E_rho_terms = float(E_rho_terms)
        self.E_goodunknown = float(E_goodunknown)
        self.E_linf = float(E_linf)
        self.E_total = (self.E_w_terms + self.E_rho_terms
                        + self.E_goodunknown + self.E_linf)
        self.D_total = float(D_total)
        self.min_w_sigma = float(min_w_sigma)
        self.rho_min = float(rho_min)
        self.rho_max = float(rho_max)
        self.E2_total = float(E2_total)
        self.goodunknown_missing = bool(goodunknown_missing)

    def __repr__(self):
        return (f"EnergyReport(t={self.t:.4g}, E={self.E_total:.6g}, "
                f"D={self.D_total:.6g}, min_w_sigma={self.min_w_sigma:.6g})")


class BoundsEnvelope:
    """Fitted parabolic-principle envelopes over a monitor series."""

    def __init__(self, lambda_fit, kappa_series, passed, lambda_linf=0.0,
                 c_linf=0.0):
        self.lambda_fit = float(lambda_fit)
        self.kappa_series = np.asarray(kappa_series, float)
        self.passed = bool(passed)
        self.lambda_linf = float(lambda_linf)
        self.c_linf = float(c_linf)


def _alpha_set(s_max, alpha1_max):
    return [(a1, a2) for a1 in range(alpha1_max + 1)
            for a2 in range(s_max - a1 + 1) if a1 + a2 <= s_max]


def _weighted_sq(grid, vals, lam):
    return grid.integrate(vals ** 2 * grid.weight[None, :] ** (2.0 * lam))


def _mixed_sum(field, s_max, alpha1_max, lam, extra_dy=0):
    """Sum of squared weighted norms of d^a field over the index set."""
    grid = field.grid
    total = 0.0
    for a1, a2 in _alpha_set(s_max, alpha1_max):
        d = dmixed(field, a1, a2 + extra_dy)
        total += _weighted_sq(grid, d.values, lam + a2)
    return total


def _rho_fluct(state):
    return ScalarField(state.grid, state.rho.values - state.rho_inf)


def pointwise_energy(state, sigma):
    """sup over the grid of sum_{|a|<=2} <y>^{2 sigma + 2 a2} |d^a w|^2."""
    grid = state.grid
    total = np.zeros((grid.nx, grid.ny))
    for a1 in range(3):
        for a2 in range(3 - a1):
            d = dmixed(state.w, a1, a2).values
            total += grid.weight[None, :] ** (2.0 * (sigma + a2)) * d ** 2
    return float(total.max())


def energy_E(state, weights, s_max, delta_bl, strict=False):
    """EnergyReport of one state with the energy components filled in
    (D_total is left at zero; see dissipation_D and energy_report)."""
    E_w, E_rho, E_gu, E_linf, E2, missing = _energy_components(
        state, weights, s_max, delta_bl, strict)
    min_w, rmin, rmax, _ = monitor_bounds(state, weights.sigma)
    return EnergyReport(state.t, E_w, E_rho, E_gu, E_linf, 0.0,
                        min_w, rmin, rmax, E2, goodunknown_missing=missing)


def _energy_components(state, weights, s_max, delta_bl, strict=False):
    gamma, sigma = weights.gamma, weights.sigma
    E_w = _mixed_sum(state.w, s_max, s_max - 1, gamma)
    rho_f = _rho_fluct(state)
    E_rho = _mixed_sum(rho_f, s_max, s_max - 1, sigma)
    E_linf = pointwise_energy(state, sigma)

    missing = False
    try:
        gu = compute_good_unknowns(state, s_max, delta_bl, sigma)
        grid = state.grid
        E_gu = (_weighted_sq(grid, gu.rho_g.values, gamma)
                + _weighted_sq(grid, gu.w_g.values, gamma))
    except DegeneracyError:
        if strict:
            raise
        E_gu = float("nan")
        missing = True

    E2 = (_mixed_sum(state.w, s_max, s_max, gamma)
          + E_rho
          + _weighted_sq(state.grid, dmixed(rho_f, s_max, 0).values, gamma)
          + E_linf)
    return E_w, E_rho, E_gu, E_linf, E2, missing


def dissipation_D(state, weights, s_max, delta_bl=1e-10, strict=False):
    """Weighted dissipation norm of one state."""
    gamma, sigma = weights.gamma, weights.sigma
    total = _mixed_sum(state.w, s_max, s_max - 1, gamma, extra_dy=1)
    try:
        gu = compute_good_unknowns(state, s_max, delta_bl, sigma)
        total += _weighted_sq(state.grid, ddy(gu.w_g, 1).values, gamma)
    except DegeneracyError:
        if strict:
            raise
    return float(total)


def monitor_bounds(state, sigma):
    """(min_w_sigma, rho_min, rho_max, E_linf): exact grid reductions."""
    grid = state.grid
    wsig = state.w.values * grid.weight[None, :] ** sigma
    return (float(wsig.min()), float(state.rho.values.min()),
            float(state.rho.values.max()), pointwise_energy(state, sigma))


def energy_report(state, monitors):
    """Full EnergyReport for one state under a MonitorConfig."""
    wp = monitors.weights
    E_w, E_rho, E_gu, E_linf, E2, missing = _energy_components(
        state, wp, monitors.s_max, monitors.delta_bl, monitors.strict)
    D = dissipation_D(state, wp, monitors.s_max, monitors.delta_bl,
                      monitors.strict)
    min_w, rmin, rmax, _ = monitor_bounds(state, wp.sigma)
    return EnergyReport(state.t, E_w, E_rho, E_gu, E_linf, D,
                        min_w, rmin, rmax, E2, goodunknown_missing=missing)


def _min_envelope_lambda(t, m, kappa):
    """Smallest lambda >= 0 with m_i >= (1 - lam t_i e^{lam t_i}) kappa."""
    lam = 0.0
    for ti, mi in zip(t, m):
        if ti <= 0 or mi >= kappa:
            continue
        f = lambda L: kappa * (1.0 - L * ti * np.exp(L * ti)) - mi
        hi = 1.0
        while f(hi) > 0:
            hi *= 2.0
            if hi > 1e8:
                break
        lam = max(lam, brentq(f, 0.0, hi))
    return lam


def check_principle_envelope(series, lambda_est=0.0):
    """Fit and verify the minimum- and maximum-principle envelopes.

    The vorticity-minimum envelope uses kappa = initial minimum; the
    fitted lambda is the smallest rate making the envelope hold, so a
    series can only fail through non-monotone t or negative data.
    The pointwise-energy envelope (E0 + C t) e^{lambda t} takes lambda
    from a log-linear least-squares fit (floored by lambda_est) and the
    smallest admissible C.
    """
    if not series:
        raise UsageError("empty monitor series")
    t = np.array([r.t for r in series], float)
    if np.any(np.diff(t) <= 0) and len(t) > 1:
        raise UsageError("monitor series must have strictly increasing t")
    m = np.array([r.min_w_sigma for r in series], float)
    kappa = m[0]
    lam = _min_envelope_lambda(t, m, kappa)
    envelope = (1.0 - lam * t * np.exp(lam * t)) * kappa
    tol = ENVELOPE_RTOL * max(abs(kappa), 1.0)
    passed = bool(np.all(m >= envelope - tol))

    e = np.array([r.E_linf for r in series], float)
    e0 = e[0]
    lam_linf = 0.0
    if len(t) > 1 and e0 > 0 and np.all(e > 0):
        slope = np.polyfit(t, np.log(e), 1)[0]
        lam_linf = max(float(slope), float(lambda_est), 0.0)
    growth = e * np.exp(-lam_linf * t) - e0
    with np.errstate(divide="ignore", invalid="ignore"):
        c_needed = np.where(t > 0, growth / np.where(t > 0, t, 1.0), 0.0)
    c_linf = max(0.0, float(c_needed.max()) if len(t) else 0.0)
    bound = (e0 + c_linf * t) * np.exp(lam_linf * t)
    passed = passed and bool(np.all(e <= bound * (1.0 + ENVELOPE_RTOL)))
    return BoundsEnvelope(lam, np.full_like(t, kappa), passed,
                          lambda_linf=lam_linf, c_linf=c_linf)


def largest_energy_interval(series, factor=2.0, tol=0.05):
    """Length of the initial interval on which E_total stays below
    factor * E_total(0) * (1 + tol)."""
    if not series:
        raise UsageError("empty monitor series")
    e0 = series[0].E_total
    limit = factor * e0 * (1.0 + tol)
    t_ok = series[0].t
    for r in series:
        if not np.isfinite(r.E_total) or r.E_total > limit:
            break
        t_ok = r.t
    return t_ok - series[0].t
