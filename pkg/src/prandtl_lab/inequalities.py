"""Numerical test suite for the weighted Hardy, trace, Sobolev and
Morse-type inequalities.

Hardy and trace come with explicit constants and are asserted directly;
the Sobolev sup-norm bound and the Morse product bound only claim "some
universal C", so the suite records the empirical ratio and asserts it is
stable (within 20%) under one grid refinement.
"""

import numpy as np
from scipy.interpolate import CubicSpline

from .errors import DomainError, UsageError
from .grid import ScalarField, ddx, ddy, make_grid, weighted_norm

KINDS = ("hardy1", "hardy2", "sobolev_inf", "trace", "morse")
REL_TOL = 1e-6
STABILITY_TOL = 0.2


class InequalityReport:
    """Outcome of one inequality check on one sample."""

    def __init__(self, kind, sample_id, lhs, rhs, holds, empirical_constant):
        self.kind = kind
        self.sample_id = int(sample_id)
        self.lhs = float(lhs)
        self.rhs = float(rhs)
        self.holds = bool(holds)
        self.empirical_constant = float(empirical_constant)

    def __repr__(self):
        tag = "holds" if self.holds else "FAILS"
        return (f"InequalityReport({self.kind}#{self.sample_id}: "
                f"lhs={self.lhs:.6g}, rhs={self.rhs:.6g}, {tag})")


def random_decaying_field(grid, rng, n_modes=3):
    """Smooth sample a(x) * p(y) * exp(-c y), decaying in y."""
    amps = rng.uniform(-1.0, 1.0, n_modes + 1)
    phases = rng.uniform(0.0, 2.0 * np.pi, n_modes + 1)
    x = grid.x_nodes[:, None]
    a = sum(amps[k] * np.cos(k * x + phases[k]) for k in range(n_modes + 1))
    a += 1.5  # keep an O(1) mean so samples are not accidentally tiny
    b = rng.uniform(-1.0, 1.0, 3)
    c = rng.uniform(0.8, 1.5)
    y = grid.y_nodes[None, :]
    p = (0.5 + b[0] ** 2 + b[1] * y + b[2] * y ** 2) * np.exp(-c * y)
    return ScalarField(grid, a * p)


def _wall_l2(f):
    """|| f(., 0) ||_{L2(T)}."""
    return float(np.sqrt(f.grid.dx * np.sum(f.values[:, 0] ** 2)))


def _refine_field(f):
    """Same analytic sample represented on a (2nx) x (2ny-1) grid.

    Fourier interpolation in x (exact on band-limited data), cubic
    spline in y.
    """
    g = f.grid
    fine = make_grid(2 * g.nx, 2 * g.ny - 1, g.y_max, g.stretch)
    spec = np.fft.rfft(f.values, axis=0)
    pad = np.zeros((fine.nx // 2 + 1, g.ny), dtype=complex)
    pad[: spec.shape[0]] = spec
    vals_x = np.fft.irfft(pad * (fine.nx / g.nx), n=fine.nx, axis=0)
    vals = CubicSpline(g.y_nodes, vals_x, axis=1)(fine.y_nodes)
    return ScalarField(fine, vals)


def _hs_norm(f, m, lam):
    return weighted_norm(f, m, lam, "full_Hs_gamma")


def _ratio_pair(kind, f, lam):
    """(lhs, rhs_sum) of the C-unspecified inequalities on one grid."""
    if kind == "sobolev_inf":
        lhs = float(np.max(np.abs(f.values)))
        rhs = (weighted_norm(f, 0, 0.0) + weighted_norm(ddx(f, 1), 0, 0.0)
               + weighted_norm(ddy(ddy(f, 1), 1), 0, 0.0))
    else:  # morse with alpha = (0,1), alpha~ = (1,0), m = 3, lam split evenly
        prod = ScalarField(f.grid, ddy(f, 1).values * ddx(f, 1).values)
        lhs = weighted_norm(prod, 0, lam + 1.0)
        rhs = _hs_norm(f, 3, lam / 2.0) ** 2
    return lhs, rhs


def check_inequality(kind, f, lam=0.0, g=None, sample_id=0):
    """One InequalityReport for a single sample field."""
    if kind == "hardy1":
        if lam <= -0.5:
            raise DomainError("hardy1 requires lambda > -1/2")
        lhs = weighted_norm(f, 0, lam)
        rhs = 2.0 / (2.0 * lam + 1.0) * weighted_norm(ddy(f, 1), 0, lam + 1.0)
        holds = lhs <= rhs * (1.0 + REL_TOL)
        return InequalityReport(kind, sample_id, lhs, rhs, holds,
                                lhs / rhs if rhs else np.inf)
    if kind == "hardy2":
        if lam >= -0.5:
            raise DomainError("hardy2 requires lambda < -1/2")
        lhs = weighted_norm(f, 0, lam)
        rhs = (np.sqrt(-1.0 / (2.0 * lam + 1.0)) * _wall_l2(f)
               - 2.0 / (2.0 * lam + 1.0) * weighted_norm(ddy(f, 1), 0, lam + 1.0))
        holds = lhs <= rhs * (1.0 + REL_TOL)
        return InequalityReport(kind, sample_id, lhs, rhs, holds,
                                lhs / rhs if rhs else np.inf)
    if kind == "trace":
        if g is None:
            g = f
        lhs = float(f.grid.dx * np.sum(f.values[:, 0] * g.values[:, 0]))
        rhs = (weighted_norm(ddy(f, 1), 0, 0.0) * weighted_norm(g, 0, 0.0)
               + weighted_norm(f, 0, 0.0) * weighted_norm(ddy(g, 1), 0, 0.0))
        holds = lhs <= rhs * (1.0 + REL_TOL)
        return InequalityReport(kind, sample_id, lhs, rhs, holds,
                                lhs / rhs if rhs else np.inf)
    if kind in ("sobolev_inf", "morse"):
        lhs, rhs = _ratio_pair(kind, f, lam)
        c_coarse = lhs / rhs if rhs else np.inf
        lhs_f, rhs_f = _ratio_pair(kind, _refine_field(f), lam)
        c_fine = lhs_f / rhs_f if rhs_f else np.inf
        stable = (np.isfinite(c_coarse) and np.isfinite(c_fine)
                  and abs(c_fine - c_coarse) <= STABILITY_TOL * max(c_coarse, 1e-14))
        return InequalityReport(kind, sample_id, lhs, rhs, stable, c_coarse)
    raise UsageError(f"unknown inequality kind {kind!r}")


def run_inequality_suite(kind, samples, lam=0.0):
    """One report per sample field."""
    if kind not in KINDS:
        raise UsageError(f"unknown inequality kind {kind!r}")
    return [check_inequality(kind, f, lam, sample_id=i)
            for i, f in enumerate(samples)]
