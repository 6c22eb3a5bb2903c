import numpy as np
import pytest
from scipy.integrate import cumulative_trapezoid, quad

from prandtl_lab.errors import (
    ConfigurationError,
    DataError,
    DegeneracyError,
    IterationDivergenceError,
    LifeSpanExceeded,
    StepError,
    UsageError,
)
from prandtl_lab.initial_data import (
    InitialData1D,
    _profile_d2_matrix,
    build_u0_blend,
    wall_derivative,
)
from prandtl_lab.steady import (
    SteadyParams,
    SteadyState,
    advect_density,
    build_q0,
    check_r0,
    compute_r0,
    energy_XY,
    estimate_wall_constants,
    picard_step,
    run_steady,
    stability_check,
    stability_functional,
)


Y = np.linspace(0, 12, 241)
RHO0 = 2.0 + 0.3 * np.exp(-Y)


def builder_data(y=Y, rho0=None):
    if rho0 is None:
        rho0 = 2.0 + 0.3 * np.exp(-y)
    return build_u0_blend(0.8, 2.0, 1.0, 5, y, rho0=rho0)


def perturbed_data(data, delta):
    """Same data with a wall-compatible bump delta y^6 e^{-2y} on u0."""
    u0p = data.u0 + delta * data.y ** 6 * np.exp(-2.0 * data.y)
    return InitialData1D(data.y, data.rho0, u0p,
                         analytic_derivs=data.analytic_derivs,
                         u_inf=data.u_inf)


class TestSteadyParams:
    def test_defaults(self):
        p = SteadyParams()
        assert p.m == 3 and p.sigma_tilde == 2.0
        assert p.theta_schedule[-1] == 0.0

    def test_invalid(self):
        with pytest.raises(ConfigurationError):
            SteadyParams(m=2)
        with pytest.raises(ConfigurationError):
            SteadyParams(sigma_tilde=1.5)
        with pytest.raises(ConfigurationError):
            SteadyParams(dx=-1e-3)
        with pytest.raises(ConfigurationError):
            SteadyParams(theta_schedule=(1e-2, 1e-1))
        with pytest.raises(ConfigurationError):
            SteadyParams(theta_schedule=(1e-1, 1e-1))


class TestBuildQ0:
    def test_zero_on_linear_segment(self):
        data = builder_data()
        q0 = build_q0(data.rho0, data.u0, Y)
        assert q0[0] == 0.0
        # u0 exactly linear on [0, 1]: q0 vanishes there up to stencil
        # round-off (the last node's stencil reaches into the blend)
        assert np.abs(q0[Y <= 0.9]).max() < 1e-12

    def test_quadrature_oracle(self):
        # closed-form compatible profile u0 = lam y + beta y^6 e^{-y}
        lam, beta, rho_c = 0.8, 0.1, 2.0
        y = np.linspace(0, 12, 40001)

        def d2u(t):
            return beta * (30 * t ** 4 - 12 * t ** 5 + t ** 6) * np.exp(-t)

        def integrand(t):
            u = lam * t + beta * t ** 6 * np.exp(-t)
            return d2u(t) / (rho_c * u ** 2) if t > 0 else 0.0

        # the cumulative-trapezoid construction against adaptive quadrature
        vals = np.array([integrand(t) for t in y])
        q_trapz = -cumulative_trapezoid(vals, y, initial=0.0)
        for yq in (0.5, 2.0, 8.0):
            i = int(np.argmin(np.abs(y - yq)))
            oracle = -quad(integrand, 0, y[i], limit=200)[0]
            assert abs(q_trapz[i] - oracle) < 1e-8

        # build_q0 itself (stencil d_y^2) converges to the same values
        yc = np.linspace(0, 12, 2001)
        u0 = lam * yc + beta * yc ** 6 * np.exp(-yc)
        q0 = build_q0(np.full_like(yc, rho_c), u0, yc)
        for yq in (0.5, 2.0, 8.0):
            i = int(np.argmin(np.abs(yc - yq)))
            oracle = -quad(integrand, 0, yc[i], limit=200)[0]
            assert abs(q0[i] - oracle) < 1e-4

    def test_incompatible_profile_rejected(self):
        u0 = 2.0 * (1 - np.exp(-Y))  # d_y^2 u0(0) != 0
        with pytest.raises(DataError):
            build_q0(np.full_like(Y, 2.0), u0, Y)


class TestAdvectDensity:
    def test_stationary_characteristics(self):
        out = advect_density(RHO0, np.zeros_like(Y), 1e-3, Y)
        assert np.abs(out - RHO0).max() < 1e-13

    def test_constant_transported(self):
        rho = np.full_like(Y, 0.7)
        out = advect_density(rho, 0.3 * np.tanh(Y), 1e-3, Y)
        assert np.all(out == 0.7)

    def test_linear_profile_constant_shift(self):
        rho = 1.0 + 0.05 * Y
        q = np.full_like(Y, 2.0)
        dx = 1e-2
        out = advect_density(rho, q, dx, Y)
        exact = 1.0 + 0.05 * (Y - dx * 2.0)
        # interior nodes: piecewise-cubic interpolation is exact on linears
        inner = (Y > 1.0) & (Y < 11.0)
        assert np.abs(out[inner] - exact[inner]).max() <= 1e-12

    def test_deep_foot_rejected(self):
        q = np.full_like(Y, 100.0)
        with pytest.raises(StepError):
            advect_density(RHO0, q, 1e-2, Y)


class TestWallConstants:
    def test_builder_estimates(self):
        data = builder_data()
        lam0, delta_nb, xi0 = estimate_wall_constants(data, SteadyParams())
        assert lam0 == pytest.approx(0.2)  # u0'(0)/4 with slope 0.8
        assert delta_nb > 1.0
        assert 0.0 < xi0 < data.u_inf
        # the data satisfy the monitored bounds with margin at x = 0
        near = (Y > 0) & (Y <= delta_nb)
        assert np.all(data.u0[near] >= lam0 * Y[near])


@pytest.fixture(scope="module")
def steady_run():
    data = builder_data()
    return data, run_steady(data, SteadyParams(L=0.1))


class TestPicardIteration:
    def test_contraction_at_every_theta(self, steady_run):
        _, run = steady_run
        assert [d.theta for d in run.diagnostics] == [1e-1, 1e-2, 1e-3, 0.0]
        for d in run.diagnostics:
            assert d.contraction_ratio < 0.9
            assert d.phi_series[-1] < 1e-9

    def test_geometric_phi_series(self, steady_run):
        _, run = steady_run
        for d in run.diagnostics:
            phi = d.phi_series
            assert np.all(phi[1:] < phi[:-1])

    def test_theta_sequence_cauchy(self, steady_run):
        _, run = steady_run
        dists = run.theta_distances
        assert len(dists) == 3
        assert all(b < a for a, b in zip(dists, dists[1:]))

    def test_fixed_point_consistency(self, steady_run):
        data, run = steady_run
        params = SteadyParams(L=0.1)
        params.lambda0 = run.lambda0
        q0 = build_q0(data.rho0, data.u0, Y)
        r0 = compute_r0(data.rho0, data.u0, Y, 0.0)
        again = picard_step(run.slab, params, (data.rho0, data.u0, q0, r0, Y),
                            0.0)
        dist = max(np.abs(a.u - b.u).max() for a, b in zip(again, run.slab))
        assert dist < 10 * params.picard_tol


class TestFirstIntegral:
    def measured_d2_error(self):
        """Richardson estimate of the d_y^2 stencil error on the profile."""
        yf = np.linspace(0, 12, 481)
        df = builder_data(y=yf)
        coarse = _profile_d2_matrix(Y) @ builder_data().u0
        fine = (_profile_d2_matrix(yf) @ df.u0)[::2]
        wy = np.gradient(Y)
        return np.sqrt(np.sum((coarse - fine) ** 2 * wy)) * 4.0 / 3.0

    def test_residual_all_iterates(self, steady_run):
        _, run = steady_run
        tol = 10.0 * self.measured_d2_error()
        for d in run.diagnostics:
            assert d.r0_residual_max <= tol

    def test_station_zero_identity(self, steady_run):
        data, run = steady_run
        wy = np.gradient(Y)
        st0 = run.slab[0]
        r0 = compute_r0(data.rho0, data.u0, Y, 0.0)
        res = (st0.rho * st0.u ** 2 * st0.dyq
               + _profile_d2_matrix(Y) @ st0.u - r0)
        assert np.sqrt(np.sum(res ** 2 * wy)) <= 1e-10

    def test_theta_zero_momentum_equation(self, steady_run):
        # converged theta = 0 slab satisfies rho u^2 d_y q + d_y^2 u ~ 0
        data, run = steady_run
        r0 = compute_r0(data.rho0, data.u0, Y, 0.0)
        assert np.all(r0 == 0.0)
        res = check_r0(run.slab, run.slab, r0, 0.0, Y)
        assert res < 10.0 * self.measured_d2_error()

    def test_density_range_preserved(self, steady_run):
        data, run = steady_run
        lo, hi = data.rho0.min(), data.rho0.max()
        for st in run.slab:
            assert st.rho.min() >= lo - 1e-12
            assert st.rho.max() <= hi + 1e-12


class TestMonitors:
    def test_life_span_detected(self, steady_run):
        data, run = steady_run
        assert run.L_a >= 0.05
        near = (Y > 0) & (Y <= run.delta_nb)
        for st in run.slab:
            assert wall_derivative(Y, st.u, 1, 5) >= 2.0 * run.lambda0
            assert np.all(st.u[near] >= run.lambda0 * Y[near])
            assert np.all(st.u[Y >= 0.5 * run.delta_nb] >= run.xi0)

    def test_wall_values_pinned(self, steady_run):
        _, run = steady_run
        for st in run.slab:
            assert st.u[0] == 0.0 and st.q[0] == 0.0


class TestRunEdges:
    def test_empty_march(self):
        data = builder_data()
        run = run_steady(data, SteadyParams(L=0.0))
        assert len(run.slab) == 1
        assert np.array_equal(run.slab[0].u, data.u0)
        assert run.X_series.size == 0

    def test_incompatible_data_rejected(self):
        u0 = 2.0 * np.tanh(Y)
        data = InitialData1D(Y, RHO0, u0)
        with pytest.raises(DataError):
            run_steady(data, SteadyParams(L=0.01))

    def test_divergence_detected_at_coarse_dx(self):
        # the explicit march is unstable near the wall at this step size
        data = builder_data()
        with pytest.raises((IterationDivergenceError, LifeSpanExceeded)):
            run_steady(data, SteadyParams(L=0.1, dx=1.4e-3))

    def test_interior_degeneracy(self):
        data = builder_data()
        params = SteadyParams(L=0.01)
        params.lambda0 = 0.2
        q0 = build_q0(data.rho0, data.u0, Y)
        r0 = compute_r0(data.rho0, data.u0, Y, 0.0)
        u_dip = data.u0.copy()
        u_dip[100:110] = 1e-3  # u collapses aloft
        nst = 11
        prev = [SteadyState(j * params.dx, data.rho0, u_dip, q0,
                            np.gradient(q0, Y)) for j in range(nst)]
        with pytest.raises(DegeneracyError):
            picard_step(prev, params, (data.rho0, data.u0, q0, r0, Y), 0.0)

    def test_wall_slope_collapse_signalled(self):
        data = builder_data()
        params = SteadyParams(L=0.01)
        params.lambda0 = 0.9  # above the actual slope: trips immediately
        q0 = build_q0(data.rho0, data.u0, Y)
        r0 = compute_r0(data.rho0, data.u0, Y, 0.0)
        prev = [SteadyState(j * params.dx, data.rho0, data.u0, q0,
                            np.gradient(q0, Y)) for j in range(11)]
        with pytest.raises(LifeSpanExceeded):
            picard_step(prev, params, (data.rho0, data.u0, q0, r0, Y), 0.0)


class TestEnergyXY:
    @staticmethod
    def constant_window(m=3, dx=1e-3):
        u = 2.0 * (1 - np.exp(-Y))
        rho = np.full_like(Y, 2.0)
        q = np.zeros_like(Y)
        return [SteadyState(j * dx, rho, u, q, q) for j in range(m + 1)]

    def test_quadrature_oracle_x_independent(self):
        # q = 0, rho = rho_inf: X = |u - u_inf|^2 + |d_y(u - u_inf)|^2
        window = self.constant_window()
        X, Yv = energy_XY(window, SteadyParams(), rho_inf=2.0, u_inf=2.0, y=Y)
        oracle = (quad(lambda t: 4 * np.exp(-2 * t), 0, np.inf)[0]
                  + quad(lambda t: 4 * np.exp(-2 * t), 0, np.inf)[0])
        assert X == pytest.approx(oracle, rel=1e-2)
        assert Yv == 0.0

    def test_short_window_rejected(self):
        with pytest.raises(UsageError):
            energy_XY(self.constant_window(m=2), SteadyParams(),
                      rho_inf=2.0, u_inf=2.0, y=Y)

    def test_uneven_window_rejected(self):
        window = self.constant_window()
        window[2] = SteadyState(window[2].x + 3e-4, window[2].rho,
                                window[2].u, window[2].q, window[2].dyq)
        with pytest.raises(UsageError):
            energy_XY(window, SteadyParams(), rho_inf=2.0, u_inf=2.0, y=Y)

    def test_series_computed_on_run(self, steady_run):
        _, run = steady_run
        n_windows = len(run.slab) - SteadyParams().m
        assert len(run.X_series) == n_windows
        assert np.all(np.isfinite(run.X_series))
        assert np.all(run.X_series >= 0) and np.all(run.Y_series >= 0)


@pytest.fixture(scope="module")
def stability_runs():
    data = builder_data()
    params = lambda: SteadyParams(L=0.05)
    base = run_steady(data, params())
    rerun = run_steady(data, params())
    pert = {d: run_steady(perturbed_data(data, d), params())
            for d in (1e-6, 1e-3)}
    return data, base, rerun, pert


class TestStability:
    def test_zero_delta_bitwise(self, stability_runs):
        data, base, rerun, _ = stability_runs
        ok, growth = stability_check(base, rerun, 0.0, 2.0, Y)
        assert ok and growth == 0.0

    def test_quadratic_scaling(self, stability_runs):
        data, base, _, pert = stability_runs
        f_small = stability_functional(pert[1e-6].slab, base.slab, 2.0, Y)
        f_large = stability_functional(pert[1e-3].slab, base.slab, 2.0, Y)
        ratio = f_large.max() / f_small.max()
        assert 1e5 <= ratio <= 1e7

    def test_gronwall_envelope(self, stability_runs):
        data, base, _, pert = stability_runs
        for delta, run in pert.items():
            ok, growth = stability_check(run, base, delta, 2.0, Y)
            assert ok
            assert np.isfinite(growth)

    def test_grid_mismatch_rejected(self, stability_runs):
        data, base, _, _ = stability_runs
        short = type(base)(base.slab[:-1], base.diagnostics,
                           base.theta_distances, base.L_a, base.X_series,
                           base.Y_series, base.lambda0, base.xi0,
                           base.delta_nb)
        with pytest.raises(UsageError):
            stability_check(base, short, 1e-6, 2.0, Y)
