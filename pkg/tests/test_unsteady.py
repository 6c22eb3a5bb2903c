import numpy as np
import pytest

from prandtl_lab import make_grid
from prandtl_lab.errors import BlowUpError, DataError, StepError, UsageError
from prandtl_lab.grid import ScalarField, WeightParams, ddy
from prandtl_lab.initial_data import build_u0_blend, build_unsteady_data
from prandtl_lab.unsteady import (
    UnsteadyParams,
    heat_oracle,
    init_unsteady,
    recover_v,
    step_unsteady,
)

from mms import exact_state, make_sources, rho_exact, u_exact


class TestRecoverV:
    def test_analytic_integral(self):
        # u = sin(x) y e^{-y}  ->  v = -cos(x) (1 - (1+y) e^{-y})
        grid = make_grid(32, 201, 12, 0)
        X = grid.x_nodes[:, None]
        Y = grid.y_nodes[None, :]
        u = ScalarField(grid, np.sin(X) * Y * np.exp(-Y) + 0 * X)
        v = recover_v(u)
        exact = -np.cos(X) * (1 - (1 + Y) * np.exp(-Y))
        # trapezoid quadrature of the vertical integral is second order
        assert np.abs(v.values - exact).max() < 5e-4

    def test_wall_value_zero(self):
        grid = make_grid(16, 101, 12, 0)
        X = grid.x_nodes[:, None]
        Y = grid.y_nodes[None, :]
        u = ScalarField(grid, np.cos(X) * Y ** 2 + 0 * X)
        assert np.all(recover_v(u).values[:, 0] == 0.0)


class TestInitValidation:
    def setup_method(self):
        self.grid = make_grid(16, 101, 12, 0)
        self.params = UnsteadyParams()
        X = self.grid.x_nodes[:, None]
        Y = self.grid.y_nodes[None, :]
        base = build_u0_blend(0.8, 2.0, 1.0, 5, self.grid.y_nodes)
        self.u0 = ScalarField(self.grid, base.u0[None, :] + 0 * X)
        self.rho0 = ScalarField(self.grid, np.ones((16, 101)))

    def test_valid_data_accepted(self):
        st = init_unsteady(self.rho0, self.u0, self.params)
        assert st.t == 0.0
        assert st.w.values.shape == (16, 101)

    def test_nonpositive_density_rejected(self):
        bad = ScalarField(self.grid, np.zeros((16, 101)))
        with pytest.raises(DataError):
            init_unsteady(bad, self.u0, self.params)

    def test_no_slip_violation_rejected(self):
        bad = ScalarField(self.grid, self.u0.values + 0.1)
        with pytest.raises(DataError):
            init_unsteady(self.rho0, bad, self.params)

    def test_farfield_violation_rejected(self):
        params = UnsteadyParams(u_inf=5.0)
        with pytest.raises(DataError):
            init_unsteady(self.rho0, self.u0, params)

    def test_bad_params_rejected(self):
        with pytest.raises(UsageError):
            UnsteadyParams(dt=-1.0)
        with pytest.raises(UsageError):
            UnsteadyParams(s_order=9)


class TestStepGuards:
    def test_cfl_violation_suggests_smaller_dt(self):
        grid = make_grid(16, 101, 12, 0)
        params = UnsteadyParams(dt=1.0)
        st = exact_state(grid, 0.0)
        with pytest.raises(StepError) as exc:
            step_unsteady(st, params)
        assert exc.value.suggested_dt < 1.0

    def test_blow_up_detection(self):
        grid = make_grid(16, 101, 12, 0)
        params = UnsteadyParams()
        X = grid.x_nodes[:, None]
        Y = grid.y_nodes[None, :]
        u = ScalarField(grid, 2e6 * Y / 12.0 + 0 * X)
        rho = ScalarField(grid, np.ones((16, 101)))
        st = init_unsteady(rho, u, UnsteadyParams(u_inf=2e6, farfield_tol=1e9))
        with pytest.raises(BlowUpError):
            step_unsteady(st, params)


class TestHeatOracle:
    def test_t_zero_returns_data(self):
        y = np.linspace(0, 12, 101)
        u0 = 2 * (1 - np.exp(-y))
        assert np.array_equal(heat_oracle(1.0, u0, y, 0.0), u0)

    def test_density_rescales_time(self):
        # rho d_t u = d_y^2 u: quadrupling rho quarters the elapsed time
        y = np.linspace(0, 12, 101)
        u0 = 2 * (1 - np.exp(-y))
        a = heat_oracle(4.0, u0, y, 0.2)
        b = heat_oracle(1.0, u0, y, 0.05)
        assert np.abs(a - b).max() < 1e-6

    def test_invalid_density(self):
        y = np.linspace(0, 12, 101)
        with pytest.raises(UsageError):
            heat_oracle(0.0, y, y, 0.1)


class TestHeatReduction:
    """x-independent constant-density runs against the independent
    Crank-Nicolson oracle."""

    def run_error(self, ny, dt=2e-3, t_final=0.25, rho_c=2.0):
        grid = make_grid(4, ny, 12, 0)
        base = build_u0_blend(0.8, 2.0, 1.0, 5, grid.y_nodes)
        X = grid.x_nodes[:, None]
        u0 = ScalarField(grid, base.u0[None, :] + 0 * X)
        rho0 = ScalarField(grid, np.full((4, ny), rho_c))
        params = UnsteadyParams(eps=1e-3, rho_inf=rho_c, dt=dt,
                                t_final=t_final)
        st = init_unsteady(rho0, u0, params)
        for _ in range(int(round(t_final / dt))):
            st = step_unsteady(st, params)
        ref = heat_oracle(rho_c, base.u0, grid.y_nodes, t_final, dt_main=dt)
        return np.abs(st.u.values[0] - ref).max()

    def test_convergence_order(self):
        errs = [self.run_error(ny) for ny in (51, 101, 201)]
        orders = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
        assert orders.min() >= 1.8
        assert errs[-1] <= 5e-3

    def test_x_independence_preserved(self):
        grid = make_grid(8, 101, 12, 0)
        base = build_u0_blend(0.8, 2.0, 1.0, 5, grid.y_nodes)
        X = grid.x_nodes[:, None]
        u0 = ScalarField(grid, base.u0[None, :] + 0 * X)
        rho0 = ScalarField(grid, np.full((8, 101), 1.5))
        params = UnsteadyParams(eps=1e-3, rho_inf=1.5, dt=2e-3)
        st = init_unsteady(rho0, u0, params)
        for _ in range(10):
            st = step_unsteady(st, params)
        spread = np.abs(st.u.values - st.u.values[:1]).max()
        assert spread < 1e-12
        assert np.abs(st.v.values).max() < 1e-12


class TestDensityMaxPrinciple:
    def test_range_never_expands(self):
        rng = np.random.default_rng(7)
        grid = make_grid(16, 101, 12, 0)
        wp = WeightParams(2.0, 3.0)
        for _ in range(5):
            amp = float(rng.uniform(0.0, 0.3))
            data = build_unsteady_data(wp, 0.02, 0.25, 4.0, amp, grid)
            params = UnsteadyParams(eps=1e-3, dt=2e-3, rho_inf=data.rho_inf,
                                    u_inf=data.u_inf)
            st = init_unsteady(data.rho0, data.u0, params)
            lo0, hi0 = st.rho.values.min(), st.rho.values.max()
            for _ in range(15):
                st = step_unsteady(st, params)
            assert st.rho.values.min() >= lo0 - 1e-12
            assert st.rho.values.max() <= hi0 + 1e-12


class TestManufacturedSolution:
    def run_level(self, nx, ny, dt, t_final=0.05):
        grid = make_grid(nx, ny, 12, 0)
        eps = 1e-3
        params = UnsteadyParams(eps=eps, dt=dt)
        sources = make_sources(eps)
        bc = lambda t, x: u_exact(t, x, grid.y_max)
        st = exact_state(grid, 0.0)
        for _ in range(int(round(t_final / dt))):
            st = step_unsteady(st, params, forcing=sources, bc_top=bc)
        X = grid.x_nodes[:, None]
        Y = grid.y_nodes[None, :]
        return (np.abs(st.u.values - u_exact(st.t, X, Y)).max(),
                np.abs(st.rho.values - rho_exact(st.t, X, Y)).max())

    def test_joint_refinement(self):
        eu1, er1 = self.run_level(16, 101, 4e-3)
        eu2, er2 = self.run_level(32, 201, 2e-3)
        assert er2 < er1 / 1.8  # density: order about 1
        assert eu2 < eu1       # velocity error decreases
        assert eu1 < 1e-3 and er1 < 1e-4
