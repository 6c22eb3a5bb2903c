import numpy as np
import pytest

from prandtl_lab import (
    DomainError,
    ScalarField,
    make_grid,
    random_decaying_field,
    run_inequality_suite,
)
from prandtl_lab.inequalities import check_inequality


def exp_field(grid):
    return ScalarField.from_function(grid, lambda x, y: np.exp(-y) + 0 * x)


class TestExplicitConstantCases:
    def test_hardy1_exponential(self):
        g = make_grid(16, 2001, 12, 0)
        r = check_inequality("hardy1", exp_field(g), 0.0)
        assert r.lhs == pytest.approx(np.sqrt(np.pi), rel=1e-4)
        assert r.rhs == pytest.approx(2 * np.sqrt(5 * np.pi / 2), rel=1e-4)
        assert r.holds

    def test_trace_equality_case(self):
        # f = g = e^{-y}: both sides equal 2*pi
        g = make_grid(16, 2001, 12, 0)
        r = check_inequality("trace", exp_field(g), 0.0)
        assert r.lhs == pytest.approx(2 * np.pi, abs=1e-6)
        assert r.rhs == pytest.approx(2 * np.pi, rel=1e-4)
        assert r.holds

    def test_hardy1_domain_error(self):
        g = make_grid(16, 64, 10, 0)
        with pytest.raises(DomainError):
            check_inequality("hardy1", exp_field(g), -1.0)

    def test_hardy2_domain_error(self):
        g = make_grid(16, 64, 10, 0)
        with pytest.raises(DomainError):
            check_inequality("hardy2", exp_field(g), 0.0)


class TestRandomizedSuite:
    @pytest.mark.parametrize("kind,lam", [("hardy1", 0.7), ("hardy2", -1.0), ("trace", 0.0)])
    def test_explicit_constant_kinds_hold(self, kind, lam):
        rng = np.random.default_rng(42)
        g = make_grid(16, 129, 12, 0)
        samples = [random_decaying_field(g, rng) for _ in range(100)]
        reports = run_inequality_suite(kind, samples, lam)
        assert len(reports) == 100
        assert all(r.holds for r in reports)

    @pytest.mark.parametrize("kind,lam", [("sobolev_inf", 0.0), ("morse", 0.5)])
    def test_empirical_kinds_refinement_stable(self, kind, lam):
        rng = np.random.default_rng(43)
        g = make_grid(16, 129, 12, 0)
        samples = [random_decaying_field(g, rng) for _ in range(20)]
        reports = run_inequality_suite(kind, samples, lam)
        assert all(r.holds for r in reports)
        assert all(np.isfinite(r.empirical_constant) for r in reports)
