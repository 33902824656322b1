import numpy as np
import pytest

from obscheck import (
    OptConfig,
    PosteriorContext,
    check_maximum,
    load_model,
    local_variance,
    maximize,
)
from obscheck.samples import representative_disturbances
from obscheck.study import make_design_observations

from conftest import DESK_LCD

VARIANCE_ONLY = load_model("unknown_variance")
MEAN_AND_VARIANCE = load_model("mean_and_variance")
RATIO_RIDGE = load_model("ratio_mean_scale_sqrt_ratio")


class QuadraticContext:
    """Synthetic context with -2L = sum (x_j - c_j)^2."""

    def __init__(self, center, bounds=None):
        self.center = np.asarray(center, dtype=float)
        self.param_names = tuple(f"x{j}" for j in range(self.center.size))
        self._bounds = bounds or [(-np.inf, np.inf)] * self.center.size

    def bounds(self):
        return self._bounds

    def neg2l(self, x):
        d = np.asarray(x, float) - self.center
        return float(d @ d)

    def neg2l_grad(self, x):
        d = np.asarray(x, float) - self.center
        return float(d @ d), 2.0 * d


class TestMaximize:
    def test_synthetic_quadratic(self):
        ctx = QuadraticContext([3.0])
        result = maximize(ctx, np.array([0.0]))
        assert result.omega_hat[0] == pytest.approx(3.0, abs=1e-8)
        assert result.converged

    def test_variance_model_from_perturbed_start(self):
        eps = representative_disturbances(4, DESK_LCD)
        z = make_design_observations(VARIANCE_ONLY, eps)
        ctx = PosteriorContext(VARIANCE_ONLY, z)
        result = maximize(ctx, np.array([0.8 + 0.3]))
        assert result.omega_hat[0] == pytest.approx(0.8, abs=1e-8)

    def test_mean_and_variance_representative(self):
        eps = representative_disturbances(4, DESK_LCD)
        z = make_design_observations(MEAN_AND_VARIANCE, eps)
        ctx = PosteriorContext(MEAN_AND_VARIANCE, z)
        result = maximize(ctx, np.array([0.6, 0.4]))
        assert result.estimates["a"] == pytest.approx(0.6, abs=1e-8)
        assert result.estimates["b"] == pytest.approx(0.4, abs=1e-8)

    def test_infeasible_start_raises(self):
        ctx = PosteriorContext(VARIANCE_ONLY, np.array([1.0]))
        with pytest.raises(ValueError, match="infeasible starting point"):
            maximize(ctx, np.array([-1.0]))

    def test_trace_is_monotone_nonincreasing(self):
        rng = np.random.default_rng(2)
        z = rng.normal(0.6, 0.6, size=8)
        ctx = PosteriorContext(MEAN_AND_VARIANCE, z)
        result = maximize(ctx, np.array([0.1, 1.5]))
        trace = np.array(result.trace)
        assert np.all(np.diff(trace) <= 0.0)

    def test_bounds_are_respected(self):
        ctx = QuadraticContext([3.0], bounds=[(-1.0, 2.0)])
        result = maximize(ctx, np.array([0.0]))
        assert result.omega_hat[0] == pytest.approx(2.0)
        assert not result.converged  # gradient cannot vanish on the face

    def test_line_search_rejects_infeasible_points(self):
        # starting near the boundary forces trial rejections, not crashes
        z = np.array([0.9, -0.4, 0.2, 0.5])
        ctx = PosteriorContext(VARIANCE_ONLY, z)
        result = maximize(ctx, np.array([1e-3]))
        assert result.omega_hat[0] == pytest.approx(float(np.mean(z**2)), rel=1e-8)

    def test_deterministic(self):
        rng = np.random.default_rng(8)
        z = rng.normal(0.6, 0.7, size=6)
        ctx = PosteriorContext(MEAN_AND_VARIANCE, z)
        r1 = maximize(ctx, np.array([0.2, 1.0]))
        r2 = maximize(ctx, np.array([0.2, 1.0]))
        assert r1.omega_hat.tobytes() == r2.omega_hat.tobytes()
        assert r1.trace == r2.trace


class TestCheckMaximum:
    def _converged_result(self, ctx, x0):
        return maximize(ctx, x0)

    def test_variance_model_passes_all_checks(self):
        for horizon in (4, 12, 20):
            eps = representative_disturbances(horizon, DESK_LCD)
            z = make_design_observations(VARIANCE_ONLY, eps)
            ctx = PosteriorContext(VARIANCE_ONLY, z)
            result = self._converged_result(ctx, np.array([0.8]))
            report = check_maximum(ctx, result)
            assert report.passed
            assert report.grad_ok and report.hessian_pd
            assert report.eig_ratio_ok and report.lvar_finite

    def test_ridge_model_fails_eigenvalue_ratio(self):
        eps = representative_disturbances(2, DESK_LCD)
        z = make_design_observations(RATIO_RIDGE, eps)
        ctx = PosteriorContext(RATIO_RIDGE, z)
        result = self._converged_result(ctx, np.array([0.6, 0.4]))
        report = check_maximum(ctx, result)
        assert not report.eig_ratio_ok
        assert not report.passed

    def test_gradient_threshold_boundary(self):
        class Offset(QuadraticContext):
            def neg2l_grad(self, x):
                value, grad = super().neg2l_grad(x)
                return value, grad + 2e-5  # candidate held off the optimum

            def hessian_neg2l(self, x):
                return 2.0 * np.eye(self.center.size)

        ctx = Offset([0.0])
        result = maximize(ctx, np.array([0.0]), OptConfig(max_iters=0))
        report = check_maximum(ctx, result)
        assert not report.grad_ok

    def test_passed_is_conjunction_of_flags(self):
        eps = representative_disturbances(4, DESK_LCD)
        z = make_design_observations(VARIANCE_ONLY, eps)
        ctx = PosteriorContext(VARIANCE_ONLY, z)
        result = self._converged_result(ctx, np.array([0.8]))
        report = check_maximum(ctx, result)
        assert report.passed == (
            report.grad_ok and report.hessian_pd and report.eig_ratio_ok and report.lvar_finite
        )

    def test_threshold_scaling_never_changes_estimate(self):
        eps = representative_disturbances(4, DESK_LCD)
        z = make_design_observations(MEAN_AND_VARIANCE, eps)
        ctx = PosteriorContext(MEAN_AND_VARIANCE, z)
        result = maximize(ctx, np.array([0.6, 0.4]))
        loose = check_maximum(ctx, result, OptConfig(grad_check=1e-2, eig_ratio_min=1e-2))
        tight = check_maximum(ctx, result, OptConfig(grad_check=1e-8, eig_ratio_min=0.5))
        assert result.omega_hat.tobytes() == result.omega_hat.tobytes()
        assert loose.grad_inf_norm == tight.grad_inf_norm

    def test_second_order_sufficiency_on_pass(self):
        eps = representative_disturbances(12, DESK_LCD)
        z = make_design_observations(MEAN_AND_VARIANCE, eps)
        ctx = PosteriorContext(MEAN_AND_VARIANCE, z)
        result = maximize(ctx, np.array([0.6, 0.4]))
        report = check_maximum(ctx, result)
        assert report.passed
        eigvals = np.linalg.eigvalsh(ctx.hessian_neg2l(result.omega_hat))
        assert eigvals[0] > 0.0


class TestLocalVariance:
    def test_table_one_values(self):
        for horizon, expected in [(4, 0.32), (12, 2 * 0.64 / 12), (20, 0.064)]:
            eps = representative_disturbances(horizon, DESK_LCD)
            z = make_design_observations(VARIANCE_ONLY, eps)
            ctx = PosteriorContext(VARIANCE_ONLY, z)
            lvar = local_variance(ctx, np.array([0.8]))
            assert lvar[0] == pytest.approx(expected, abs=1e-6)

    def test_table_three_values(self):
        eps = representative_disturbances(12, DESK_LCD)
        z = make_design_observations(MEAN_AND_VARIANCE, eps)
        ctx = PosteriorContext(MEAN_AND_VARIANCE, z)
        lvar = local_variance(ctx, np.array([0.6, 0.4]))
        assert lvar == pytest.approx([0.4 / 12, 2 * 0.16 / 12], abs=1e-6)

    def test_one_dimensional_formula(self):
        # matches -1/L'' = (2/T) bhat^2
        z = np.array([1.2, -0.3, 0.7, -0.9, 0.1])
        b_hat = float(np.mean(z * z))
        ctx = PosteriorContext(VARIANCE_ONLY, z)
        lvar = local_variance(ctx, np.array([b_hat]))
        assert lvar[0] == pytest.approx(2.0 * b_hat**2 / 5.0, rel=1e-7)

    def test_singular_hessian_yields_infinity(self):
        class Flat:
            param_names = ("x",)

            def bounds(self):
                return [(-np.inf, np.inf)]

            def hessian_neg2l(self, x):
                return np.zeros((1, 1))

        assert np.isinf(local_variance(Flat(), np.array([0.0]))[0])


def test_opt_config_rejects_nonpositive_thresholds():
    with pytest.raises(ValueError):
        OptConfig(grad_check=0.0)
