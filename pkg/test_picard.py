"""
Tests for the fixed-point construction of mild solutions
"""
import math

import numpy as np
import pytest

from src.services.graph_core import build_cycle
from src.services.heat_kernel import kernel_matrix, spectral_decompose
from src.services.picard import (
    PhiKernels,
    PicardState,
    apply_phi,
    c_tilde,
    crosscheck_with_integrator,
    delta_admissible,
    empirical_c_tilde,
    geometric_grid,
    linear_baseline,
    picard_solve,
    reference_weight,
    refinement_order,
    uniform_grid,
    weighted_norm,
)
from src.services.semilinear import IntegratorControl, integrate_semilinear, make_problem
from src.utils.errors import InvalidParameterError, PicardDivergenceError, SpecMismatchError


@pytest.fixture
def hk6(c6):
    return spectral_decompose(c6)


@pytest.fixture(scope='module')
def hk64():
    return spectral_decompose(build_cycle(64, 1.0, 'normalized'))


def scaled_kernel_row(hk, delta, gamma=1.0, e=0):
    return delta * np.array(kernel_matrix(hk, gamma)[e])


class TestGrids:
    def test_uniform(self):
        grid = uniform_grid(2.0, 4)
        np.testing.assert_allclose(grid.nodes, [0.0, 0.5, 1.0, 1.5, 2.0])
        assert grid.horizon == 2.0

    def test_geometric(self):
        grid = geometric_grid(10.0, 5, 0.01, 'midpoint')
        assert len(grid) == 6
        assert grid.nodes[0] == 0.0 and grid.nodes[1] == pytest.approx(0.01)
        assert grid.horizon == pytest.approx(10.0)

    def test_invalid(self):
        with pytest.raises(InvalidParameterError):
            uniform_grid(1.0, 1)
        with pytest.raises(InvalidParameterError):
            uniform_grid(1.0, 4, 'simpson')
        with pytest.raises(InvalidParameterError):
            geometric_grid(1.0, 4, 2.0)


class TestWeightedNorm:
    def test_kernel_data_has_norm_delta(self, hk6):
        grid = uniform_grid(5.0, 10)
        state = linear_baseline(hk6, scaled_kernel_row(hk6, 0.1), grid, gamma=1.0, e=0)
        assert state.norm_value == pytest.approx(0.1, rel=1e-9)

    def test_homogeneity(self, hk6, ramp6):
        state = linear_baseline(hk6, ramp6, uniform_grid(2.0, 8), gamma=0.5)
        assert weighted_norm(hk6, state.scaled(3.0)) == pytest.approx(3.0 * state.norm_value, rel=1e-14)
        assert state.scaled(3.0).norm_value == pytest.approx(3.0 * state.norm_value, rel=1e-14)

    def test_baseline_starts_at_data(self, hk6, ramp6):
        state = linear_baseline(hk6, ramp6, uniform_grid(2.0, 8))
        np.testing.assert_array_equal(state.iterate[0], ramp6)
        assert state.base_vertex == 5

    def test_gamma_must_be_positive(self, hk6):
        with pytest.raises(InvalidParameterError):
            reference_weight(hk6, uniform_grid(1.0, 4), 0.0, 0)


class TestConstants:
    def test_c_tilde(self):
        assert c_tilde(1.0, 3.0, 1.0, 1.0) == pytest.approx(2.0)
        assert c_tilde(4.0, 3.0, 1.0, 1.0) == pytest.approx(1.0)

    def test_c_tilde_needs_supercritical_exponent(self):
        with pytest.raises(InvalidParameterError):
            c_tilde(1.0, 2.0, 1.0, 1.0)

    def test_delta_admissible(self):
        assert delta_admissible(0.01, 2.0, 2.0)
        assert not delta_admissible(0.9, 2.0, 2.0)
        assert not delta_admissible(1.0, 2.0, 0.0)
        assert not delta_admissible(0.01, 2.0, 200.0)


class TestPhi:
    @pytest.mark.parametrize('quadrature', ['trapezoid', 'midpoint'])
    def test_power_bound(self, hk6, quadrature):
        grid = uniform_grid(4.0, 16, quadrature)
        rho = reference_weight(hk6, grid, 1.0, 2)
        kernels = PhiKernels(hk6, grid)
        bound = empirical_c_tilde(hk6, grid, 1.0, 2, 2.0, kernels)
        rng = np.random.default_rng(5)
        for _ in range(10):
            state = PicardState(grid, rng.uniform(0, 1, rho.shape) * rho, 1.0, 2)
            norm = weighted_norm(hk6, state, rho)
            image = apply_phi(hk6, state, 2.0, kernels, rho)
            assert image.norm_value <= bound * norm ** 3 * (1 + 1e-12)

    def test_lipschitz_bound(self, hk6):
        grid = uniform_grid(4.0, 16)
        rho = reference_weight(hk6, grid, 1.0, 0)
        kernels = PhiKernels(hk6, grid)
        alpha = 1.5
        bound = empirical_c_tilde(hk6, grid, 1.0, 0, alpha, kernels)
        rng = np.random.default_rng(9)
        for _ in range(10):
            u = PicardState(grid, rng.uniform(0, 2, rho.shape) * rho, 1.0, 0)
            v = PicardState(grid, rng.uniform(0, 2, rho.shape) * rho, 1.0, 0)
            top = max(weighted_norm(hk6, u, rho), weighted_norm(hk6, v, rho))
            gap = weighted_norm(hk6, PicardState(grid, u.iterate - v.iterate, 1.0, 0), rho)
            image_gap = apply_phi(hk6, u, alpha, kernels).iterate - apply_phi(hk6, v, alpha, kernels).iterate
            image_norm = weighted_norm(hk6, PicardState(grid, image_gap, 1.0, 0), rho)
            assert image_norm <= (1 + alpha) * bound * top ** alpha * gap * (1 + 1e-12)

    def test_zero_lag_term(self, hk6):
        # on two nodes the trapezoid rule gives Φu(t_1) = h/2 (P_h u_0^{1+α} + u_1^{1+α})
        grid = uniform_grid(0.2, 2)
        u = np.full((3, 6), 0.5)
        image = apply_phi(hk6, PicardState(grid, u, 1.0, 0), 1.0)
        np.testing.assert_allclose(image.iterate[1], 0.1 * 0.25, rtol=1e-12)
        np.testing.assert_array_equal(image.iterate[0], 0.0)

    @pytest.mark.parametrize('quadrature', ['trapezoid', 'midpoint'])
    def test_one_kernel_per_distinct_step(self, hk6, quadrature):
        kernels = PhiKernels(hk6, uniform_grid(3.0, 30, quadrature))
        assert kernels.lags.size == (1 if quadrature == 'trapezoid' else 2)
        assert kernels.cached

    @pytest.mark.parametrize('quadrature', ['trapezoid', 'midpoint'])
    def test_geometric_grid_matches_direct_sum(self, hk6, ramp6, quadrature):
        grid = geometric_grid(5.0, 7, 0.05, quadrature)
        nodes = grid.nodes
        alpha = 1.5
        u = np.outer(np.exp(-0.2 * nodes), ramp6 + 0.1)
        mu = hk6.graph.measure

        def propagate(lag, f):
            return f if lag == 0 else (f * mu) @ kernel_matrix(hk6, lag)

        expected = np.zeros_like(u)
        for i in range(1, len(nodes)):
            for k in range(1, i + 1):
                h = nodes[k] - nodes[k - 1]
                if quadrature == 'trapezoid':
                    expected[i] += 0.5 * h * (propagate(nodes[i] - nodes[k - 1], u[k - 1] ** (1 + alpha))
                                              + propagate(nodes[i] - nodes[k], u[k] ** (1 + alpha)))
                else:
                    middle = 0.5 * (nodes[k - 1] + nodes[k])
                    expected[i] += h * propagate(nodes[i] - middle, (0.5 * (u[k - 1] + u[k])) ** (1 + alpha))

        image = apply_phi(hk6, PicardState(grid, u, 1.0, 0), alpha)
        np.testing.assert_allclose(image.iterate, expected, rtol=1e-9, atol=1e-13)

    def test_without_kernel_budget(self, hk6, ramp6):
        grid = geometric_grid(4.0, 12, 0.01, 'midpoint')
        u = np.tile(ramp6, (len(grid), 1))
        state = PicardState(grid, u, 1.0, 0)
        lean = PhiKernels(hk6, grid, memory_budget=0)
        assert not lean.cached
        np.testing.assert_allclose(apply_phi(hk6, state, 2.0, lean).iterate,
                                   apply_phi(hk6, state, 2.0).iterate, rtol=1e-12, atol=1e-15)

    def test_negative_state(self, hk6):
        grid = uniform_grid(1.0, 4)
        with pytest.raises(InvalidParameterError):
            apply_phi(hk6, PicardState(grid, -np.ones((5, 6)), 1.0, 0), 1.0)

    def test_kernels_of_another_grid(self, hk6):
        state = PicardState(uniform_grid(1.0, 4), np.ones((5, 6)), 1.0, 0)
        with pytest.raises(SpecMismatchError):
            apply_phi(hk6, state, 1.0, PhiKernels(hk6, uniform_grid(1.0, 4)))


class TestSolve:
    def test_cycle_64(self, hk64):
        grid = uniform_grid(10.0, 200)
        result = picard_solve(hk64, scaled_kernel_row(hk64, 0.1), 3.0, 1.0, grid, e=0)
        assert result.converged
        assert result.delta == pytest.approx(0.1, rel=1e-12)
        assert 0.005 < result.c_tilde_empirical < 0.05
        assert result.delta_admissible
        assert result.kappa_empirical < 1.0
        assert result.kappa_empirical <= result.kappa_analytic
        assert result.fixed_point_residual < 1e-10
        assert result.envelope_ok
        assert result.M >= result.norms[0]

    def test_report_and_frame(self, hk6):
        grid = uniform_grid(2.0, 10)
        result = picard_solve(hk6, scaled_kernel_row(hk6, 0.1), 3.0, 1.0, grid, e=0)
        report = result.to_dict()
        assert report['grid_nodes'] == 11
        assert report['quadrature'] == 'trapezoid'
        frame = result.to_frame([f"x{k}" for k in range(6)], hk6.graph.measure)
        assert list(frame.columns)[0] == 'time' and list(frame.columns)[-2:] == ['mass', 'reaction']
        assert len(frame) == 11

    def test_norms_follow_power_recursion(self, hk6):
        grid = uniform_grid(5.0, 40)
        result = picard_solve(hk6, scaled_kernel_row(hk6, 0.2), 3.0, 1.0, grid, e=0)
        delta = result.norms[0]
        for before, after in zip(result.norms[:-1], result.norms[1:]):
            assert after <= (delta + result.c_tilde_empirical * before ** 4.0) * (1 + 1e-9)

    def test_zero_data_converges_at_once(self, hk6):
        result = picard_solve(hk6, np.zeros(6), 2.0, 1.0, uniform_grid(2.0, 8))
        assert result.converged
        assert result.iterations == 1
        assert result.delta == 0.0
        np.testing.assert_array_equal(result.last.iterate, 0.0)
        assert result.fixed_point_residual == 0.0

    def test_large_data_diverges(self, hk6):
        grid = uniform_grid(10.0, 40)
        with pytest.raises(PicardDivergenceError):
            picard_solve(hk6, scaled_kernel_row(hk6, 50.0), 3.0, 1.0, grid, e=0)

    def test_alpha_must_be_positive(self, hk6, ramp6):
        with pytest.raises(InvalidParameterError):
            picard_solve(hk6, ramp6, 0.0, 1.0, uniform_grid(1.0, 4))


class TestCrossCheck:
    def test_matches_integrator(self, c6, hk6):
        grid = uniform_grid(2.0, 40)
        a = scaled_kernel_row(hk6, 0.1)
        result = picard_solve(hk6, a, 3.0, 1.0, grid, e=0)
        control = IntegratorControl(horizon=2.0, output_times=grid.nodes[1:])
        traj = integrate_semilinear(make_problem(c6, 3.0, a, base_vertex=0), control)
        assert crosscheck_with_integrator(hk6, result, traj) < 1e-6

    @pytest.mark.slow
    def test_matches_integrator_on_cycle_64(self, hk64):
        grid = uniform_grid(10.0, 200)
        a = scaled_kernel_row(hk64, 0.1)
        result = picard_solve(hk64, a, 3.0, 1.0, grid, e=0)
        control = IntegratorControl(horizon=10.0, output_times=grid.nodes[1:])
        traj = integrate_semilinear(make_problem(hk64.graph, 3.0, a, base_vertex=0), control)
        assert crosscheck_with_integrator(hk64, result, traj) < 1e-6

    def test_needs_recorded_nodes(self, c6, hk6):
        grid = uniform_grid(2.0, 40)
        a = scaled_kernel_row(hk6, 0.1)
        result = picard_solve(hk6, a, 3.0, 1.0, grid, e=0)
        traj = integrate_semilinear(make_problem(c6, 3.0, a, base_vertex=0), IntegratorControl(horizon=2.0))
        with pytest.raises(SpecMismatchError):
            crosscheck_with_integrator(hk6, result, traj)

    def test_other_alpha(self, c6, hk6):
        grid = uniform_grid(1.0, 4)
        a = scaled_kernel_row(hk6, 0.1)
        result = picard_solve(hk6, a, 3.0, 1.0, grid, e=0)
        traj = integrate_semilinear(make_problem(c6, 2.0, a), IntegratorControl(horizon=1.0, output_times=grid.nodes[1:]))
        with pytest.raises(SpecMismatchError):
            crosscheck_with_integrator(hk6, result, traj)


class TestRefinement:
    @pytest.mark.slow
    @pytest.mark.parametrize('quadrature', ['trapezoid', 'midpoint'])
    def test_second_order(self, hk6, quadrature):
        study = refinement_order(hk6, scaled_kernel_row(hk6, 0.5), 3.0, 1.0, 2.0, 10, quadrature, e=0)
        assert study.intervals == [10, 20, 40]
        assert 1.7 < study.order < 2.3
        assert not math.isnan(study.differences[1])
