"""
Tests for the heat kernel: closed forms, axioms, the series semigroup and the kernel bounds
"""
import math

import numpy as np
import pandas as pd
import pytest
from hypothesis import given, seed, settings

from conftest import connected_graphs
from src.services.graph_core import build_cycle, build_graph, build_lattice_torus
from src.services.heat_kernel import (
    BoundId,
    BoundSpec,
    _spectral_matrix,
    _uniformized_matrix,
    apply_semigroup,
    equilibrium_defect,
    kernel_diagonal,
    kernel_matrix,
    kernel_stack,
    kernel_value,
    series_truncation_bound,
    spectral_decompose,
    verify_bounds,
    verify_kernel_axioms,
    wrap_time_limit,
)
from src.utils.errors import (
    GraphTooLargeError,
    InvalidParameterError,
    SpecMismatchError,
    TruncationInsufficientError,
)


class TestSpectrum:
    def test_two_vertex_kernel(self, k2):
        hk = spectral_decompose(k2)
        assert kernel_value(hk, 1.0, 0, 0) == pytest.approx(0.5676676416, abs=1e-10)
        assert kernel_value(hk, 1.0, 0, 1) == pytest.approx(0.4323323584, abs=1e-10)

    @pytest.mark.parametrize('t', [0.1, 1.0, 10.0])
    def test_two_vertex_closed_form(self, k2, t):
        hk = spectral_decompose(k2)
        assert kernel_value(hk, t, 0, 0) == pytest.approx(0.5 * (1.0 + math.exp(-2.0 * t)), abs=1e-12)
        assert kernel_value(hk, t, 1, 0) == pytest.approx(0.5 * (1.0 - math.exp(-2.0 * t)), abs=1e-12)

    def test_cycle_eigenvalues(self, c6):
        hk = spectral_decompose(c6)
        np.testing.assert_allclose(hk.eigenvalues, [0.0, -0.5, -0.5, -1.5, -1.5, -2.0], atol=1e-12)
        assert hk.eigenvalues[0] == 0.0
        assert hk.stationary_value == pytest.approx(1.0 / 12.0)

    def test_dense_cap(self, c6):
        with pytest.raises(GraphTooLargeError):
            spectral_decompose(c6, max_vertices=5)

    def test_time_must_be_positive(self, c6):
        hk = spectral_decompose(c6)
        with pytest.raises(InvalidParameterError):
            kernel_matrix(hk, 0.0)
        with pytest.raises(InvalidParameterError):
            kernel_value(hk, float('nan'), 0, 0)


class TestKernelAccess:
    def test_cached_matrix_is_read_only(self, c6):
        hk = spectral_decompose(c6)
        p = kernel_matrix(hk, 2.0)
        assert kernel_matrix(hk, 2.0) is p
        with pytest.raises(ValueError):
            p[0, 0] = 1.0

    def test_stack_matches_cached(self, c6):
        hk = spectral_decompose(c6)
        stack = kernel_stack(hk, [0.5, 3.0])
        assert stack.shape == (2, 6, 6)
        np.testing.assert_allclose(stack[1], kernel_matrix(hk, 3.0), rtol=1e-14)

    def test_diagonal_shape(self, c6):
        hk = spectral_decompose(c6)
        diag = kernel_diagonal(hk, [1.0, 2.0, 4.0], vertices=[0, 3])
        assert diag.shape == (3, 2)
        np.testing.assert_allclose(diag[2], np.diag(kernel_matrix(hk, 4.0))[[0, 3]], rtol=1e-12)

    def test_equilibrium(self, c6):
        hk = spectral_decompose(c6)
        assert equilibrium_defect(hk, 60.0) < 1e-12
        assert equilibrium_defect(hk, 1.0) > equilibrium_defect(hk, 5.0)

    @seed(11)
    @settings(max_examples=20, deadline=None)
    @given(g=connected_graphs(max_vertices=40))
    def test_long_time_equilibrium(self, g):
        hk = spectral_decompose(g)
        t = 1e3
        # the slowest mode decays like exp(λ₁ t) with amplitude at most 1/min μ
        envelope = math.exp(hk.eigenvalues[1] * t) / g.measure.min()
        assert equilibrium_defect(hk, t) <= max(1e-8, envelope)

    def test_uniformized_agrees_with_spectral(self, c6):
        hk = spectral_decompose(c6)
        for t in (0.1, 1.0, 7.5):
            np.testing.assert_allclose(_uniformized_matrix(hk, t), _spectral_matrix(hk, t), rtol=1e-9)

    def test_far_entries_stay_positive(self):
        hk = spectral_decompose(build_cycle(64, 1.0, 'normalized'))
        p = kernel_matrix(hk, 0.5)
        assert p.min() > 0
        np.testing.assert_allclose(p @ hk.graph.measure, 1.0, atol=1e-12)
        # opposite point of C_64 at t = 1/2 is far below double precision round-off of the spectral sum
        assert p[0, 32] < 1e-30


class TestAxioms:
    @seed(7)
    @settings(max_examples=20, deadline=None)
    @given(g=connected_graphs(max_vertices=20))
    def test_random_graphs(self, g):
        hk = spectral_decompose(g)
        report = verify_kernel_axioms(hk, [0.1, 0.5, 1.0, 5.0])
        assert report.symmetry_error < 1e-10
        assert report.min_value > 0
        assert report.conservation_defect < 1e-9
        assert report.semigroup_error < 1e-9
        assert report.heat_equation_relative < 1e-5

    def test_heat_equation_near_equilibrium(self):
        # ∂ₜp is of order 1e-5 at t = 5 here, so the residual is measured against the kernel itself
        g = build_graph(2, [(0, 1, 1.0)], [0.638, 1.400])
        report = verify_kernel_axioms(spectral_decompose(g), [0.1, 1.0, 5.0])
        assert report.heat_equation_relative < 1e-5
        assert report.heat_equation_residual < 1e-6

    def test_report_lists_sorted_times(self, c6):
        report = verify_kernel_axioms(spectral_decompose(c6), [3.0, 1.0])
        assert report.times == [1.0, 3.0]
        assert set(report.to_dict()) >= {'conservation_defect', 'semigroup_error'}


class TestSeriesSemigroup:
    def test_agrees_with_spectral(self, c6, ramp6):
        hk = spectral_decompose(c6)
        spectral = apply_semigroup(hk, 1.0, ramp6)
        series = apply_semigroup(hk, 1.0, ramp6, method='series')
        np.testing.assert_allclose(series, spectral, atol=1e-9)

    def test_spectral_matches_kernel(self, c6, ramp6):
        hk = spectral_decompose(c6)
        expected = kernel_matrix(hk, 2.0) @ (c6.measure * ramp6)
        np.testing.assert_allclose(apply_semigroup(hk, 2.0, ramp6), expected, rtol=1e-12)

    def test_bound_controls_error(self, c6, ramp6):
        hk = spectral_decompose(c6)
        exact = apply_semigroup(hk, 0.5, ramp6)
        for order in (4, 8, 12):
            bound = series_truncation_bound(6.0, 1.0, 0.5, order)
            series = apply_semigroup(hk, 0.5, ramp6, method='series', order=order, tol=1.0)
            assert np.abs(series - exact).max() <= bound

    def test_too_few_terms(self, c6, ramp6):
        with pytest.raises(TruncationInsufficientError):
            apply_semigroup(spectral_decompose(c6), 5.0, ramp6, method='series', order=2)

    def test_unknown_method(self, c6, ramp6):
        with pytest.raises(InvalidParameterError):
            apply_semigroup(spectral_decompose(c6), 1.0, ramp6, method='pade')


class TestBounds:
    @pytest.mark.slow
    def test_cycle_512(self, tmp_path):
        g = build_cycle(512, 1.0, 'normalized')
        hk = spectral_decompose(g)
        specs = [
            BoundSpec(BoundId.UPPER_2_1, 1.0, 7000.0, vertices=[0]),
            BoundSpec(BoundId.VOLUME_LOWER_2_4, math.e, 2000.0, vertices=[0], C0=6.0),
        ]
        path = tmp_path / 'samples.csv'
        upper, volume = verify_bounds(hk, g, specs, samples_path=str(path))
        assert 1.3 < upper.constants['C1'] < 1.5
        assert upper.holds and not upper.clipped
        assert volume.holds
        samples = pd.read_csv(path)
        assert list(samples.columns) == ['bound_id', 't', 'x', 'y', 'p', 'bound_rhs']
        assert len(samples) == 100

    def test_supplied_constant_can_fail(self, c6):
        hk = spectral_decompose(c6)
        report, = verify_bounds(hk, c6, [BoundSpec('upper_2_1', 1.0, 10.0, samples=5, C1=0.1)])
        assert report.verdict == 'fails'
        assert report.worst_ratio > 1

    def test_volume_bound_needs_large_C0(self, c6):
        hk = spectral_decompose(c6)
        with pytest.raises(InvalidParameterError):
            verify_bounds(hk, c6, [BoundSpec('volume_lower_2_4', math.e, 10.0, C0=5.0)])

    def test_gaussian_bound_needs_constants(self, c6):
        hk = spectral_decompose(c6)
        with pytest.raises(InvalidParameterError):
            verify_bounds(hk, c6, [BoundSpec('gaussian_lower_2_2', 2.0, 10.0, C2=0.1)])

    def test_gaussian_bound_needs_late_times(self, c6):
        hk = spectral_decompose(c6)
        with pytest.raises(InvalidParameterError):
            verify_bounds(hk, c6, [BoundSpec('gaussian_lower_2_2', 1.0, 10.0, C2=0.1, C3=1.0, n=1.0)])

    def test_other_graph(self, c6):
        hk = spectral_decompose(c6)
        with pytest.raises(SpecMismatchError):
            verify_bounds(hk, build_cycle(7, 1.0, 'normalized'), [BoundSpec('upper_2_1', 1.0, 2.0)])

    def test_torus_wrap_guard(self):
        g = build_lattice_torus([12, 12], 'normalized')
        assert wrap_time_limit(g) == 4.0
        report, = verify_bounds(spectral_decompose(g), g,
                                [BoundSpec('upper_2_1', 1.0, 10.0, samples=10, vertices=[0])])
        assert report.clipped
        assert report.t_range[1] <= 4.0
