"""
Tests for graph construction, the graph file format, distances and volume growth
"""
import json

import numpy as np
import pytest
from hypothesis import given, seed, settings

from conftest import connected_graphs
from src.services.graph_core import (
    ball,
    ball_volume,
    build_cycle,
    build_graph,
    build_lattice_torus,
    diameter,
    fit_volume_growth,
    graph_distance,
    load_graph,
    save_graph,
    structural_constants,
)
from src.utils.errors import (
    AsymmetricWeightsError,
    DegenerateFitError,
    DisconnectedGraphError,
    GraphParseError,
    GraphValidationError,
    InvalidParameterError,
    IsolatedVertexError,
    NonPositiveMeasureError,
    UnknownVertexError,
)


def write_graph_file(tmp_path, payload, name='g.json'):
    path = tmp_path / name
    path.write_text(json.dumps(payload))
    return str(path)


class TestBuilders:
    def test_normalized_cycle_measure_equals_degree(self, c6):
        assert c6.vertex_count == 6
        np.testing.assert_array_equal(c6.measure, np.full(6, 2.0))
        np.testing.assert_array_equal(c6.degree_weights, np.full(6, 2.0))

    def test_triangle(self):
        g = build_cycle(3, 1.0, 'unit')
        np.testing.assert_array_equal(g.measure, np.ones(3))
        np.testing.assert_array_equal(g.degree_weights, np.full(3, 2.0))
        assert g.edges() == [(0, 1, 1.0), (0, 2, 1.0), (1, 2, 1.0)]

    def test_cycle_needs_three_vertices(self):
        with pytest.raises(InvalidParameterError):
            build_cycle(2, 1.0, 'unit')

    def test_one_dimensional_torus_is_cycle(self):
        torus = build_lattice_torus([64], 'normalized')
        assert torus.same_as(build_cycle(64, 1.0, 'normalized'))
        np.testing.assert_array_equal(torus.measure, np.full(64, 2.0))

    def test_square_torus(self):
        g = build_lattice_torus([8, 8], 'normalized')
        assert g.vertex_count == 64
        np.testing.assert_array_equal(g.measure, np.full(64, 4.0))
        assert g.lattice_dims == (8, 8)

    def test_torus_side_too_short(self):
        with pytest.raises(InvalidParameterError):
            build_lattice_torus([8, 2], 'unit')

    def test_unknown_measure_mode(self):
        with pytest.raises(InvalidParameterError):
            build_cycle(5, 1.0, 'uniform')


class TestValidation:
    def test_asymmetric_weights_rejected(self):
        with pytest.raises(AsymmetricWeightsError):
            build_graph(3, [(0, 1, 1.0), (1, 0, 2.0), (1, 2, 1.0)], [1, 1, 1])

    def test_mirrored_entry_accepted(self):
        g = build_graph(3, [(0, 1, 1.5), (1, 0, 1.5), (1, 2, 1.0)], [1, 1, 1])
        assert g.edges() == [(0, 1, 1.5), (1, 2, 1.0)]

    def test_nonpositive_measure(self):
        with pytest.raises(NonPositiveMeasureError):
            build_graph(2, [(0, 1, 1.0)], [1.0, 0.0])

    def test_loop_rejected(self):
        with pytest.raises(GraphParseError):
            build_graph(2, [(0, 0, 1.0), (0, 1, 1.0)], [1, 1])

    def test_isolated_vertex(self):
        with pytest.raises(IsolatedVertexError):
            build_graph(3, [(0, 1, 1.0)], [1, 1, 1])

    def test_disconnected(self):
        with pytest.raises(DisconnectedGraphError):
            build_graph(4, [(0, 1, 1.0), (2, 3, 1.0)], [1, 1, 1, 1])

    def test_unknown_vertex(self, c6):
        with pytest.raises(UnknownVertexError):
            graph_distance(c6, 0, 6)

    def test_errors_share_graph_validation_category(self):
        with pytest.raises(GraphValidationError) as info:
            build_graph(4, [(0, 1, 1.0), (2, 3, 1.0)], [1, 1, 1, 1])
        assert info.value.category == 'graph-validation'


class TestGraphFile:
    def test_round_trip_of_c6(self, tmp_path, c6):
        path = str(tmp_path / 'c6.json')
        save_graph(c6, path)
        assert load_graph(path).same_as(c6)

    def test_file_of_cycle(self, tmp_path, c6):
        payload = {
            'vertices': 6,
            'mu': [2, 2, 2, 2, 2, 2],
            'edges': [[0, 1, 1], [1, 2, 1], [2, 3, 1], [3, 4, 1], [4, 5, 1], [0, 5, 1]],
        }
        assert load_graph(write_graph_file(tmp_path, payload)).same_as(c6)

    def test_asymmetric_file(self, tmp_path):
        payload = {'vertices': 2, 'mu': [1, 1], 'edges': [[0, 1, 1.0], [1, 0, 0.5]]}
        with pytest.raises(AsymmetricWeightsError):
            load_graph(write_graph_file(tmp_path, payload))

    def test_two_components(self, tmp_path):
        payload = {'vertices': 4, 'mu': [1, 1, 1, 1], 'edges': [[0, 1, 1], [2, 3, 1]]}
        with pytest.raises(DisconnectedGraphError):
            load_graph(write_graph_file(tmp_path, payload))

    def test_not_json(self, tmp_path):
        path = tmp_path / 'bad.json'
        path.write_text('{"vertices": 2,')
        with pytest.raises(GraphParseError):
            load_graph(str(path))

    def test_unknown_key(self, tmp_path):
        payload = {'vertices': 2, 'mu': [1, 1], 'edges': [[0, 1, 1]], 'colour': 'red'}
        with pytest.raises(GraphParseError):
            load_graph(write_graph_file(tmp_path, payload))

    def test_labels_survive(self, tmp_path):
        payload = {'vertices': 2, 'mu': [1, 1], 'edges': [[0, 1, 1]], 'labels': ['a', 'b']}
        g = load_graph(write_graph_file(tmp_path, payload))
        assert g.label(1) == 'b'


class TestDistances:
    def test_cycle_distances(self, c6):
        assert graph_distance(c6, 0, 3) == 3
        assert graph_distance(c6, 0, 5) == 1
        assert diameter(c6) == 3

    def test_balls_and_volumes(self, c6):
        np.testing.assert_array_equal(ball(c6, 0, 1), [0, 1, 5])
        assert ball_volume(c6, 0, 0) == 2.0
        assert ball_volume(c6, 0, 1) == 6.0
        assert ball_volume(c6, 0, 3) == 12.0

    def test_negative_radius(self, c6):
        with pytest.raises(InvalidParameterError):
            ball_volume(c6, 0, -1)

    @seed(3)
    @settings(max_examples=30, deadline=None)
    @given(g=connected_graphs(max_vertices=25))
    def test_distance_is_a_metric(self, g):
        n = g.vertex_count
        d = np.array([[graph_distance(g, x, y) for y in range(n)] for x in range(n)])
        np.testing.assert_array_equal(d, d.T)
        assert np.all(np.diag(d) == 0)
        assert np.all(d[~np.eye(n, dtype=bool)] >= 1)
        for z in range(n):
            assert np.all(d <= d[:, [z]] + d[[z], :])


class TestStructuralConstants:
    def test_normalized_cycle(self, c6):
        constants = structural_constants(c6)
        assert constants.d_mu == 1.0
        assert constants.d_omega == 2.0

    @seed(5)
    @settings(max_examples=30, deadline=None)
    @given(g=connected_graphs())
    def test_d_mu_dominates_every_vertex(self, g):
        constants = structural_constants(g)
        assert np.all(g.degree_weights / g.measure <= constants.d_mu)
        assert np.isfinite(constants.d_omega)


class TestVolumeGrowth:
    @pytest.mark.slow
    def test_cycle_grows_linearly(self):
        fit = fit_volume_growth(build_cycle(512, 1.0, 'normalized'), centers=[0], r_max=100)
        assert 0.95 <= fit.exponent_m <= 1.05
        assert not fit.clipped

    def test_square_torus_grows_quadratically(self):
        fit = fit_volume_growth(build_lattice_torus([32, 32], 'unit'), centers=[0, 100, 517], r_max=10)
        assert 1.8 <= fit.exponent_m <= 2.2
        assert fit.radius_range == (1, 10)

    def test_saturated_radii_are_dropped(self, c6):
        fit = fit_volume_growth(c6, r_max=5)
        assert fit.clipped
        assert fit.radius_range == (1, 2)

    def test_too_small_graph_is_degenerate(self):
        with pytest.raises(DegenerateFitError):
            fit_volume_growth(build_cycle(4, 1.0, 'unit'), r_max=4)

    @pytest.mark.slow
    def test_plain_log_radius_on_cycle(self):
        # V = 2(2r + 1): log r regression is pulled below 1 by the small radii
        fit = fit_volume_growth(build_cycle(512, 1.0, 'normalized'), centers=[0], r_max=100, radius_shift=0.0)
        assert 0.93 < fit.exponent_m < 1.0

    def test_plain_log_radius_on_torus(self):
        # V = 2r^2 + 2r + 1 on r = 1..10 has log-log slope about 1.67
        g = build_lattice_torus([32, 32], 'unit')
        plain = fit_volume_growth(g, centers=[0], r_max=10, radius_shift=0.0)
        shifted = fit_volume_growth(g, centers=[0], r_max=10)
        assert 1.6 < plain.exponent_m < 1.75
        assert shifted.exponent_m > plain.exponent_m

    @pytest.mark.parametrize('shift', [-0.5, 1.0, float('nan')])
    def test_radius_shift_range(self, c6, shift):
        with pytest.raises(InvalidParameterError):
            fit_volume_growth(c6, r_max=2, radius_shift=shift)
