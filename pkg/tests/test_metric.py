import math

import numpy as np
import pytest

from metricgeom.metric import (
    DisconnectedError, DomainError, FiniteMetricSpace, LengthGraph, MetricImage, NonInjectiveError, PointMap,
    PolygonalCurve, UnreachableError, check_triangle, curve_length, delta_injectivity, distortion, lip_norm,
    pull_matrix, pull_metric, pull_profile, shortest_path_metric,
)
from metricgeom.spaces import cycle_graph_metric, interval_sample, path_graph_metric


def square_cycle():
    g = LengthGraph.from_edges(4, [(0, 1, 1.0), (1, 2, 1.0), (2, 3, 1.0), (3, 0, 1.0)])
    return shortest_path_metric(g)


class TestFiniteMetricSpace:
    def test_valid(self):
        X = FiniteMetricSpace([[0, 1, 2], [1, 0, 1], [2, 1, 0]])
        assert X.n == 3 and X.diameter == 2 and X.min_distance == 1
        assert X.labels == (0, 1, 2)

    @pytest.mark.parametrize("d", [
        [[0, 1], [2, 0]],
        [[1, 1], [1, 0]],
        [[0, 0], [0, 0]],
        [[0, -1], [-1, 0]],
        [[0, np.inf], [np.inf, 0]],
        [[0, 1, 5], [1, 0, 1], [5, 1, 0]],
    ])
    def test_rejects(self, d):
        with pytest.raises(DomainError):
            FiniteMetricSpace(d)

    def test_triangle_slack(self):
        d = np.array([[0, 1, 2], [1, 0, 1], [2, 1, 0]], dtype=float)
        d[0, 2] = d[2, 0] = 2 * (1 + 1e-11)
        FiniteMetricSpace(d)
        d[0, 2] = d[2, 0] = 2 * (1 + 1e-6)
        assert check_triangle(d) is not None

    def test_labels(self):
        X = FiniteMetricSpace([[0, 1], [1, 0]], labels=("a", "b"))
        assert X.index("b") == 1
        with pytest.raises(DomainError):
            X.index("c")

    def test_from_points(self):
        X = FiniteMetricSpace.from_points([[0, 0], [3, 4]])
        assert X.dist[0, 1] == 5


class TestCurveLength:
    def test_two_segments(self):
        assert curve_length(PolygonalCurve([(0, 0), (1, 0), (1, 1)])) == 2.0

    def test_single_waypoint(self):
        assert curve_length(PolygonalCurve([(0.5, 0.5)])) == 0.0

    def test_inscribed_polygon(self):
        t = 2 * np.pi * np.arange(361) / 360
        c = PolygonalCurve(np.stack([np.cos(t), np.sin(t)], axis=1))
        assert curve_length(c) == pytest.approx(720 * math.sin(math.pi / 360), rel=1e-12)
        assert curve_length(c) == pytest.approx(6.2831056, abs=1e-7)

    def test_labels_in_space(self):
        X = square_cycle()
        assert curve_length(PolygonalCurve([0, 1, 2, 0]), X) == 4.0
        with pytest.raises(DomainError):
            curve_length(PolygonalCurve([0, 7]), X)

    def test_concat_additive(self):
        a = PolygonalCurve([(0, 0), (1, 0)])
        b = PolygonalCurve([(1, 0), (1, 2), (3, 2)])
        assert curve_length(a.concat(b)) == curve_length(a) + curve_length(b)
        with pytest.raises(DomainError):
            a.concat(PolygonalCurve([(5, 5)]))

    def test_empty_curve(self):
        with pytest.raises(DomainError):
            PolygonalCurve([])


class TestShortestPathMetric:
    def test_path_graph(self):
        X = shortest_path_metric(LengthGraph.from_edges(3, [(0, 1, 1), (1, 2, 1)]))
        assert X.dist[0, 2] == 2

    def test_triangle_shortcut(self):
        X = shortest_path_metric(LengthGraph.from_edges(3, [(0, 1, 1), (1, 2, 1), (0, 2, 10)]))
        assert X.dist[0, 2] == 2

    def test_four_cycle(self):
        X = square_cycle()
        assert X.dist[0, 2] == 2 and X.dist[1, 3] == 2

    def test_disconnected(self):
        with pytest.raises(DisconnectedError) as e:
            shortest_path_metric(LengthGraph.from_edges(4, [(0, 1, 1), (2, 3, 1)]))
        assert e.value.pair is not None

    def test_nonpositive_edge(self):
        with pytest.raises(DomainError):
            LengthGraph.from_edges(2, [(0, 1, 0.0)])


class TestLipNorm:
    def test_constant(self):
        X = interval_sample(5)
        n = lip_norm(PointMap(X, np.tile([3.0, 4.0], (5, 1))))
        assert n == (5.0, 0.0, 5.0)

    def test_two_points(self):
        X = FiniteMetricSpace([[0, 1], [1, 0]])
        assert tuple(lip_norm(PointMap(X, [0.0, 1.0]))) == (1.0, 1.0, 2.0)

    def test_homogeneity(self):
        X = interval_sample(20, seed=3)
        f = PointMap(X, np.random.default_rng(0).normal(size=(20, 3)))
        a, b = lip_norm(f), lip_norm(f.scaled(2.5))
        assert b.sup == pytest.approx(2.5 * a.sup, rel=1e-14)
        assert b.lip == pytest.approx(2.5 * a.lip, rel=1e-14)

    def test_single_point(self):
        X = FiniteMetricSpace([[0.0]])
        assert lip_norm(PointMap(X, [[1.0, 0.0]])).lip == 0.0

    def test_cached_lipschitz_matches_bruteforce(self):
        X = interval_sample(15, seed=1)
        f = PointMap(X, np.random.default_rng(1).normal(size=(15, 2)))
        brute = max(np.linalg.norm(f.image[i] - f.image[j]) / X.dist[i, j]
                    for i in range(15) for j in range(15) if i != j)
        assert f.lipschitz_constant == pytest.approx(brute, rel=1e-15)


class TestDeltaInjectivity:
    def test_injective(self):
        X = interval_sample(10)
        assert delta_injectivity(PointMap(X, np.arange(10.0))) == 0.0

    def test_constant(self):
        X = interval_sample(10)
        for tau in (0.0, 0.5, 3.0):
            assert delta_injectivity(PointMap(X, np.zeros(10)), tau) == X.diameter

    def test_single_collapse(self):
        X, _ = cycle_graph_metric(8)
        img = np.arange(8.0)
        img[5] = img[2]
        assert delta_injectivity(PointMap(X, img)) == X.dist[2, 5]

    def test_negative_tau(self):
        X = interval_sample(3)
        with pytest.raises(DomainError):
            delta_injectivity(PointMap(X, np.arange(3.0)), -1)


class TestDistortion:
    def test_collinear(self):
        X = path_graph_metric([0, 1, 3])
        assert distortion(PointMap(X, [0.0, 1.0, 3.0])) == (1.0, 1.0)

    def test_doubling(self):
        X = path_graph_metric([0, 1, 3])
        assert distortion(PointMap(X, [0.0, 2.0, 6.0])) == (2.0, 2.0)

    def test_square_corners(self):
        X = square_cycle()
        f = PointMap(X, [[0, 0], [1, 0], [1, 1], [0, 1]])
        e, c = distortion(f)
        assert e == 1.0
        assert c == pytest.approx(math.sqrt(2) / 2, rel=1e-15)

    def test_non_injective(self):
        X = square_cycle()
        with pytest.raises(NonInjectiveError) as e:
            distortion(PointMap(X, [[0, 0], [1, 0], [0, 0], [0, 1]]))
        assert set(e.value.pair) == {0, 2}


class TestPull:
    def test_forced_chain(self):
        X = path_graph_metric([0, 1, 2])
        assert pull_metric(PointMap(X, [0.0, 1.0, 2.0]), 1.0, 0, 2) == 2.0

    def test_constant(self):
        X, _ = cycle_graph_metric(10)
        f = PointMap(X, np.zeros((10, 2)))
        assert pull_metric(f, X.diameter, 0, 5) == 0.0
        assert np.all(pull_matrix(f, 0.7) == 0.0)

    def test_identity_path_graph_exact(self):
        X = interval_sample(40, seed=2)
        biggest = np.max(np.diff(np.sort(X.dist[0])))
        f = MetricImage.identity(X)
        for eps in (biggest, 2 * biggest, X.diameter):
            assert np.array_equal(pull_matrix(f, eps), X.dist)

    def test_identity_cycle(self):
        X, _ = cycle_graph_metric(30)
        f = MetricImage.identity(X)
        P = pull_matrix(f, X.diameter)
        assert np.all(P <= X.dist)
        assert np.allclose(P, X.dist, rtol=4 * np.finfo(float).eps, atol=0)

    def test_unreachable(self):
        X = path_graph_metric([0, 1, 2])
        with pytest.raises(UnreachableError):
            pull_metric(PointMap(X, [0.0, 1.0, 2.0]), 0.5, 0, 2)

    def test_eps_must_be_positive(self):
        X = path_graph_metric([0, 1])
        with pytest.raises(DomainError):
            pull_metric(PointMap(X, [0.0, 1.0]), 0.0, 0, 1)

    def test_profile(self):
        X = path_graph_metric([0, 1, 3])
        prof = pull_profile(PointMap(X, [0.0, 1.0, 3.0]), [0.5, 2.0, 3.0], 0, 2)
        assert prof == [(0.5, None), (2.0, 3.0), (3.0, 3.0)]

    def test_one_lipschitz_below_d(self):
        X, pts = cycle_graph_metric(40)
        f = PointMap(X, 0.9 * pts)
        assert f.lipschitz_constant <= 1
        P = pull_matrix(f, 0.2)
        assert np.all(P <= X.dist)

    def test_metric_image_validation(self):
        X = path_graph_metric([0, 1])
        with pytest.raises(DomainError):
            MetricImage(X, np.zeros((3, 3)))
