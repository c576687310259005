import numpy as np
from hypothesis import assume, given, settings, strategies as st
from hypothesis.extra.numpy import arrays
from scipy.sparse.csgraph import shortest_path

from metricgeom.isometry import EmbeddedCloud, induced_path_metric
from metricgeom.lipembed import build_cover, partition_of_unity, secant_projection
from metricgeom.metric import DisconnectedError, FiniteMetricSpace, PointMap, delta_injectivity, pull_matrix
from metricgeom.subriemannian import NormFieldPlanar, clamp_step, rho_batch

finite = st.floats(-10, 10, allow_nan=False, allow_infinity=False)
SETTINGS = settings(max_examples=60, deadline=None)


def clouds(min_n=2, max_n=25, dim=2):
    # seeded uniform samples; drawn float arrays shrink towards coincident points
    return st.builds(lambda n, seed: np.random.default_rng(seed).uniform(0, 1, (n, dim)),
                     st.integers(min_n, max_n), st.integers(0, 2**32 - 1))


def distinct(pts, gap=1e-6):
    d = np.linalg.norm(pts[:, None] - pts[None, :], axis=2)
    return bool(np.all(d[np.triu_indices(len(pts), 1)] > gap))


@SETTINGS
@given(clouds(), st.floats(0.05, 1.5))
def test_partition_sums_and_subordination(pts, eps):
    assume(distinct(pts))
    X = FiniteMetricSpace.from_points(pts)
    c = build_cover(X, eps)
    p = partition_of_unity(X, c)
    assert np.all(np.abs(p.phi.sum(axis=0) - 1) <= 1e-12)
    assert np.all(c.membership(X.n)[p.phi > 0])
    for s in c.sets:
        assert X.dist[np.ix_(s, s)].max() < eps


@SETTINGS
@given(clouds(dim=2), st.floats(0.05, 1.0))
def test_induced_metric_dominates_euclidean(pts, r):
    assume(distinct(pts))
    cloud = EmbeddedCloud(pts, r)
    # unreachable pairs are infinite and satisfy the bound trivially
    D = shortest_path(cloud.graph(), directed=False)
    if np.all(np.isfinite(D)):
        assert np.allclose(induced_path_metric(cloud).dist, D, rtol=1e-14, atol=0)
    E = np.linalg.norm(pts[:, None] - pts[None, :], axis=2)
    assert np.all(D >= E)


@SETTINGS
@given(st.floats(0, 50), st.floats(0, 50) | st.just(np.inf), st.floats(0.01, 5), st.integers(2, 60))
def test_clamp_bounds(w_prev, rho, g1, m):
    # along the recurrence w_prev is at least g1 and at most rho
    if rho < g1:
        rho = g1
    w_prev = min(max(w_prev, g1), rho)
    w = clamp_step(w_prev, rho, g1, m)
    assert w >= w_prev and w >= g1 and w <= rho and np.isfinite(w)


@SETTINGS
@given(arrays(np.float64, (3, 2), elements=finite), arrays(np.float64, (2,), elements=finite),
       st.floats(-5, 5).filter(lambda x: abs(x) > 1e-3))
def test_rho_homogeneous(sigma, u, lam):
    sv = np.linalg.svd(sigma, compute_uv=False)
    # near-singular maps amplify rounding through the pseudoinverse
    assume(sv[0] > 0 and sv[-1] > 1e-3 * sv[0])
    v = sigma @ u
    a = rho_batch(sigma[None], (lam * v)[None])[0]
    b = rho_batch(sigma[None], v[None])[0]
    if np.isfinite(b) and np.isfinite(a):
        assert np.isclose(a, lam**2 * b, rtol=1e-7, atol=1e-9)


@SETTINGS
@given(st.sampled_from(["euclidean", "sup", "ell1"]),
       arrays(np.float64, (2,), elements=finite), arrays(np.float64, (2,), elements=finite), finite)
def test_norm_axioms(kind, u, v, lam):
    f = NormFieldPlanar(kind)
    assert f(u + v) <= f(u) + f(v) + 1e-9
    assert np.isclose(f(lam * u), abs(lam) * f(u), rtol=1e-12, atol=1e-12)


@SETTINGS
@given(clouds(min_n=3, max_n=20, dim=5), st.integers(0, 2**32 - 1))
def test_projection_never_expands(pts, seed):
    assume(distinct(pts))
    ch = secant_projection(pts, 3, seed=seed, beta=0.05)
    Y = ch(pts)
    iu = np.triu_indices(len(pts), 1)
    assert np.all(np.linalg.norm(Y[iu[0]] - Y[iu[1]], axis=1)
                  <= np.linalg.norm(pts[iu[0]] - pts[iu[1]], axis=1) * (1 + 1e-12))
    assert ch.beta <= 0.05 + 1e-12


@SETTINGS
@given(clouds(min_n=3, max_n=15), st.floats(0.1, 1.0), st.floats(1.0, 3.0))
def test_pull_below_d_for_contractions(pts, scale, spread):
    # on the path metric of a connected proximity graph, any eps >= the radius admits every edge
    assume(distinct(pts))
    cloud = EmbeddedCloud(pts, 0.6)
    try:
        X = induced_path_metric(cloud)
    except DisconnectedError:
        assume(False)
    f = PointMap(X, scale * pts)
    assert f.lipschitz_constant <= 1 + 1e-12
    P = pull_matrix(f, spread * cloud.radius)
    assert np.all(P <= X.dist * (1 + 4 * np.finfo(float).eps))


@SETTINGS
@given(clouds(min_n=2, max_n=15))
def test_delta_injectivity_of_injective_maps(pts):
    assume(distinct(pts))
    X = FiniteMetricSpace.from_points(pts)
    assert delta_injectivity(PointMap(X, pts)) == 0.0
    assert delta_injectivity(PointMap(X, np.zeros(len(pts)))) == X.diameter
