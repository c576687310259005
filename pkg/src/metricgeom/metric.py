"""Finite metric spaces, polygonal curves and maps into Euclidean space.

Everything here works on finite samples: a metric space is a validated
distance table, a curve is a list of waypoints, and a map is a table of
image vectors.  Path metrics of graphs are computed with Dijkstra
(``scipy.sparse.csgraph``).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, NamedTuple, Sequence

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import shortest_path
from scipy.spatial.distance import pdist, squareform

TRIANGLE_RTOL = 1e-9
SYMMETRY_RTOL = 1e-9


class DomainError(ValueError):
    """Input outside the domain of an operation."""


class DisconnectedError(DomainError):
    """A graph does not connect a pair of vertices."""

    def __init__(self, message: str, pair: tuple[int, int] | None = None):
        super().__init__(message)
        self.pair = pair


class UnreachableError(DisconnectedError):
    """No epsilon-chain joins two points, so the pull pre-metric is infinite."""


class NonInjectiveError(DomainError):
    def __init__(self, message: str, pair: tuple[int, int]):
        super().__init__(message)
        self.pair = pair


def check_triangle(dist: np.ndarray, rtol: float = TRIANGLE_RTOL) -> tuple[int, int, int] | None:
    """Return an index triple ``(i, j, k)`` violating the triangle inequality, or None.

    A violation ``d[i,k] > d[i,j] + d[j,k]`` is tolerated up to ``rtol`` times
    the largest of the three distances involved.
    """
    n = dist.shape[0]
    for j in range(n):
        via = dist[:, j, None] + dist[None, j, :]
        scale = np.maximum(dist, np.maximum(dist[:, j, None], dist[None, j, :]))
        bad = dist - via > rtol * scale
        if bad.any():
            i, k = np.argwhere(bad)[0]
            return int(i), j, int(k)
    return None


@dataclass(frozen=True, eq=False)
class FiniteMetricSpace:
    """Points ``0..n-1`` with a validated symmetric distance table."""

    dist: np.ndarray
    labels: tuple = field(default=())

    def __post_init__(self):
        d = np.array(self.dist, dtype=float)
        if d.ndim != 2 or d.shape[0] != d.shape[1] or d.shape[0] == 0:
            raise DomainError(f"distance table must be a non-empty square matrix, got shape {d.shape}")
        n = d.shape[0]
        if not np.all(np.isfinite(d)):
            raise DomainError("distance table contains non-finite entries")
        if np.any(np.diag(d) != 0.0):
            raise DomainError("distance table has a nonzero diagonal entry")
        asym = np.abs(d - d.T)
        if np.any(asym > SYMMETRY_RTOL * np.maximum(np.abs(d), np.abs(d.T))):
            i, j = np.argwhere(asym > SYMMETRY_RTOL * np.maximum(np.abs(d), np.abs(d.T)))[0]
            raise DomainError(f"distance table is not symmetric at ({i}, {j})")
        d = np.minimum(d, d.T)
        off = ~np.eye(n, dtype=bool)
        if np.any(d[off] <= 0.0):
            i, j = np.argwhere((d <= 0.0) & off)[0]
            raise DomainError(f"distinct points {i} and {j} are at distance {d[i, j]}")
        bad = check_triangle(d)
        if bad is not None:
            i, j, k = bad
            raise DomainError(
                f"triangle inequality fails: d({i},{k})={d[i, k]!r} > d({i},{j})+d({j},{k})={d[i, j] + d[j, k]!r}"
            )
        d.setflags(write=False)
        object.__setattr__(self, "dist", d)
        labels = tuple(self.labels) if len(self.labels) else tuple(range(n))
        if len(labels) != n:
            raise DomainError(f"{len(labels)} labels for {n} points")
        object.__setattr__(self, "labels", labels)

    @property
    def n(self) -> int:
        return self.dist.shape[0]

    def __len__(self) -> int:
        return self.n

    @cached_property
    def diameter(self) -> float:
        return float(self.dist.max())

    @cached_property
    def min_distance(self) -> float:
        """Smallest positive distance (``inf`` for a single point)."""
        if self.n == 1:
            return math.inf
        return float(self.dist[~np.eye(self.n, dtype=bool)].min())

    def index(self, label) -> int:
        try:
            return self.labels.index(label)
        except ValueError:
            raise DomainError(f"unknown point label {label!r}") from None

    @classmethod
    def from_points(cls, points: np.ndarray) -> "FiniteMetricSpace":
        """Euclidean distances restricted to a point sample."""
        pts = np.asarray(points, dtype=float)
        if pts.ndim == 1:
            pts = pts[:, None]
        return cls(squareform(pdist(pts)) if len(pts) > 1 else np.zeros((1, 1)))


@dataclass(frozen=True, eq=False)
class LengthGraph:
    """Undirected graph with positive edge lengths and optional vertex coordinates."""

    n: int
    edges: np.ndarray
    lengths: np.ndarray
    coords: np.ndarray | None = None

    def __post_init__(self):
        edges = np.asarray(self.edges, dtype=np.int64).reshape(-1, 2)
        lengths = np.asarray(self.lengths, dtype=float).reshape(-1)
        if len(edges) != len(lengths):
            raise DomainError("one length per edge required")
        if len(edges) and (edges.min() < 0 or edges.max() >= self.n):
            raise DomainError("edge endpoint out of range")
        if np.any(~(lengths > 0)) or not np.all(np.isfinite(lengths)):
            raise DomainError("edge lengths must be finite and strictly positive")
        object.__setattr__(self, "edges", edges)
        object.__setattr__(self, "lengths", lengths)
        if self.coords is not None:
            object.__setattr__(self, "coords", np.asarray(self.coords, dtype=float))

    @classmethod
    def from_edges(cls, n: int, edges: Iterable[tuple[int, int, float]], coords=None) -> "LengthGraph":
        triples = list(edges)
        e = np.array([(a, b) for a, b, _ in triples], dtype=np.int64).reshape(-1, 2)
        w = np.array([float(t[2]) for t in triples], dtype=float)
        return cls(n, e, w, coords)

    def to_csr(self) -> sp.csr_matrix:
        return weighted_csr(self.n, self.edges, self.lengths)


def weighted_csr(n: int, edges: np.ndarray, weights: np.ndarray) -> sp.csr_matrix:
    """Symmetric CSR adjacency keeping the shortest of parallel edges.

    Explicit zero weights are kept as edges (scipy's csgraph honours stored
    zeros), which matters for pull metrics of non-injective maps.
    """
    edges = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
    weights = np.asarray(weights, dtype=float)
    keep = edges[:, 0] != edges[:, 1]
    edges, weights = edges[keep], weights[keep]
    rows = np.concatenate([edges[:, 0], edges[:, 1]])
    cols = np.concatenate([edges[:, 1], edges[:, 0]])
    vals = np.concatenate([weights, weights])
    order = np.lexsort((vals, cols, rows))
    rows, cols, vals = rows[order], cols[order], vals[order]
    first = np.ones(len(rows), dtype=bool)
    first[1:] = (rows[1:] != rows[:-1]) | (cols[1:] != cols[:-1])
    rows, cols, vals = rows[first], cols[first], vals[first]
    indptr = np.zeros(n + 1, dtype=np.int64)
    np.add.at(indptr, rows + 1, 1)
    indptr = np.cumsum(indptr)
    return sp.csr_matrix((vals, cols, indptr), shape=(n, n))


def _first_unreachable(d: np.ndarray, sources: Sequence[int] | None = None) -> tuple[int, int] | None:
    bad = np.argwhere(np.isinf(d))
    if len(bad) == 0:
        return None
    i, j = bad[0]
    if sources is not None:
        i = sources[i]
    return int(i), int(j)


def shortest_path_metric(graph: LengthGraph) -> FiniteMetricSpace:
    """All-pairs shortest-path distances of a connected graph."""
    if graph.n == 1:
        return FiniteMetricSpace(np.zeros((1, 1)))
    d = shortest_path(graph.to_csr(), method="D", directed=False)
    pair = _first_unreachable(d)
    if pair is not None:
        raise DisconnectedError(f"graph is disconnected: no path between {pair[0]} and {pair[1]}", pair)
    return FiniteMetricSpace(np.minimum(d, d.T))


@dataclass(frozen=True)
class PolygonalCurve:
    """Ordered waypoints: labels of a metric space, or coordinate rows."""

    waypoints: tuple

    def __init__(self, waypoints):
        wp = tuple(tuple(w) if isinstance(w, (list, np.ndarray)) else w for w in waypoints)
        if len(wp) == 0:
            raise DomainError("a curve needs at least one waypoint")
        object.__setattr__(self, "waypoints", wp)

    def __len__(self) -> int:
        return len(self.waypoints)

    def concat(self, other: "PolygonalCurve") -> "PolygonalCurve":
        if self.waypoints[-1] != other.waypoints[0]:
            raise DomainError("curves must share an endpoint to be concatenated")
        return PolygonalCurve(self.waypoints + other.waypoints[1:])


def curve_length(curve: PolygonalCurve, ambient: FiniteMetricSpace | None = None) -> float:
    """Sum of consecutive-waypoint distances.

    With ``ambient=None`` the waypoints are coordinates in Euclidean space;
    otherwise they are labels of ``ambient``.
    """
    if len(curve) == 1:
        return 0.0
    if ambient is None:
        pts = np.asarray(curve.waypoints, dtype=float)
        if pts.ndim == 1:
            pts = pts[:, None]
        return float(np.linalg.norm(np.diff(pts, axis=0), axis=1).sum())
    idx = [ambient.index(w) for w in curve.waypoints]
    return float(sum(ambient.dist[a, b] for a, b in zip(idx[:-1], idx[1:])))


class PointMap:
    """A map from a finite metric space into ``E^N`` given by its image table."""

    def __init__(self, domain: FiniteMetricSpace, image: np.ndarray):
        img = np.array(image, dtype=float)
        if img.ndim == 1:
            img = img[:, None]
        if img.shape[0] != domain.n:
            raise DomainError(f"{img.shape[0]} image vectors for {domain.n} domain points")
        if img.shape[1] < 1:
            raise DomainError("target dimension must be at least 1")
        img.setflags(write=False)
        self.domain = domain
        self.image = img

    @property
    def dim(self) -> int:
        return self.image.shape[1]

    def __len__(self) -> int:
        return self.image.shape[0]

    def __sub__(self, other: "PointMap") -> "PointMap":
        return PointMap(self.domain, self.image - other.image)

    def __add__(self, other: "PointMap") -> "PointMap":
        return PointMap(self.domain, self.image + other.image)

    def scaled(self, factor: float) -> "PointMap":
        return PointMap(self.domain, factor * self.image)

    @cached_property
    def image_dist(self) -> np.ndarray:
        if len(self) == 1:
            return np.zeros((1, 1))
        return squareform(pdist(self.image))

    @cached_property
    def lipschitz_constant(self) -> float:
        """Exact supremum of ``|f(x)-f(y)| / d(x,y)`` over distinct pairs."""
        if len(self) == 1:
            return 0.0
        iu = np.triu_indices(len(self), 1)
        return float(np.max(self.image_dist[iu] / self.domain.dist[iu]))

    @cached_property
    def is_injective(self) -> bool:
        return len(np.unique(self.image, axis=0)) == len(self)

    def fibers(self) -> list[np.ndarray]:
        """Index sets of points sharing exactly the same image vector."""
        _, inverse = np.unique(self.image, axis=0, return_inverse=True)
        inverse = inverse.reshape(-1)
        order = np.argsort(inverse, kind="stable")
        splits = np.flatnonzero(np.diff(inverse[order])) + 1
        return np.split(order, splits)


class LipNorm(NamedTuple):
    sup: float
    lip: float
    total: float


def lip_norm(f: PointMap) -> LipNorm:
    """Sup-norm plus best Lipschitz constant."""
    sup = float(np.linalg.norm(f.image, axis=1).max())
    lip = f.lipschitz_constant
    return LipNorm(sup, lip, sup + lip)


def delta_injectivity(f: PointMap, tau: float = 0.0) -> float:
    """Largest source distance between points whose images are within ``tau``.

    ``tau=0`` compares stored vectors for exact equality, so the result is
    the largest fiber diameter; it is 0 exactly when ``f`` is injective.
    """
    if tau < 0:
        raise DomainError("tau must be nonnegative")
    d = f.domain.dist
    if tau == 0.0:
        best = 0.0
        for fiber in f.fibers():
            if len(fiber) > 1:
                best = max(best, float(d[np.ix_(fiber, fiber)].max()))
        return best
    close = f.image_dist <= tau
    return float(d[close].max()) if close.any() else 0.0


def distortion(f: PointMap) -> tuple[float, float]:
    """Largest and smallest ratio ``|f(x)-f(y)| / d(x,y)`` over distinct pairs."""
    if len(f) == 1:
        return 1.0, 1.0
    iu = np.triu_indices(len(f), 1)
    ratios = f.image_dist[iu] / f.domain.dist[iu]
    if not f.is_injective:
        for fiber in f.fibers():
            if len(fiber) > 1:
                raise NonInjectiveError(
                    f"points {fiber[0]} and {fiber[1]} have the same image", (int(fiber[0]), int(fiber[1]))
                )
    return float(ratios.max()), float(ratios.min())


def _chain_graph(f: PointMap | MetricImage, eps: float) -> sp.csr_matrix:
    d = f.domain.dist
    i, j = np.nonzero(np.triu(d <= eps, 1))
    return weighted_csr(len(f), np.stack([i, j], axis=1), f.image_dist[i, j])


def pull_matrix(f: PointMap | MetricImage, eps: float) -> np.ndarray:
    """``pull_{f,eps}`` for all pairs; ``inf`` marks pairs with no eps-chain."""
    if not eps > 0:
        raise DomainError("epsilon must be positive")
    if len(f) == 1:
        return np.zeros((1, 1))
    d = shortest_path(_chain_graph(f, eps), method="D", directed=False)
    return np.minimum(d, d.T)


def pull_metric(f: PointMap | MetricImage, eps: float, p, q) -> float:
    """Infimum over eps-chains from p to q of the summed image increments.

    Raises UnreachableError when no eps-chain joins the two points.
    """
    if not eps > 0:
        raise DomainError("epsilon must be positive")
    dom = f.domain
    a, b = dom.index(p), dom.index(q)
    if a == b:
        return 0.0
    d = shortest_path(_chain_graph(f, eps), method="D", directed=False, indices=[a])[0]
    if math.isinf(d[b]):
        raise UnreachableError(f"no {eps}-chain joins {p!r} and {q!r}", (a, b))
    return float(d[b])


def pull_profile(f: PointMap | MetricImage, schedule: Sequence[float], p, q) -> list[tuple[float, float | None]]:
    """``pull_{f,eps}(p, q)`` along a schedule of eps values; None where unreachable."""
    out = []
    for eps in schedule:
        try:
            out.append((float(eps), pull_metric(f, eps, p, q)))
        except UnreachableError:
            out.append((float(eps), None))
    return out


class MetricImage:
    """A map into a (pseudo)metric space known only through its image distances.

    Enough for pull metrics; ``identity(X)`` is the identity map of X.
    """

    def __init__(self, domain: FiniteMetricSpace, image_dist: np.ndarray):
        d = np.asarray(image_dist, dtype=float)
        if d.shape != domain.dist.shape:
            raise DomainError("image distance table must match the domain size")
        if not (np.all(np.isfinite(d)) and np.all(d >= 0) and np.allclose(d, d.T, rtol=SYMMETRY_RTOL, atol=0)):
            raise DomainError("image distances must be finite, nonnegative and symmetric")
        self.domain = domain
        self.image_dist = np.minimum(d, d.T)

    @classmethod
    def identity(cls, X: FiniteMetricSpace) -> "MetricImage":
        return cls(X, X.dist)

    def __len__(self) -> int:
        return self.domain.n
