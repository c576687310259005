"""Numerical checks around path isometries.

Induced path metrics of point clouds, the tube inequality for clouds
sampled near an embedded curve, length defects of maps along curves, the
linear obstruction for non-Euclidean planar norms, and the ratio by which
the coordinate map of the Heisenberg group collapses the center.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.sparse.csgraph import shortest_path
from scipy.spatial import cKDTree

from .metric import (
    DisconnectedError, DomainError, FiniteMetricSpace, PointMap, PolygonalCurve, curve_length, weighted_csr,
)
from .spaces import derive_rng
from .subriemannian import ApproximantSchedule, NormFieldPlanar, cc_distance, default_grid, model_catalog

FINSLER_DIRECTIONS = 720
FINSLER_GRID = 21
FINSLER_LINE_GRID = 101


@dataclass
class EmbeddedCloud:
    """Points of E^k joined when at Euclidean distance at most ``radius``."""

    points: np.ndarray
    radius: float

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        if pts.ndim == 1:
            pts = pts[:, None]
        if pts.ndim != 2 or len(pts) == 0:
            raise DomainError("a cloud needs a nonempty (n, k) coordinate array")
        if not np.all(np.isfinite(pts)):
            raise DomainError("cloud coordinates must be finite")
        if not self.radius > 0:
            raise DomainError("connectivity radius must be positive")
        self.points = pts
        self.radius = float(self.radius)

    def __len__(self) -> int:
        return len(self.points)

    def graph(self):
        pairs = cKDTree(self.points).query_pairs(self.radius, output_type="ndarray")
        w = np.linalg.norm(self.points[pairs[:, 0]] - self.points[pairs[:, 1]], axis=1)
        return weighted_csr(len(self), pairs, w)

    def distances(self, sources=None) -> np.ndarray:
        """Graph distances from ``sources`` (all points when None); raises if any is infinite."""
        idx = None if sources is None else np.asarray(sources, dtype=np.int64)
        d = shortest_path(self.graph(), method="D", directed=False, indices=idx)
        d = np.atleast_2d(d)
        bad = np.argwhere(np.isinf(d))
        if len(bad):
            i, j = bad[0]
            i = int(i if idx is None else idx[i])
            raise DisconnectedError(
                f"proximity graph at radius {self.radius} is disconnected: no path from {i} to {int(j)}", (i, int(j)))
        return d


def induced_path_metric(cloud: EmbeddedCloud) -> FiniteMetricSpace:
    """Shortest-path metric of the proximity graph with Euclidean edge lengths."""
    if len(cloud) == 1:
        return FiniteMetricSpace(np.zeros((1, 1)))
    d = cloud.distances()
    return FiniteMetricSpace(np.minimum(d, d.T))


# --- tube inequality ---------------------------------------------------------

@dataclass
class TubeSpec:
    """Tube radius per surface sample (a scalar is broadcast) and loss parameter ``eta``."""

    delta: np.ndarray | float
    eta: float

    def __post_init__(self):
        if not 0 < self.eta < 1:
            raise DomainError("eta must lie in (0, 1)")
        d = np.asarray(self.delta, dtype=float)
        if d.size == 0 or not np.all((d > 0) & (d < self.eta)):
            raise DomainError("tube radius must satisfy 0 < delta < eta at every sample")

    def values(self, n: int) -> np.ndarray:
        d = np.asarray(self.delta, dtype=float)
        if d.ndim == 0:
            return np.full(n, float(d))
        if d.shape != (n,):
            raise DomainError(f"{d.size} tube radii for {n} surface samples")
        return d

    def halved(self) -> "TubeSpec":
        return TubeSpec(np.asarray(self.delta, dtype=float) / 2, self.eta)


TUBE_MODELS = ("circle", "segment")


def tube_model(name: str, density: float) -> EmbeddedCloud:
    """Surface clouds at spacing ``density``: unit circle in the z=0 plane, or [0,1] on the x-axis."""
    if not density > 0:
        raise DomainError("sampling density must be positive")
    if name == "circle":
        n = math.ceil(2 * math.pi / density)
        t = 2 * np.pi * np.arange(n) / n
        pts = np.stack([np.cos(t), np.sin(t), np.zeros(n)], axis=1)
    elif name == "segment":
        n = math.ceil(1.0 / density) + 1
        pts = np.stack([np.linspace(0.0, 1.0, n), np.zeros(n), np.zeros(n)], axis=1)
    else:
        raise DomainError(f"unknown tube model {name!r}; expected one of {TUBE_MODELS}")
    return EmbeddedCloud(pts, 1.5 * density)


def tube_cloud(surface: EmbeddedCloud, tube: TubeSpec, density: float, seed=0) -> EmbeddedCloud:
    """Surface points plus a jittered ambient grid restricted to the tube.

    Candidate grid points cover the surface's bounding box grown by ``eta``
    and do not depend on ``delta``, so a thinner tube yields a subset of
    the same cloud.  The connectivity radius is ``max(surface.radius,
    2 * density)``, which keeps the surface graph a subgraph.
    """
    if not density > 0:
        raise DomainError("sampling density must be positive")
    S = surface.points
    radii = tube.values(len(S))
    lo = S.min(axis=0) - tube.eta
    hi = S.max(axis=0) + tube.eta
    axes = [np.arange(a, b + density / 2, density) for a, b in zip(lo, hi)]
    grid = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, S.shape[1])
    rng = derive_rng(seed, "tube-jitter")
    grid = grid + rng.uniform(-0.25 * density, 0.25 * density, grid.shape)
    tree = cKDTree(S)
    near, owner = tree.query(grid, distance_upper_bound=radii.max())
    inside = np.isfinite(near) & (near < radii[np.minimum(owner, len(S) - 1)])
    if not np.all(radii == radii[0]):
        # variable radii: a point may be inside the ball of a farther sample
        cand = np.flatnonzero(np.isfinite(near) & ~inside)
        for i, nb in zip(cand, tree.query_ball_point(grid[cand], radii.max())):
            nb = np.asarray(nb, dtype=np.int64)
            inside[i] = bool(np.any(np.linalg.norm(S[nb] - grid[i], axis=1) < radii[nb]))
    pts = np.concatenate([S, grid[inside]])
    return EmbeddedCloud(pts, max(surface.radius, 2 * density))


def _sample_pairs(n: int, count: int, seed) -> np.ndarray:
    rng = derive_rng(seed, "pairs")
    iu = np.triu_indices(n, 1)
    pick = rng.choice(len(iu[0]), size=min(count, len(iu[0])), replace=False)
    P = np.stack([iu[0][pick], iu[1][pick]], axis=1)
    return P[np.lexsort((P[:, 1], P[:, 0]))]


def tube_comparison(surface: EmbeddedCloud, tube: TubeSpec, density: float, pairs: int = 100, seed=0,
                    cloud: EmbeddedCloud | None = None) -> dict:
    """Compare surface and tube path metrics on random surface pairs.

    Checks ``d_tube <= d_surface`` exactly and
    ``(1 - eta) d_surface <= d_tube + slack`` with ``slack = 2 * density``.
    ``max_gap`` is the largest ``(1 - eta) d_surface - d_tube``.  Pass a
    prebuilt ``cloud`` (whose first points must be the surface samples) to
    reuse one tube across calls.
    """
    cloud = cloud if cloud is not None else tube_cloud(surface, tube, density, seed)
    n = len(surface)
    if len(cloud) < n or not np.array_equal(cloud.points[:n], surface.points) or cloud.radius < surface.radius:
        raise DomainError("tube cloud must start with the surface samples and use at least the surface radius")
    P = _sample_pairs(n, pairs, seed)
    sources = np.unique(P[:, 0])
    row = {s: k for k, s in enumerate(sources)}
    d_surf = surface.distances(sources)
    d_tube = cloud.distances(sources)
    r = np.array([row[a] for a in P[:, 0]])
    ds = d_surf[r, P[:, 1]]
    dt = d_tube[r, P[:, 1]]
    slack = 2.0 * density
    gap = (1.0 - tube.eta) * ds - dt
    sub = bool(np.all(dt <= ds))
    lower = bool(np.all(gap <= slack))
    return {
        "pairs_tested": int(len(P)),
        "max_gap": float(gap.max()),
        "slack": slack,
        "max_excess": float((dt - ds).max()),
        "subgraph_holds": sub,
        "lower_holds": lower,
        "tube_points": int(len(cloud)),
        "pass": sub and lower,
        "pairs": P.tolist(),
        "d_surface": ds.tolist(),
        "d_tube": dt.tolist(),
    }


def tube_experiment(model: str, delta: float, eta: float, density: float, pairs: int = 100, seed=0) -> dict:
    surface = tube_model(model, density)
    return tube_comparison(surface, TubeSpec(delta, eta), density, pairs, seed)


# --- length defects ----------------------------------------------------------

def curve_length_pairs(f: PointMap, curves) -> np.ndarray:
    """Rows ``(L_X(gamma), L_E(f o gamma))`` for each curve with waypoints labelled in f's domain."""
    X = f.domain
    out = np.empty((len(curves), 2))
    for i, c in enumerate(curves):
        idx = [X.index(w) for w in c.waypoints]
        out[i, 0] = curve_length(c, X)
        out[i, 1] = curve_length(PolygonalCurve(f.image[idx]))
    return out


def path_isometry_defect(f: PointMap, X: FiniteMetricSpace, curves) -> float:
    """Largest relative length change ``|L_E(f o gamma) - L_X(gamma)| / L_X(gamma)``.

    Zero-length curves are skipped with a warning.
    """
    if f.domain is not X and not np.array_equal(f.domain.dist, X.dist):
        raise DomainError("map domain differs from the given space")
    L = curve_length_pairs(f, curves)
    zero = L[:, 0] == 0
    if zero.any():
        warnings.warn(f"skipped {int(zero.sum())} zero-length curve(s)", stacklevel=2)
    L = L[~zero]
    if len(L) == 0:
        raise DomainError("no curve of positive length to test")
    return float(np.max(np.abs(L[:, 1] - L[:, 0]) / L[:, 0]))


def geodesic_chain(X: FiniteMetricSpace, p: int, q: int, rtol: float = 1e-9) -> PolygonalCurve:
    """Points on a metric segment from p to q, ordered by distance from p."""
    d = X.dist
    on = np.flatnonzero(d[p] + d[:, q] <= d[p, q] * (1 + rtol))
    on = on[np.argsort(d[p, on], kind="stable")]
    return PolygonalCurve([X.labels[i] for i in on])


def curve_family(X: FiniteMetricSpace, count: int = 100, seed=0, max_waypoints: int = 6) -> list:
    """Half geodesic chains between random pairs, half random waypoint chains."""
    if X.n < 2:
        raise DomainError("need at least two points")
    rng = derive_rng(seed, "curves")
    labels = X.labels
    out = []
    for _ in range(count // 2):
        p, q = rng.choice(X.n, 2, replace=False)
        out.append(geodesic_chain(X, int(p), int(q)))
    for _ in range(count - count // 2):
        k = int(rng.integers(2, max_waypoints + 1))
        idx = rng.integers(0, X.n, k)
        out.append(PolygonalCurve([labels[i] for i in idx]))
    return out


def isometry_equivalence_check(f: PointMap, radius: float, tol: float = 1e-3) -> dict:
    """Largest relative gap between ``d_X`` and the induced path metric of the image cloud."""
    img = f.image
    if len(np.unique(img, axis=0)) < len(img):
        raise DomainError("image cloud is degenerate: distinct points share an image")
    D = induced_path_metric(EmbeddedCloud(img, radius)).dist
    d = f.domain.dist
    iu = np.triu_indices(len(f), 1)
    gap = np.abs(D[iu] - d[iu]) / d[iu] if len(iu[0]) else np.zeros(0)
    mg = float(gap.max()) if len(gap) else 0.0
    return {"pairs_tested": int(len(gap)), "max_gap": mg, "tolerance": tol, "pass": mg <= tol}


# --- Finsler obstruction -----------------------------------------------------

def _unit_directions(norm: NormFieldPlanar, count: int = FINSLER_DIRECTIONS) -> np.ndarray:
    t = 2 * np.pi * np.arange(count) / count
    u = np.stack([np.cos(t), np.sin(t)], axis=1)
    return u / norm(u)[:, None]


def _defects(G: np.ndarray, V: np.ndarray) -> np.ndarray:
    # |Av|^2 = v^T G v with G = A^T A
    q = np.einsum("ci,nij,cj->nc", V, G, V, optimize=True)
    return np.max(np.abs(np.sqrt(np.maximum(q, 0.0)) - 1.0), axis=1)


def _gram(params: np.ndarray, k: int) -> np.ndarray:
    if k == 1:
        a = params
        return a[:, :, None] * a[:, None, :]
    p, q, s = params.T
    A = np.zeros((len(params), 2, 2))
    A[:, 0, 0], A[:, 0, 1], A[:, 1, 1] = p, q, s
    return np.transpose(A, (0, 2, 1)) @ A


def linear_finsler_defect(norm: NormFieldPlanar, k: int, budget: int = 10**6) -> float:
    """``min_A max_v ||Av| - ||v|||`` over linear ``A: R^2 -> R^k`` and unit-norm ``v``.

    Only ``A^T A`` matters, so k >= 2 searches upper-triangular 2x2 factors
    and k = 1 searches single rows.  Coarse-to-fine grids zoom around the
    best candidate until ``budget`` candidate maps have been evaluated.
    """
    if k < 1:
        raise DomainError("target dimension must be at least 1")
    V = _unit_directions(norm)
    R = 2.0 / float(np.linalg.norm(V, axis=1).min())
    if k == 1:
        n, lo, hi = FINSLER_LINE_GRID, np.array([0.0, -R]), np.array([R, R])
    else:
        n, lo, hi = FINSLER_GRID, np.array([0.0, -R, 0.0]), np.array([R, R, R])
    best, best_x = math.inf, None
    used, first = 0, True
    while used + n ** len(lo) <= budget:
        axes = [np.linspace(a, b, n) for a, b in zip(lo, hi)]
        if first:
            axes = [np.union1d(ax, [x for x in (0.0, 1.0) if a <= x <= b]) for ax, a, b in zip(axes, lo, hi)]
            first = False
        cand = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, len(lo))
        used += len(cand)
        vals = np.concatenate([_defects(_gram(c, k), V) for c in np.array_split(cand, max(1, len(cand) // 4000))])
        i = int(np.argmin(vals))
        if vals[i] < best:
            best, best_x = float(vals[i]), cand[i]
        step = (hi - lo) / (n - 1)
        if np.all(step < 1e-14):
            break
        lo, hi = best_x - 3 * step, best_x + 3 * step
        if k >= 2:
            lo[0], lo[2] = max(lo[0], 0.0), max(lo[2], 0.0)
    return best


# --- central collapse --------------------------------------------------------

def central_collapse_box(t: float, h: float):
    """Box around the optimal loop from the origin to ``(0, 0, t)``."""
    r = math.sqrt(t / math.pi)
    ht = h * h / 2
    lo = (-1.2 * r - 2 * h, -0.2 * r - 2 * h, -0.1 * t - 4 * ht)
    hi = (1.2 * r + 2 * h, 2.2 * r + 2 * h, 1.1 * t + 4 * ht)
    return lo, hi


def central_collapse_ratio(t: float, h: float = 1 / 32, radius: int = 2) -> float:
    """``|f(gx) - f(x)| / d_CC(gx, x)`` for the coordinate map, ``x`` = origin, ``g = (0, 0, t)``."""
    if not t > 0:
        raise DomainError("center displacement must be positive")
    ht = h * h / 2
    if abs(t / ht - round(t / ht)) > 1e-9 * max(1.0, t / ht):
        raise DomainError(f"t={t} is not a multiple of the vertical lattice step {ht}")
    if math.sqrt(t / math.pi) < 2 * h:
        raise DomainError(f"grid too coarse to resolve t={t} at h={h}")
    lo, hi = central_collapse_box(t, h)
    grid = default_grid("heisenberg", h, radius, lo, hi)
    S = model_catalog("heisenberg", grid)
    d = cc_distance(S, ApproximantSchedule.for_structure(S), (0.0, 0.0, 0.0), (0.0, 0.0, t))
    return t / d
