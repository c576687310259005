"""Lipschitz embeddings of finite metric spaces into low-dimensional Euclidean space.

Pipeline: a greedy net cover of small diameter, a Lipschitz partition of
unity subordinate to it, targets in general position, the barycentric map
``g(x) = sum_j phi_j(x) z_j`` (injective up to scale epsilon when the cover
order is at most ``(N + 1) / 2``), and secant-avoiding projections that
merge ``(f, g)`` back into ``N`` dimensions while staying close to ``f``.
``embed`` iterates the refinement along a decreasing epsilon schedule until
the map is exactly injective.
"""

from __future__ import annotations

import itertools
import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .metric import DomainError, FiniteMetricSpace, PointMap, delta_injectivity, distortion, lip_norm
from .spaces import derive_rng

log = logging.getLogger(__name__)

EXHAUSTIVE_LIMIT = 10**6
RANDOM_SUBSETS = 10**5
PER_POINT_SUBSETS = 10
MARGIN_RTOL = 1e-8
RESAMPLE_ROUNDS = 100
SECANT_THRESHOLD = 1e-4
SECANT_TRIES = 200
SECANT_FLOOR = 1e-12
DELTA_FLOOR = 1e-12


class ConstructionError(RuntimeError):
    """A construction step could not produce a valid object."""


@dataclass
class Cover:
    sets: list
    epsilon: float
    order: int
    centers: np.ndarray
    radius: float

    def membership(self, n: int) -> np.ndarray:
        """Boolean (sets, points) incidence matrix."""
        out = np.zeros((len(self.sets), n), dtype=bool)
        for j, s in enumerate(self.sets):
            out[j, s] = True
        return out


def build_cover(X: FiniteMetricSpace, eps: float) -> Cover:
    """Open balls of radius eps/2 around a greedy eps/2-net.

    Each ball has diameter < eps.  Its order (the largest number of balls
    through one point) is measured, not bounded in advance.
    """
    if not eps > 0:
        raise DomainError("epsilon must be positive")
    r = eps / 2
    d = X.dist
    centers: list[int] = []
    covered = np.zeros(X.n, dtype=bool)
    for x in range(X.n):
        if not covered[x]:
            centers.append(x)
            covered |= d[x] < r
    sets = [np.flatnonzero(d[c] < r) for c in centers]
    for s in sets:
        if len(s) > 1 and d[np.ix_(s, s)].max() >= eps:
            raise ConstructionError("floating-point slack produced a cover set of diameter >= epsilon")
    counts = np.zeros(X.n, dtype=int)
    for s in sets:
        counts[s] += 1
    return Cover(sets, float(eps), int(counts.max()), np.array(centers), r)


@dataclass
class Partition:
    """Rows ``phi[j]`` over points; ``lipschitz[j]`` is an a-priori bound for phi_j."""

    phi: np.ndarray
    lipschitz: np.ndarray
    cover: Cover
    space: FiniteMetricSpace


def partition_of_unity(X: FiniteMetricSpace, cover: Cover) -> Partition:
    """Normalised tent functions ``psi_j = max(0, r - d(., c_j))`` of the net balls.

    Each psi_j is 1-Lipschitz and the sum S has Lipschitz constant at most
    twice the order, so phi_j = psi_j / S is Lipschitz with constant at most
    ``(1 + 2 * order) / min_{U_j} S``.
    """
    psi = np.maximum(0.0, cover.radius - X.dist[cover.centers])
    total = psi.sum(axis=0)
    if np.any(total <= 0):
        x = int(np.flatnonzero(total <= 0)[0])
        raise ConstructionError(f"point {x} is not inside any cover set")
    phi = psi / total
    lips = np.array([(1.0 + 2.0 * cover.order) / total[s].min() for s in cover.sets])
    return Partition(phi, lips, cover, X)


def exact_lipschitz(values: np.ndarray, X: FiniteMetricSpace) -> float:
    """Exact Lipschitz constant of a real function (or row-stack of them) on X."""
    v = np.atleast_2d(values)
    if X.n == 1:
        return 0.0
    iu = np.triu_indices(X.n, 1)
    diffs = np.abs(v[:, iu[0]] - v[:, iu[1]]) / X.dist[iu]
    return float(diffs.max())


@dataclass
class GeneralPositionSet:
    z: np.ndarray
    margin: float
    exhaustive: bool = True

    @property
    def dim(self) -> int:
        return self.z.shape[1]


def _lifted_sigma_min(z: np.ndarray, subsets: np.ndarray) -> np.ndarray:
    lifted = np.concatenate([z, np.ones((len(z), 1))], axis=1)
    out = np.empty(len(subsets))
    for start in range(0, len(subsets), 50_000):
        chunk = subsets[start:start + 50_000]
        mats = np.transpose(lifted[chunk], (0, 2, 1))
        out[start:start + len(chunk)] = np.linalg.svd(mats, compute_uv=False)[:, -1]
    return out


def general_position_margin(z: np.ndarray, rng=None) -> tuple[float, bool]:
    """Smallest singular value of lifted configurations ``[z_i; 1]`` of size min(n, N+1).

    A configuration is affinely independent exactly when its lifted columns
    are linearly independent, and dropping columns never lowers the smallest
    singular value, so full-size subsets decide every smaller one.  Returns
    the margin and whether the scan was exhaustive.
    """
    n, N = z.shape
    k = min(n, N + 1)
    if n == 1:
        return math.inf, True
    if math.comb(n, k) <= EXHAUSTIVE_LIMIT:
        subsets = np.array(list(itertools.combinations(range(n), k)), dtype=np.int64)
        return float(_lifted_sigma_min(z, subsets).min()), True
    rng = rng if rng is not None else np.random.default_rng(0)
    rand = np.argsort(rng.random((RANDOM_SUBSETS, n)), axis=1)[:, :k]
    touch = []
    for i in range(n):
        others = np.argsort(rng.random((PER_POINT_SUBSETS, n - 1)), axis=1)[:, : k - 1]
        others = np.where(others >= i, others + 1, others)
        touch.append(np.concatenate([np.full((PER_POINT_SUBSETS, 1), i), others], axis=1))
    subsets = np.concatenate([rand] + touch)
    return float(_lifted_sigma_min(z, subsets).min()), False


def sample_general_position(n: int, N: int, box=(0.0, 1.0), seed=0) -> GeneralPositionSet:
    """Uniform points in a box, resampled until every small subset is affinely independent."""
    if n < 1 or N < 1:
        raise DomainError("need n >= 1 points in dimension N >= 1")
    lo = np.broadcast_to(np.asarray(box[0], dtype=float), (N,))
    hi = np.broadcast_to(np.asarray(box[1], dtype=float), (N,))
    diam = float(np.linalg.norm(hi - lo))
    rng = derive_rng(seed, "general-position")
    for round_ in range(RESAMPLE_ROUNDS):
        z = rng.uniform(lo, hi, (n, N))
        if n == 1:
            return GeneralPositionSet(z, diam, True)
        margin, exhaustive = general_position_margin(z, rng)
        if margin >= MARGIN_RTOL * diam:
            log.debug("general position accepted after %d rounds, margin %.3g", round_ + 1, margin)
            return GeneralPositionSet(z, margin, exhaustive)
    raise ConstructionError(f"no general-position sample of {n} points in R^{N} after {RESAMPLE_ROUNDS} rounds")


def menger_map(partition: Partition, targets: GeneralPositionSet) -> PointMap:
    """Barycentric map ``g(x) = sum_j phi_j(x) z_j``."""
    if len(targets.z) != len(partition.phi):
        raise DomainError(f"{len(targets.z)} targets for {len(partition.phi)} cover sets")
    return PointMap(partition.space, partition.phi.T @ targets.z)


@dataclass
class ProjectionChain:
    """Composite of one-dimensional orthogonal projections ``R^M -> R^N``."""

    steps: list
    matrix: np.ndarray
    beta: float
    secant_margin: float
    threshold: float
    log: list = field(default_factory=list)

    def __call__(self, x: np.ndarray) -> np.ndarray:
        return np.asarray(x) @ self.matrix.T


def projection_along(v: np.ndarray) -> np.ndarray:
    """``(D-1) x D`` matrix of the orthogonal projection along unit ``v``.

    ``v^perp`` is identified with ``R^{D-1}`` by the plane rotation taking
    ``v`` to the last axis, so the result is within ``2 sin(angle/2)`` of
    dropping the last coordinate in operator norm.
    """
    v = np.asarray(v, dtype=float)
    v = v / np.linalg.norm(v)
    D = len(v)
    e = np.zeros(D)
    e[-1] = 1.0
    c = float(np.clip(v[-1], -1.0, 1.0))
    w = v - c * e
    s = float(np.linalg.norm(w))
    if s < 1e-15:
        R = np.eye(D) if c > 0 else np.diag(np.r_[np.ones(D - 2), -1.0, -1.0]) if D > 1 else np.eye(D)
    else:
        w = w / s
        R = np.eye(D) + (c - 1.0) * (np.outer(e, e) + np.outer(w, w)) + s * (np.outer(e, w) - np.outer(w, e))
    return R[:-1]


def _min_secant_ratio(step: np.ndarray, diffs: np.ndarray, norms: np.ndarray) -> float:
    if len(diffs) == 0:
        return math.inf
    return float(np.min(np.linalg.norm(diffs @ step.T, axis=1) / norms))


def secant_projection(K: np.ndarray, N: int, seed=0, beta: float = 1e-2, threshold: float = SECANT_THRESHOLD,
                      directions=None) -> ProjectionChain:
    """Project a finite set ``K`` in ``R^M`` to ``R^N`` one axis at a time, staying injective.

    Each step eliminates the current last axis along a direction drawn at
    angle in ``[theta/2, theta)`` from it, ``theta = beta / (M - N)``, and is
    accepted when no secant of the working set shrinks below the threshold
    times its length.  The threshold starts at ``min(threshold, theta/10)``
    and is halved after ``SECANT_TRIES`` rejections.  ``directions``
    fixes the step directions instead of sampling them.
    """
    K = np.atleast_2d(np.asarray(K, dtype=float))
    M = K.shape[1]
    if not M > N >= 1:
        raise DomainError(f"need M > N >= 1, got M={M}, N={N}")
    rng = derive_rng(seed, "secant-projection")
    budget = beta / (M - N)
    Y = K.copy()
    composite = np.eye(M)
    steps, events = [], []
    # a secant along the eliminated axis keeps only ~sin(angle) of its length
    s = min(threshold, budget / 10)
    for i in range(M - N):
        D = M - i
        iu = np.triu_indices(len(Y), 1)
        diffs = Y[iu[0]] - Y[iu[1]]
        norms = np.linalg.norm(diffs, axis=1)
        keep = norms > 0
        diffs, norms = diffs[keep], norms[keep]
        if directions is not None:
            v = np.asarray(directions[i], dtype=float)
            step = projection_along(v)
            ratio = _min_secant_ratio(step, diffs, norms)
            if not ratio > 0:
                raise ConstructionError(f"given direction for step {i} collapses a secant")
        else:
            tries = 0
            while True:
                alpha = budget * rng.uniform(0.5, 1.0)
                w = rng.standard_normal(D - 1)
                w /= np.linalg.norm(w)
                v = np.r_[math.sin(alpha) * w, math.cos(alpha)]
                step = projection_along(v)
                ratio = _min_secant_ratio(step, diffs, norms)
                if ratio >= s:
                    break
                tries += 1
                if tries >= SECANT_TRIES:
                    s /= 2
                    tries = 0
                    if s < SECANT_FLOOR:
                        raise ConstructionError("secant threshold collapsed; K has nearly coincident points")
        steps.append(v)
        events.append({"step": i, "dim": D, "secant_ratio": ratio, "threshold": s})
        Y = Y @ step.T
        composite = step @ composite
    coord = np.eye(M)[:N]
    dev = float(np.linalg.norm(composite - coord, 2))
    iu = np.triu_indices(len(K), 1)
    diffs = K[iu[0]] - K[iu[1]]
    norms = np.linalg.norm(diffs, axis=1)
    keep = norms > 0
    margin = _min_secant_ratio(composite, diffs[keep], norms[keep])
    return ProjectionChain(steps, composite, dev, margin, s, events)


def _separation_floor(f: PointMap, b: float) -> float:
    """Half the smallest image distance over pairs at source distance >= b (inf if none)."""
    d = f.domain.dist
    iu = np.triu_indices(len(f), 1)
    A = d[iu] >= b
    if not A.any():
        return math.inf
    return 0.5 * float(f.image_dist[iu][A].min())


def stability_radius(f: PointMap, eps: float, b: float) -> float:
    """Radius of a Lip-norm ball around ``f`` inside ``{g : Delta_0(g) <= b}``.

    Requires ``Delta_0(f) < b < eps``.  Returns ``inf`` when no pair is at
    distance >= b, since then every map qualifies.
    """
    d0 = delta_injectivity(f)
    if not (d0 < b < eps):
        raise DomainError(f"need Delta_0(f) < b < eps, got Delta_0={d0}, b={b}, eps={eps}")
    return _separation_floor(f, b)


@dataclass
class RefineResult:
    F: PointMap
    g: PointMap
    cover: Cover
    targets: GeneralPositionSet
    projection: ProjectionChain
    beta: float


def refine(f: PointMap, eps: float, delta: float, seed=0, box=(0.0, 1.0)) -> RefineResult:
    """A map ``F`` with ``||F - f||_Lip < delta`` and ``Delta_0(F) < eps``.

    ``g`` is the barycentric map at scale eps; ``F`` projects ``(f, g)``
    from ``R^{2N}`` to ``R^N`` within operator distance ``beta`` of the
    first-factor projection, where ``beta * sqrt(|f|^2 + |g|^2) <= delta / 2``.
    """
    if not (eps > 0 and delta > 0):
        raise DomainError("epsilon and delta must be positive")
    X = f.domain
    N = f.dim
    cover = build_cover(X, eps)
    part = partition_of_unity(X, cover)
    targets = sample_general_position(len(cover.sets), N, box, derive_rng(seed, "targets"))
    g = menger_map(part, targets)
    Phi = np.concatenate([f.image, g.image], axis=1)
    scale = math.hypot(lip_norm(f).total, lip_norm(g).total)
    beta = delta / (2.0 * scale) if scale > 0 else 1.0
    proj = secant_projection(Phi, N, derive_rng(seed, "projection"), beta=beta)
    F = PointMap(X, proj(Phi))
    return RefineResult(F, g, cover, targets, proj, beta)


@dataclass
class EmbedResult:
    map: PointMap
    lip: tuple
    distortion: tuple
    iterations: list
    seed: int
    order_achieved: int
    margin: float

    @property
    def delta_final(self) -> float:
        return delta_injectivity(self.map)

    def report(self) -> dict:
        return {
            "order_achieved": self.order_achieved,
            "margin": self.margin,
            "delta_final": self.delta_final,
            "lip_norm": {"sup": self.lip[0], "lip": self.lip[1], "total": self.lip[2]},
            "distortion": {"expansion": self.distortion[0], "contraction": self.distortion[1]},
            "seed": self.seed,
            "iterations": self.iterations,
        }


def default_schedule(X: FiniteMetricSpace, steps: int = 3) -> list[float]:
    """Geometric scales from diam/2 down to half the smallest distance.

    Kept short on purpose: every step shrinks the admissible closeness
    budget by roughly the current scale, so long schedules run out of
    double precision.
    """
    if X.n == 1:
        return []
    hi, lo = X.diameter / 2, X.min_distance / 2
    if steps == 1 or hi <= lo:
        return [lo]
    return [float(e) for e in np.geomspace(hi, lo, steps)]


def _protected_level(X: FiniteMetricSpace, d0: float, eps_prev: float) -> float | None:
    """Largest distance value in (d0, eps_prev), or None when there is none."""
    levels = np.unique(X.dist)
    inside = levels[(levels > d0) & (levels < eps_prev)]
    return float(inside[-1]) if len(inside) else None


def embed(X: FiniteMetricSpace, m: int, schedule=None, seed: int = 0, N: int | None = None) -> EmbedResult:
    """Injective Lipschitz map ``X -> R^N`` (``N = 2m + 1`` unless overridden).

    Starts from the zero map and refines along ``schedule``.  Each step's
    closeness budget ``delta_n`` is ``min(2**-n, r)`` with ``r`` the
    stability radius of the current map for the largest level ``b`` below
    the previous scale, so the map stays in every class ``Delta_0 < eps_k``
    already reached.  Scales the current map already satisfies are skipped.
    Stops as soon as the map is injective.
    """
    if m < 0:
        raise DomainError("m must be nonnegative")
    N = 2 * m + 1 if N is None else int(N)
    if N < 1:
        raise DomainError("target dimension must be positive")
    schedule = default_schedule(X) if schedule is None else [float(e) for e in schedule]
    if any(not e > 0 for e in schedule) or any(b >= a for a, b in zip(schedule, schedule[1:])):
        raise DomainError("epsilon schedule must be positive and strictly decreasing")
    if X.n > 1 and (not schedule or schedule[-1] >= X.min_distance):
        raise DomainError("epsilon schedule must end below the smallest distance of X")
    f = PointMap(X, np.zeros((X.n, N)))
    iterations = []
    order, margin = 1, math.inf
    eps_prev = math.inf
    for n, eps in enumerate(schedule, start=1):
        d0 = delta_injectivity(f)
        if d0 == 0.0:
            break
        if d0 < eps:
            eps_prev = eps
            continue
        b = None if math.isinf(eps_prev) else _protected_level(X, d0, eps_prev)
        stab = math.inf if b is None else _separation_floor(f, b)
        delta = min(stab, 2.0 ** (-n))
        if delta < DELTA_FLOOR * (1.0 + lip_norm(f).sup):
            raise ConstructionError(
                f"closeness budget underflowed at step {n} (delta={delta:.3g}); use a shorter schedule")
        # targets at scale eps keep ||g||_Lip of order one on every scale
        res = refine(f, eps, delta, derive_rng(seed, "refine", n), box=(0.0, eps))
        eps_prev = eps
        f = res.F
        order = max(order, res.cover.order)
        margin = min(margin, res.targets.margin)
        iterations.append({
            "n": n, "epsilon": eps, "delta": delta, "protected_level": b, "cover_sets": len(res.cover.sets),
            "order": res.cover.order, "margin": res.targets.margin, "beta": res.projection.beta,
            "secant_margin": res.projection.secant_margin, "delta0": delta_injectivity(f),
        })
        log.info("embed step %d: eps=%.3g delta=%.3g Delta0=%.3g", n, eps, delta, iterations[-1]["delta0"])
    residual = delta_injectivity(f)
    if residual != 0.0:
        raise ConstructionError(f"schedule exhausted without injectivity; residual Delta_0 = {residual}")
    return EmbedResult(f, tuple(lip_norm(f)), distortion(f), iterations, int(seed), order, margin)


def box_counting_dimension(X: FiniteMetricSpace, scales=None) -> float:
    """Slope of log(net size) against log(1/r) over greedy nets; a heuristic only."""
    if X.n == 1:
        return 0.0
    if scales is None:
        scales = np.geomspace(X.diameter / 2, max(X.min_distance * 2, X.diameter / 2**8), 8)
    counts = [len(build_cover(X, 2 * r).sets) for r in scales]
    slope = np.polyfit(np.log(1.0 / np.asarray(scales)), np.log(counts), 1)[0]
    return float(slope)
