"""Sub-Riemannian structures on box lattices and their Carnot-Caratheodory distances.

A structure is a field of linear maps ``sigma_p: R^r -> R^n``.  The cost of a
tangent vector is ``rho_p(v) = min{|u|^2 : sigma_p u = v}`` (infinite when
``v`` is not in the range).  Distances are shortest paths on a stencil graph
whose edges carry length ``sqrt(w)`` with ``w`` the cost of the edge vector
at the edge midpoint.  Finite ``m`` replaces the cost by the monotone
Riemannian approximant

    w_1 = g1(v),   w_m = max(w_{m-1}, min((1 - 2**-m) * rho(v), m * g1(v)))

applied per stencil direction, with ``g1(v) = c |v|^2`` below ``rho``.

The Heisenberg model lives on the discrete Heisenberg lattice: coordinates
``(i*h, j*h, k*h*h/2)`` and neighbours ``p * (a*h, b*h, c*h*h/2)`` under the
group product.  Left translates of horizontal lines are straight lines, so
``c = 0`` edges are exactly horizontal.  On a plain additive lattice almost
no straight edge is horizontal and the ``m = inf`` graph falls apart.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from . import _dijkstra
from .metric import DisconnectedError, DomainError, PolygonalCurve
from .spaces import derive_rng

INFINITY = math.inf
RANGE_RTOL = 1e-9
G1_SAFETY = 1e-6


def default_stencil(n: int, radius: int = 2) -> np.ndarray:
    """Integer offsets with sup-norm <= radius and coprime coordinates.

    Rows are ordered as the lexicographically positive offsets followed by
    their negatives in the same order.
    """
    pos = []
    for off in itertools.product(range(-radius, radius + 1), repeat=n):
        if not any(off):
            continue
        if math.gcd(*map(abs, off)) != 1:
            continue
        first = next(x for x in off if x != 0)
        if first > 0:
            pos.append(off)
    pos = np.array(sorted(pos), dtype=np.int64).reshape(-1, n)
    return np.concatenate([pos, -pos])


def _canonical_stencil(stencil: np.ndarray) -> np.ndarray:
    st = np.asarray(stencil, dtype=np.int64)
    if st.ndim != 2 or len(st) == 0:
        raise DomainError("stencil must be a non-empty (S, n) integer array")
    rows = {tuple(r) for r in st}
    if len(rows) != len(st):
        raise DomainError("stencil has repeated offsets")
    if any(not any(r) for r in rows):
        raise DomainError("stencil contains the zero offset")
    if any(tuple(-x for x in r) not in rows for r in rows):
        raise DomainError("stencil is not symmetric under negation")
    prim = set()
    for r in rows:
        g = math.gcd(*map(abs, r))
        p = tuple(x // g for x in r)
        if p in prim:
            raise DomainError(f"stencil offsets {r} and another share a direction")
        prim.add(p)
    positive = sorted(r for r in rows if next(x for x in r if x != 0) > 0)
    pos = np.array(positive, dtype=np.int64)
    return np.concatenate([pos, -pos])


@dataclass(frozen=True, eq=False)
class GridDomain:
    """Origin-anchored box lattice ``{i*h : lo <= i*h <= hi}`` with a stencil.

    ``law="heisenberg"`` (3-D only) uses the Heisenberg group product to move
    along offsets and requires ``h[2] == h[0] * h[1] / 2``.
    """

    lo: tuple
    hi: tuple
    h: tuple
    stencil: np.ndarray
    law: str = "additive"
    lo_idx: np.ndarray = field(init=False, repr=False)
    shape: tuple = field(init=False)

    def __post_init__(self):
        lo = tuple(float(x) for x in self.lo)
        hi = tuple(float(x) for x in self.hi)
        n = len(lo)
        h = tuple(float(x) for x in (self.h if np.ndim(self.h) else [self.h] * n))
        if len(hi) != n or len(h) != n:
            raise DomainError("bounds and resolution must have the same dimension")
        if any(not x > 0 for x in h):
            raise DomainError("resolution must be positive")
        if any(not b > a for a, b in zip(lo, hi)):
            raise DomainError("box is degenerate")
        if self.law not in ("additive", "heisenberg"):
            raise DomainError(f"unknown lattice law {self.law!r}")
        if self.law == "heisenberg":
            if n != 3:
                raise DomainError("the Heisenberg lattice is 3-dimensional")
            if not math.isclose(h[2], h[0] * h[1] / 2, rel_tol=1e-12):
                raise DomainError("Heisenberg lattice needs h_t = h_x * h_y / 2")
        st = _canonical_stencil(self.stencil)
        if st.shape[1] != n:
            raise DomainError("stencil dimension does not match the box")
        lo_idx = np.array([math.ceil(a / s - 1e-9) for a, s in zip(lo, h)], dtype=np.int64)
        hi_idx = np.array([math.floor(b / s + 1e-9) for b, s in zip(hi, h)], dtype=np.int64)
        shape = tuple(int(x) for x in hi_idx - lo_idx + 1)
        if any(s < 2 for s in shape):
            raise DomainError("box holds fewer than two lattice points along some axis")
        for name, val in (("lo", lo), ("hi", hi), ("h", h), ("stencil", st), ("lo_idx", lo_idx), ("shape", shape)):
            object.__setattr__(self, name, val)

    @classmethod
    def box(cls, lo, hi, h, radius: int = 2, law: str = "additive") -> "GridDomain":
        n = len(lo)
        if law == "heisenberg":
            hx = float(h if np.ndim(h) == 0 else h[0])
            hy = float(h if np.ndim(h) == 0 else h[1])
            h = (hx, hy, hx * hy / 2)
        return cls(tuple(lo), tuple(hi), h, default_stencil(n, radius), law)

    @property
    def ndim(self) -> int:
        return len(self.shape)

    @property
    def size(self) -> int:
        return int(np.prod(self.shape))

    @property
    def half(self) -> int:
        return len(self.stencil) // 2

    def index_of(self, point) -> int:
        """Flat node index of a lattice point given by coordinates."""
        p = np.asarray(point, dtype=float)
        if p.shape != (self.ndim,):
            raise DomainError(f"point {tuple(p)} has the wrong dimension")
        rel = p / np.array(self.h)
        ii = np.rint(rel).astype(np.int64)
        if np.any(np.abs(rel - ii) > 1e-6):
            raise DomainError(f"point {tuple(p)} is not a lattice point")
        loc = ii - self.lo_idx
        if np.any(loc < 0) or np.any(loc >= np.array(self.shape)):
            raise DomainError(f"point {tuple(p)} lies outside the box")
        return int(np.ravel_multi_index(tuple(loc), self.shape))

    def coords_of(self, node: int) -> np.ndarray:
        loc = np.array(np.unravel_index(node, self.shape), dtype=np.int64)
        return (loc + self.lo_idx) * np.array(self.h)

    def abs_index(self, node: int) -> np.ndarray:
        return np.array(np.unravel_index(node, self.shape), dtype=np.int64) + self.lo_idx

    def step(self, abs_idx: np.ndarray, k: int) -> np.ndarray:
        """Absolute index reached from ``abs_idx`` along stencil row ``k``."""
        off = self.stencil[k].copy()
        if self.law == "heisenberg":
            off[2] += abs_idx[0] * off[1] - abs_idx[1] * off[0]
        return abs_idx + off

    def edge_vectors(self, abs_idx: np.ndarray, ks=None) -> np.ndarray:
        """Coordinate edge vectors for lattice points ``abs_idx`` (P, n) and rows ``ks``."""
        ks = np.arange(len(self.stencil)) if ks is None else np.asarray(ks)
        off = self.stencil[ks][None, :, :].astype(float).repeat(len(abs_idx), axis=0)
        if self.law == "heisenberg":
            a, b = self.stencil[ks, 0], self.stencil[ks, 1]
            off[:, :, 2] += abs_idx[:, 0:1] * b[None, :] - abs_idx[:, 1:2] * a[None, :]
        return off * np.array(self.h)

    def is_connected(self) -> bool:
        lengths = np.ones((1, self.half))
        dist, _ = self._run(np.zeros(self.ndim, dtype=np.int64), lengths, 0, -1, self.stencil)
        return bool(np.all(np.isfinite(dist)))

    def _run(self, rstrides, table, source, target, stencil):
        return _dijkstra.stencil_dijkstra(
            np.array(self.shape, dtype=np.int64),
            self.lo_idx,
            np.asarray(rstrides, dtype=np.int64),
            np.ascontiguousarray(stencil, dtype=np.int64),
            len(stencil) // 2,
            _dijkstra.HEISENBERG if self.law == "heisenberg" else _dijkstra.ADDITIVE,
            np.ascontiguousarray(table, dtype=float),
            int(source),
            int(target),
        )


SigmaField = Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True, eq=False)
class HorizontalStructure:
    """A field of linear maps ``sigma_p`` on a grid.

    ``sigma`` maps an (P, n) array of points to (P, n, r) matrices.  Catalog
    models pass their closed-form field; a custom tabulated field is given as
    ``table`` of shape ``grid.shape + (n, r)`` and evaluated at grid points.
    ``invariant_axes`` lists coordinate axes the field does not depend on,
    which lets edge weights be tabulated on a reduced grid.
    """

    grid: GridDomain
    sigma: SigmaField | None = None
    table: np.ndarray | None = None
    invariant_axes: tuple = ()
    name: str = "custom"

    def __post_init__(self):
        if (self.sigma is None) == (self.table is None):
            raise DomainError("give exactly one of a sigma field or a sigma table")
        if self.table is not None:
            t = np.asarray(self.table, dtype=float)
            if t.shape[: self.grid.ndim] != self.grid.shape or t.ndim != self.grid.ndim + 2:
                raise DomainError("sigma table must have shape grid.shape + (n, r)")
            if t.shape[-2] != self.grid.ndim:
                raise DomainError("sigma table maps into the wrong tangent dimension")
            object.__setattr__(self, "table", t)
            object.__setattr__(self, "invariant_axes", ())

    @property
    def tabulated(self) -> bool:
        return self.table is not None

    def sigma_at(self, points: np.ndarray) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        if self.sigma is not None:
            return self.sigma(pts)
        loc = np.rint(pts / np.array(self.grid.h)).astype(np.int64) - self.grid.lo_idx
        loc = np.clip(loc, 0, np.array(self.grid.shape) - 1)
        return self.table[tuple(loc.T)]


def rho_batch(sigma: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Cost of vectors ``v`` (P, n) under maps ``sigma`` (P, n, r); ``inf`` off-range."""
    pinv = np.linalg.pinv(sigma)
    u = np.einsum("prn,pn->pr", pinv, v)
    resid = np.linalg.norm(np.einsum("pnr,pr->pn", sigma, u) - v, axis=1)
    vn = np.linalg.norm(v, axis=1)
    cost = np.einsum("pr,pr->p", u, u)
    return np.where(resid <= RANGE_RTOL * (1.0 + vn), cost, np.inf)


def rho_eval(structure: HorizontalStructure, p, v) -> float:
    """``rho_p(v)``: squared norm of the minimal preimage, ``inf`` when none exists."""
    v = np.asarray(v, dtype=float)
    if v.shape != (structure.grid.ndim,):
        raise DomainError("tangent vector has the wrong dimension")
    return float(rho_batch(structure.sigma_at(np.asarray(p, dtype=float)[None, :]), v[None, :])[0])


def spectral_bound(sigma: np.ndarray) -> float:
    """Largest eigenvalue of ``sigma sigma^T`` over a batch of maps."""
    return float(np.max(np.linalg.svd(sigma, compute_uv=False)[:, 0] ** 2))


@dataclass(frozen=True)
class ApproximantSchedule:
    """Base form ``g1(v) = g1_scale * |v|^2`` and approximation index ``m``."""

    g1_scale: float
    m: float = INFINITY

    def __post_init__(self):
        if not self.g1_scale > 0:
            raise DomainError("g1_scale must be positive")
        if not (self.m == INFINITY or (float(self.m).is_integer() and self.m >= 1)):
            raise DomainError("m must be a positive integer or infinity")

    @classmethod
    def for_structure(cls, structure: HorizontalStructure, m=INFINITY) -> "ApproximantSchedule":
        return cls(default_g1_scale(structure), m)

    def with_m(self, m) -> "ApproximantSchedule":
        return ApproximantSchedule(self.g1_scale, m)


def clamp_step(w_prev, rho, g1, m: int):
    """One step of the per-direction approximant recurrence (vectorised)."""
    return np.maximum(w_prev, np.minimum((1.0 - 2.0 ** (-m)) * rho, m * g1))


def approximant_weight(structure, schedule: ApproximantSchedule, p, v, w_prev=None) -> float:
    """Approximant value at index ``schedule.m`` for direction ``v`` at ``p``.

    For ``m = 1`` this is ``g1(v)``.  For ``m >= 2`` it is one clamp step from
    ``w_prev`` (the value at ``m - 1``); when ``w_prev`` is None the chain is
    rebuilt from ``m = 1``.  ``m = inf`` returns ``rho`` itself.
    """
    v = np.asarray(v, dtype=float)
    g1 = schedule.g1_scale * float(v @ v)
    if schedule.m == INFINITY:
        return rho_eval(structure, p, v)
    m = int(schedule.m)
    if m == 1:
        return g1
    rho = rho_eval(structure, p, v)
    if w_prev is None:
        w_prev = g1
        for j in range(2, m):
            w_prev = float(clamp_step(w_prev, rho, g1, j))
    return float(clamp_step(w_prev, rho, g1, m))


def _reduced_layout(structure: HorizontalStructure):
    """Reduced lattice for edge tables: local indices, absolute indices, strides."""
    grid = structure.grid
    shape = np.array(grid.shape)
    inv = set(structure.invariant_axes)
    rshape = np.where([d in inv for d in range(grid.ndim)], 1, shape)
    rstrides = np.zeros(grid.ndim, dtype=np.int64)
    s = 1
    for d in range(grid.ndim - 1, -1, -1):
        if d not in inv:
            rstrides[d] = s
            s *= int(rshape[d])
    loc = np.stack(np.unravel_index(np.arange(int(np.prod(rshape))), tuple(rshape)), axis=1).astype(np.int64)
    absidx = loc + np.where([d in inv for d in range(grid.ndim)], 0, grid.lo_idx)
    return loc, absidx, rstrides


@dataclass
class EdgeTables:
    """Per reduced position and positive stencil row: edge vector data, rho and g1."""

    rstrides: np.ndarray
    rho: np.ndarray
    sqnorm: np.ndarray
    abs_idx: np.ndarray


def edge_tables(structure: HorizontalStructure) -> EdgeTables:
    grid = structure.grid
    loc, absidx, rstrides = _reduced_layout(structure)
    half = grid.half
    ks = np.arange(half)
    vec = grid.edge_vectors(absidx, ks)
    P = len(absidx)
    base = absidx * np.array(grid.h)
    if structure.tabulated:
        # average of the two endpoint costs; edges leaving the box get inf
        shape = np.array(grid.shape)
        rho = np.full((P, half), np.inf)
        sig_here = structure.table[tuple(loc.T)]
        for j, k in enumerate(ks):
            nb = np.array([grid.step(a, k) for a in absidx]) - grid.lo_idx
            ok = np.all((nb >= 0) & (nb < shape), axis=1)
            r0 = rho_batch(sig_here, vec[:, j])
            sig_nb = structure.table[tuple(np.clip(nb, 0, shape - 1).T)]
            r1 = rho_batch(sig_nb, vec[:, j])
            rho[:, j] = np.where(ok, 0.5 * (r0 + r1), np.inf)
    else:
        mid = base[:, None, :] + 0.5 * vec
        flat_mid = mid.reshape(-1, grid.ndim)
        rho = rho_batch(structure.sigma_at(flat_mid), vec.reshape(-1, grid.ndim)).reshape(P, half)
    sqnorm = np.einsum("pkn,pkn->pk", vec, vec)
    return EdgeTables(rstrides, rho, sqnorm, absidx)


def default_g1_scale(structure: HorizontalStructure) -> float:
    """``(1 - 1e-6) / Lambda`` with Lambda the spectral bound over grid points and edge midpoints."""
    grid = structure.grid
    _, absidx, _ = _reduced_layout(structure)
    base = absidx * np.array(grid.h)
    if structure.tabulated:
        sig = structure.table.reshape((-1,) + structure.table.shape[-2:])
    else:
        vec = grid.edge_vectors(absidx, np.arange(grid.half))
        mids = (base[:, None, :] + 0.5 * vec).reshape(-1, grid.ndim)
        sig = structure.sigma_at(np.concatenate([base, mids]))
    lam = spectral_bound(sig)
    if not lam > 0:
        raise DomainError("sigma vanishes identically; no positive base form exists")
    return (1.0 - G1_SAFETY) / lam


def weight_table(tables: EdgeTables, schedule: ApproximantSchedule) -> np.ndarray:
    """Squared edge lengths at index ``schedule.m`` (``inf`` marks omitted edges)."""
    g1 = schedule.g1_scale * tables.sqnorm
    if schedule.m == INFINITY:
        return tables.rho.copy()
    w = g1.copy()
    for j in range(2, int(schedule.m) + 1):
        w = clamp_step(w, tables.rho, g1, j)
    return w


def weight_chain(tables: EdgeTables, schedule: ApproximantSchedule, m_values: Sequence) -> dict:
    """Squared edge lengths for several indices from a single pass of the recurrence."""
    g1 = schedule.g1_scale * tables.sqnorm
    want = sorted({int(m) for m in m_values if m != INFINITY})
    out = {}
    w = g1.copy()
    if 1 in want:
        out[1] = w.copy()
    for j in range(2, (want[-1] if want else 1) + 1):
        w = clamp_step(w, tables.rho, g1, j)
        if j in want:
            out[j] = w.copy()
    if any(m == INFINITY for m in m_values):
        out[INFINITY] = tables.rho.copy()
    return out


class StencilSolver:
    """Shortest paths on the stencil graph of a structure at one approximation index."""

    def __init__(self, structure: HorizontalStructure, schedule: ApproximantSchedule, tables: EdgeTables | None = None,
                 weights: np.ndarray | None = None):
        self.structure = structure
        self.schedule = schedule
        self.grid = structure.grid
        self.tables = tables if tables is not None else edge_tables(structure)
        w = weights if weights is not None else weight_table(self.tables, schedule)
        lengths = np.sqrt(w)
        # drop stencil rows that are omitted everywhere (non-horizontal rows at m = inf)
        half = self.grid.half
        live = np.flatnonzero(np.any(np.isfinite(lengths), axis=0))
        self.rows = np.concatenate([live, live + half])
        self.stencil = self.grid.stencil[self.rows]
        self.lengths = np.ascontiguousarray(lengths[:, live])

    def _canonical(self, p, q) -> tuple[int, int]:
        return self.grid.index_of(p), self.grid.index_of(q)

    def distances_from(self, p) -> np.ndarray:
        src = self.grid.index_of(p)
        dist, _ = self.grid._run(self.tables.rstrides, self.lengths, src, -1, self.stencil)
        return dist

    def solve(self, p, q) -> tuple[float, np.ndarray]:
        """Distance and the node sequence of a shortest path from p to q.

        The search always starts from the smaller node index so that the
        result is exactly symmetric in its arguments.
        """
        a, b = self._canonical(p, q)
        flip = a > b
        src, dst = (b, a) if flip else (a, b)
        if len(self.stencil) == 0:
            dist, pred = np.full(self.grid.size, np.inf), np.full(self.grid.size, -1)
            dist[src] = 0.0
        else:
            dist, pred = self.grid._run(self.tables.rstrides, self.lengths, src, dst, self.stencil)
        if math.isinf(dist[dst]):
            raise DisconnectedError(
                f"points {tuple(self.grid.coords_of(src))} and {tuple(self.grid.coords_of(dst))} "
                f"are not joined by admissible edges", (src, dst))
        path = self._path(pred, src, dst)
        if flip:
            path = path[::-1]
        return float(dist[dst]), path

    def _path(self, pred, src, dst) -> np.ndarray:
        half = len(self.stencil) // 2
        nodes = [dst]
        v = dst
        while v != src:
            k = int(pred[v])
            inv = k + half if k < half else k - half
            idx = self.grid.abs_index(v)
            off = self.stencil[inv].copy()
            if self.grid.law == "heisenberg":
                off[2] += idx[0] * off[1] - idx[1] * off[0]
            v = int(np.ravel_multi_index(tuple(idx + off - self.grid.lo_idx), self.grid.shape))
            nodes.append(v)
        return np.array(nodes[::-1], dtype=np.int64)

    def path_edges_finite(self, path: np.ndarray) -> bool:
        """Whether every edge of a node path has finite cost rho."""
        grid = self.grid
        rows = {tuple(r): j for j, r in enumerate(grid.stencil)}
        half = grid.half
        for u, v in zip(path[:-1], path[1:]):
            iu, iv = grid.abs_index(int(u)), grid.abs_index(int(v))
            off = iv - iu
            if grid.law == "heisenberg":
                off[2] -= iu[0] * off[1] - iu[1] * off[0]
            k = rows[tuple(off)]
            start = iu if k < half else iv
            kk = k if k < half else k - half
            r = int(np.dot(np.where(self.tables.rstrides > 0, start - grid.lo_idx, 0), self.tables.rstrides))
            if not np.isfinite(self.tables.rho[r, kk]):
                return False
        return True


def cc_distance(structure: HorizontalStructure, schedule: ApproximantSchedule, p, q) -> float:
    """Stencil-graph approximation of the Carnot-Caratheodory distance at index ``schedule.m``."""
    return StencilSolver(structure, schedule).solve(p, q)[0]


@dataclass
class MonotoneReport:
    m_values: list
    pairs: list
    distances: np.ndarray  # (pairs, m_values)
    monotone: bool
    dominated: bool

    @property
    def passed(self) -> bool:
        return self.monotone and self.dominated

    def rows(self):
        for i, (p, q) in enumerate(self.pairs):
            for j, m in enumerate(self.m_values):
                yield p, q, m, float(self.distances[i, j])


def monotone_convergence_report(structure: HorizontalStructure, pairs: Sequence, m_values: Sequence,
                                schedule: ApproximantSchedule | None = None) -> MonotoneReport:
    """Distances per pair and per index, with the monotonicity and domination checks.

    Columns must be nondecreasing in ``m`` and bounded by the ``m = inf``
    column; both comparisons are exact.
    """
    schedule = schedule or ApproximantSchedule.for_structure(structure)
    ms = sorted(m_values, key=lambda m: (m == INFINITY, m))
    tables = edge_tables(structure)
    chain = weight_chain(tables, schedule, ms)
    solvers = [StencilSolver(structure, schedule.with_m(m), tables, chain[m]) for m in ms]
    D = np.array([[s.solve(p, q)[0] for s in solvers] for p, q in pairs]).reshape(len(pairs), len(ms))
    monotone = bool(np.all(np.diff(D, axis=1) >= 0))
    dominated = True
    if ms and ms[-1] == INFINITY:
        dominated = bool(np.all(D <= D[:, -1:]))
    return MonotoneReport(list(ms), [tuple(map(tuple, pq)) for pq in pairs], D, monotone, dominated)


def random_grid_pairs(grid: GridDomain, count: int, seed=0, inset: float = 0.25) -> list:
    """Distinct pairs of lattice points from the box shrunk by ``inset`` of its width per side."""
    rng = derive_rng(seed, "grid-pairs")
    lo, hi = np.array(grid.lo), np.array(grid.hi)
    a, b = lo + inset * (hi - lo), hi - inset * (hi - lo)
    h = np.array(grid.h)
    ia, ib = np.ceil(a / h - 1e-9).astype(np.int64), np.floor(b / h + 1e-9).astype(np.int64)
    if np.any(ib < ia) or np.prod(ib - ia + 1) < 2:
        raise DomainError("inset box holds fewer than two lattice points")
    out = []
    while len(out) < count:
        p, q = rng.integers(ia, ib + 1, (2, grid.ndim))
        if np.any(p != q):
            out.append((tuple(float(x) for x in p * h), tuple(float(x) for x in q * h)))
    return out


# --- model catalog -----------------------------------------------------------

def _sigma_euclidean(n):
    def sigma(pts):
        return np.broadcast_to(np.eye(n), (len(pts), n, n)).copy()
    return sigma


def _sigma_heisenberg(pts):
    out = np.zeros((len(pts), 3, 2))
    out[:, 0, 0] = 1.0
    out[:, 1, 1] = 1.0
    out[:, 2, 0] = -pts[:, 1] / 2
    out[:, 2, 1] = pts[:, 0] / 2
    return out


def _sigma_grushin(pts):
    out = np.zeros((len(pts), 2, 2))
    out[:, 0, 0] = 1.0
    out[:, 1, 1] = pts[:, 0]
    return out


MODELS = ("euclidean", "heisenberg", "grushin")

DEFAULT_BOXES = {
    "euclidean": None,
    "heisenberg": ((-0.6, -0.1, -0.1), (0.6, 1.2, 1.1)),
    "grushin": ((-1.5, -1.0), (1.5, 1.0)),
}


def default_grid(name: str, h: float = 1 / 32, radius: int = 2, lo=None, hi=None, dim: int = 2) -> GridDomain:
    """Catalog grid for a model; boxes default to ``DEFAULT_BOXES`` ([0, 2]^dim for euclidean)."""
    if name not in MODELS:
        raise DomainError(f"unknown model {name!r}; expected one of {MODELS}")
    if lo is None or hi is None:
        box = DEFAULT_BOXES[name] or ((0.0,) * dim, (2.0,) * dim)
        lo = box[0] if lo is None else lo
        hi = box[1] if hi is None else hi
    law = "heisenberg" if name == "heisenberg" else "additive"
    return GridDomain.box(lo, hi, h, radius, law)


def model_catalog(name: str, grid: GridDomain) -> HorizontalStructure:
    """Catalog structures: ``euclidean`` (any n), ``heisenberg`` and ``grushin``."""
    n = grid.ndim
    if name == "euclidean":
        return HorizontalStructure(grid, _sigma_euclidean(n), invariant_axes=tuple(range(n)), name="euclidean")
    if name == "heisenberg":
        if n != 3 or grid.law != "heisenberg":
            raise DomainError("the Heisenberg model needs a 3-D Heisenberg lattice")
        return HorizontalStructure(grid, _sigma_heisenberg, invariant_axes=(2,), name="heisenberg")
    if name == "grushin":
        if n != 2:
            raise DomainError("the Grushin model is planar")
        return HorizontalStructure(grid, _sigma_grushin, invariant_axes=(1,), name="grushin")
    raise DomainError(f"unknown model {name!r}; expected one of {MODELS}")


# --- planar norms ------------------------------------------------------------

@dataclass(frozen=True)
class NormFieldPlanar:
    """A constant norm on R^2: ``euclidean``, ``sup``, ``ell1`` or ``p`` (with exponent)."""

    kind: str = "euclidean"
    p: float | None = None

    def __post_init__(self):
        if self.kind not in ("euclidean", "sup", "ell1", "p"):
            raise DomainError(f"unknown norm {self.kind!r}")
        if self.kind == "p" and not (self.p is not None and self.p >= 1):
            raise DomainError("p-norm needs an exponent p >= 1")

    def __call__(self, v) -> np.ndarray | float:
        v = np.asarray(v, dtype=float)
        if self.kind == "euclidean":
            out = np.linalg.norm(v, axis=-1)
        elif self.kind == "sup":
            out = np.max(np.abs(v), axis=-1)
        elif self.kind == "ell1":
            out = np.sum(np.abs(v), axis=-1)
        else:
            out = np.sum(np.abs(v) ** self.p, axis=-1) ** (1.0 / self.p)
        return float(out) if np.ndim(out) == 0 else out

    @classmethod
    def parse(cls, text: str) -> "NormFieldPlanar":
        """``euclidean``, ``sup``, ``ell1``, or ``p=<exponent>``."""
        if text.startswith("p="):
            return cls("p", float(text[2:]))
        return cls(text)


def finsler_length(curve: PolygonalCurve, field: NormFieldPlanar) -> float:
    pts = np.asarray(curve.waypoints, dtype=float)
    if len(pts) == 1:
        return 0.0
    if pts.ndim != 2 or pts.shape[1] != 2:
        raise DomainError("Finsler lengths need planar waypoints")
    return float(np.sum(field(np.diff(pts, axis=0))))
