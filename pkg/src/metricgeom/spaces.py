"""Sample metric spaces and seeded random streams."""

from __future__ import annotations

import zlib

import numpy as np

from .metric import FiniteMetricSpace, LengthGraph, shortest_path_metric


def derive_rng(seed, *labels) -> np.random.Generator:
    """Independent generator for a labelled sub-stream of ``seed``.

    The same seed and labels always give the same stream; a Generator passed
    as ``seed`` is used directly.
    """
    if isinstance(seed, np.random.Generator):
        return seed
    key = tuple(zlib.crc32(str(lab).encode()) for lab in labels)
    return np.random.default_rng(np.random.SeedSequence(int(seed) % 2**64, spawn_key=key))


def path_graph_metric(positions) -> FiniteMetricSpace:
    """Graph metric of sorted points on a line joined consecutively."""
    x = np.sort(np.asarray(positions, dtype=float))
    n = len(x)
    edges = np.stack([np.arange(n - 1), np.arange(1, n)], axis=1)
    return shortest_path_metric(LengthGraph(n, edges, np.diff(x)))


def interval_sample(n: int, seed=0) -> FiniteMetricSpace:
    """``n`` uniform samples of [0, 1] with the path-graph metric."""
    x = derive_rng(seed, "interval").uniform(0.0, 1.0, n)
    return path_graph_metric(x)


def cycle_graph_metric(n: int, radius: float = 1.0) -> tuple[FiniteMetricSpace, np.ndarray]:
    """Regular n-gon on a circle with its cycle-graph metric, plus coordinates."""
    theta = 2 * np.pi * np.arange(n) / n
    pts = radius * np.stack([np.cos(theta), np.sin(theta)], axis=1)
    edges = np.stack([np.arange(n), (np.arange(n) + 1) % n], axis=1)
    lengths = np.linalg.norm(pts[edges[:, 0]] - pts[edges[:, 1]], axis=1)
    return shortest_path_metric(LengthGraph(n, edges, lengths)), pts


def cantor_points(n: int, depth: int = 12, seed=0) -> np.ndarray:
    """``n`` distinct left endpoints of level-``depth`` middle-thirds Cantor intervals."""
    if n > 2**depth:
        raise ValueError(f"only {2**depth} distinct points at depth {depth}")
    rng = derive_rng(seed, "cantor")
    codes = rng.choice(2**depth, size=n, replace=False)
    bits = (codes[:, None] >> np.arange(depth)[None, ::-1]) & 1
    return np.sort((2 * bits * 3.0 ** -np.arange(1, depth + 1)).sum(axis=1))


def cantor_sample(n: int, depth: int = 12, seed=0) -> FiniteMetricSpace:
    return FiniteMetricSpace.from_points(cantor_points(n, depth, seed))


def square_sample(n: int, seed=0) -> FiniteMetricSpace:
    """``n`` uniform samples of the unit square with the Euclidean metric."""
    return FiniteMetricSpace.from_points(derive_rng(seed, "square").uniform(0.0, 1.0, (n, 2)))
