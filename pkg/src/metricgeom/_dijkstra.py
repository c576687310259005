"""Single-source Dijkstra over an implicit stencil graph on a box lattice.

Nodes are flattened (C order) lattice multi-indices.  Neighbours are found by
adding integer offsets; under the Heisenberg law the third offset component is
transported by the group product, ``k' = k + c + i*b - j*a`` in absolute
indices.  Edge lengths are looked up in a table indexed by a reduced position
(axes the weights do not depend on have zero reduced stride) and by the
positive half of the stencil, so that both orientations of an edge read the
same number.
"""

import numpy as np
from numba import njit

ADDITIVE = 0
HEISENBERG = 1


@njit(cache=True, inline="always")
def _sift_up(heap, pos, key, i):
    node = heap[i]
    k = key[node]
    while i > 0:
        parent = (i - 1) >> 1
        pn = heap[parent]
        if key[pn] <= k:
            break
        heap[i] = pn
        pos[pn] = i
        i = parent
    heap[i] = node
    pos[node] = i


@njit(cache=True, inline="always")
def _sift_down(heap, pos, key, i, size):
    node = heap[i]
    k = key[node]
    while True:
        child = 2 * i + 1
        if child >= size:
            break
        right = child + 1
        if right < size and key[heap[right]] < key[heap[child]]:
            child = right
        cn = heap[child]
        if key[cn] >= k:
            break
        heap[i] = cn
        pos[cn] = i
        i = child
    heap[i] = node
    pos[node] = i


@njit(cache=True)
def stencil_dijkstra(shape, lo_idx, rstrides, offsets, half, law, table, source, target):
    ndim = shape.shape[0]
    n_nodes = 1
    for d in range(ndim):
        n_nodes *= shape[d]
    strides = np.empty(ndim, np.int64)
    s = 1
    for d in range(ndim - 1, -1, -1):
        strides[d] = s
        s *= shape[d]

    dist = np.full(n_nodes, np.inf)
    pred = np.full(n_nodes, -1, np.int16)
    done = np.zeros(n_nodes, np.bool_)
    heap = np.empty(n_nodes, np.int32)
    pos = np.full(n_nodes, -1, np.int32)

    dist[source] = 0.0
    heap[0] = source
    pos[source] = 0
    size = 1

    idx = np.empty(ndim, np.int64)
    nb = np.empty(ndim, np.int64)
    n_off = offsets.shape[0]

    while size > 0:
        u = heap[0]
        size -= 1
        if size > 0:
            heap[0] = heap[size]
            pos[heap[0]] = 0
            _sift_down(heap, pos, dist, 0, size)
        pos[u] = -1
        done[u] = True
        if u == target:
            break
        rem = u
        ru = 0
        for d in range(ndim):
            idx[d] = rem // strides[d]
            rem -= idx[d] * strides[d]
            ru += idx[d] * rstrides[d]
        du = dist[u]
        for k in range(n_off):
            inside = True
            v = 0
            rv = 0
            for d in range(ndim):
                o = offsets[k, d]
                if law == 1 and d == 2:
                    o += (idx[0] + lo_idx[0]) * offsets[k, 1] - (idx[1] + lo_idx[1]) * offsets[k, 0]
                c = idx[d] + o
                if c < 0 or c >= shape[d]:
                    inside = False
                    break
                nb[d] = c
                v += c * strides[d]
                rv += c * rstrides[d]
            if not inside or done[v]:
                continue
            if k < half:
                w = table[ru, k]
            else:
                w = table[rv, k - half]
            if w == np.inf:
                continue
            nd = du + w
            if nd < dist[v]:
                dist[v] = nd
                pred[v] = k
                if pos[v] < 0:
                    heap[size] = v
                    pos[v] = size
                    size += 1
                    _sift_up(heap, pos, dist, size - 1)
                else:
                    _sift_up(heap, pos, dist, pos[v])
    return dist, pred
