"""Degree census, connectivity and the two-hop neighbourhood diagnostic."""
from __future__ import annotations

from dataclasses import dataclass

import numba as nb
import numpy as np

from .errors import InvalidArgument
from .sampler import Graph, MarkedConfiguration


@dataclass(frozen=True)
class DegreeSummary:
    counts: dict
    n: int

    def __getitem__(self, k):
        return self.counts.get(k, 0)


def degree_summary(g: Graph) -> DegreeSummary:
    values, freq = np.unique(g.degrees, return_counts=True)
    return DegreeSummary({int(k): int(c) for k, c in zip(values, freq)}, g.n)


@nb.njit(cache=True)
def _find(parent, x):
    root = x
    while parent[root] != root:
        root = parent[root]
    while parent[x] != root:
        parent[x], x = root, parent[x]
    return root


@nb.njit(cache=True)
def _component_count(n, edges):
    parent = np.arange(n)
    size = np.ones(n, dtype=np.int64)
    comps = n
    for e in range(edges.shape[0]):
        a = _find(parent, edges[e, 0])
        b = _find(parent, edges[e, 1])
        if a == b:
            continue
        if size[a] < size[b]:
            a, b = b, a
        parent[b] = a
        size[a] += size[b]
        comps -= 1
        if comps == 1:
            break
    return comps


def component_count(g: Graph) -> int:
    return int(_component_count(g.n, g.edges)) if g.n else 0


def is_connected(g: Graph) -> bool:
    """One component; graphs with at most one vertex count as connected."""
    if g.n <= 1:
        return True
    if np.any(g.degrees == 0):
        return False
    return component_count(g) == 1


@nb.njit(cache=True)
def _sorted_intersect(a, b):
    i = 0
    j = 0
    while i < a.shape[0] and j < b.shape[0]:
        if a[i] == b[j]:
            return True
        if a[i] < b[j]:
            i += 1
        else:
            j += 1
    return False


@nb.njit(cache=True)
def _all_within_two_hops(pairs, indptr, indices):
    for p in range(pairs.shape[0]):
        x = pairs[p, 0]
        y = pairs[p, 1]
        nx = indices[indptr[x]:indptr[x + 1]]
        ny = indices[indptr[y]:indptr[y + 1]]
        # direct neighbours: y appears in x's sorted list
        k = np.searchsorted(nx, y)
        if k < nx.shape[0] and nx[k] == y:
            continue
        if not _sorted_intersect(nx, ny):
            return False
    return True


def close_pairs(config: MarkedConfiguration, radius: float) -> np.ndarray:
    """All index pairs (i < j) at wrapped distance <= radius."""
    from scipy.spatial import cKDTree

    if config.n < 2 or radius <= 0:
        return np.empty((0, 2), dtype=np.int64)
    radius = min(radius, np.sqrt(config.d) / 2)
    # the periodic tree wants coordinates in [0, 1)
    tree = cKDTree(np.mod(config.positions + 0.5, 1.0), boxsize=1.0)
    return tree.query_pairs(radius, output_type="ndarray").astype(np.int64)


def one_hop_cover_check(g: Graph, config: MarkedConfiguration, cover_radius: float) -> bool:
    """True iff every pair within cover_radius is joined by an edge or a common neighbour."""
    if cover_radius < 0:
        raise InvalidArgument(f"cover radius must be non-negative, got {cover_radius}")
    if g.n != config.n:
        raise InvalidArgument("graph and configuration sizes differ")
    pairs = close_pairs(config, cover_radius)
    if len(pairs) == 0:
        return True
    indptr, indices = g.adjacency()
    return bool(_all_within_two_hops(pairs, indptr, indices))
