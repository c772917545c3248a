"""Marked Poisson configurations on the torus and exact random-graph sampling.

Every pair (i, j), i < j, owns the uniform at Philox counter (j, i, EDGE, 0)
under the graph seed, so the edge set does not depend on loop order or on
how rows are split between workers.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import TextIO

import numba as nb
import numpy as np

from .errors import InvalidArgument
from .model import MarkedPoint, ModelParams, TorusPoint, pareto_quantile
from .rng import (
    STREAM_COUNT,
    STREAM_EDGE,
    STREAM_POSITION,
    STREAM_WEIGHT,
    UniformStream,
    philox4x32,
    poisson,
    split_key,
    to_unit,
    uniforms,
)


@dataclass(frozen=True, eq=False)
class MarkedConfiguration:
    """n points in (-1/2, 1/2]^d with Pareto weights.

    Stored column-wise; ``points`` builds MarkedPoint objects on demand.
    """

    positions: np.ndarray
    weights: np.ndarray
    intensity_s: float
    seed: int

    @property
    def n(self) -> int:
        return len(self.weights)

    @property
    def d(self) -> int:
        return self.positions.shape[1]

    @property
    def points(self) -> list[MarkedPoint]:
        return [MarkedPoint(TorusPoint(p), float(w)) for p, w in zip(self.positions, self.weights)]

    def __eq__(self, other):
        if not isinstance(other, MarkedConfiguration):
            return NotImplemented
        return (self.intensity_s == other.intensity_s and self.seed == other.seed
                and np.array_equal(self.positions, other.positions)
                and np.array_equal(self.weights, other.weights))


@dataclass(frozen=True, eq=False)
class Graph:
    """Simple undirected graph: sorted edge array (i < j) and degree counts."""

    n: int
    edges: np.ndarray
    degrees: np.ndarray = field(default=None)

    def __post_init__(self):
        e = np.asarray(self.edges, dtype=np.int64).reshape(-1, 2)
        object.__setattr__(self, "edges", e)
        if self.degrees is None:
            object.__setattr__(self, "degrees", np.bincount(e.ravel(), minlength=self.n).astype(np.int64))

    @classmethod
    def from_edges(cls, n, pairs):
        """Normalise arbitrary pairs: orient i < j, drop loops and duplicates."""
        e = np.asarray(list(pairs), dtype=np.int64).reshape(-1, 2)
        if e.size and (e.min() < 0 or e.max() >= n):
            raise InvalidArgument("edge endpoint out of range")
        e = np.sort(e, axis=1)
        e = e[e[:, 0] != e[:, 1]]
        e = np.unique(e, axis=0)
        return cls(n, e)

    @property
    def num_edges(self) -> int:
        return len(self.edges)

    def adjacency(self):
        """CSR (indptr, indices) with each neighbour list sorted."""
        return _csr(self.n, self.edges)

    def __eq__(self, other):
        if not isinstance(other, Graph):
            return NotImplemented
        return self.n == other.n and np.array_equal(self.edges, other.edges)


def _csr(n, edges):
    both = np.concatenate([edges, edges[:, ::-1]]) if len(edges) else np.empty((0, 2), np.int64)
    order = np.lexsort((both[:, 1], both[:, 0]))
    both = both[order]
    indptr = np.zeros(n + 1, dtype=np.int64)
    np.cumsum(np.bincount(both[:, 0], minlength=n), out=indptr[1:])
    return indptr, np.ascontiguousarray(both[:, 1])


# --- configurations -------------------------------------------------------------

def sample_configuration(params: ModelParams, s: float, seed: int) -> MarkedConfiguration:
    """Poisson(s) many uniform points, each with an independent Pareto(beta) weight."""
    if not (s > 0 and math.isfinite(s)):
        raise InvalidArgument(f"intensity must be positive and finite, got {s}")
    n = poisson(s, UniformStream(seed, STREAM_COUNT))
    d = params.d
    pos = 0.5 - uniforms(seed, n * d, STREAM_POSITION).reshape(n, d)
    w = pareto_quantile(params.beta, 1.0 - uniforms(seed, n, STREAM_WEIGHT)) if n else np.empty(0)
    return MarkedConfiguration(pos, np.atleast_1d(w), float(s), int(seed))


# --- the pair kernel -------------------------------------------------------------------

def _make_row_kernel(generic):
    # generic=False: alpha/2 is an integer or half-integer, the power is
    # built from multiplications and one sqrt. A separate compiled kernel per
    # case lets the hot loop vectorise.
    @nb.njit(inline="always")
    def ratio_power(y, half, ihalf, has_sqrt):
        if generic:
            return math.exp(half * math.log(y))
        v = 1.0
        for _ in range(ihalf):
            v *= y
        if has_sqrt:
            v *= math.sqrt(y)
        return v

    @nb.njit(nogil=True, error_model="numpy")
    def edge_rows(pos, w, eta, alpha, r, k0, k1, row_lo, row_hi):
        n, d = pos.shape
        cols = np.ascontiguousarray(pos.T)
        r2 = r * r
        half = alpha * 0.5
        ihalf = int(math.floor(half))
        has_sqrt = (half - ihalf) != 0.0
        ubuf = np.empty(n)
        xbuf = np.empty(n)
        row = np.empty(n, dtype=np.int64)
        cap = 1024
        out = np.empty((cap, 2), dtype=np.int64)
        m = 0
        stream = np.uint64(4)
        zero = np.uint64(0)
        for i in range(row_lo, row_hi):
            ii = np.uint64(i)
            for j in range(i + 1, n):
                a, b, _, _ = philox4x32(np.uint64(j), ii, stream, zero, k0, k1)
                ubuf[j] = to_unit(a, b)
            ci = eta * w[i]
            xbuf[i + 1:] = 0.0
            for c in range(d):
                col = cols[c]
                pc = col[i]
                for j in range(i + 1, n):
                    dx = pc - col[j]
                    dx -= np.round(dx)
                    xbuf[j] += dx * dx
            # r2 / 0 is inf, giving probability one for coincident points
            for j in range(i + 1, n):
                xbuf[j] = ci * w[j] * ratio_power(r2 / xbuf[j], half, ihalf, has_sqrt)
            hits = 0
            for j in range(i + 1, n):
                u = ubuf[j]
                x = xbuf[j]
                # 1 - exp(-x) <= x, so the cheap test screens out most pairs exactly
                if u < x and u < -math.expm1(-x):
                    row[hits] = j
                    hits += 1
            # growing outside the j loop keeps that loop tight
            if m + hits > cap:
                cap = max(2 * cap, m + hits)
                grown = np.empty((cap, 2), dtype=np.int64)
                grown[:m] = out[:m]
                out = grown
            for h in range(hits):
                out[m, 0] = i
                out[m, 1] = row[h]
                m += 1
        return out[:m]

    return edge_rows


_ROW_KERNELS = {}


def _edge_rows(pos, w, eta, alpha, r, k0, k1, row_lo, row_hi):
    generic = 2.0 * alpha != math.floor(2.0 * alpha) or alpha > 128
    kern = _ROW_KERNELS.get(generic)
    if kern is None:
        kern = _ROW_KERNELS[generic] = _make_row_kernel(generic)
    return kern(pos, w, eta, alpha, r, k0, k1, row_lo, row_hi)


@nb.njit(nogil=True, cache=True)
def _edge_pairs(pos, w, eta, alpha, r, k0, k1, pairs):
    keep = np.zeros(pairs.shape[0], dtype=np.bool_)
    d = pos.shape[1]
    stream = np.uint64(4)
    zero = np.uint64(0)
    for p in range(pairs.shape[0]):
        i = pairs[p, 0]
        j = pairs[p, 1]
        a, b, _, _ = philox4x32(np.uint64(j), np.uint64(i), stream, zero, k0, k1)
        u = to_unit(a, b)
        dist2 = 0.0
        for c in range(d):
            dx = pos[i, c] - pos[j, c]
            dx -= np.round(dx)
            dist2 += dx * dx
        x = np.inf if dist2 == 0.0 else eta * w[i] * w[j] * math.exp(0.5 * alpha * math.log(r * r / dist2))
        keep[p] = u < -math.expm1(-x)
    return keep


def pair_uniform(seed: int, i: int, j: int) -> float:
    """The uniform that decides the pair {i, j} under ``seed``."""
    i, j = min(i, j), max(i, j)
    k0, k1 = split_key(seed)
    a, b, _, _ = philox4x32(np.uint64(j), np.uint64(i), np.uint64(STREAM_EDGE), np.uint64(0), k0, k1)
    return float(to_unit(a, b))


def _row_blocks(n, parts):
    # split rows so each block holds about the same number of pairs
    if n < 2 or parts <= 1:
        return [(0, n)]
    total = n * (n - 1) / 2
    bounds = [0]
    for p in range(1, parts):
        target = total * p / parts
        # rows [0, i) hold i*n - i*(i+1)/2 pairs
        i = int(math.ceil(n - 0.5 - math.sqrt((n - 0.5) ** 2 - 2 * target)))
        if bounds[-1] < i < n:
            bounds.append(i)
    bounds.append(n)
    return list(zip(bounds[:-1], bounds[1:]))


def sample_graph(config: MarkedConfiguration, params: ModelParams, radius: float, seed: int, *,
                 workers: int = 1, truncate_radius: float | None = None,
                 accept_bias: bool = False) -> Graph:
    """Independent Bernoulli edge for every pair with the model's connection probability.

    ``truncate_radius`` only examines pairs closer than that distance; it
    biases the graph and must be acknowledged with ``accept_bias``.
    """
    if not radius > 0:
        raise InvalidArgument(f"radius must be positive, got {radius}")
    if config.n and config.d != params.d:
        raise InvalidArgument(f"configuration has d={config.d}, params have d={params.d}")
    n = config.n
    k0, k1 = split_key(seed)
    pos = np.ascontiguousarray(config.positions, dtype=float)
    w = np.ascontiguousarray(config.weights, dtype=float)
    if n < 2 or params.eta == 0:
        return Graph(n, np.empty((0, 2), np.int64))
    if truncate_radius is not None:
        if not accept_bias:
            raise InvalidArgument("truncated sampling is biased; pass accept_bias=True to use it")
        from scipy.spatial import cKDTree

        tree = cKDTree(np.mod(pos + 0.5, 1.0), boxsize=1.0)
        pairs = tree.query_pairs(truncate_radius, output_type="ndarray").astype(np.int64)
        pairs = pairs[np.lexsort((pairs[:, 1], pairs[:, 0]))] if len(pairs) else pairs.reshape(0, 2)
        keep = _edge_pairs(pos, w, params.eta, params.alpha, radius, k0, k1, pairs)
        return Graph(n, pairs[keep])
    blocks = _row_blocks(n, max(1, int(workers)) * 4 if workers > 1 else 1)
    run = lambda b: _edge_rows(pos, w, params.eta, params.alpha, radius, k0, k1, b[0], b[1])
    if workers > 1 and len(blocks) > 1:
        with ThreadPoolExecutor(workers) as pool:
            parts = list(pool.map(run, blocks))
    else:
        parts = [run(b) for b in blocks]
    return Graph(n, np.concatenate(parts) if parts else np.empty((0, 2), np.int64))


# --- plain-text persistence ---------------------------------------------------------------
#
#   rcm-sample n=<n> s=<s> seed=<seed> d=<d> alpha=<a> beta=<b> eta=<eta> radius=<r> edges=<m>
#   v <x_1> ... <x_d> <weight>        (n lines, index = line order)
#   e <i> <j>                         (m lines, i < j)

def write_sample(fh: TextIO, config: MarkedConfiguration, params: ModelParams, radius: float,
                 graph: Graph) -> None:
    fh.write(f"rcm-sample n={config.n} s={config.intensity_s!r} seed={config.seed} d={params.d} "
             f"alpha={params.alpha!r} beta={params.beta!r} eta={params.eta!r} radius={radius!r} "
             f"edges={graph.num_edges}\n")
    for p, wt in zip(config.positions, config.weights):
        fh.write("v " + " ".join(repr(float(c)) for c in p) + f" {float(wt)!r}\n")
    for i, j in graph.edges:
        fh.write(f"e {i} {j}\n")


def read_sample(fh: TextIO):
    """Inverse of write_sample: (header dict, configuration, graph)."""
    head = fh.readline().split()
    if not head or head[0] != "rcm-sample":
        raise InvalidArgument("not an rcm-sample file")
    meta = dict(tok.split("=", 1) for tok in head[1:])
    n, d, m = int(meta["n"]), int(meta["d"]), int(meta["edges"])
    pos = np.empty((n, d))
    w = np.empty(n)
    for v in range(n):
        parts = fh.readline().split()
        pos[v] = [float(x) for x in parts[1:1 + d]]
        w[v] = float(parts[1 + d])
    edges = np.array([[int(x) for x in fh.readline().split()[1:3]] for _ in range(m)], dtype=np.int64)
    config = MarkedConfiguration(pos, w, float(meta["s"]), int(meta["seed"]))
    return meta, config, Graph(n, edges.reshape(-1, 2))
