import io
import math

import numpy as np
import pytest
from scipy import stats

from sfrcm.errors import InvalidArgument
from sfrcm.model import ModelParams, edge_probability, torus_distance, TorusPoint
from sfrcm.sampler import (
    Graph,
    MarkedConfiguration,
    pair_uniform,
    read_sample,
    sample_configuration,
    sample_graph,
    write_sample,
)

P = ModelParams(2, 4, 1.5)


def fixed_config(pos, w, seed=0):
    return MarkedConfiguration(np.asarray(pos, float), np.asarray(w, float), 1.0, seed)


def brute_force_probs(config, params, radius):
    n = config.n
    out = {}
    for i in range(n):
        for j in range(i + 1, n):
            dist = torus_distance(TorusPoint(config.positions[i]), TorusPoint(config.positions[j]))
            out[i, j] = edge_probability(params.eta, config.weights[i], config.weights[j], dist / radius,
                                         params.alpha)
    return out


def test_configuration_count_is_poisson():
    counts = np.array([sample_configuration(P, 50.0, seed).n for seed in range(4000)])
    assert abs(counts.mean() - 50) < 4 * math.sqrt(50 / 4000)
    fano = counts.var(ddof=1) / counts.mean()
    assert 0.9 < fano < 1.1


def test_configuration_marks():
    c = sample_configuration(P, 20000.0, 7)
    assert c.positions.shape == (c.n, 2)
    assert np.all(c.positions > -0.5) and np.all(c.positions <= 0.5)
    assert c.weights.min() >= 1
    assert stats.kstest(c.weights, lambda x: 1 - x ** -1.5).pvalue > 0.001
    assert stats.kstest(c.positions[:, 1] + 0.5, "uniform").pvalue > 0.001


def test_configuration_deterministic():
    assert sample_configuration(P, 300.0, 5) == sample_configuration(P, 300.0, 5)
    assert sample_configuration(P, 300.0, 5) != sample_configuration(P, 300.0, 6)
    with pytest.raises(InvalidArgument):
        sample_configuration(P, 0.0, 1)


def test_graph_deterministic_and_thread_independent():
    c = sample_configuration(P, 3000.0, 11)
    g1 = sample_graph(c, P, 0.02, 11)
    assert g1 == sample_graph(c, P, 0.02, 11)
    assert g1 == sample_graph(c, P, 0.02, 11, workers=8)
    assert g1 != sample_graph(c, P, 0.02, 12)
    assert np.all(g1.edges[:, 0] < g1.edges[:, 1])
    assert len(np.unique(g1.edges, axis=0)) == g1.num_edges
    assert g1.degrees.sum() == 2 * g1.num_edges


def test_generic_alpha_kernel_matches_pair_rule():
    for alpha in (4.0, 3.0, 2.7):
        params = ModelParams(2, alpha, 2.0)
        c = sample_configuration(params, 60.0, 3)
        g = sample_graph(c, params, 0.1, 9)
        probs = brute_force_probs(c, params, 0.1)
        want = sorted(pair for pair, p in probs.items() if pair_uniform(9, *pair) < p)
        assert [tuple(e) for e in g.edges.tolist()] == want


def test_extreme_probabilities():
    c = fixed_config([[0, 0], [0.01, 0], [0.02, 0]], [1, 1, 1])
    full = sample_graph(c, P, 10.0, 1)
    assert full.num_edges == 3
    empty = sample_graph(c, ModelParams(2, 4, 1.5, 0.0), 10.0, 1)
    assert empty.num_edges == 0
    far = fixed_config([[0, 0], [0.5, 0.5]], [1, 1])
    assert sample_graph(far, P, 1e-6, 1).num_edges == 0
    assert sample_graph(fixed_config(np.empty((0, 2)), []), P, 0.1, 1).n == 0


def test_two_vertex_edge_frequency():
    c = fixed_config([[0.0, 0.0], [0.2, 0.0]], [2.0, 3.0])
    p = 0.31271072120902776  # eta=1, alpha=4, weights 2 and 3, distance/r = 2
    draws = 20000
    hits = sum(sample_graph(c, P, 0.1, seed).num_edges for seed in range(draws))
    assert abs(hits / draws - p) < 4 * math.sqrt(p * (1 - p) / draws)


def test_pair_marginals_match_connection_probability():
    # every pair of a fixed 5-point configuration, independent of its labels
    c = fixed_config([[0, 0], [0.05, 0.02], [-0.1, 0.3], [0.45, -0.45], [0.2, 0.1]], [1, 4, 1.5, 30, 2])
    probs = brute_force_probs(c, P, 0.08)
    draws = 10000
    freq = dict.fromkeys(probs, 0)
    for seed in range(draws):
        for i, j in sample_graph(c, P, 0.08, seed).edges.tolist():
            freq[i, j] += 1
    for pair, p in probs.items():
        se = math.sqrt(max(p * (1 - p), 1e-12) / draws)
        assert abs(freq[pair] / draws - p) <= 4 * se + 1e-9


def test_truncation_requires_acknowledgement():
    c = sample_configuration(P, 500.0, 2)
    with pytest.raises(InvalidArgument):
        sample_graph(c, P, 0.05, 2, truncate_radius=0.3)
    full = sample_graph(c, P, 0.05, 2)
    cut = sample_graph(c, P, 0.05, 2, truncate_radius=0.3, accept_bias=True)
    # truncation only drops edges, and the ones it keeps are decided identically
    assert set(map(tuple, cut.edges.tolist())) <= set(map(tuple, full.edges.tolist()))
    assert cut.num_edges > 0.9 * full.num_edges


def test_invalid_arguments():
    c = sample_configuration(P, 10.0, 1)
    with pytest.raises(InvalidArgument):
        sample_graph(c, P, 0.0, 1)
    with pytest.raises(InvalidArgument):
        sample_graph(c, ModelParams(3, 4, 1.5), 0.1, 1)
    with pytest.raises(InvalidArgument):
        Graph.from_edges(3, [(0, 3)])


def test_graph_from_edges_normalises():
    g = Graph.from_edges(4, [(2, 1), (1, 2), (3, 3), (0, 3)])
    assert g.edges.tolist() == [[0, 3], [1, 2]]
    assert g.degrees.tolist() == [1, 1, 1, 1]
    indptr, indices = g.adjacency()
    assert indptr.tolist() == [0, 1, 2, 3, 4]
    assert indices.tolist() == [3, 2, 1, 0]


def test_write_read_roundtrip():
    c = sample_configuration(P, 200.0, 4)
    g = sample_graph(c, P, 0.05, 4)
    buf = io.StringIO()
    write_sample(buf, c, P, 0.05, g)
    buf.seek(0)
    meta, c2, g2 = read_sample(buf)
    assert c2 == c and g2 == g
    assert float(meta["radius"]) == 0.05 and int(meta["n"]) == c.n
    with pytest.raises(InvalidArgument):
        read_sample(io.StringIO("junk\n"))
