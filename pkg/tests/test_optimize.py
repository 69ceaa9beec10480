import itertools

import numpy as np
import pytest
import scipy.sparse as sp

from contentmap.attrgraph import from_edges
from contentmap.codelength import NEW, CodelengthState, FlowContext, content_map_equation, evaluate, relabel
from contentmap.flow import stationary
from contentmap.metrics import f_measure
from contentmap.synth import planted_partition
from contentmap.optimize import (MOVE_EPS, OptimizerConfig, bottom_up, exhaustive, node_order, optimize,
                                 top_down)

import oracle
from conftest import SPLIT, random_graph


def naive_bottom_up(g, prof, use_attr):
    """All-pairs greedy merging straight from the state API."""
    ctx = FlowContext(g, prof)
    labels = np.arange(g.n)
    while True:
        state = CodelengthState(ctx, labels, use_attr)
        if state.m == 1:
            return relabel(labels)
        deltas = [(state.delta_merge(i, j), i, j) for i, j in itertools.combinations(range(state.m), 2)]
        v = min(d for d, _, _ in deltas)
        if not v < -MOVE_EPS:
            return relabel(labels)
        _, i, j = next(t for t in deltas if t[0] <= v + MOVE_EPS)
        part = state.partition()
        part[part == j] = i
        labels = relabel(part)


def merge_certificate(g, prof, part, use_attr):
    state = CodelengthState(FlowContext(g, prof), part, use_attr)
    return min((state.delta_merge(i, j) for i, j in itertools.combinations(range(state.m), 2)), default=np.inf)


def move_certificate(g, prof, part, use_attr):
    state = CodelengthState(FlowContext(g, prof), part, use_attr)
    return min(state.best_move(v)[0] for v in range(g.n))


def test_barbell_all_methods(barbell):
    g, prof = barbell
    for method in ("bottom_up", "top_down", "exhaustive"):
        part, trace = optimize(g, prof, OptimizerConfig(objective="cme", method=method, seed=0))
        assert relabel(part).tolist() in (SPLIT, [1, 1, 1, 0, 0, 0])
        assert trace.report.total == pytest.approx(2.3207, abs=1e-3)


def test_barbell_exhaustive_oracle(barbell):
    g, prof = barbell
    part, rep = exhaustive(g, prof, "me")
    A = oracle.adjacency(6, list(zip(g.src, g.dst)))
    ref_part, ref = oracle.brute_force_min(*oracle.flow(A, False), False)
    assert part.tolist() == ref_part == SPLIT
    assert rep.total == pytest.approx(ref, abs=1e-12)


def test_single_node():
    g = from_edges(1, [(0, 0)], attributes=np.ones((1, 2)))
    prof = stationary(g)
    part, trace = bottom_up(g, prof, OptimizerConfig(objective="cme"))
    assert part.tolist() == [0] and len(trace.steps) == 1
    part, trace = top_down(g, prof, OptimizerConfig(objective="cme"))
    assert part.tolist() == [0] and len(trace.steps) == 1


def test_disconnected_cliques_not_merged():
    k4 = [(i, j) for i in range(4) for j in range(i + 1, 4)]
    g = from_edges(8, k4 + [(a + 4, b + 4) for a, b in k4], attributes=np.ones((8, 3)))
    prof = stationary(g)
    part, _ = bottom_up(g, prof, OptimizerConfig(objective="me"))
    assert len(set(part[:4])) == 1 and len(set(part[4:])) == 1 and part[0] != part[4]
    state = CodelengthState(FlowContext(g, prof), [0] * 4 + [1] * 4, False)
    assert state.delta_merge(0, 1) > 0


def test_exhaustive_two_isolated_nodes():
    g = from_edges(2, [(0, 0), (1, 1)], attributes=np.ones((2, 2)))
    part, rep = exhaustive(g, stationary(g), "me")
    assert part.tolist() == [0, 1]


def test_exhaustive_guard():
    g = from_edges(13, [(i, i + 1) for i in range(12)])
    with pytest.raises(ValueError, match="n <= 12"):
        exhaustive(g, stationary(g), "me")


def test_cme_needs_attributes():
    g = from_edges(3, [(0, 1), (1, 2)])
    with pytest.raises(ValueError, match="attributes"):
        top_down(g, stationary(g), OptimizerConfig(objective="cme"))


def test_exhaustive_matches_brute_force():
    rng = np.random.default_rng(21)
    for k in range(25):
        directed = k % 3 == 0
        g = random_graph(rng, int(rng.integers(1 + 1, 7)), directed=directed)
        prof = stationary(g)
        A = oracle.adjacency(g.n, list(zip(g.src, g.dst)), g.weight, directed=directed)
        _, T = oracle.flow(A, directed, iters=1)
        for obj, X in (("me", None), ("cme", g.attributes.toarray())):
            part, rep = exhaustive(g, prof, obj)
            _, ref = oracle.brute_force_min(prof.p, T, directed, X=X)
            assert rep.total == pytest.approx(ref, abs=1e-10)


def test_bottom_up_matches_all_pairs_reference():
    rng = np.random.default_rng(22)
    for k in range(60):
        g = random_graph(rng, int(rng.integers(2, 16)), directed=k % 3 == 0)
        prof = stationary(g)
        for obj in ("me", "cme"):
            part, trace = bottom_up(g, prof, OptimizerConfig(objective=obj))
            assert part.tolist() == naive_bottom_up(g, prof, obj == "cme").tolist()


def test_bottom_up_connected_only_merges_linked_modules():
    rng = np.random.default_rng(23)
    for k in range(20):
        g = random_graph(rng, int(rng.integers(2, 20)), directed=k % 2 == 0)
        prof = stationary(g)
        part, trace = bottom_up(g, prof, OptimizerConfig(objective="cme", connected_only=True))
        assert np.all(np.diff(trace.totals()) < 0)
        # every module induces a connected subgraph
        for m in np.unique(part):
            members = set(np.flatnonzero(part == m).tolist())
            seen, todo = set(), [min(members)]
            while todo:
                v = todo.pop()
                seen.add(v)
                for a, b in zip(g.src, g.dst):
                    for u, w in ((a, b), (b, a)):
                        if u == v and w in members and w not in seen:
                            todo.append(int(w))
            assert seen == members


def test_local_optimality_certificates():
    rng = np.random.default_rng(24)
    for k in range(30):
        g = random_graph(rng, int(rng.integers(2, 50)), directed=k % 3 == 0)
        prof = stationary(g)
        part, _ = bottom_up(g, prof, OptimizerConfig(objective="cme"))
        assert merge_certificate(g, prof, part, True) >= -MOVE_EPS
        part, _ = top_down(g, prof, OptimizerConfig(objective="cme", seed=k))
        assert move_certificate(g, prof, part, True) >= -MOVE_EPS


def test_initial_partition_fixed_point():
    rng = np.random.default_rng(25)
    g = random_graph(rng, 30)
    prof = stationary(g)
    part, _ = top_down(g, prof, OptimizerConfig(objective="cme", seed=1))
    again, trace = top_down(g, prof, OptimizerConfig(objective="cme", initial_partition=part))
    assert again.tolist() == relabel(part).tolist()
    assert len(trace.steps) == 1 and trace.iterations == 1


def test_initial_partition_shape_checked():
    g = from_edges(3, [(0, 1), (1, 2)])
    with pytest.raises(ValueError):
        top_down(g, stationary(g), OptimizerConfig(objective="me", initial_partition=[0, 1]))


def test_node_order_ties_ascending():
    assert node_order(np.array([0.2, 0.3, 0.2, 0.3])).tolist() == [1, 3, 0, 2]


def test_determinism_and_parallel_restarts():
    rng = np.random.default_rng(26)
    g = random_graph(rng, 40, extra=60)
    prof = stationary(g)
    runs = [top_down(g, prof, OptimizerConfig(objective="cme", seed=5, workers=w)) for w in (1, 1, 4)]
    for part, trace in runs[1:]:
        assert part.tolist() == runs[0][0].tolist()
        assert trace.to_csv() == runs[0][1].to_csv()


def test_trace_csv(barbell):
    g, prof = barbell
    _, trace = bottom_up(g, prof, OptimizerConfig(objective="cme"))
    lines = trace.to_csv().splitlines()
    assert lines[0] == "step,total_bits,m"
    assert lines[-1].split(",")[2] == "2"
    assert len(lines) == 1 + 5


def test_duplicated_attributes_same_partitions():
    rng = np.random.default_rng(27)
    for k in range(10):
        g = random_graph(rng, int(rng.integers(5, 40)))
        prof = stationary(g)
        dup = g.with_attributes(sp.csr_matrix(np.repeat(g.attributes.toarray() / 2, 2, axis=1)))
        for method in ("bottom_up", "top_down"):
            a, _ = optimize(g, prof, OptimizerConfig(objective="cme", method=method, seed=k))
            b, _ = optimize(dup, prof, OptimizerConfig(objective="cme", method=method, seed=k))
            assert a.tolist() == b.tolist()


def test_attributes_help_on_noisy_planted_partition():
    # synthetic stand-in for the benchmark ordering: links are heavily mixed, attributes follow the blocks
    pp = planted_partition(600, 6, 1500, d=32, mixing=0.45, attr_noise=0.3, seed=0)
    prof = stationary(pp.graph)
    f = {obj: f_measure(top_down(pp.graph, prof, OptimizerConfig(objective=obj, seed=0))[0], pp.graph.labels)
         for obj in ("me", "cme")}
    assert f["cme"] > f["me"]
