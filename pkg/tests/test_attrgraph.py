import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, settings, strategies as st

from contentmap.attrgraph import (InputError, from_edges, load_attributes, load_graph, load_labels,
                                  load_partition, normalize_rows, write_graph, write_nodes)


def write(tmp_path, name, text):
    p = tmp_path / name
    p.write_text(text, encoding="utf-8")
    return p


def test_triangle(tmp_path):
    g = load_graph(write(tmp_path, "e.tsv", "a\tb\nb\tc\nc\ta\n"))
    assert g.n == 3 and g.n_links == 3
    assert np.all(g.weight == 1.0)
    assert g.node_ids == ("a", "b", "c")


def test_duplicates_summed(tmp_path):
    g = load_graph(write(tmp_path, "e.tsv", "a\tb\t2\na\tb\t3\n"))
    assert g.n_links == 1 and g.weight[0] == 5.0


def test_undirected_reverse_duplicate_merged(tmp_path):
    g = load_graph(write(tmp_path, "e.tsv", "a\tb\nb\ta\n"))
    assert g.n_links == 1 and g.weight[0] == 2.0
    d = load_graph(write(tmp_path, "d.tsv", "a\tb\nb\ta\n"), directed=True)
    assert d.n_links == 2


def test_comments_and_self_loops_kept(tmp_path):
    g = load_graph(write(tmp_path, "e.tsv", "# header\n\na\ta\na\tb\n"))
    assert g.n_links == 2
    assert np.any(g.src == g.dst)


@pytest.mark.parametrize("text, line", [("a\n", 1), ("a\tb\nx\ty\tz\tw\n", 2), ("a\tb\t0\n", 1),
                                        ("a\tb\t-1\n", 1), ("a\tb\tnan\n", 1), ("a\tb\tfoo\n", 1)])
def test_malformed_lines(tmp_path, text, line):
    with pytest.raises(InputError) as exc:
        load_graph(write(tmp_path, "e.tsv", text))
    assert exc.value.line == line
    assert f":{line}:" in str(exc.value)


def test_empty_file(tmp_path):
    with pytest.raises(InputError, match="no links"):
        load_graph(write(tmp_path, "e.tsv", "# nothing\n"))


def _pair(tmp_path):
    return load_graph(write(tmp_path, "e.tsv", "0\t1\n"))


def test_raw_normalization(tmp_path):
    g = load_attributes(_pair(tmp_path), write(tmp_path, "a.tsv", "0\t0\t2\n0\t1\t2\n1\t3\t1\n"))
    assert np.allclose(g.attributes.toarray()[0], [0.5, 0.5, 0, 0])


def test_tfidf_universal_attribute_vanishes(tmp_path):
    g = load_attributes(_pair(tmp_path), write(tmp_path, "a.tsv", "0\t0\t1\n0\t1\t1\n1\t1\t1\n"), mode="tfidf")
    assert np.allclose(g.attributes.toarray()[0], [1.0, 0.0])


def test_tfidf_all_universal_gives_uniform(tmp_path):
    g = load_attributes(_pair(tmp_path), write(tmp_path, "a.tsv", "0\t0\t3\n0\t1\t1\n1\t0\t1\n1\t1\t5\n"),
                        mode="tfidf")
    assert np.allclose(g.attributes.toarray(), 0.5)


def test_missing_node_gets_uniform(tmp_path):
    g = load_graph(write(tmp_path, "e.tsv", "a\tb\n"))
    g = load_attributes(g, write(tmp_path, "a.tsv", "a\t3\t1\n"))
    assert np.allclose(g.attributes.toarray()[1], [0.25] * 4)


def test_pre_normalized(tmp_path):
    g = _pair(tmp_path)
    out = load_attributes(g, write(tmp_path, "a.tsv", "0\t0\t0.25\n0\t1\t0.75\n"), mode="norm")
    assert np.allclose(out.attributes.toarray()[0], [0.25, 0.75])
    with pytest.raises(InputError, match="sums to"):
        load_attributes(g, write(tmp_path, "b.tsv", "0\t0\t0.5\n"), mode="pre-normalized")


@pytest.mark.parametrize("text, msg", [("0\t-1\t1\n", "negative attribute index"),
                                       ("0\t0\t-2\n", "non-negative"), ("7\t0\t1\n", "unknown node")])
def test_attribute_errors(tmp_path, text, msg):
    with pytest.raises(InputError, match=msg):
        load_attributes(_pair(tmp_path), write(tmp_path, "a.tsv", text))


def test_labels(tmp_path):
    g = load_graph(write(tmp_path, "e.tsv", "0\t1\n1\t2\n"))
    labels = load_labels(g, write(tmp_path, "l.tsv", "0\tA\n0\tB\n1\tA\n"))
    names = labels.class_names
    assert {names[c] for c in labels.members[0]} == {"A", "B"}
    assert {names[c] for c in labels.members[1]} == {"A"}
    assert labels.members[2] == frozenset()
    with pytest.raises(InputError, match="no labeled nodes"):
        load_labels(g, write(tmp_path, "empty.tsv", ""))
    with pytest.raises(InputError, match="unknown node"):
        load_labels(g, write(tmp_path, "bad.tsv", "9\tA\n"))


def test_partition_file_missing_node(tmp_path):
    g = load_graph(write(tmp_path, "e.tsv", "".join(f"{i}\t{i + 1}\n" for i in range(6))))
    with pytest.raises(InputError, match="node 5 missing"):
        load_partition(g, write(tmp_path, "p.tsv", "".join(f"{i}\t0\n" for i in (0, 1, 2, 3, 4, 6))))


def test_round_trip(tmp_path):
    rng = np.random.default_rng(3)
    x = rng.random((5, 6)) * (rng.random((5, 6)) < 0.5)
    g = from_edges(5, [(0, 1), (1, 2), (2, 3), (3, 4), (4, 4), (0, 3)], weights=rng.uniform(0.1, 3, 6),
                   attributes=x, node_ids=["n0", "n1", "n2", "n3", "n4"])
    write_graph(g, tmp_path / "e.tsv", tmp_path / "a.tsv")
    write_nodes(g, tmp_path / "nodes.tsv")
    h = load_graph(tmp_path / "e.tsv")
    h = load_attributes(h, tmp_path / "a.tsv", n_attributes=g.n_attributes)
    links = lambda gr: sorted((*sorted((gr.node_ids[s], gr.node_ids[d])), w) for s, d, w in zip(gr.src, gr.dst, gr.weight))
    assert links(g) == links(h)
    perm = [h.index_of(name) for name in g.node_ids]
    assert np.array_equal(g.attributes.toarray(), h.attributes.toarray()[perm])
    assert (tmp_path / "nodes.tsv").read_text().splitlines()[0] == "0\tn0"


@settings(max_examples=60, deadline=None)
@given(st.lists(st.lists(st.floats(0, 100, allow_nan=False), min_size=4, max_size=4), min_size=1, max_size=8))
def test_normalization_idempotent(rows):
    x = sp.csr_matrix(np.array(rows))
    once = normalize_rows(x)
    twice = normalize_rows(once)
    assert np.array_equal(once.toarray(), twice.toarray())
    assert np.allclose(np.asarray(once.sum(axis=1)).ravel(), 1.0, atol=1e-9)
