"""Attributed networks: data model and TSV ingestion.

Nodes are dense integer indices ``0..n-1``; the original string ids are kept
in ``AttributedGraph.node_ids`` so results can be written back in terms of the
input names.  Attribute vectors are stored as a CSR matrix whose rows sum to 1.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterator, Sequence

import numpy as np
import scipy.sparse as sp

ATTR_MODES = ("raw", "tfidf", "norm")


class InputError(ValueError):
    """Raised for malformed or inconsistent input files."""

    def __init__(self, message: str, path: str | Path | None = None, line: int | None = None):
        self.path = None if path is None else str(path)
        self.line = line
        where = ""
        if self.path is not None:
            where = self.path if line is None else f"{self.path}:{line}"
            where += ": "
        super().__init__(where + message)


@dataclass(frozen=True)
class LabelSet:
    """Ground-truth classes, possibly overlapping, possibly missing per node."""

    members: tuple[frozenset[int], ...]
    class_names: tuple[str, ...]

    @property
    def n_classes(self) -> int:
        return len(self.class_names)

    def labeled_nodes(self) -> np.ndarray:
        return np.array([i for i, s in enumerate(self.members) if s], dtype=np.int64)

    def classes(self) -> list[set[int]]:
        """Node sets per class id."""
        out: list[set[int]] = [set() for _ in self.class_names]
        for node, cls in enumerate(self.members):
            for c in cls:
                out[c].add(node)
        return out


@dataclass(frozen=True)
class AttributedGraph:
    n: int
    src: np.ndarray
    dst: np.ndarray
    weight: np.ndarray
    directed: bool = False
    attributes: sp.csr_matrix | None = None
    node_ids: tuple[str, ...] = ()
    labels: LabelSet | None = None
    _index: dict = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        if not self.node_ids:
            object.__setattr__(self, "node_ids", tuple(str(i) for i in range(self.n)))
        if self._index is None:
            object.__setattr__(self, "_index", {s: i for i, s in enumerate(self.node_ids)})

    @property
    def n_links(self) -> int:
        return int(self.src.shape[0])

    @property
    def n_attributes(self) -> int:
        return 0 if self.attributes is None else int(self.attributes.shape[1])

    def index_of(self, node_id: str) -> int:
        return self._index[node_id]

    def has_node(self, node_id: str) -> bool:
        return node_id in self._index

    def strength(self) -> np.ndarray:
        """Weighted degree; undirected links count for both ends, self-loops twice."""
        if self.directed:
            raise ValueError("strength() is defined for undirected graphs")
        s = np.bincount(self.src, weights=self.weight, minlength=self.n)
        s += np.bincount(self.dst, weights=self.weight, minlength=self.n)
        return s

    def with_attributes(self, attributes: sp.csr_matrix | np.ndarray | None) -> "AttributedGraph":
        if attributes is not None:
            attributes = sp.csr_matrix(attributes, dtype=np.float64)
            if attributes.shape[0] != self.n:
                raise ValueError(f"attribute matrix has {attributes.shape[0]} rows, graph has {self.n} nodes")
        return replace(self, attributes=attributes, _index=self._index)

    def with_labels(self, labels: LabelSet | None) -> "AttributedGraph":
        return replace(self, labels=labels, _index=self._index)


def from_edges(
    n: int,
    edges: Sequence[tuple[int, int]] | np.ndarray,
    weights: Sequence[float] | np.ndarray | None = None,
    directed: bool = False,
    attributes=None,
    node_ids: Sequence[str] | None = None,
) -> AttributedGraph:
    """Build a graph from integer edges, merging duplicates by summing weights."""
    e = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
    w = np.ones(len(e)) if weights is None else np.asarray(weights, dtype=np.float64)
    if len(e) and (e.min() < 0 or e.max() >= n):
        raise ValueError("edge endpoint out of range")
    if np.any(~np.isfinite(w)) or np.any(w <= 0):
        raise ValueError("link weights must be positive and finite")
    src, dst, w = _merge_duplicates(e[:, 0], e[:, 1], w, n, directed)
    g = AttributedGraph(n=n, src=src, dst=dst, weight=w, directed=directed,
                        node_ids=tuple(node_ids) if node_ids is not None else ())
    if attributes is not None:
        g = g.with_attributes(normalize_rows(sp.csr_matrix(attributes, dtype=np.float64)))
    return g


def _merge_duplicates(src, dst, w, n, directed):
    if not directed:
        lo, hi = np.minimum(src, dst), np.maximum(src, dst)
        src, dst = lo, hi
    key = src * n + dst
    uniq, inv = np.unique(key, return_inverse=True)
    merged = np.bincount(inv, weights=w, minlength=len(uniq))
    return (uniq // n).astype(np.int64), (uniq % n).astype(np.int64), merged


def _data_lines(path: Path) -> Iterator[tuple[int, list[str]]]:
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            yield lineno, line.split()


def load_graph(edge_path: str | Path, directed: bool = False) -> AttributedGraph:
    """Read ``src<TAB>dst[<TAB>weight]`` lines; ids are remapped in first-seen order."""
    path = Path(edge_path)
    if not path.exists():
        raise InputError("file not found", path)
    ids: dict[str, int] = {}
    src, dst, wts = [], [], []
    for lineno, cols in _data_lines(path):
        if len(cols) not in (2, 3):
            raise InputError(f"expected 'src dst [weight]', got {len(cols)} column(s)", path, lineno)
        w = 1.0
        if len(cols) == 3:
            try:
                w = float(cols[2])
            except ValueError:
                raise InputError(f"bad weight {cols[2]!r}", path, lineno) from None
            if not math.isfinite(w) or w <= 0:
                raise InputError(f"weight must be positive and finite, got {cols[2]}", path, lineno)
        for c in cols[:2]:
            if c not in ids:
                ids[c] = len(ids)
        src.append(ids[cols[0]])
        dst.append(ids[cols[1]])
        wts.append(w)
    if not src:
        raise InputError("no links", path)
    n = len(ids)
    s, d, w = _merge_duplicates(np.array(src, dtype=np.int64), np.array(dst, dtype=np.int64),
                                np.array(wts), n, directed)
    return AttributedGraph(n=n, src=s, dst=d, weight=w, directed=directed, node_ids=tuple(ids))


def normalize_rows(x: sp.csr_matrix, n_attributes: int | None = None) -> sp.csr_matrix:
    """Scale rows to sum 1; all-zero rows become the uniform vector.

    Rows already summing to 1 within 1e-12 are left bit-identical, which makes
    the operation idempotent.
    """
    x = sp.csr_matrix(x, dtype=np.float64, copy=True)
    d = x.shape[1] if n_attributes is None else n_attributes
    if x.shape[1] != d:
        x = sp.csr_matrix((x.data, x.indices, x.indptr), shape=(x.shape[0], d))
    x.eliminate_zeros()
    sums = np.asarray(x.sum(axis=1)).ravel()
    empty = sums <= 0
    scale = np.divide(1.0, sums, out=np.zeros_like(sums), where=~empty)
    scale[np.abs(sums - 1.0) <= 1e-12] = 1.0
    x = sp.csr_matrix(sp.diags(scale) @ x)
    if np.any(empty):
        rows = np.flatnonzero(empty)
        uni = sp.csr_matrix((np.full(len(rows) * d, 1.0 / d),
                             (np.repeat(rows, d), np.tile(np.arange(d), len(rows)))),
                            shape=x.shape)
        x = x + uni
    x.sort_indices()
    return x


def tfidf(x: sp.csr_matrix) -> sp.csr_matrix:
    """Reweight raw values by ``ln(n / df_j)``; rows are not normalized here."""
    x = sp.csr_matrix(x, dtype=np.float64)
    n = x.shape[0]
    df = np.bincount(x.indices[x.data > 0], minlength=x.shape[1])
    idf = np.zeros(x.shape[1])
    seen = df > 0
    idf[seen] = np.log(n / df[seen])
    out = sp.csr_matrix(x @ sp.diags(idf))
    out.eliminate_zeros()
    return out


def load_attributes(graph: AttributedGraph, attr_path: str | Path, mode: str = "raw",
                    n_attributes: int | None = None) -> AttributedGraph:
    """Attach ``node<TAB>attr_index<TAB>value`` triples to ``graph``.

    ``mode`` is ``raw`` (divide by row sum), ``tfidf`` (weight by ``ln(n/df)``
    then normalize) or ``norm``/``pre-normalized`` (rows must already sum to 1
    within 1e-6).  The attribute dimension is ``max index + 1`` unless given.
    """
    if mode == "pre-normalized":
        mode = "norm"
    if mode not in ATTR_MODES:
        raise ValueError(f"unknown attribute mode {mode!r}")
    path = Path(attr_path)
    if not path.exists():
        raise InputError("file not found", path)
    rows, cols, vals = [], [], []
    for lineno, parts in _data_lines(path):
        if len(parts) != 3:
            raise InputError("expected 'node attr_index value'", path, lineno)
        node, j, v = parts
        if not graph.has_node(node):
            raise InputError(f"unknown node id {node!r}", path, lineno)
        try:
            j_int = int(j)
            v_f = float(v)
        except ValueError:
            raise InputError(f"bad attribute entry {j!r} {v!r}", path, lineno) from None
        if j_int < 0:
            raise InputError(f"negative attribute index {j_int}", path, lineno)
        if not math.isfinite(v_f) or v_f < 0:
            raise InputError(f"attribute value must be non-negative, got {v}", path, lineno)
        rows.append(graph.index_of(node))
        cols.append(j_int)
        vals.append(v_f)
    d = (max(cols) + 1 if cols else 1) if n_attributes is None else n_attributes
    if cols and max(cols) >= d:
        raise InputError(f"attribute index {max(cols)} exceeds dimension {d}", path)
    x = sp.csr_matrix((vals, (rows, cols)), shape=(graph.n, d))  # duplicates summed
    if mode == "norm":
        sums = np.asarray(x.sum(axis=1)).ravel()
        present = np.diff(x.indptr) > 0
        bad = np.flatnonzero(present & (np.abs(sums - 1.0) > 1e-6))
        if len(bad):
            raise InputError(f"row for node {graph.node_ids[bad[0]]!r} sums to {sums[bad[0]]:.9g}, not 1", path)
    elif mode == "tfidf":
        x = tfidf(x)
    return graph.with_attributes(normalize_rows(x, d))


def load_labels(graph: AttributedGraph, label_path: str | Path) -> LabelSet:
    """Read ``node<TAB>class`` lines; a node may carry several classes."""
    path = Path(label_path)
    if not path.exists():
        raise InputError("file not found", path)
    names: dict[str, int] = {}
    members: list[set[int]] = [set() for _ in range(graph.n)]
    for lineno, parts in _data_lines(path):
        if len(parts) != 2:
            raise InputError("expected 'node class'", path, lineno)
        node, cls = parts
        if not graph.has_node(node):
            raise InputError(f"unknown node id {node!r}", path, lineno)
        c = names.setdefault(cls, len(names))
        members[graph.index_of(node)].add(c)
    if not names:
        raise InputError("no labeled nodes", path)
    return LabelSet(members=tuple(frozenset(s) for s in members), class_names=tuple(names))


def labels_from_assignment(assignment: Sequence[int]) -> LabelSet:
    """Single-label ground truth from a node -> class vector (negative = unlabeled)."""
    classes = sorted({int(c) for c in assignment if c >= 0})
    pos = {c: i for i, c in enumerate(classes)}
    members = tuple(frozenset([pos[int(c)]]) if c >= 0 else frozenset() for c in assignment)
    return LabelSet(members=members, class_names=tuple(str(c) for c in classes))


def write_graph(graph: AttributedGraph, edge_path: str | Path, attr_path: str | Path | None = None) -> None:
    """Write links (and attributes, if present) in the TSV formats read above."""
    with open(edge_path, "w", encoding="utf-8") as fh:
        for s, d, w in zip(graph.src, graph.dst, graph.weight):
            fh.write(f"{graph.node_ids[s]}\t{graph.node_ids[d]}\t{float(w)!r}\n")
    if attr_path is not None and graph.attributes is not None:
        x = graph.attributes
        with open(attr_path, "w", encoding="utf-8") as fh:
            for i in range(graph.n):
                lo, hi = x.indptr[i], x.indptr[i + 1]
                for j, v in zip(x.indices[lo:hi], x.data[lo:hi]):
                    fh.write(f"{graph.node_ids[i]}\t{j}\t{float(v)!r}\n")


def write_nodes(graph: AttributedGraph, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for i, name in enumerate(graph.node_ids):
            fh.write(f"{i}\t{name}\n")


def load_partition(graph: AttributedGraph, path: str | Path) -> np.ndarray:
    """Read ``node<TAB>module`` lines covering every node; modules become dense ids."""
    path = Path(path)
    if not path.exists():
        raise InputError("file not found", path)
    assign = np.full(graph.n, -1, dtype=np.int64)
    modules: dict[str, int] = {}
    for lineno, parts in _data_lines(path):
        if len(parts) != 2:
            raise InputError("expected 'node module'", path, lineno)
        node, mod = parts
        if not graph.has_node(node):
            raise InputError(f"unknown node id {node!r}", path, lineno)
        i = graph.index_of(node)
        if assign[i] >= 0:
            raise InputError(f"node {node!r} assigned twice", path, lineno)
        assign[i] = modules.setdefault(mod, len(modules))
    missing = np.flatnonzero(assign < 0)
    if len(missing):
        raise InputError(f"node {graph.node_ids[missing[0]]} missing from partition "
                         f"({len(missing)} node(s) unassigned)", path)
    return assign


def write_partition(graph: AttributedGraph, partition: Sequence[int], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for name, mod in zip(graph.node_ids, partition):
            fh.write(f"{name}\t{int(mod)}\n")
