"""Planted-partition graphs with block-correlated attributes, for tests and timing."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .attrgraph import AttributedGraph, from_edges, labels_from_assignment


@dataclass
class PlantedPartition:
    graph: AttributedGraph
    blocks: np.ndarray


def planted_partition(n: int, k: int, n_links: int, d: int = 32, mixing: float = 0.2,
                      attr_noise: float = 0.3, words: int = 20, directed: bool = False,
                      seed: int = 0) -> PlantedPartition:
    """Sample a graph with ``k`` planted blocks of near-equal size.

    Each link picks a uniform source; with probability ``1 - mixing`` the target
    is drawn from the source's block, otherwise from all nodes.  Self-loops are
    discarded and repeated links merged, so the final link count is slightly
    below ``n_links``.  Every block has a preferred set of attribute dimensions;
    a node's attribute counts are ``words`` draws from that set, mixed with
    uniform noise of weight ``attr_noise``.
    """
    if k < 1 or k > n:
        raise ValueError("need 1 <= k <= n")
    rng = np.random.default_rng(seed)
    blocks = rng.permutation(np.arange(n) % k)
    order = np.argsort(blocks, kind="stable")
    start = np.searchsorted(blocks[order], np.arange(k))
    size = np.bincount(blocks, minlength=k)

    src = rng.integers(0, n, size=n_links)
    b = blocks[src]
    inner = rng.random(n_links) >= mixing
    dst = np.where(inner, order[start[b] + (rng.random(n_links) * size[b]).astype(np.int64)],
                   rng.integers(0, n, size=n_links))
    keep = src != dst
    edges = np.column_stack([src[keep], dst[keep]])
    # give isolated nodes one link into their own block
    lonely = np.flatnonzero(np.bincount(edges.ravel(), minlength=n) == 0)
    if lonely.size:
        lb = blocks[lonely]
        mate = order[start[lb] + (rng.random(lonely.size) * size[lb]).astype(np.int64)]
        mate = np.where(mate == lonely, rng.integers(0, n, size=lonely.size), mate)
        mate = np.where(mate == lonely, (lonely + 1) % n, mate)
        edges = np.vstack([edges, np.column_stack([lonely, mate])])

    topic = np.zeros((k, d))
    width = max(1, d // min(k, d))
    for c in range(k):
        topic[c, (c * width + np.arange(width)) % d] = 1.0 / width
    probs = (1.0 - attr_noise) * topic[blocks] + attr_noise / d
    counts = rng.multinomial(words, probs).astype(np.float64)

    g = from_edges(n, edges, directed=directed, attributes=counts)
    return PlantedPartition(graph=g.with_labels(labels_from_assignment(blocks)), blocks=blocks)
