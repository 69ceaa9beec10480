"""Agreement between a partition and ground-truth classes.

Only labeled nodes are scored: modules are restricted to their labeled
members and modules with none are dropped.  A node carrying several class
labels counts toward each of them.
"""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from typing import Sequence

import numpy as np

from .attrgraph import LabelSet, labels_from_assignment


class MetricError(ValueError):
    pass


@dataclass
class MetricReport:
    f_measure: float
    purity: float
    accuracy: float
    n_labeled: int
    m_scored: int

    FIELDS = ("f_measure", "purity", "accuracy", "n_labeled", "m_scored")

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    def to_tsv(self, header: bool = False) -> str:
        row = "\t".join(f"{getattr(self, k):.12g}" if isinstance(getattr(self, k), float)
                        else str(getattr(self, k)) for k in self.FIELDS)
        return ("\t".join(self.FIELDS) + "\n" + row) if header else row


def _overlap(partition: Sequence[int], labels) -> tuple[np.ndarray, np.ndarray, int]:
    """(|p ∩ g| counts, |p| sizes, labeled node count) over labeled nodes."""
    if not isinstance(labels, LabelSet):
        labels = labels_from_assignment(labels)
    part = np.asarray(partition)
    if part.shape[0] != len(labels.members):
        raise MetricError(f"partition covers {part.shape[0]} nodes, labels cover {len(labels.members)}")
    nodes = labels.labeled_nodes()
    if nodes.size == 0:
        raise MetricError("no labeled nodes")
    _, mod = np.unique(part[nodes], return_inverse=True)
    m = int(mod.max()) + 1
    rows, cols = [], []
    for r, v in enumerate(nodes):
        for c in labels.members[v]:
            rows.append(mod[r])
            cols.append(c)
    counts = np.zeros((m, labels.n_classes))
    np.add.at(counts, (np.array(rows), np.array(cols)), 1.0)
    sizes = np.bincount(mod, minlength=m).astype(np.float64)
    return counts, sizes, int(nodes.size)


def f_measure(partition, labels) -> float:
    """Size-weighted best-match F1 over modules."""
    c, sizes, n = _overlap(partition, labels)
    g = c.sum(axis=0)
    prec = c / sizes[:, None]
    rec = np.divide(c, g, out=np.zeros_like(c), where=g > 0)
    denom = prec + rec
    f = np.divide(2 * prec * rec, denom, out=np.zeros_like(c), where=denom > 0)
    return float((sizes / n * f.max(axis=1)).sum())


def purity(partition, labels) -> float:
    """Unweighted mean over modules of the best-class fraction."""
    c, sizes, _ = _overlap(partition, labels)
    return float((c.max(axis=1) / sizes).mean())


def accuracy(partition, labels) -> float:
    """Fraction of labeled nodes that fall in their module's majority class."""
    c, _, n = _overlap(partition, labels)
    return float(c.max(axis=1).sum() / n)


def score(partition, labels) -> MetricReport:
    c, sizes, n = _overlap(partition, labels)
    return MetricReport(f_measure=f_measure(partition, labels), purity=purity(partition, labels),
                        accuracy=accuracy(partition, labels), n_labeled=n, m_scored=len(sizes))
