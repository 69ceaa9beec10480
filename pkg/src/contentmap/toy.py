"""The two small illustrative networks with circle, square and triangle nodes.

Topologies were reconstructed from the published tables (see README):

* ``1a``: a chain 0-1-2-3-4-5 whose nodes all link to node 6, which belongs
  to the 6-clique {6..11}.  Circles are 0..5, squares 6..11.  Cut A splits
  circles from squares; cut B moves node 6 to the chain side.
* ``1b``: circles {0,1,2}, squares {3,4,5}, triangles {6,7} with links
  0-1 0-2 1-3 2-3 3-4 3-5 4-5 4-6 5-7 6-7.  Cut A isolates the circles, cut
  B splits {0..3} from {4..7}, cut C isolates the triangles; combined cuts
  use every listed boundary.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .attrgraph import AttributedGraph, from_edges
from .codelength import FlowContext, evaluate, relabel
from .flow import stationary_directed, stationary_undirected

CONVENTIONS = ("undirected", "directed")
COLUMNS = ("links", "attributes", "cme")

FIG1A_EDGES = ([(i, i + 1) for i in range(5)] + [(i, 6) for i in range(6)]
               + [(i, j) for i in range(6, 12) for j in range(i + 1, 12)])
FIG1B_EDGES = [(0, 1), (0, 2), (1, 3), (2, 3), (3, 4), (3, 5), (4, 5), (4, 6), (5, 7), (6, 7)]

# side of every node for each elementary cut
FIG1A_CUTS = {
    "A": [0] * 6 + [1] * 6,
    "B": [0] * 7 + [1] * 5,
}
FIG1B_CUTS = {
    "A": [0, 0, 0, 1, 1, 1, 1, 1],
    "B": [0, 0, 0, 0, 1, 1, 1, 1],
    "C": [0, 0, 0, 0, 0, 0, 1, 1],
}
CUT_NAMES = {
    "1a": ("no cut", "A", "B"),
    "1b": ("no cut", "A", "B", "C", "A+C", "A+B", "B+C", "A+B+C"),
}

# published values: cut -> (links, attributes d=4, attributes d=1000, cme d=4, cme d=1000)
PAPER = {
    "1a": {
        "no cut": (3.41, 1.89, 10.86, 5.30, 14.27),
        "A": (3.59, 1.00, 9.97, 4.59, 13.55),
        "B": (3.36, 1.51, 10.47, 4.87, 13.83),
    },
    "1b": {
        "no cut": (2.95, 1.84, 9.81, 4.79, 12.75),
        "A": (3.02, 0.96, 8.92, 3.98, 11.95),
        "B": (2.93, 1.43, 9.39, 4.35, 12.32),
        "C": (3.15, 1.56, 9.53, 4.72, 12.68),
        "A+C": (3.27, 0.80, 8.77, 4.07, 12.03),
        "A+B": (3.18, 0.94, 8.91, 4.12, 12.08),
        "B+C": (3.21, 1.29, 9.25, 4.50, 12.46),
        "A+B+C": (3.61, 0.80, 8.77, 4.41, 12.38),
    },
}


def paper_value(figure: str, cut: str, column: str, d: int) -> float:
    row = PAPER[figure][cut]
    if column == "links":
        return row[0]
    if column == "attributes":
        return row[1] if d == 4 else row[2]
    return row[3] if d == 4 else row[4]


def shape_vectors(d: int) -> dict[str, np.ndarray]:
    if d < 4 or d % 4:
        raise ValueError("d must be a positive multiple of 4")
    circle, square, triangle = np.zeros(d), np.zeros(d), np.zeros(d)
    circle[: d // 2] = 2.0 / d
    square[d // 2:] = 2.0 / d
    triangle[3 * d // 4:] = 4.0 / d
    return {"circle": circle, "square": square, "triangle": triangle}


def network(figure: str, d: int = 4) -> AttributedGraph:
    v = shape_vectors(d)
    if figure == "1a":
        shapes = ["circle"] * 6 + ["square"] * 6
        edges = FIG1A_EDGES
    elif figure == "1b":
        shapes = ["circle"] * 3 + ["square"] * 3 + ["triangle"] * 2
        edges = FIG1B_EDGES
    else:
        raise ValueError(f"unknown figure {figure!r}; expected 1a or 1b")
    x = np.array([v[s] for s in shapes])
    return from_edges(len(shapes), edges, attributes=x)


def cut_partition(figure: str, cut: str) -> np.ndarray:
    if figure not in CUT_NAMES:
        raise ValueError(f"unknown figure {figure!r}; expected 1a or 1b")
    if cut not in CUT_NAMES[figure]:
        raise ValueError(f"unknown cut {cut!r} for figure {figure}; "
                         f"choose from {', '.join(CUT_NAMES[figure])}")
    sides = FIG1A_CUTS if figure == "1a" else FIG1B_CUTS
    n = len(next(iter(sides.values())))
    if cut == "no cut":
        return np.zeros(n, dtype=np.int64)
    key = np.zeros(n, dtype=np.int64)
    for part in cut.split("+"):
        key = 2 * key + np.asarray(sides[part])
    return relabel(key)


@dataclass
class ToyRow:
    cut: str
    convention: str
    links: float
    attributes: float
    cme: float


@dataclass
class ToyTable:
    figure: str
    d: int
    rows: list[ToyRow]

    def values(self, convention: str, column: str) -> dict[str, float]:
        return {r.cut: getattr(r, column) for r in self.rows if r.convention == convention}

    def argmin(self, convention: str, column: str, tol: float = 1e-9) -> list[str]:
        """Every cut within ``tol`` of the column minimum, in table order."""
        vals = self.values(convention, column)
        best = min(vals.values())
        return [c for c, v in vals.items() if v <= best + tol]

    def format(self) -> str:
        lines = []
        for conv in CONVENTIONS:
            lines.append(f"figure {self.figure}, d={self.d}, {conv} walk")
            lines.append(f"{'cut':<8}{'links':>9}{'attrs':>9}{'cme':>9}   paper: links attrs cme")
            for r in self.rows:
                if r.convention != conv:
                    continue
                ref = [paper_value(self.figure, r.cut, c, self.d) for c in COLUMNS]
                lines.append(f"{r.cut:<8}{r.links:9.3f}{r.attributes:9.3f}{r.cme:9.3f}   "
                             f"{ref[0]:.2f} {ref[1]:.2f} {ref[2]:.2f}")
            for col in COLUMNS:
                lines.append(f"argmin {col}: {' / '.join(self.argmin(conv, col))}")
            lines.append("")
        return "\n".join(lines)


def toy_table(figure: str, d: int = 4, cuts: list[str] | None = None, tau: float = 0.15) -> ToyTable:
    """Links-only, attributes-only and combined bits of each cut under both walks."""
    g = network(figure, d)
    names = list(CUT_NAMES[figure]) if cuts is None else cuts
    parts = {c: cut_partition(figure, c) for c in names}
    rows = []
    for conv in CONVENTIONS:
        prof = stationary_undirected(g) if conv == "undirected" else stationary_directed(g, tau=tau)
        ctx = FlowContext(g, prof)
        for c in names:
            rep = evaluate(ctx, parts[c], True)
            me = rep.index_term + rep.movement
            rows.append(ToyRow(cut=c, convention=conv, links=me, attributes=rep.attribute, cme=rep.total))
    return ToyTable(figure=figure, d=d, rows=rows)
