"""Search for partitions that minimize the (content) map equation.

``bottom_up`` merges modules greedily starting from singletons, ``top_down``
moves single nodes starting from the best of several random partitions, and
``exhaustive`` enumerates every set partition of a tiny graph.
"""
from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from numba import njit

from . import _kernels
from .attrgraph import AttributedGraph
from .codelength import (CME, MOVE_EPS, CodelengthReport, CodelengthState, FlowContext, _plogp,
                         check_objective, evaluate, plogp, relabel)
from .flow import FlowProfile

log = logging.getLogger(__name__)

METHODS = ("bottom_up", "top_down", "exhaustive")
EXHAUSTIVE_MAX_N = 12
# dense pair caches in bottom_up hold two n x n float arrays
BOTTOM_UP_MAX_N = 12000


@dataclass
class OptimizerConfig:
    objective: str = CME
    method: str = "top_down"
    seed: int = 0
    restarts: int | None = None
    tau: float = 0.15
    initial_partition: Sequence[int] | None = None
    connected_only: bool = False
    workers: int = 1

    def n_restarts(self, n: int) -> int:
        r = self.restarts if self.restarts is not None else math.isqrt(max(n, 1) - 1) + 1
        if r < 1:
            raise ValueError("restarts must be >= 1")
        return r


@dataclass
class OptimizationTrace:
    steps: list[tuple[int, float, int]] = field(default_factory=list)
    report: CodelengthReport | None = None
    iterations: int = 0

    def add(self, total: float, m: int) -> None:
        self.steps.append((len(self.steps), float(total), int(m)))

    def totals(self) -> np.ndarray:
        return np.array([s[1] for s in self.steps])

    def to_csv(self) -> str:
        rows = ["step,total_bits,m"]
        rows += [f"{s},{t:.12g},{m}" for s, t, m in self.steps]
        return "\n".join(rows) + "\n"


def ceil_sqrt(n: int) -> int:
    return math.isqrt(max(n, 1) - 1) + 1


def node_order(p: np.ndarray) -> np.ndarray:
    """Nodes by descending visit rate, ties by ascending index."""
    return np.lexsort((np.arange(len(p)), -p)).astype(np.int64)


# ---------------------------------------------------------------- top-down

def random_partitions(n: int, seed: int, restarts: int, m: int | None = None) -> list[np.ndarray]:
    m = ceil_sqrt(n) if m is None else m
    return [np.random.default_rng(seed + r).integers(0, m, size=n) for r in range(restarts)]


def best_initial(ctx: FlowContext, use_attr: bool, seed: int, restarts: int,
                 workers: int = 1) -> tuple[np.ndarray, int]:
    """Best of ``restarts`` random partitions; ties go to the lowest restart index."""

    def score(r):
        labels = relabel(np.random.default_rng(seed + r).integers(0, ceil_sqrt(ctx.n), size=ctx.n))
        return evaluate(ctx, labels, use_attr).total, labels

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(score, range(restarts)))
    else:
        results = [score(r) for r in range(restarts)]
    totals = np.array([t for t, _ in results])
    best = int(np.argmin(totals))
    return results[best][1], best


def top_down(graph: AttributedGraph, profile: FlowProfile, config: OptimizerConfig | None = None,
             ctx: FlowContext | None = None) -> tuple[np.ndarray, OptimizationTrace]:
    config = config or OptimizerConfig()
    use_attr = check_objective(graph, config.objective)
    ctx = ctx or FlowContext(graph, profile)
    n = ctx.n
    if config.initial_partition is not None:
        labels = np.asarray(config.initial_partition)
        if labels.shape != (n,):
            raise ValueError(f"initial partition covers {labels.size} nodes, graph has {n}")
        labels = relabel(labels)
    else:
        labels, winner = best_initial(ctx, use_attr, config.seed, config.n_restarts(n), config.workers)
        log.info("initial partition from restart %d", winner)
    state = CodelengthState(ctx, labels, use_attr)
    trace = OptimizationTrace()
    trace.add(state.total(), state.m)
    order = node_order(ctx.p)
    while True:
        moves = state.sweep(order, MOVE_EPS)
        trace.iterations += 1
        state.compact()
        if moves == 0:
            break
        trace.add(state.total(), state.m)
        log.debug("sweep %d: %d moves, %.6f bits, m=%d", trace.iterations, moves, trace.steps[-1][1], state.m)
    part = state.partition()
    trace.report = evaluate(ctx, part, use_attr)
    return part, trace


# ---------------------------------------------------------------- bottom-up

def _g(a, b):
    return _plogp(a + b) - _plogp(a) - _plogp(b)


class _MergeSearch:
    """Module aggregates plus cached merge deltas for greedy agglomeration.

    Module ids are slots ``0..n-1``; a merged module keeps the smaller slot, so
    slot order equals dense-id order and tie-breaking on slots is lexicographic
    on module ids.  For undirected walks a merge between modules without a
    connecting link leaves the total exit rate unchanged, so its delta depends
    only on the two modules and is cached in a dense matrix with per-row minima.
    Pairs joined by links are scored each round since their delta also depends
    on the global exit rate.
    """

    def __init__(self, ctx: FlowContext, use_attr: bool, connected_only: bool):
        n = ctx.n
        self.ctx, self.n, self.use_attr = ctx, n, use_attr
        self.connected_only = connected_only
        self.alive = np.ones(n, dtype=bool)
        self.p = ctx.p.copy()
        self.nn = np.ones(n)
        self.D = ctx.p * ctx.dang
        self.F = ctx.ow.copy()
        self.q = ctx.exit_rate(self.F, self.D, self.p, self.nn)
        self.Q = float(self.q.sum())
        self.X = ctx.attr.toarray() * ctx.p[:, None] if use_attr else None
        # links between modules, both directions combined
        a, b, f = ctx.src, ctx.dst, ctx.flow
        lo, hi = np.minimum(a, b), np.maximum(a, b)
        key, inv = np.unique(lo * n + hi, return_inverse=True)
        w = np.bincount(inv, weights=f)
        self.ei = (key // n).astype(np.int64)
        self.ej = (key % n).astype(np.int64)
        self.ew = w
        self.elive = np.ones(len(w), dtype=bool)
        self.inc: list[dict[int, int]] = [dict() for _ in range(n)]
        for e, (i, j) in enumerate(zip(self.ei.tolist(), self.ej.tolist())):
            self.inc[i][j] = e
            self.inc[j][i] = e
        self.eattr = np.zeros(len(w))
        if use_attr and len(w):
            self.eattr = self._attr_pairs(self.ei, self.ej)
        self.dense = not connected_only
        if self.dense:
            self._init_dense()

    # pair terms -----------------------------------------------------------
    def _attr_pairs(self, i, j):
        Xi, Xj = self.X[i], self.X[j]
        return _g(self.p[i], self.p[j]) - _g(Xi, Xj).sum(axis=1)

    def _attr_row(self, x, cols):
        X = self.X
        supp = np.flatnonzero(X[x])
        xa = X[x, supp]
        sub = X[np.ix_(cols, supp)]
        return _g(self.p[x], self.p[cols]) - (_plogp(sub + xa) - _plogp(sub) - _plogp(xa)).sum(axis=1)

    def _move_terms(self, i, j, w):
        """Module-local part of the merge delta and the change in total exit rate."""
        ctx = self.ctx
        q_ij = ctx.exit_rate(self.F[i] + self.F[j] - w, self.D[i] + self.D[j],
                             self.p[i] + self.p[j], self.nn[i] + self.nn[j])
        qi, qj = self.q[i], self.q[j]
        loc = (-2.0 * (_plogp(q_ij) - _plogp(qi) - _plogp(qj)) + _plogp(q_ij + self.p[i] + self.p[j])
               - _plogp(qi + self.p[i]) - _plogp(qj + self.p[j]))
        return loc, q_ij - qi - qj

    def _init_dense(self):
        n = self.n
        if n > BOTTOM_UP_MAX_N:
            raise ValueError(f"bottom-up search over all module pairs is limited to n <= {BOTTOM_UP_MAX_N}; "
                             "use connected_only or top_down")
        self.undirected = not self.ctx.directed
        R = np.empty((n, n))
        for x in range(n):
            R[x] = self._row(x, np.arange(n))
        np.fill_diagonal(R, np.inf)
        R[self.ei, self.ej] = np.inf
        R[self.ej, self.ei] = np.inf
        self.R = R
        if self.undirected:
            self.rmin = R.min(axis=1)
            self.rarg = R.argmin(axis=1)

    def _row(self, x, cols):
        """Cached part of the merge delta of ``x`` with every module in ``cols``.

        Undirected: the full delta of a merge without connecting links.
        Directed: the attribute part only.
        """
        if self.use_attr:
            attr = self._attr_row(x, cols)
        else:
            attr = np.zeros(len(cols))
        if self.ctx.directed:
            return attr
        loc, _ = self._move_terms(x, cols, 0.0)
        return loc + attr

    # search ---------------------------------------------------------------
    def best(self, tol: float = MOVE_EPS) -> tuple[float, int, int]:
        """Smallest merge delta; pairs within ``tol`` of it tie, smallest (i, j) wins."""
        cands = []  # (delta, i, j) of the lexicographically first near-minimum per source
        live = np.flatnonzero(self.elive)
        if live.size:
            i, j = self.ei[live], self.ej[live]
            loc, dq = self._move_terms(i, j, self.ew[live])
            d = _plogp(self.Q + dq) - plogp(self.Q) + loc + self.eattr[live]
            near = d <= d.min() + tol
            cands += list(zip(d[near].tolist(), i[near].tolist(), j[near].tolist()))
        if self.dense:
            rows = np.flatnonzero(self.alive)
            if self.undirected:
                vmin = self.rmin[rows].min()
                if np.isfinite(vmin):
                    for r in rows[self.rmin[rows] <= vmin + tol]:
                        row = self.R[r]
                        cols = np.flatnonzero(row <= vmin + tol)
                        cands += [(float(row[c]), int(min(r, c)), int(max(r, c))) for c in cols]
            elif rows.size >= 2:
                I, J = np.triu_indices(rows.size, 1)
                i, j = rows[I], rows[J]
                attr = self.R[i, j]
                ok = np.isfinite(attr)
                i, j, attr = i[ok], j[ok], attr[ok]
                if i.size:
                    loc, dq = self._move_terms(i, j, 0.0)
                    d = _plogp(self.Q + dq) - plogp(self.Q) + loc + attr
                    near = d <= d.min() + tol
                    cands += list(zip(d[near].tolist(), i[near].tolist(), j[near].tolist()))
        if not cands:
            return np.inf, -1, -1
        vmin = min(c[0] for c in cands)
        d, i, j = min((c for c in cands if c[0] <= vmin + tol), key=lambda c: (c[1], c[2]))
        return d, i, j

    def merge(self, x: int, y: int) -> None:
        """Merge slot ``y`` into slot ``x`` (x < y)."""
        e_xy = self.inc[x].pop(y, None)
        w_xy = 0.0
        if e_xy is not None:
            self.inc[y].pop(x)
            self.elive[e_xy] = False
            w_xy = self.ew[e_xy]
        self.Q -= self.q[x] + self.q[y]
        self.F[x] = self.F[x] + self.F[y] - w_xy
        self.p[x] += self.p[y]
        self.D[x] += self.D[y]
        self.nn[x] += self.nn[y]
        self.q[x] = self.ctx.exit_rate(self.F[x], self.D[x], self.p[x], self.nn[x])
        self.Q += self.q[x]
        self.alive[y] = False
        if self.use_attr:
            self.X[x] += self.X[y]
            self.X[y] = 0.0
        # re-point y's links to x
        for k, e in self.inc[y].items():
            self.inc[k].pop(y)
            f = self.inc[x].get(k)
            if f is None:
                self.inc[x][k] = e
                self.inc[k][x] = e
                self.ei[e], self.ej[e] = min(x, k), max(x, k)
            else:
                self.ew[f] += self.ew[e]
                self.elive[e] = False
        self.inc[y] = {}
        nbrs = np.fromiter(self.inc[x].keys(), dtype=np.int64, count=len(self.inc[x]))
        edges = np.fromiter(self.inc[x].values(), dtype=np.int64, count=len(self.inc[x]))
        if self.use_attr and edges.size:
            self.eattr[edges] = self._attr_row(x, nbrs)
        if self.dense:
            self._update_dense(x, y, nbrs)

    def _update_dense(self, x, y, nbrs):
        R = self.R
        R[y, :] = np.inf
        R[:, y] = np.inf
        cols = np.flatnonzero(self.alive)
        row = np.full(self.n, np.inf)
        row[cols] = self._row(x, cols)
        row[x] = np.inf
        row[nbrs] = np.inf
        R[x, :] = row
        R[:, x] = row
        if not self.undirected:
            return
        self.rmin[y] = np.inf
        self.rmin[x] = row.min()
        self.rarg[x] = int(row.argmin())
        # rows whose cached minimum sat in column x or y must be rescanned
        stale = cols[(self.rarg[cols] == x) | (self.rarg[cols] == y)]
        stale = stale[stale != x]
        improve = cols[(row[cols] < self.rmin[cols]) | ((row[cols] == self.rmin[cols]) & (x < self.rarg[cols]))]
        improve = improve[improve != x]
        self.rmin[improve] = row[improve]
        self.rarg[improve] = x
        stale = np.setdiff1d(stale, improve)
        if stale.size:
            sub = R[stale]
            self.rmin[stale] = sub.min(axis=1)
            self.rarg[stale] = sub.argmin(axis=1)
        if len(self.elive) > 64 and self.elive.sum() < len(self.elive) // 2:
            self._compact_edges()

    def _compact_edges(self):
        keep = np.flatnonzero(self.elive)
        remap = np.full(len(self.elive), -1, dtype=np.int64)
        remap[keep] = np.arange(keep.size)
        self.ei, self.ej, self.ew, self.eattr = self.ei[keep], self.ej[keep], self.ew[keep], self.eattr[keep]
        self.elive = np.ones(keep.size, dtype=bool)
        for d in self.inc:
            for k in d:
                d[k] = int(remap[d[k]])


def bottom_up(graph: AttributedGraph, profile: FlowProfile, config: OptimizerConfig | None = None,
              ctx: FlowContext | None = None) -> tuple[np.ndarray, OptimizationTrace]:
    """Greedy agglomeration from singletons; stops when no merge lowers the codelength."""
    config = config or OptimizerConfig(method="bottom_up")
    use_attr = check_objective(graph, config.objective)
    ctx = ctx or FlowContext(graph, profile)
    n = ctx.n
    labels = np.arange(n, dtype=np.int64)
    trace = OptimizationTrace()
    total = evaluate(ctx, labels, use_attr).total
    trace.add(total, n)
    if n > 1:
        search = _MergeSearch(ctx, use_attr, config.connected_only)
        m = n
        while m > 1:
            delta, x, y = search.best()
            trace.iterations += 1
            if x < 0 or not delta < -MOVE_EPS:
                break
            search.merge(x, y)
            labels[labels == y] = x
            m -= 1
            total += delta
            trace.add(total, m)
    part = relabel(labels)
    trace.report = evaluate(ctx, part, use_attr)
    return part, trace


# --------------------------------------------------------------- exhaustive

@njit(cache=True)
def _enumerate(n, p, dang, src, dst, flow, a_ptr, a_idx, a_val, d, tau, directed, use_attr,
               node_plogp, tol):
    a = np.zeros(n, dtype=np.int64)
    maxp = np.zeros(n, dtype=np.int64)
    best = a.copy()
    best_val = np.inf
    mp = np.zeros(n)
    mn = np.zeros(n)
    mD = np.zeros(n)
    mF = np.zeros(n)
    X = np.zeros((n, max(d, 1)))
    while True:
        m = 0
        for v in range(n):
            if a[v] + 1 > m:
                m = a[v] + 1
        for i in range(m):
            mp[i] = 0.0
            mn[i] = 0.0
            mD[i] = 0.0
            mF[i] = 0.0
        for v in range(n):
            k = a[v]
            mp[k] += p[v]
            mn[k] += 1.0
            mD[k] += p[v] * dang[v]
        for e in range(src.shape[0]):
            if a[src[e]] != a[dst[e]]:
                mF[a[src[e]]] += flow[e]
        if use_attr:
            for i in range(m):
                for j in range(d):
                    X[i, j] = 0.0
            for v in range(n):
                for e in range(a_ptr[v], a_ptr[v + 1]):
                    X[a[v], a_idx[e]] += p[v] * a_val[e]
        Q = 0.0
        total = 0.0
        for i in range(m):
            q = _kernels.exit_rate(mF[i], mD[i], mp[i], mn[i], n, tau, directed)
            S = 0.0
            if use_attr:
                for j in range(d):
                    S += _kernels.plogp(X[i, j])
            Q += q
            total += _kernels.contribution(q, mp[i], S, use_attr)
        total += _kernels.plogp(Q) - node_plogp
        if total < best_val - tol:
            best_val = total
            best[:] = a
        # next restricted growth string in lexicographic order
        i = n - 1
        while i >= 1 and a[i] > maxp[i]:
            i -= 1
        if i < 1:
            break
        a[i] += 1
        for j in range(i + 1, n):
            a[j] = 0
            maxp[j] = max(maxp[i], a[i])
    return best, best_val


def exhaustive(graph: AttributedGraph, profile: FlowProfile, objective: str = CME,
               ctx: FlowContext | None = None) -> tuple[np.ndarray, CodelengthReport]:
    """Global minimizer over all set partitions (n <= 12).

    Partitions whose totals differ by less than 1e-12 bits count as tied; the
    first in canonical (restricted growth) order wins.
    """
    use_attr = check_objective(graph, objective)
    if graph.n > EXHAUSTIVE_MAX_N:
        raise ValueError(f"exhaustive search is limited to n <= {EXHAUSTIVE_MAX_N}, got {graph.n}")
    if graph.n < 1:
        raise ValueError("graph has no nodes")
    ctx = ctx or FlowContext(graph, profile)
    best, _ = _enumerate(ctx.n, ctx.p, ctx.dang, ctx.src, ctx.dst, ctx.flow, ctx.a_ptr, ctx.a_idx,
                         ctx.a_val, ctx.d, ctx.tau, ctx.directed, use_attr, ctx.node_plogp, 1e-12)
    best = np.asarray(best, dtype=np.int64)
    return best, evaluate(ctx, best, use_attr)


def optimize(graph: AttributedGraph, profile: FlowProfile,
             config: OptimizerConfig) -> tuple[np.ndarray, OptimizationTrace]:
    """Dispatch on ``config.method``; exhaustive results get a one-step trace."""
    if config.method == "bottom_up":
        return bottom_up(graph, profile, config)
    if config.method == "top_down":
        return top_down(graph, profile, config)
    if config.method == "exhaustive":
        part, report = exhaustive(graph, profile, config.objective)
        trace = OptimizationTrace(report=report, iterations=1)
        trace.add(report.total, report.m)
        return part, trace
    raise ValueError(f"unknown method {config.method!r}")
