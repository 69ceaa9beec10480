"""Description length of a partition under the map equation and its content variant.

Three evaluation routes are kept deliberately separate:

* ``map_equation`` / ``content_map_equation`` build ``ModuleStats`` from the
  raw definitions (``exit_probability`` and ``entropy``); they are the
  reference used in tests.
* ``evaluate`` is a vectorized version for whole label vectors.
* ``CodelengthState`` maintains per-module aggregates and answers move and
  merge queries incrementally.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
import scipy.sparse as sp

from . import _kernels
from .attrgraph import AttributedGraph
from .flow import FlowProfile, exit_probability

NEW = -1
ME, CME = "me", "cme"
MOVE_EPS = 1e-12


def _plogp(x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    out = np.zeros_like(x)
    pos = x > 0
    out[pos] = x[pos] * np.log2(x[pos])
    return out


def plogp(x: float) -> float:
    return float(x * np.log2(x)) if x > 0 else 0.0


def entropy(weights) -> float:
    """Shannon entropy in bits of ``weights`` after normalization (0 log 0 = 0)."""
    w = np.asarray(weights, dtype=np.float64).ravel()
    if np.any(w < 0):
        raise ValueError("entropy weights must be non-negative")
    total = w.sum()
    if total <= 0:
        return 0.0
    f = w[w > 0] / total
    return float(-(f * np.log2(f)).sum())


def relabel(labels: Sequence[int]) -> np.ndarray:
    """Dense module ids in ``[0, m)`` preserving the order of the input ids."""
    return np.unique(np.asarray(labels), return_inverse=True)[1].astype(np.int64)


def canonical(labels: Sequence[int]) -> np.ndarray:
    """Module ids numbered by first appearance (restricted growth string)."""
    labels = np.asarray(labels)
    _, first, inv = np.unique(labels, return_index=True, return_inverse=True)
    rank = np.empty(len(first), dtype=np.int64)
    rank[np.argsort(first, kind="stable")] = np.arange(len(first))
    return rank[inv]


def check_objective(graph: AttributedGraph, objective: str) -> bool:
    """Return whether the attribute term is used; validates the combination."""
    if objective not in (ME, CME):
        raise ValueError(f"unknown objective {objective!r}")
    if objective == CME and graph.attributes is None:
        raise ValueError("the content objective needs node attributes")
    return objective == CME


@dataclass
class ModuleStats:
    members: np.ndarray
    p_module: float
    q_exit: float
    p_circ: float
    X: np.ndarray


@dataclass
class CodelengthReport:
    index_term: float
    movement_terms: np.ndarray
    attribute_terms: np.ndarray
    total: float

    @property
    def m(self) -> int:
        return int(len(self.movement_terms))

    @property
    def movement(self) -> float:
        return float(np.sum(self.movement_terms))

    @property
    def attribute(self) -> float:
        return float(np.sum(self.attribute_terms))

    def to_dict(self) -> dict:
        return {
            "index_bits": float(f"{self.index_term:.12g}"),
            "movement_bits": float(f"{self.movement:.12g}"),
            "attribute_bits": float(f"{self.attribute:.12g}"),
            "total_bits": float(f"{self.total:.12g}"),
            "m": self.m,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict())


def module_stats(graph: AttributedGraph, profile: FlowProfile, partition: Sequence[int]) -> list[ModuleStats]:
    labels = relabel(partition)
    if len(labels) != graph.n:
        raise ValueError(f"partition covers {len(labels)} nodes, graph has {graph.n}")
    x = graph.attributes
    out = []
    for i in range(labels.max() + 1):
        members = np.flatnonzero(labels == i)
        p_i = float(profile.p[members].sum())
        q_i = exit_probability(profile, members)
        if x is not None:
            X = np.asarray(x[members].multiply(profile.p[members][:, None]).sum(axis=0)).ravel()
        else:
            X = np.zeros(0)
        out.append(ModuleStats(members=members, p_module=p_i, q_exit=q_i, p_circ=p_i + q_i, X=X))
    return out


def index_codelength(stats: Sequence[ModuleStats]) -> float:
    q = np.array([s.q_exit for s in stats])
    total = q.sum()
    return 0.0 if total <= 0 else float(total * entropy(q))


def module_codelength(stats_i: ModuleStats, p: np.ndarray) -> float:
    weights = np.concatenate([[stats_i.q_exit], p[stats_i.members]])
    return stats_i.p_circ * entropy(weights)


def attribute_codelength(stats_i: ModuleStats) -> float:
    return stats_i.p_module * entropy(stats_i.X)


def map_equation(graph: AttributedGraph, profile: FlowProfile, partition: Sequence[int]) -> CodelengthReport:
    stats = module_stats(graph, profile, partition)
    idx = index_codelength(stats)
    mov = np.array([module_codelength(s, profile.p) for s in stats])
    return CodelengthReport(idx, mov, np.zeros(len(stats)), idx + float(mov.sum()))


def content_map_equation(graph: AttributedGraph, profile: FlowProfile, partition: Sequence[int]) -> CodelengthReport:
    if graph.attributes is None:
        raise ValueError("graph has no attributes")
    stats = module_stats(graph, profile, partition)
    idx = index_codelength(stats)
    mov = np.array([module_codelength(s, profile.p) for s in stats])
    att = np.array([attribute_codelength(s) for s in stats])
    return CodelengthReport(idx, mov, att, idx + float(mov.sum()) + float(att.sum()))


def codelength(graph, profile, partition, objective: str = CME) -> CodelengthReport:
    if check_objective(graph, objective):
        return content_map_equation(graph, profile, partition)
    return map_equation(graph, profile, partition)


class FlowContext:
    """Graph, visit rates and attributes flattened into arrays for fast evaluation."""

    def __init__(self, graph: AttributedGraph, profile: FlowProfile):
        n = graph.n
        self.graph = graph
        self.profile = profile
        self.n = n
        self.p = np.ascontiguousarray(profile.p, dtype=np.float64)
        self.tau = float(profile.tau)
        self.directed = bool(profile.directed)
        self.dang = profile.dangling.astype(np.float64)
        a, b, f = profile.link_flows()
        self.src, self.dst, self.flow = a, b, f
        self.ow = np.bincount(a, weights=f, minlength=n)
        out = sp.csr_matrix((f, (a, b)), shape=(n, n))
        inn = sp.csr_matrix((f, (b, a)), shape=(n, n))
        self.out_ptr, self.out_idx, self.out_f = out.indptr.astype(np.int64), out.indices.astype(np.int64), out.data
        self.in_ptr, self.in_idx, self.in_f = inn.indptr.astype(np.int64), inn.indices.astype(np.int64), inn.data
        self.node_plogp = float(_plogp(self.p).sum())
        x = graph.attributes
        if x is not None:
            x = sp.csr_matrix(x)
            x.sort_indices()
            self.d = x.shape[1]
            self.a_ptr, self.a_idx, self.a_val = x.indptr.astype(np.int64), x.indices.astype(np.int64), x.data
            self.attr = x
        else:
            self.d = 0
            self.a_ptr = np.zeros(n + 1, dtype=np.int64)
            self.a_idx = np.zeros(0, dtype=np.int64)
            self.a_val = np.zeros(0)
            self.attr = None

    def exit_rate(self, F, D, p, nm):
        if not self.directed:
            return F
        n = self.n
        tele = 0.0 if n == 1 else self.tau * (n - nm) / (n - 1) * p
        return tele + (1.0 - self.tau) * (F + D * (n - nm) / n)

    def module_sums(self, labels: np.ndarray, m: int):
        """(p, n, F, D, q) per module for dense labels."""
        p_m = np.bincount(labels, weights=self.p, minlength=m)
        n_m = np.bincount(labels, minlength=m).astype(np.float64)
        ls, ld = labels[self.src], labels[self.dst]
        cross = ls != ld
        F = np.bincount(ls[cross], weights=self.flow[cross], minlength=m)
        D = np.bincount(labels, weights=self.p * self.dang, minlength=m)
        return p_m, n_m, F, D, self.exit_rate(F, D, p_m, n_m)

    def attribute_mass(self, labels: np.ndarray, m: int) -> sp.csr_matrix:
        """Sparse ``m x d`` matrix of visit-weighted attribute sums."""
        ind = sp.csr_matrix((self.p, (labels, np.arange(self.n))), shape=(m, self.n))
        return sp.csr_matrix(ind @ self.attr)


def evaluate(ctx: FlowContext, labels: np.ndarray, use_attr: bool) -> CodelengthReport:
    """Vectorized report for a dense label vector (each term in entropy form)."""
    labels = np.asarray(labels, dtype=np.int64)
    m = int(labels.max()) + 1
    p_m, _, _, _, q = ctx.module_sums(labels, m)
    pc = p_m + q
    Q = q.sum()
    idx = 0.0
    if Q > 0:
        qq = q[q > 0]
        idx = float(-(qq * np.log2(qq / Q)).sum())
    exit_part = np.zeros(m)
    pos = q > 0
    exit_part[pos] = -q[pos] * np.log2(q[pos] / pc[pos])
    node_part = -ctx.p * np.log2(ctx.p / pc[labels])
    mov = exit_part + np.bincount(labels, weights=node_part, minlength=m)
    att = np.zeros(m)
    if use_attr:
        X = ctx.attribute_mass(labels, m).tocoo()
        vals = -X.data * np.log2(X.data / p_m[X.row])
        att = np.bincount(X.row, weights=vals, minlength=m)
    return CodelengthReport(idx, mov, att, idx + float(mov.sum()) + float(att.sum()))


class CodelengthState:
    """Mutable per-module aggregates for incremental moves and merges.

    Module aggregates are stored by slot; ``partition()`` returns dense ids.
    Slots of empty modules are recycled for moves to a fresh module.
    """

    def __init__(self, ctx: FlowContext, labels: Sequence[int], use_attr: bool):
        self.ctx = ctx
        self.use_attr = bool(use_attr and ctx.attr is not None)
        self._build(relabel(labels))

    def _build(self, labels: np.ndarray) -> None:
        ctx, n = self.ctx, self.ctx.n
        m = int(labels.max()) + 1
        K = n
        self.labels = labels.astype(np.int64).copy()
        p_m, n_m, F, D, q = ctx.module_sums(self.labels, m)
        self.mp, self.mF, self.mD, self.mq = (np.zeros(K) for _ in range(4))
        self.mn = np.zeros(K, dtype=np.int64)
        self.mS = np.zeros(K)
        self.mp[:m], self.mn[:m], self.mF[:m], self.mD[:m], self.mq[:m] = p_m, n_m, F, D, q
        if self.use_attr:
            self.X = np.zeros((K, ctx.d))
            self.X[:m] = ctx.attribute_mass(self.labels, m).toarray()
            self.mS[:m] = _plogp(self.X[:m]).sum(axis=1)
        else:
            self.X = np.zeros((1, 1))
        self.live = np.zeros(K, dtype=np.int64)
        self.live[:m] = np.arange(m)
        self.live_pos = np.full(K, -1, dtype=np.int64)
        self.live_pos[:m] = np.arange(m)
        self.n_live = m
        # free slots popped from the end: lowest slot first
        self.free = np.arange(K - 1, m - 1, -1, dtype=np.int64)
        self.free = np.concatenate([self.free, np.zeros(K - len(self.free), dtype=np.int64)])
        self.n_free = K - m
        self.Qsum = float(q.sum())
        self._fo = np.zeros(K)
        self._fi = np.zeros(K)
        self._deltas = np.full(K, np.inf)
        self._newinfo = np.zeros(5)

    def compact(self) -> None:
        """Renumber modules densely and recompute every aggregate from scratch."""
        self._build(relabel(self.labels))

    @property
    def m(self) -> int:
        return int(self.n_live)

    def partition(self) -> np.ndarray:
        return relabel(self.labels)

    def module_of(self, node: int) -> int:
        """Dense id of the module holding ``node``."""
        return int(self.partition()[node])

    def _slot(self, module: int) -> int:
        slots = np.sort(self.live[: self.n_live])
        if not 0 <= module < len(slots):
            raise ValueError(f"invalid module id {module}")
        return int(slots[module])

    def total(self) -> float:
        """Current codelength from the maintained aggregates."""
        live = self.live[: self.n_live]
        q, p, S = self.mq[live], self.mp[live], self.mS[live]
        c = -2.0 * _plogp(q) + _plogp(q + p)
        if self.use_attr:
            c += _plogp(p) - S
        return float(plogp(q.sum()) + c.sum() - self.ctx.node_plogp)

    def report(self) -> CodelengthReport:
        return evaluate(self.ctx, self.partition(), self.use_attr)

    def _args(self):
        c = self.ctx
        return (self.labels, c.p, c.ow, c.dang, c.out_ptr, c.out_idx, c.out_f, c.in_ptr, c.in_idx, c.in_f,
                c.a_ptr, c.a_idx, c.a_val, self.mp, self.mn, self.mF, self.mD, self.mq, self.mS, self.X)

    def _candidates(self, node: int) -> float:
        """Fill ``self._deltas`` by slot; return the fresh-module delta."""
        c = self.ctx
        self._deltas[:] = np.inf
        return _kernels.candidate_deltas(
            node, *self._args(), self.live, self.n_live, self.Qsum, c.n, c.tau, c.directed,
            self.use_attr, self._fo, self._fi, self._deltas, self._newinfo)

    def delta_move(self, node: int, target: int) -> float:
        """Change in codelength if ``node`` moved to dense module ``target`` or ``NEW``."""
        if not 0 <= node < self.ctx.n:
            raise ValueError(f"invalid node {node}")
        src = int(self.labels[node])
        if target == NEW:
            if self.mn[src] == 1:
                return 0.0
            return float(self._candidates(node))
        slot = self._slot(target)
        if slot == src:
            raise ValueError("target is the node's current module")
        self._candidates(node)
        return float(self._deltas[slot])

    def best_move(self, node: int) -> tuple[float, int]:
        """Best (delta, dense target or NEW) over all legal moves of ``node``."""
        d_new = self._candidates(node)
        slots = np.sort(self.live[: self.n_live])
        vals = self._deltas[slots]
        j = int(np.argmin(vals))
        best, target = float(vals[j]), j
        if self.mn[self.labels[node]] > 1 and d_new < best:
            best, target = float(d_new), NEW
        return best, target

    def apply_move(self, node: int, target: int) -> None:
        c = self.ctx
        src = int(self.labels[node])
        if target == NEW:
            if self.mn[src] == 1:
                return
            slot = -1
        else:
            slot = self._slot(target)
            if slot == src:
                raise ValueError("target is the node's current module")
        self.n_live, self.n_free, self.Qsum, _ = _kernels.apply_move(
            node, slot, *self._args(), self.live, self.live_pos, self.n_live, self.free, self.n_free,
            self.Qsum, c.n, c.tau, c.directed, self.use_attr, self._fo, self._fi)

    def sweep(self, order: np.ndarray, eps: float = MOVE_EPS) -> int:
        c = self.ctx
        moves, self.n_live, self.n_free, self.Qsum = _kernels.sweep(
            np.ascontiguousarray(order, dtype=np.int64), *self._args(), self.live, self.live_pos,
            self.n_live, self.free, self.n_free, self.Qsum, c.n, c.tau, c.directed, self.use_attr,
            eps, self._fo, self._fi, self._deltas, self._newinfo)
        return int(moves)

    def _flow_between(self, a: int, b: int) -> float:
        ls, ld = self.labels[self.ctx.src], self.labels[self.ctx.dst]
        mask = ((ls == a) & (ld == b)) | ((ls == b) & (ld == a))
        return float(self.ctx.flow[mask].sum())

    def delta_merge(self, i: int, j: int) -> float:
        """Change in codelength if dense modules ``i`` and ``j`` were merged."""
        if i == j:
            raise ValueError("cannot merge a module with itself")
        a, b = self._slot(i), self._slot(j)
        ctx = self.ctx
        p = self.mp[a] + self.mp[b]
        F = self.mF[a] + self.mF[b] - self._flow_between(a, b)
        q = ctx.exit_rate(F, self.mD[a] + self.mD[b], p, self.mn[a] + self.mn[b])
        S = 0.0
        if self.use_attr:
            S = float(_plogp(self.X[a] + self.X[b]).sum())
        u = self.use_attr
        c_new = _kernels.contribution(q, p, S, u)
        c_old = (_kernels.contribution(self.mq[a], self.mp[a], self.mS[a], u)
                 + _kernels.contribution(self.mq[b], self.mp[b], self.mS[b], u))
        Q = self.Qsum - self.mq[a] - self.mq[b] + q
        return float(plogp(Q) - plogp(self.Qsum) + c_new - c_old)

    def apply_merge(self, i: int, j: int) -> None:
        a, b = self._slot(i), self._slot(j)
        if a == b:
            raise ValueError("cannot merge a module with itself")
        keep, gone = min(a, b), max(a, b)
        self.labels[self.labels == gone] = keep
        self.compact()


def delta_move(state: CodelengthState, node: int, target: int) -> float:
    return state.delta_move(node, target)


def delta_merge(state: CodelengthState, i: int, j: int) -> float:
    return state.delta_merge(i, j)
