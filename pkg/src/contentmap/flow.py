"""Stationary visit rates and module exit probabilities of the random walk."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable

import numpy as np
import scipy.sparse as sp

from .attrgraph import AttributedGraph

DEFAULT_TAU = 0.15
DEFAULT_TOL = 1e-12
DEFAULT_MAX_ITER = 200


class ConvergenceError(RuntimeError):
    def __init__(self, residual: float, iterations: int):
        self.residual = residual
        self.iterations = iterations
        super().__init__(f"power iteration did not converge after {iterations} iterations "
                         f"(L1 residual {residual:.3e})")


class FlowError(ValueError):
    pass


@dataclass(frozen=True)
class FlowProfile:
    """Visit rates ``p`` plus the row-normalized transition matrix.

    For the teleporting walk ``directed`` is True, ``tau`` is the teleport
    probability and ``dangling`` marks rows of ``transitions`` that are zero
    (their mass is spread uniformly over all nodes).
    """

    p: np.ndarray
    tau: float
    transitions: sp.csr_matrix
    directed: bool
    dangling: np.ndarray
    residuals: tuple[float, ...] = ()

    @property
    def n(self) -> int:
        return int(self.p.shape[0])

    def link_flows(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Per-link step probabilities ``p_a * T_ab`` for a != b."""
        t = self.transitions.tocoo()
        keep = t.row != t.col
        a, b = t.row[keep].astype(np.int64), t.col[keep].astype(np.int64)
        return a, b, self.p[a] * t.data[keep]


def _adjacency(graph: AttributedGraph, symmetric: bool) -> sp.csr_matrix:
    s, d, w = graph.src, graph.dst, graph.weight
    if symmetric:
        loops = s == d
        rows = np.concatenate([s, d[~loops]])
        cols = np.concatenate([d, s[~loops]])
        # a self-loop contributes its weight twice to the node's strength
        vals = np.concatenate([np.where(loops, 2.0 * w, w), w[~loops]])
    else:
        rows, cols, vals = s, d, w
    a = sp.csr_matrix((vals, (rows, cols)), shape=(graph.n, graph.n))
    a.sum_duplicates()
    return a


def _row_normalize(a: sp.csr_matrix) -> tuple[sp.csr_matrix, np.ndarray]:
    out = np.asarray(a.sum(axis=1)).ravel()
    dangling = out <= 0
    inv = np.divide(1.0, out, out=np.zeros_like(out), where=~dangling)
    return sp.csr_matrix(sp.diags(inv) @ a), dangling


def stationary_undirected(graph: AttributedGraph) -> FlowProfile:
    """Closed form ``p_a = strength(a) / (2 * total weight)``."""
    if graph.directed:
        raise FlowError("stationary_undirected needs an undirected graph")
    if graph.n_links == 0:
        raise FlowError("graph has no links")
    a = _adjacency(graph, symmetric=True)
    strength = np.asarray(a.sum(axis=1)).ravel()
    if np.any(strength <= 0):
        bad = int(np.flatnonzero(strength <= 0)[0])
        raise FlowError(f"node {graph.node_ids[bad]!r} is isolated (zero strength); "
                        "drop it or give it a self-loop")
    t, dangling = _row_normalize(a)
    return FlowProfile(p=strength / strength.sum(), tau=0.0, transitions=t,
                       directed=False, dangling=dangling)


def stationary_directed(graph: AttributedGraph, tau: float = DEFAULT_TAU, tol: float = DEFAULT_TOL,
                        max_iter: int = DEFAULT_MAX_ITER) -> FlowProfile:
    """PageRank-style power iteration from the uniform vector.

    Undirected graphs are walked with every link usable in both directions.
    Raises ConvergenceError when the L1 step residual is still >= ``tol``
    after ``max_iter`` iterations.
    """
    if not 0.0 <= tau < 1.0:
        raise FlowError(f"tau must be in [0, 1), got {tau}")
    if tol <= 0:
        raise FlowError("tol must be positive")
    n = graph.n
    t, dangling = _row_normalize(_adjacency(graph, symmetric=not graph.directed))
    tt = sp.csr_matrix(t.T)
    p = np.full(n, 1.0 / n)
    residuals = []
    for _ in range(max_iter):
        nxt = (1.0 - tau) * (tt @ p + p[dangling].sum() / n) + tau / n
        nxt /= nxt.sum()
        res = float(np.abs(nxt - p).sum())
        residuals.append(res)
        p = nxt
        if res < tol:
            break
    else:
        raise ConvergenceError(residuals[-1], max_iter)
    return FlowProfile(p=p, tau=float(tau), transitions=t, directed=True,
                       dangling=dangling, residuals=tuple(residuals))


def stationary(graph: AttributedGraph, tau: float = DEFAULT_TAU, tol: float = DEFAULT_TOL,
               max_iter: int = DEFAULT_MAX_ITER) -> FlowProfile:
    if graph.directed:
        return stationary_directed(graph, tau, tol, max_iter)
    return stationary_undirected(graph)


def exit_probability(profile: FlowProfile, module: Iterable[int]) -> float:
    """Per-step probability that the walk leaves ``module``.

    Directed: ``tau*(n-n_i)/(n-1)*p_i + (1-tau)*(link exits + dangling exits)``,
    where a dangling node's step lands outside with probability ``(n-n_i)/n``.
    Undirected: link exits only.
    """
    members = np.unique(np.fromiter(module, dtype=np.int64))
    if members.size == 0:
        raise ValueError("module is empty")
    n = profile.n
    inside = np.zeros(n, dtype=bool)
    inside[members] = True
    t = profile.transitions[members]
    out_mass = np.asarray(t[:, ~inside].sum(axis=1)).ravel()
    link_exit = float(np.dot(profile.p[members], out_mass))
    if not profile.directed:
        return link_exit
    n_i = members.size
    p_i = float(profile.p[members].sum())
    dangling_mass = float(profile.p[members][profile.dangling[members]].sum())
    teleport = 0.0 if n == 1 else profile.tau * (n - n_i) / (n - 1) * p_i
    return teleport + (1.0 - profile.tau) * (link_exit + dangling_mass * (n - n_i) / n)
