import numpy as np
import pytest

from contentmap.attrgraph import from_edges
from contentmap.flow import stationary

BARBELL_EDGES = [(0, 1), (0, 2), (1, 2), (3, 4), (3, 5), (4, 5), (2, 3)]
BARBELL_ONEHOT = np.array([[1, 0]] * 3 + [[0, 1]] * 3, dtype=float)
SPLIT = [0, 0, 0, 1, 1, 1]
ONE = [0] * 6


@pytest.fixture
def barbell():
    g = from_edges(6, BARBELL_EDGES, attributes=BARBELL_ONEHOT)
    return g, stationary(g)


def random_graph(rng, n, directed=False, d=4, density=0.6, extra=None, self_loops=False):
    """Connected random graph (spanning tree plus extra links) with sparse attributes.

    Rows with no attribute entries fall back to the uniform vector.
    """
    edges = [(i, int(rng.integers(0, i))) for i in range(1, n)]
    k = int(rng.integers(0, n + 1)) if extra is None else extra
    for _ in range(k):
        a, b = (int(v) for v in rng.integers(0, n, 2))
        if a != b or self_loops:
            edges.append((a, b))
    if directed:
        edges = [(b, a) if rng.random() < 0.5 else (a, b) for a, b in edges]
        edges += [(b, a) for a, b in edges if rng.random() < 0.3]
    w = rng.uniform(0.5, 2.0, len(edges))
    x = rng.random((n, d)) * (rng.random((n, d)) < density)
    return from_edges(n, edges, weights=w, directed=directed, attributes=x)


def random_partition(rng, n):
    k = int(rng.integers(1, n + 1))
    return rng.integers(0, k, n)


acceptance_results = []


def pytest_terminal_summary(terminalreporter):
    if not acceptance_results:
        return
    terminalreporter.section("acceptance criteria")
    for line in acceptance_results:
        terminalreporter.write_line(line)
