"""Network topologies and their doubly stochastic consensus weights.

A :class:`Graph` is an undirected, connected communication network over
agents 0..n-1.  :func:`metropolis_hastings` turns it into a symmetric,
doubly stochastic mixing matrix whose off-diagonal entry for an edge
(i, j) is ``1 / (1 + max(deg_i, deg_j))`` and whose diagonal absorbs the
residual so that every row sums to one by construction.  (The lazy
variant, which halves the off-diagonal weights, is not used.)
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError
from .rng import Xoshiro256

#: Stopping tolerance and iteration cap for the spectral-gap power iteration.
POWER_ITERATION_TOL = 1e-10
POWER_ITERATION_CAP = 100_000


@dataclass(frozen=True)
class Graph:
    """Undirected connected graph on nodes 0..n-1, edges stored as (i, j) with i < j."""

    n: int
    edges: frozenset = field(default_factory=frozenset)

    def __post_init__(self):
        if self.n < 1:
            raise ConfigurationError(f"graph needs at least one node, got n={self.n}")
        normalized = set()
        for e in self.edges:
            i, j = e
            if i == j:
                raise ConfigurationError(f"self-loop at node {i}")
            if not (0 <= i < self.n and 0 <= j < self.n):
                raise ConfigurationError(f"edge {e} out of range for n={self.n}")
            normalized.add((min(i, j), max(i, j)))
        object.__setattr__(self, "edges", frozenset(normalized))
        if not self._connected():
            raise ConfigurationError("graph is not connected")

    def _connected(self) -> bool:
        if self.n == 1:
            return True
        adj = self.adjacency_lists()
        seen = {0}
        stack = [0]
        while stack:
            u = stack.pop()
            for v in adj[u]:
                if v not in seen:
                    seen.add(v)
                    stack.append(v)
        return len(seen) == self.n

    def adjacency_lists(self) -> list:
        adj = [[] for _ in range(self.n)]
        for i, j in sorted(self.edges):
            adj[i].append(j)
            adj[j].append(i)
        return adj

    def degrees(self) -> np.ndarray:
        deg = np.zeros(self.n, dtype=int)
        for i, j in self.edges:
            deg[i] += 1
            deg[j] += 1
        return deg


@dataclass(frozen=True)
class ConsensusMatrix:
    """Dense symmetric doubly stochastic mixing weights over a graph."""

    n: int
    weights: np.ndarray

    def check(self, graph: Graph | None = None, tol: float = 1e-12) -> list:
        """Return a list of invariant violations (empty when valid).

        Checks symmetry (exact), row and column sums within `tol` of one,
        nonnegative entries, and, when `graph` is given, that off-diagonal
        support matches the edge set.
        """
        problems = []
        W = self.weights
        if W.shape != (self.n, self.n):
            return [f"shape {W.shape} does not match n={self.n}"]
        if not np.array_equal(W, W.T):
            problems.append("weights are not exactly symmetric")
        row = W.sum(axis=1)
        col = W.sum(axis=0)
        if np.max(np.abs(row - 1.0)) > tol:
            problems.append(f"row sums off by {np.max(np.abs(row - 1.0)):.3e}")
        if np.max(np.abs(col - 1.0)) > tol:
            problems.append(f"column sums off by {np.max(np.abs(col - 1.0)):.3e}")
        if np.min(W) < 0.0:
            problems.append(f"negative entry {np.min(W):.3e}")
        if graph is not None:
            for i in range(self.n):
                for j in range(i + 1, self.n):
                    on_edge = (i, j) in graph.edges
                    if W[i, j] > 0.0 and not on_edge:
                        problems.append(f"positive weight on non-edge ({i},{j})")
                    if on_edge and W[i, j] <= 0.0:
                        problems.append(f"nonpositive weight on edge ({i},{j})")
        return problems

    def validate(self, graph: Graph | None = None) -> None:
        problems = self.check(graph)
        if problems:
            raise ConfigurationError("invalid consensus matrix: " + "; ".join(problems))


def metropolis_hastings(graph: Graph) -> ConsensusMatrix:
    """Build the Metropolis-Hastings mixing matrix of a connected graph.

    Off-diagonal entries are ``1 / (1 + max(deg_i, deg_j))`` on edges and
    zero elsewhere; each diagonal entry is the residual ``1 - sum of the
    row's off-diagonal entries``, which pins the row sums (and by symmetry
    the column sums) to one without a separate correction step.
    """
    n = graph.n
    deg = graph.degrees()
    W = np.zeros((n, n))
    for i, j in sorted(graph.edges):
        w = 1.0 / (1.0 + max(deg[i], deg[j]))
        W[i, j] = w
        W[j, i] = w
    for i in range(n):
        W[i, i] = 1.0 - (W[i, :].sum() - W[i, i])
    matrix = ConsensusMatrix(n=n, weights=W)
    matrix.validate(graph)
    return matrix


def spectral_gap(P: ConsensusMatrix) -> float:
    """Second-largest eigenvalue magnitude of a consensus matrix.

    The all-ones eigenvector is deflated exactly by subtracting the
    averaging matrix, then the dominant eigenvalue of the squared
    deflated matrix is found by power iteration (squaring makes the
    iteration immune to +/- eigenvalue pairs of equal magnitude).
    For a 1x1 matrix the orthogonal subspace is empty and the gap is 0.
    """
    n = P.n
    if n == 1:
        return 0.0
    B = P.weights - np.full((n, n), 1.0 / n)
    v = np.zeros(n)
    v[0] = 1.0
    v -= v.mean()
    v /= np.linalg.norm(v)
    estimate = 0.0
    for _ in range(POWER_ITERATION_CAP):
        w = B @ (B @ v)
        w -= w.mean()  # re-deflate against numerical drift
        norm = np.linalg.norm(w)
        if norm < 1e-300:
            return 0.0
        v = w / norm
        new_estimate = float(np.linalg.norm(B @ v))
        if abs(new_estimate - estimate) <= POWER_ITERATION_TOL:
            return new_estimate
        estimate = new_estimate
    return estimate


def _ring_edges(n: int) -> set:
    if n == 1:
        return set()
    if n == 2:
        return {(0, 1)}
    return {(i, (i + 1) % n) for i in range(n)}


def _path_edges(n: int) -> set:
    return {(i, i + 1) for i in range(n - 1)}


def _complete_edges(n: int) -> set:
    return {(i, j) for i in range(n) for j in range(i + 1, n)}


def _grid_edges(n: int) -> set:
    # Near-square lattice; the last row may be partial.
    cols = max(1, int(round(np.sqrt(n))))
    edges = set()
    for k in range(n):
        r, c = divmod(k, cols)
        if c + 1 < cols and k + 1 < n:
            edges.add((k, k + 1))
        if k + cols < n:
            edges.add((k, k + cols))
    return edges


def _erdos_renyi(n: int, p: float, seed: int, max_retries: int = 1000) -> Graph:
    rng = Xoshiro256(seed)
    for _ in range(max_retries):
        edges = set()
        for i in range(n):
            for j in range(i + 1, n):
                if rng.uniform() < p:
                    edges.add((i, j))
        try:
            return Graph(n=n, edges=frozenset(edges))
        except ConfigurationError:
            continue
    raise ConfigurationError(
        f"erdos_renyi(n={n}, p={p}, seed={seed}) failed to produce a connected "
        f"graph in {max_retries} retries"
    )


def topology_from_spec(name: str, n: int, p: float | None = None, seed: int | None = None) -> Graph:
    """Build a named topology deterministically.

    Supported names: complete, ring, path, grid, erdos_renyi.  The
    erdos_renyi family requires `p` and `seed` and redraws until the
    sample is connected, giving up after 1000 attempts.
    """
    if n < 1:
        raise ConfigurationError(f"topology needs n >= 1, got {n}")
    if name == "complete":
        return Graph(n=n, edges=frozenset(_complete_edges(n)))
    if name == "ring":
        return Graph(n=n, edges=frozenset(_ring_edges(n)))
    if name == "path":
        return Graph(n=n, edges=frozenset(_path_edges(n)))
    if name == "grid":
        return Graph(n=n, edges=frozenset(_grid_edges(n)))
    if name == "erdos_renyi":
        if p is None or seed is None:
            raise ConfigurationError("erdos_renyi topology requires 'p' and 'seed'")
        return _erdos_renyi(n, p, seed)
    raise ConfigurationError(f"unknown topology '{name}'")
