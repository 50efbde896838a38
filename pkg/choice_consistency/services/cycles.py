"""
Cycle searches over observation digraphs.

Exact branch-and-bound for minimum vertex and minimum weighted arc removal,
minimum mean cycle (Karp) and minimum ratio cycle (parametric negative-cycle search).
Digraphs are dense T x T boolean masks; observation counts stay small.
"""

import logging
from typing import FrozenSet, List, Optional, Set, Tuple

import networkx as nx
import numpy as np

from choice_consistency.config.constants import SearchConfig, Tolerances
from choice_consistency.utils.error_handling import SearchBudgetExceeded

logger = logging.getLogger(__name__)

Edge = Tuple[int, int]


def _digraph(adjacency: np.ndarray, allowed: Optional[np.ndarray] = None) -> nx.DiGraph:
    """Digraph on the allowed nodes with the off-diagonal arcs of a boolean mask, added in index order."""
    if allowed is None:
        allowed = np.ones(adjacency.shape[0], dtype=bool)
    nodes = np.nonzero(allowed)[0].tolist()
    rows, cols = np.nonzero(adjacency & allowed[:, None] & allowed[None, :])
    graph = nx.DiGraph()
    graph.add_nodes_from(nodes)
    graph.add_edges_from((u, v) for u, v in zip(rows.tolist(), cols.tolist()) if u != v)
    return graph


def cyclic_components(adjacency: np.ndarray) -> List[List[int]]:
    """Strongly connected components with at least two nodes, each sorted, in order of first node."""
    graph = _digraph(adjacency.astype(bool))
    components = [sorted(c) for c in nx.strongly_connected_components(graph) if len(c) > 1]
    return sorted(components)


class VertexRemovalSearch:
    """
    Fewest observations to drop so that no weak cycle carries a strict edge.

    Branches on the nodes of a shortest violating cycle; earlier siblings are
    kept in later branches so each removal set is visited once.
    """

    def __init__(self, weak: np.ndarray, strict: np.ndarray,
                 node_cap: int = SearchConfig.NODE_CAP):
        self.weak = weak.copy()
        np.fill_diagonal(self.weak, False)
        self.strict = strict
        self.node_cap = node_cap
        self.nodes = 0
        self.best = 0

    def shortest_violation(self, mask: np.ndarray) -> Optional[List[int]]:
        graph = _digraph(self.weak, mask)
        best: Optional[List[int]] = None
        for i in np.nonzero(mask)[0]:
            i = int(i)
            targets = np.nonzero(self.strict[:, i] & mask)[0]
            if len(targets) == 0:
                continue
            paths = nx.single_source_shortest_path(graph, i)
            for j in targets:
                j = int(j)
                if j != i and j in paths:
                    path = paths[j]
                    if best is None or len(path) < len(best):
                        best = path
        return best

    def _greedy(self, mask: np.ndarray) -> int:
        mask = mask.copy()
        removed = 0
        while (cycle := self.shortest_violation(mask)) is not None:
            degree = (self.weak[:, mask].sum(axis=1) + self.weak[mask, :].sum(axis=0))
            mask[max(cycle, key=lambda v: (degree[v], -v))] = False
            removed += 1
        return removed

    def _lower_bound(self, mask: np.ndarray, forced: FrozenSet[int]) -> float:
        mask = mask.copy()
        bound = 0
        while (cycle := self.shortest_violation(mask)) is not None:
            free = [v for v in cycle if v not in forced]
            if not free:
                return float("inf")
            bound += 1
            mask[free] = False
        return bound

    def _branch(self, mask: np.ndarray, forced: FrozenSet[int], removed: int) -> None:
        self.nodes += 1
        if self.nodes > self.node_cap:
            raise SearchBudgetExceeded("indices", "hmi", self.nodes, self.node_cap)
        cycle = self.shortest_violation(mask)
        if cycle is None:
            self.best = min(self.best, removed)
            return
        if removed + self._lower_bound(mask, forced) >= self.best:
            return
        kept: Set[int] = set(forced)
        for v in cycle:
            if v in kept:
                continue
            child = mask.copy()
            child[v] = False
            self._branch(child, frozenset(kept), removed + 1)
            kept.add(v)

    def min_removal(self, nodes: List[int]) -> int:
        mask = np.zeros(self.weak.shape[0], dtype=bool)
        mask[nodes] = True
        self.best = self._greedy(mask)
        self._branch(mask, frozenset(), 0)
        return self.best


class FeedbackArcSearch:
    """
    Minimum total weight of arcs whose removal leaves the digraph acyclic.

    The incumbent comes from the local-ratio heuristic with reverse deletion;
    the same local-ratio packing gives the lower bound at every node. When
    the node cap is hit the search stops and `exact` turns false.
    """

    def __init__(self, arcs: np.ndarray, weights: np.ndarray,
                 node_cap: int = SearchConfig.NODE_CAP):
        self.arcs = arcs.copy()
        np.fill_diagonal(self.arcs, False)
        self.weights = weights
        self.node_cap = node_cap
        self.nodes = 0
        self.exact = True
        self.best = float("inf")

    def shortest_cycle(self, arcs: np.ndarray) -> Optional[List[Edge]]:
        graph = _digraph(arcs)
        best: Optional[List[int]] = None
        for v in range(arcs.shape[0]):
            sources = np.nonzero(arcs[:, v])[0]
            if len(sources) == 0:
                continue
            paths = nx.single_source_shortest_path(graph, v)
            for u in sources:
                u = int(u)
                if u != v and u in paths:
                    path = paths[u]
                    if best is None or len(path) < len(best):
                        best = path
        if best is None:
            return None
        return [(best[k], best[(k + 1) % len(best)]) for k in range(len(best))]

    def _local_ratio(self, arcs: np.ndarray, forced: FrozenSet[Edge]) -> Tuple[float, List[Edge]]:
        residual = np.where(arcs, self.weights, 0.0).astype(float)
        for edge in forced:
            residual[edge] = np.inf
        live = arcs.copy()
        bound = 0.0
        saturated: List[Edge] = []
        while (cycle := self.shortest_cycle(live)) is not None:
            delta = min(residual[e] for e in cycle)
            if not np.isfinite(delta):
                return float("inf"), saturated
            bound += delta
            for e in cycle:
                residual[e] -= delta
                if residual[e] <= Tolerances.RELATION:
                    live[e] = False
                    saturated.append(e)
        return bound, saturated

    def _heuristic(self, arcs: np.ndarray) -> float:
        _, removed = self._local_ratio(arcs, frozenset())
        remaining = arcs.copy()
        for e in removed:
            remaining[e] = False
        kept_back = []
        for e in reversed(removed):
            remaining[e] = True
            if self.shortest_cycle(remaining) is None:
                kept_back.append(e)
            else:
                remaining[e] = False
        chosen = [e for e in removed if e not in kept_back]
        return float(sum(self.weights[e] for e in chosen))

    def _branch(self, arcs: np.ndarray, forced: FrozenSet[Edge], cost: float) -> None:
        if self.nodes >= self.node_cap:
            self.exact = False
            return
        self.nodes += 1
        cycle = self.shortest_cycle(arcs)
        if cycle is None:
            self.best = min(self.best, cost)
            return
        bound, _ = self._local_ratio(arcs, forced)
        if cost + bound >= self.best - 1e-12:
            return
        kept: Set[Edge] = set(forced)
        for e in sorted(cycle, key=lambda edge: (self.weights[edge], edge)):
            if e in kept:
                continue
            child = arcs.copy()
            child[e] = False
            self._branch(child, frozenset(kept), cost + float(self.weights[e]))
            kept.add(e)

    def solve(self) -> float:
        self.best = self._heuristic(self.arcs)
        self._branch(self.arcs, frozenset(), 0.0)
        if not self.exact:
            logger.warning(f"Feedback arc search stopped at {self.node_cap} nodes; returning best bound")
        return self.best


def minimum_mean_cycle(weights: np.ndarray) -> Optional[float]:
    """
    Karp's minimum mean cycle weight on a dense digraph (np.inf marks absent arcs).

    Returns None when the digraph has no cycle.
    """
    n = weights.shape[0]
    table = np.full((n + 1, n), np.inf)
    table[0, :] = 0.0
    for k in range(1, n + 1):
        table[k] = np.min(table[k - 1][:, None] + weights, axis=0)
    finite = np.isfinite(table[n])
    if not finite.any():
        return None
    with np.errstate(invalid="ignore"):
        steps = (n - np.arange(n))[:, None]
        ratios = (table[n][None, :] - table[:n]) / steps
    ratios = np.where(np.isfinite(table[:n]), ratios, -np.inf)
    per_node = ratios.max(axis=0)
    return float(per_node[finite].min())


def has_negative_cycle(weights: np.ndarray, tol: float = Tolerances.RELATION) -> bool:
    """
    Bellman-Ford negative-cycle check on the finite arcs of a dense weight matrix.

    Every arc is lifted by tol / n, so only cycles below about -tol count as negative.
    """
    n = weights.shape[0]
    rows, cols = np.nonzero(np.isfinite(weights))
    graph = nx.DiGraph()
    graph.add_nodes_from(range(n))
    graph.add_weighted_edges_from(
        (u, v, float(weights[u, v]) + tol / n) for u, v in zip(rows.tolist(), cols.tolist())
    )
    return nx.negative_edge_cycle(graph, weight="weight")


def minimum_ratio_cycle(numerators: np.ndarray, denominators: np.ndarray,
                        upper: float = 1.0, iterations: int = 64) -> float:
    """
    Smallest cycle ratio (sum of numerators / sum of denominators), capped at `upper`.

    Arc (i, j) carries numerators[i, j] and finite denominators[i, j] > 0; np.inf
    in numerators marks absent arcs. Bisects on lambda with negative-cycle detection.
    """
    def negative_at(lam: float) -> bool:
        return has_negative_cycle(numerators - lam * denominators)

    if not negative_at(upper):
        return upper
    lo, hi = 0.0, upper
    for _ in range(iterations):
        mid = 0.5 * (lo + hi)
        if negative_at(mid):
            hi = mid
        else:
            lo = mid
        if hi - lo <= 1e-15:
            break
    return lo
