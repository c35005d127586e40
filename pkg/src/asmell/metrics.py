"""Per-node structural metrics: fan-in/out, Martin instability, PageRank."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Iterable, Mapping

import numpy as np

from .errors import EmptyGraphError, MissingMetricError
from .graph import DependencyGraph

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class NodeMetrics:
    fan_in: int
    fan_out: int
    instability: float
    pagerank: float
    loc: int


def compute_fan(graph: DependencyGraph) -> dict[str, tuple[int, int]]:
    return {p: (len(graph.predecessors[p]), len(graph.successors[p])) for p in graph.paths}


def instability(fan_in: int, fan_out: int) -> float:
    """Martin's I = Ce / (Ca + Ce); isolated nodes count as maximally stable (0)."""
    if fan_in < 0 or fan_out < 0:
        raise ValueError("fan counts must be non-negative")
    total = fan_in + fan_out
    return fan_out / total if total else 0.0


def pagerank(
    graph: DependencyGraph,
    damping: float = 0.85,
    eps: float = 1e-10,
    max_iter: int = 200,
) -> dict[str, float]:
    """Power iteration with uniform teleport and uniform dangling redistribution.

    Stops when the L1 change drops below ``eps``; hitting ``max_iter`` first
    logs a warning and returns the last iterate.
    """
    n = len(graph)
    if n == 0:
        raise EmptyGraphError("pagerank of an empty graph")
    index = {p: i for i, p in enumerate(graph.paths)}
    src = np.fromiter((index[s] for s, _ in graph.sorted_edges), dtype=np.int64, count=len(graph.edges))
    dst = np.fromiter((index[d] for _, d in graph.sorted_edges), dtype=np.int64, count=len(graph.edges))
    out_deg = np.bincount(src, minlength=n).astype(float)
    dangling = out_deg == 0
    weight = np.zeros(len(src))
    if len(src):
        weight = 1.0 / out_deg[src]
    rank = np.full(n, 1.0 / n)
    converged = False
    for _ in range(max_iter):
        flow = np.bincount(dst, weights=rank[src] * weight, minlength=n)
        nxt = (1.0 - damping) / n + damping * (flow + rank[dangling].sum() / n)
        nxt /= nxt.sum()
        delta = np.abs(nxt - rank).sum()
        rank = nxt
        if delta < eps:
            converged = True
            break
    if not converged:
        log.warning("pagerank did not converge in %d iterations (v%d)", max_iter, graph.version_index)
    return {p: float(rank[i]) for p, i in index.items()}


def node_metrics(graph: DependencyGraph, damping: float = 0.85) -> dict[str, NodeMetrics]:
    if len(graph) == 0:
        return {}
    fan = compute_fan(graph)
    pr = pagerank(graph, damping)
    return {
        p: NodeMetrics(fi, fo, instability(fi, fo), pr[p], graph.loc(p))
        for p, (fi, fo) in fan.items()
    }


def smell_centrality(
    affected: Iterable[str],
    metrics: Mapping[str, NodeMetrics | float],
    node_count: int,
) -> float:
    """Max PageRank over the affected artefacts, scaled by the version's node count.

    ``affected`` may be a smell instance; its artefact union is used.
    """
    affected = getattr(affected, "artefacts", affected)
    best = None
    for path in affected:
        if path not in metrics:
            raise MissingMetricError(f"no metrics for {path}")
        m = metrics[path]
        value = m.pagerank if isinstance(m, NodeMetrics) else float(m)
        best = value if best is None else max(best, value)
    if best is None:
        raise MissingMetricError("smell instance affects no artefacts")
    return best * node_count
