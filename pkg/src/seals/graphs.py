"""Latent-structure measurements over a concept's positive examples.

Each concept induces an undirected graph: nodes are the concept's positive
rows and an edge joins two positives when either one lists the other among
its k nearest positives. Components of that graph and path lengths inside
the largest one summarize how discoverable the concept is by neighborhood
expansion: one big, tightly knit component is easy to traverse from a few
seeds, many far-flung islands are not.
"""

from __future__ import annotations

import csv
from collections import deque
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .data import EmbeddingDataset
from .index import ExactIndex

CSV_COLUMNS = ("concept", "total_positives", "lc_fraction", "avg_shortest_path")


class GraphError(ValueError):
    """Graph undefined or a measurement's precondition failed."""


@dataclass(frozen=True)
class ConceptGraph:
    """Immutable undirected graph over one concept's positive rows.

    nodes holds the global row indices in ascending order; neighbors[i] is
    the sorted local adjacency of nodes[i], self-loop free and symmetric.
    """

    nodes: np.ndarray
    neighbors: tuple[np.ndarray, ...]

    @property
    def num_nodes(self) -> int:
        return int(self.nodes.size)

    @property
    def num_edges(self) -> int:
        return sum(a.size for a in self.neighbors) // 2


def _adjacency_from_pairs(m: int, src: np.ndarray, dst: np.ndarray):
    """Symmetrize, dedupe and split edge pairs into per-node sorted lists."""
    a = np.concatenate([src, dst])
    b = np.concatenate([dst, src])
    keep = a != b
    a, b = a[keep], b[keep]
    order = np.lexsort((b, a))
    a, b = a[order], b[order]
    if a.size:
        fresh = np.ones(a.size, dtype=bool)
        fresh[1:] = (a[1:] != a[:-1]) | (b[1:] != b[:-1])
        a, b = a[fresh], b[fresh]
    bounds = np.searchsorted(a, np.arange(m + 1))
    return tuple(b[bounds[i] : bounds[i + 1]] for i in range(m))


def build_concept_graph(
    dataset: EmbeddingDataset, concept: str, k: int, index=None
) -> ConceptGraph:
    """Neighborhood graph among the concept's positives, either-direction rule.

    The k nearest neighbors are computed within the positive subset. A
    prebuilt index over exactly that subset (in ascending row order) may be
    supplied; by default an exact scan is used.
    """
    if k < 1:
        raise GraphError(f"k must be >= 1, got {k}")
    nodes = dataset.positives(concept)
    m = int(nodes.size)
    if m < 2:
        raise GraphError(f"concept {concept!r} has {m} positives, need >= 2")
    if index is None:
        index = ExactIndex(np.ascontiguousarray(dataset.vectors[nodes]))
    elif index.n != m:
        raise GraphError(
            f"index covers {index.n} rows but the concept has {m} positives"
        )
    src_parts = []
    dst_parts = []
    for i in range(m):
        found = index.query_row(i, k).rows
        src_parts.append(np.full(found.size, i, dtype=np.int64))
        dst_parts.append(found.astype(np.int64))
    neighbors = _adjacency_from_pairs(
        m, np.concatenate(src_parts), np.concatenate(dst_parts)
    )
    return ConceptGraph(nodes=nodes, neighbors=neighbors)


def _bfs(neighbors, start: int, dist: np.ndarray) -> None:
    """Unweighted single-source distances into `dist` (-1 = unreached)."""
    dist.fill(-1)
    dist[start] = 0
    queue = deque([start])
    while queue:
        u = queue.popleft()
        du = dist[u] + 1
        for v in neighbors[u]:
            if dist[v] < 0:
                dist[v] = du
                queue.append(v)


def connected_components(g: ConceptGraph) -> list[np.ndarray]:
    """Local-index components, largest first (ties by smallest member)."""
    m = g.num_nodes
    seen = np.zeros(m, dtype=bool)
    dist = np.empty(m, dtype=np.int64)
    comps = []
    for start in range(m):
        if seen[start]:
            continue
        _bfs(g.neighbors, start, dist)
        members = np.flatnonzero(dist >= 0)
        seen[members] = True
        comps.append(members)
    comps.sort(key=lambda c: (-c.size, int(c[0])))
    return comps


def largest_component_fraction(g: ConceptGraph) -> float:
    comps = connected_components(g)
    return comps[0].size / g.num_nodes


def avg_shortest_path(g: ConceptGraph) -> float:
    """Mean pairwise BFS distance inside the largest component.

    Defined only when that component has at least two nodes.
    """
    lc = connected_components(g)[0]
    s = int(lc.size)
    if s < 2:
        raise GraphError("average path undefined: largest component has one node")
    dist = np.empty(g.num_nodes, dtype=np.int64)
    total = 0
    for u in lc:
        _bfs(g.neighbors, int(u), dist)
        total += int(dist[lc].sum())  # dist[u] contributes 0
    return total / (s * (s - 1))


def measure_concept(dataset: EmbeddingDataset, concept: str, k: int) -> dict:
    g = build_concept_graph(dataset, concept, k)
    return {
        "concept": concept,
        "total_positives": g.num_nodes,
        "lc_fraction": largest_component_fraction(g),
        "avg_shortest_path": avg_shortest_path(g),
    }


def analyze_concepts(
    dataset: EmbeddingDataset,
    k: int,
    concepts: list[str] | None = None,
    max_workers: int = 4,
) -> list[dict]:
    """Structure measurements for each concept, in name order."""
    names = sorted(dataset.concepts) if concepts is None else list(concepts)
    with ThreadPoolExecutor(max_workers=max_workers) as pool:
        return list(pool.map(lambda c: measure_concept(dataset, c, k), names))


def write_structure_csv(rows: list[dict], path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=CSV_COLUMNS)
        writer.writeheader()
        for row in rows:
            writer.writerow({col: row[col] for col in CSV_COLUMNS})
