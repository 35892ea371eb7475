"""Concept-structure graphs against union-find and Floyd-Warshall oracles."""

import csv

import numpy as np
import pytest
from scipy.sparse.csgraph import floyd_warshall

from seals.data import EmbeddingDataset
from seals.graphs import (
    CSV_COLUMNS,
    ConceptGraph,
    GraphError,
    analyze_concepts,
    avg_shortest_path,
    build_concept_graph,
    connected_components,
    largest_component_fraction,
    measure_concept,
    write_structure_csv,
)
from seals.index import ExactIndex, LshIndex, LshParams


def normalize(x):
    x = np.asarray(x, dtype=np.float32)
    return x / np.linalg.norm(x, axis=-1, keepdims=True)


def dataset_from_positives(vectors, extra_background=3):
    """Wrap positive vectors in a corpus with interleaved background rows."""
    rng = np.random.default_rng(99)
    m, d = vectors.shape
    n = m + extra_background
    all_vecs = normalize(rng.standard_normal((n, d)))
    mask = np.zeros(n, dtype=bool)
    # scatter positives at non-contiguous rows so node ids are exercised
    rows = np.linspace(0, n - 1, m).astype(int)
    all_vecs[rows] = vectors
    mask[rows] = True
    return EmbeddingDataset(
        vectors=np.ascontiguousarray(all_vecs),
        ids=[f"r{i:04d}" for i in range(n)],
        concepts={"c": mask},
    )


class UnionFind:
    def __init__(self, n):
        self.parent = list(range(n))

    def find(self, a):
        while self.parent[a] != a:
            self.parent[a] = self.parent[self.parent[a]]
            a = self.parent[a]
        return a

    def union(self, a, b):
        self.parent[self.find(a)] = self.find(b)

    def groups(self, n):
        out = {}
        for i in range(n):
            out.setdefault(self.find(i), set()).add(i)
        return {frozenset(g) for g in out.values()}


def brute_knn_partition(vectors, k):
    """Union-find over the either-direction brute-force kNN adjacency."""
    m = vectors.shape[0]
    d2 = ((vectors[:, None, :] - vectors[None, :, :]) ** 2).sum(-1)
    np.fill_diagonal(d2, np.inf)
    uf = UnionFind(m)
    for i in range(m):
        for j in np.argsort(d2[i], kind="stable")[:k]:
            uf.union(i, int(j))
    return uf.groups(m)


def dense_adjacency(g: ConceptGraph) -> np.ndarray:
    m = g.num_nodes
    a = np.zeros((m, m))
    for i, nbrs in enumerate(g.neighbors):
        a[i, nbrs] = 1.0
    return a


# ---- construction ----------------------------------------------------------


def test_two_positives_yield_single_edge():
    vecs = normalize(np.array([[1.0, 0.1], [1.0, -0.1]]))
    ds = dataset_from_positives(vecs)
    g = build_concept_graph(ds, "c", k=1)
    assert g.num_nodes == 2 and g.num_edges == 1
    assert largest_component_fraction(g) == 1.0
    assert avg_shortest_path(g) == 1.0


def test_nodes_are_global_positive_rows():
    vecs = normalize(np.random.default_rng(0).standard_normal((6, 4)))
    ds = dataset_from_positives(vecs, extra_background=10)
    g = build_concept_graph(ds, "c", k=2)
    assert np.array_equal(g.nodes, ds.positives("c"))


def test_adjacency_is_symmetric_without_self_loops():
    rng = np.random.default_rng(1)
    ds = dataset_from_positives(normalize(rng.standard_normal((40, 6))))
    g = build_concept_graph(ds, "c", k=3)
    for i, nbrs in enumerate(g.neighbors):
        assert i not in nbrs
        assert np.array_equal(nbrs, np.unique(nbrs))
        for j in nbrs:
            assert i in g.neighbors[int(j)]


def test_far_clusters_stay_separate_components():
    rng = np.random.default_rng(2)
    a = normalize(np.array([1.0, 0, 0, 0]) + 0.05 * rng.standard_normal((5, 4)))
    b = normalize(np.array([-1.0, 0, 0, 0]) + 0.05 * rng.standard_normal((4, 4)))
    ds = dataset_from_positives(np.vstack([a, b]).astype(np.float32))
    g = build_concept_graph(ds, "c", k=2)
    comps = connected_components(g)
    assert sorted(c.size for c in comps) == [4, 5]
    assert largest_component_fraction(g) == pytest.approx(5 / 9)


def test_planted_sixty_forty_split():
    rng = np.random.default_rng(3)
    a = normalize(np.array([1.0, 0, 0]) + 0.03 * rng.standard_normal((60, 3)))
    b = normalize(np.array([-1.0, 0, 0]) + 0.03 * rng.standard_normal((40, 3)))
    ds = dataset_from_positives(np.vstack([a, b]).astype(np.float32))
    g = build_concept_graph(ds, "c", k=3)
    assert largest_component_fraction(g) == pytest.approx(0.6)


def test_components_match_union_find_oracle():
    rng = np.random.default_rng(4)
    centers = normalize(rng.standard_normal((4, 8)))
    vecs = normalize(
        np.repeat(centers, 50, axis=0) + 0.15 * rng.standard_normal((200, 8))
    )
    ds = dataset_from_positives(vecs)
    k = 4
    g = build_concept_graph(ds, "c", k=k)
    got = {frozenset(int(x) for x in comp) for comp in connected_components(g)}
    assert got == brute_knn_partition(vecs.astype(np.float64), k)


def test_prebuilt_subset_index_paths_agree():
    rng = np.random.default_rng(5)
    vecs = normalize(rng.standard_normal((30, 5)))
    ds = dataset_from_positives(vecs)
    sub = np.ascontiguousarray(ds.vectors[ds.positives("c")])
    default = build_concept_graph(ds, "c", k=3)
    exact = build_concept_graph(ds, "c", k=3, index=ExactIndex(sub))
    # zero-bit hashing degenerates to one bucket, i.e. an exact rerank
    lsh = build_concept_graph(
        ds, "c", k=3, index=LshIndex(sub, LshParams(num_tables=1, bits_per_table=0))
    )
    for other in (exact, lsh):
        assert np.array_equal(default.nodes, other.nodes)
        for a, b in zip(default.neighbors, other.neighbors):
            assert np.array_equal(a, b)


def test_construction_validation():
    vecs = normalize(np.array([[1.0, 0.0], [0.0, 1.0]]))
    ds = dataset_from_positives(vecs)
    with pytest.raises(GraphError):
        build_concept_graph(ds, "c", k=0)
    with pytest.raises(GraphError):
        build_concept_graph(ds, "c", k=2, index=ExactIndex(np.eye(5, dtype=np.float32)))
    one = EmbeddingDataset(
        vectors=normalize(np.eye(3)).astype(np.float32),
        ids=["a", "b", "c"],
        concepts={"solo": np.array([True, False, False])},
    )
    with pytest.raises(GraphError):
        build_concept_graph(one, "solo", k=1)


# ---- path measurements -----------------------------------------------------


def graph_from_edges(m, edges):
    nbrs = [[] for _ in range(m)]
    for a, b in edges:
        nbrs[a].append(b)
        nbrs[b].append(a)
    return ConceptGraph(
        nodes=np.arange(m, dtype=np.int64),
        neighbors=tuple(np.array(sorted(set(x)), dtype=np.int64) for x in nbrs),
    )


def test_path_graph_hand_value():
    g = graph_from_edges(3, [(0, 1), (1, 2)])
    assert avg_shortest_path(g) == pytest.approx((1 + 1 + 2) / 3)


def test_complete_graph_hand_value():
    edges = [(i, j) for i in range(6) for j in range(i + 1, 6)]
    g = graph_from_edges(6, edges)
    assert largest_component_fraction(g) == 1.0
    assert avg_shortest_path(g) == 1.0


def test_star_graph_hand_value():
    g = graph_from_edges(5, [(0, i) for i in range(1, 5)])
    assert avg_shortest_path(g) == pytest.approx(1.6)


def test_star_geometry_recovers_hand_value():
    center = np.array([1.0, 0.0, 0.0])
    offsets = [
        np.array([0, 0.02, 0.0]),
        np.array([0, -0.02, 0.0]),
        np.array([0, 0.0, 0.02]),
        np.array([0, 0.0, -0.02]),
    ]
    vecs = normalize(np.vstack([center] + [center + o for o in offsets]))
    ds = dataset_from_positives(vecs.astype(np.float32))
    g = build_concept_graph(ds, "c", k=1)
    assert g.num_edges == 4
    assert avg_shortest_path(g) == pytest.approx(1.6)


def test_single_node_component_rejected():
    g = ConceptGraph(
        nodes=np.array([7]), neighbors=(np.array([], dtype=np.int64),)
    )
    with pytest.raises(GraphError):
        avg_shortest_path(g)
    assert largest_component_fraction(g) == 1.0


def test_edgeless_fraction_is_one_over_n():
    g = graph_from_edges(5, [])
    assert largest_component_fraction(g) == pytest.approx(1 / 5)


def test_avg_path_ignores_other_components():
    # LC is a 3-path; the detached pair must not contribute
    g = graph_from_edges(5, [(0, 1), (1, 2), (3, 4)])
    assert avg_shortest_path(g) == pytest.approx((1 + 1 + 2) / 3)


def test_bfs_matches_floyd_warshall_oracle():
    rng = np.random.default_rng(6)
    for trial in range(5):
        m = int(rng.integers(20, 200))
        edges = {(0, 1)}
        # random connected graph: spanning chain plus random chords
        for i in range(2, m):
            edges.add((int(rng.integers(i)), i))
        for _ in range(m):
            a, b = rng.integers(m, size=2)
            if a != b:
                edges.add((min(int(a), int(b)), max(int(a), int(b))))
        g = graph_from_edges(m, sorted(edges))
        dist = floyd_warshall(dense_adjacency(g), unweighted=True)
        off = ~np.eye(m, dtype=bool)
        assert avg_shortest_path(g) == pytest.approx(dist[off].mean())
        assert largest_component_fraction(g) == 1.0


def test_adding_edges_is_monotone_on_connected_graphs():
    rng = np.random.default_rng(7)
    m = 30
    chain = [(i - 1, i) for i in range(1, m)]
    g = graph_from_edges(m, chain)
    frac = largest_component_fraction(g)
    path = avg_shortest_path(g)
    edges = set(chain)
    for _ in range(40):
        a, b = sorted(int(x) for x in rng.integers(m, size=2))
        if a == b or (a, b) in edges:
            continue
        edges.add((a, b))
        g = graph_from_edges(m, sorted(edges))
        new_frac = largest_component_fraction(g)
        new_path = avg_shortest_path(g)
        assert new_frac >= frac
        assert new_path <= path + 1e-12
        frac, path = new_frac, new_path


# ---- batch analysis and CSV --------------------------------------------------


def test_measure_concept_fields():
    rng = np.random.default_rng(8)
    ds = dataset_from_positives(normalize(rng.standard_normal((25, 4))))
    row = measure_concept(ds, "c", k=3)
    assert set(row) == set(CSV_COLUMNS)
    assert row["total_positives"] == 25
    assert 0 < row["lc_fraction"] <= 1.0
    assert row["avg_shortest_path"] >= 1.0


def test_analyze_concepts_orders_and_parallelizes(small_corpus):
    train, _ = small_corpus
    rows = analyze_concepts(train, k=5)
    assert [r["concept"] for r in rows] == sorted(train.concepts)
    serial = [measure_concept(train, c, 5) for c in sorted(train.concepts)]
    assert rows == serial


def test_csv_round_trip(tmp_path, small_corpus):
    train, _ = small_corpus
    rows = analyze_concepts(train, k=5, concepts=["concept-00", "concept-01"])
    out = tmp_path / "structure.csv"
    write_structure_csv(rows, out)
    with open(out, newline="") as fh:
        got = list(csv.DictReader(fh))
    assert [g["concept"] for g in got] == ["concept-00", "concept-01"]
    assert list(got[0]) == list(CSV_COLUMNS)
    for g, r in zip(got, rows):
        assert int(g["total_positives"]) == r["total_positives"]
        assert float(g["lc_fraction"]) == pytest.approx(r["lc_fraction"])
        assert float(g["avg_shortest_path"]) == pytest.approx(r["avg_shortest_path"])
