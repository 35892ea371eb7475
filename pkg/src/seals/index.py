"""Similarity search over embedding rows: exact scan and hyperplane LSH.

Both index types rank by Euclidean distance and break exact ties toward the
lower row index. The exact index can precompute a fixed-k neighbor table with
blocked matrix products, which turns the per-selection queries of a run into
array lookups.
"""

from __future__ import annotations

import heapq
import json
import struct
from dataclasses import dataclass

import numpy as np

INDEX_MAGIC = b"SIX1"


class IndexError_(ValueError):
    """Bad index parameters or a malformed index file."""


@dataclass
class KnnResult:
    """Query result: rows sorted by ascending distance, ties toward lower row.

    May hold fewer than k rows (LSH probing can come up short; the exact index
    only returns short results when fewer than k rows are eligible).
    """

    rows: np.ndarray
    distances: np.ndarray

    def __len__(self) -> int:
        return len(self.rows)


def _order_by_distance(rows: np.ndarray, d2: np.ndarray, k: int) -> KnnResult:
    d2 = np.maximum(d2, 0.0)
    order = np.lexsort((rows, d2))[:k]
    return KnnResult(rows=rows[order].astype(np.int64), distances=np.sqrt(d2[order]))


def _as_exclude_array(exclude) -> np.ndarray:
    if exclude is None:
        return np.empty(0, dtype=np.int64)
    return np.fromiter((int(r) for r in exclude), dtype=np.int64)


class ExactIndex:
    """Brute-force scan in float64, with an optional precomputed row table."""

    def __init__(self, vectors: np.ndarray) -> None:
        self.vectors = np.ascontiguousarray(vectors, dtype=np.float32)
        self.n, self.dim = self.vectors.shape
        self._table: np.ndarray | None = None
        self._table_d2: np.ndarray | None = None
        self._table_k = 0

    def query(self, vector: np.ndarray, k: int, exclude=None) -> KnnResult:
        """k nearest rows to an arbitrary vector, excluded rows never returned."""
        if k < 1:
            raise IndexError_(f"k must be >= 1, got {k}")
        q = np.asarray(vector, dtype=np.float64).reshape(-1)
        if q.shape[0] != self.dim:
            raise IndexError_(f"query dim {q.shape[0]} != index dim {self.dim}")
        diff = self.vectors.astype(np.float64) - q
        d2 = np.einsum("ij,ij->i", diff, diff)
        excl = _as_exclude_array(exclude)
        if excl.size:
            d2 = d2.copy()
            d2[excl] = np.inf
        rows = np.arange(self.n, dtype=np.int64)
        keep = np.isfinite(d2)
        return _order_by_distance(rows[keep], d2[keep], k)

    def query_row(self, row: int, k: int, exclude=None) -> KnnResult:
        """k nearest rows to a stored row, never including the row itself."""
        row = int(row)
        if not 0 <= row < self.n:
            raise IndexError_(f"row {row} out of range")
        if self._table is not None and k <= self._table_k and not exclude:
            rows = self._table[row, :k].astype(np.int64)
            return KnnResult(
                rows=rows,
                distances=np.sqrt(self._table_d2[row, :k].astype(np.float64)),
            )
        excl = set(int(r) for r in exclude) if exclude else set()
        excl.add(row)
        return self.query(self.vectors[row], k, exclude=excl)

    def precompute_table(self, k: int, block: int = 512) -> None:
        """Cache the k nearest rows of every stored row (self excluded).

        Distances are computed in float32 blocks; ranking ties still resolve
        toward the lower row index. Serves query_row for any k' <= k.
        """
        if k < 1:
            raise IndexError_(f"k must be >= 1, got {k}")
        k = min(k, self.n - 1)
        v = self.vectors
        norms = np.einsum("ij,ij->i", v, v)
        table = np.empty((self.n, k), dtype=np.int32)
        table_d2 = np.empty((self.n, k), dtype=np.float32)
        for start in range(0, self.n, block):
            stop = min(start + block, self.n)
            gram = v[start:stop] @ v.T
            d2 = norms[None, :] - 2.0 * gram + norms[start:stop, None]
            np.maximum(d2, 0.0, out=d2)
            # keep k+1 smallest, then drop the row itself by identity
            part = np.argpartition(d2, min(k, self.n - 1), axis=1)[:, : k + 1]
            for i in range(stop - start):
                cand = part[i]
                cand = cand[cand != start + i][:k]
                cd = d2[i, cand]
                order = np.lexsort((cand, cd))
                table[start + i] = cand[order]
                table_d2[start + i] = cd[order]
        self._table = table
        self._table_d2 = table_d2
        self._table_k = k

    @property
    def table_k(self) -> int:
        return self._table_k


@dataclass(frozen=True)
class LshParams:
    """Random-hyperplane LSH parameters.

    bits_per_table may be 0: every row lands in one bucket per table and a
    query degenerates to an exact scan. probe_radius counts extra buckets
    probed per table beyond the exact one; None means probe bits_per_table
    extra buckets (single-bit flips of every hash bit, cheapest first).
    """

    num_tables: int = 16
    bits_per_table: int = 12
    probe_radius: int | None = None
    rng_seed: int = 0

    def __post_init__(self) -> None:
        if self.num_tables < 1:
            raise IndexError_(f"num_tables must be >= 1, got {self.num_tables}")
        if not 0 <= self.bits_per_table <= 64:
            raise IndexError_(
                f"bits_per_table must be in [0, 64], got {self.bits_per_table}"
            )
        if self.probe_radius is not None and self.probe_radius < 0:
            raise IndexError_(f"probe_radius must be >= 0, got {self.probe_radius}")

    @property
    def effective_probe_radius(self) -> int:
        return self.bits_per_table if self.probe_radius is None else self.probe_radius


def _probe_sequence(costs: np.ndarray, radius: int):
    """Yield up to `radius` bit-flip masks ordered by increasing flip cost.

    costs[j] is the price of flipping hash bit j (distance of the projection
    from the hyperplane). Subsets are enumerated cheapest-sum-first with the
    usual shift/expand heap construction.
    """
    b = costs.shape[0]
    if b == 0 or radius <= 0:
        return
    order = np.argsort(costs, kind="stable")
    sorted_costs = costs[order]
    heap = [(float(sorted_costs[0]), (0,))]
    emitted = 0
    while heap and emitted < radius:
        cost, subset = heapq.heappop(heap)
        mask = 0
        for pos in subset:
            mask |= 1 << int(order[pos])
        yield mask
        emitted += 1
        last = subset[-1]
        if last + 1 < b:
            shifted = subset[:-1] + (last + 1,)
            heapq.heappush(
                heap, (cost - float(sorted_costs[last]) + float(sorted_costs[last + 1]), shifted)
            )
            expanded = subset + (last + 1,)
            heapq.heappush(heap, (cost + float(sorted_costs[last + 1]), expanded))


class LshIndex:
    """Multi-table random-hyperplane index over unit-norm rows."""

    def __init__(self, vectors: np.ndarray, params: LshParams, _build: bool = True) -> None:
        self.vectors = np.ascontiguousarray(vectors, dtype=np.float32)
        self.n, self.dim = self.vectors.shape
        self.params = params
        if _build:
            rng = np.random.default_rng(params.rng_seed)
            t, b = params.num_tables, params.bits_per_table
            self.planes = rng.standard_normal((t, b, self.dim)).astype(np.float32)
            self.signatures = self._signatures_for(self.vectors)
            self.buckets = self._build_buckets(self.signatures)

    def _signatures_for(self, vectors: np.ndarray) -> np.ndarray:
        t, b = self.params.num_tables, self.params.bits_per_table
        n = vectors.shape[0]
        if b == 0:
            return np.zeros((n, t), dtype=np.uint64)
        proj = vectors @ self.planes.reshape(t * b, self.dim).T
        bits = (proj >= 0.0).astype(np.uint64).reshape(n, t, b)
        weights = (np.uint64(1) << np.arange(b, dtype=np.uint64))[None, None, :]
        return (bits * weights).sum(axis=2, dtype=np.uint64)

    def _build_buckets(self, signatures: np.ndarray) -> list[dict[int, np.ndarray]]:
        tables = []
        for t in range(self.params.num_tables):
            sig = signatures[:, t]
            order = np.argsort(sig, kind="stable")
            sig_sorted = sig[order]
            keys, starts = np.unique(sig_sorted, return_index=True)
            bounds = np.append(starts, sig.shape[0])
            table = {
                int(keys[i]): order[bounds[i] : bounds[i + 1]].astype(np.int32)
                for i in range(keys.shape[0])
            }
            tables.append(table)
        return tables

    def query(self, vector: np.ndarray, k: int, exclude=None) -> KnnResult:
        """Gather candidates from probed buckets, rank exactly, return top k.

        Returns fewer than k rows when probing finds fewer candidates; there
        is no fallback scan.
        """
        if k < 1:
            raise IndexError_(f"k must be >= 1, got {k}")
        q = np.asarray(vector, dtype=np.float32).reshape(-1)
        if q.shape[0] != self.dim:
            raise IndexError_(f"query dim {q.shape[0]} != index dim {self.dim}")
        t, b = self.params.num_tables, self.params.bits_per_table
        radius = self.params.effective_probe_radius
        chunks = []
        for ti in range(t):
            if b == 0:
                sig, costs = 0, np.empty(0)
            else:
                proj = self.planes[ti] @ q
                sig = 0
                for j in range(b):
                    if proj[j] >= 0.0:
                        sig |= 1 << j
                costs = np.abs(proj)
            bucket = self.buckets[ti].get(sig)
            if bucket is not None:
                chunks.append(bucket)
            for mask in _probe_sequence(costs, radius):
                bucket = self.buckets[ti].get(sig ^ mask)
                if bucket is not None:
                    chunks.append(bucket)
        if not chunks:
            return KnnResult(np.empty(0, dtype=np.int64), np.empty(0))
        cand = np.unique(np.concatenate(chunks)).astype(np.int64)
        excl = _as_exclude_array(exclude)
        if excl.size:
            cand = cand[~np.isin(cand, excl)]
        if cand.size == 0:
            return KnnResult(np.empty(0, dtype=np.int64), np.empty(0))
        diff = self.vectors[cand].astype(np.float64) - np.asarray(vector, dtype=np.float64)
        d2 = np.einsum("ij,ij->i", diff, diff)
        return _order_by_distance(cand, d2, k)

    def query_row(self, row: int, k: int, exclude=None) -> KnnResult:
        row = int(row)
        if not 0 <= row < self.n:
            raise IndexError_(f"row {row} out of range")
        excl = set(int(r) for r in exclude) if exclude else set()
        excl.add(row)
        return self.query(self.vectors[row], k, exclude=excl)

    def save(self, path) -> None:
        """Serialize hyperplanes and buckets (not the vectors themselves)."""
        meta = {
            "num_tables": self.params.num_tables,
            "bits_per_table": self.params.bits_per_table,
            "probe_radius": self.params.probe_radius,
            "rng_seed": self.params.rng_seed,
            "n": self.n,
            "dim": self.dim,
        }
        blob = json.dumps(meta).encode("utf-8")
        with open(path, "wb") as fh:
            fh.write(INDEX_MAGIC)
            fh.write(struct.pack("<II", 1, len(blob)))
            fh.write(blob)
            fh.write(np.ascontiguousarray(self.planes, dtype="<f4").tobytes())
            for table in self.buckets:
                fh.write(struct.pack("<I", len(table)))
                for sig, rows in table.items():
                    fh.write(struct.pack("<QI", sig, rows.shape[0]))
                    fh.write(np.ascontiguousarray(rows, dtype="<i4").tobytes())

    @classmethod
    def load(cls, path, vectors: np.ndarray) -> "LshIndex":
        with open(path, "rb") as fh:
            magic = fh.read(4)
            if magic != INDEX_MAGIC:
                raise IndexError_(f"bad index magic {magic!r}")
            version, blob_len = struct.unpack("<II", fh.read(8))
            if version != 1:
                raise IndexError_(f"unsupported index version {version}")
            meta = json.loads(fh.read(blob_len).decode("utf-8"))
            params = LshParams(
                num_tables=meta["num_tables"],
                bits_per_table=meta["bits_per_table"],
                probe_radius=meta["probe_radius"],
                rng_seed=meta["rng_seed"],
            )
            index = cls(vectors, params, _build=False)
            if (index.n, index.dim) != (meta["n"], meta["dim"]):
                raise IndexError_(
                    f"vectors shape {(index.n, index.dim)} does not match "
                    f"saved index {(meta['n'], meta['dim'])}"
                )
            t, b = params.num_tables, params.bits_per_table
            planes = np.fromfile(fh, dtype="<f4", count=t * b * index.dim)
            if planes.size != t * b * index.dim:
                raise IndexError_("truncated index file (planes)")
            index.planes = planes.reshape(t, b, index.dim)
            buckets = []
            for _ in range(t):
                raw = fh.read(4)
                if len(raw) != 4:
                    raise IndexError_("truncated index file (table header)")
                (nbuckets,) = struct.unpack("<I", raw)
                table = {}
                for _ in range(nbuckets):
                    head = fh.read(12)
                    if len(head) != 12:
                        raise IndexError_("truncated index file (bucket header)")
                    sig, count = struct.unpack("<QI", head)
                    rows = np.fromfile(fh, dtype="<i4", count=count)
                    if rows.size != count:
                        raise IndexError_("truncated index file (bucket rows)")
                    table[int(sig)] = rows
                buckets.append(table)
            index.buckets = buckets
            index.signatures = index._signatures_for(index.vectors)
        return index
