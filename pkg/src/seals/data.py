"""Embedding datasets: binary vector files, manifests, oracle bitsets, seed sets.

Vector file layout (all little-endian):

    offset 0   magic  b"SEV1"
    offset 4   u32    n rows
    offset 8   u32    d columns
    offset 12  u64    reserved (zero)
    offset 20  u32    reserved (zero)
    offset 24  f32    row-major data, n * d values

The header is a fixed 24 bytes so the float payload starts 8-byte aligned and
can be memory-mapped without copying.
"""

from __future__ import annotations

import json
import os
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

MAGIC = b"SEV1"
HEADER_SIZE = 24
NORM_TOL = 1e-3

DATA_DIR_ENV = "SEALS_DATA_DIR"


class DatasetError(ValueError):
    """Malformed vector file, manifest, label set, or seed request."""


def write_vectors(path: str | Path, vectors: np.ndarray) -> None:
    """Write a 2-D float array to `path` in the binary vector format."""
    arr = np.ascontiguousarray(vectors, dtype="<f4")
    if arr.ndim != 2:
        raise DatasetError(f"expected 2-D array, got shape {arr.shape}")
    n, d = arr.shape
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<IIQI", n, d, 0, 0))
        fh.write(arr.tobytes())


def read_vectors(path: str | Path, mmap: bool = False) -> np.ndarray:
    """Read a binary vector file. With mmap=True the data is mapped read-only."""
    path = Path(path)
    try:
        size = path.stat().st_size
    except OSError as exc:
        raise DatasetError(f"cannot read vector file {path}: {exc}") from exc
    if size < HEADER_SIZE:
        raise DatasetError(f"{path}: file shorter than header")
    with open(path, "rb") as fh:
        header = fh.read(HEADER_SIZE)
    if header[:4] != MAGIC:
        raise DatasetError(f"{path}: bad magic {header[:4]!r}")
    n, d, _reserved, _pad = struct.unpack("<IIQI", header[4:])
    expected = HEADER_SIZE + 4 * n * d
    if size != expected:
        raise DatasetError(f"{path}: size {size} != expected {expected} for {n}x{d}")
    if mmap:
        return np.memmap(path, dtype="<f4", mode="r", offset=HEADER_SIZE, shape=(n, d))
    with open(path, "rb") as fh:
        fh.seek(HEADER_SIZE)
        data = np.fromfile(fh, dtype="<f4", count=n * d)
    return data.reshape(n, d)


def _check_norms(vectors: np.ndarray, context: str) -> None:
    norms = np.linalg.norm(vectors.astype(np.float64), axis=1)
    bad = np.flatnonzero(np.abs(norms - 1.0) > NORM_TOL)
    if bad.size:
        raise DatasetError(
            f"{context}: {bad.size} rows are not unit length "
            f"(first offender row {bad[0]}, norm {norms[bad[0]]:.6f}); "
            f"set normalize=true to renormalize on load"
        )


def normalize_rows(vectors: np.ndarray, context: str = "vectors") -> np.ndarray:
    """Scale every row to unit l2 norm. A zero row is an error, not a NaN."""
    norms = np.linalg.norm(vectors.astype(np.float64), axis=1)
    zero = np.flatnonzero(norms == 0.0)
    if zero.size:
        raise DatasetError(f"{context}: row {zero[0]} has zero norm, cannot normalize")
    return (vectors / norms[:, None]).astype(np.float32)


@dataclass
class EmbeddingDataset:
    """A fixed corpus of unit-norm float32 embeddings with optional oracle labels.

    concepts maps a concept name to a boolean bitset of length n marking the
    oracle positives for that concept.
    """

    vectors: np.ndarray
    ids: list[str]
    concepts: dict[str, np.ndarray] = field(default_factory=dict)

    def __post_init__(self) -> None:
        self.vectors = np.ascontiguousarray(self.vectors, dtype=np.float32)
        if self.vectors.ndim != 2:
            raise DatasetError(f"vectors must be 2-D, got shape {self.vectors.shape}")
        n = self.vectors.shape[0]
        if len(self.ids) != n:
            raise DatasetError(f"{len(self.ids)} ids for {n} rows")
        if len(set(self.ids)) != n:
            raise DatasetError("ids are not unique")
        _check_norms(self.vectors, "dataset")
        for name, bits in self.concepts.items():
            bits = np.asarray(bits, dtype=bool)
            if bits.shape != (n,):
                raise DatasetError(f"concept {name!r}: bitset shape {bits.shape} != ({n},)")
            self.concepts[name] = bits
        self._id_to_row: dict[str, int] | None = None

    @property
    def n(self) -> int:
        return self.vectors.shape[0]

    @property
    def dim(self) -> int:
        return self.vectors.shape[1]

    def row_of(self, external_id: str) -> int:
        if self._id_to_row is None:
            self._id_to_row = {ext: i for i, ext in enumerate(self.ids)}
        try:
            return self._id_to_row[external_id]
        except KeyError:
            raise DatasetError(f"unknown id {external_id!r}") from None

    def positives(self, concept: str) -> np.ndarray:
        """Row indices of oracle positives, ascending."""
        return np.flatnonzero(self._bits(concept))

    def oracle_labels(self, concept: str) -> np.ndarray:
        """Per-row labels as +1/-1 int8."""
        return np.where(self._bits(concept), 1, -1).astype(np.int8)

    def oracle_label(self, concept: str, row: int) -> int:
        return 1 if self._bits(concept)[row] else -1

    def _bits(self, concept: str) -> np.ndarray:
        try:
            return self.concepts[concept]
        except KeyError:
            raise DatasetError(f"unknown concept {concept!r}") from None


def _resolve(raw: str, manifest_dir: Path, data_dir: str | None) -> Path:
    """Resolve a manifest-referenced path: absolute, manifest-relative, then
    relative to the data-directory fallback (argument or SEALS_DATA_DIR)."""
    p = Path(raw)
    if p.is_absolute():
        return p
    local = manifest_dir / p
    if local.exists():
        return local
    root = data_dir or os.environ.get(DATA_DIR_ENV)
    if root:
        fallback = Path(root) / p
        if fallback.exists():
            return fallback
    return local  # let the caller fail with the natural path in the message


def _read_id_lines(path: Path) -> list[str]:
    try:
        with open(path, encoding="utf-8") as fh:
            return [line.rstrip("\n") for line in fh if line.rstrip("\n")]
    except OSError as exc:
        raise DatasetError(f"cannot read id file {path}: {exc}") from exc


def load_dataset(
    manifest_path: str | Path,
    data_dir: str | None = None,
    mmap: bool = False,
) -> EmbeddingDataset:
    """Load a dataset described by a JSON manifest.

    Manifest keys: "vectors" (binary vector file), "ids" (one id per line,
    UTF-8), "concepts" (list of {"name", "positives"} entries where positives
    is a file of ids), and optional "normalize" (default false). Without
    normalize, rows must already be unit length within 1e-3.
    """
    manifest_path = Path(manifest_path)
    try:
        with open(manifest_path, encoding="utf-8") as fh:
            manifest = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise DatasetError(f"cannot read manifest {manifest_path}: {exc}") from exc
    for key in ("vectors", "ids"):
        if key not in manifest:
            raise DatasetError(f"manifest missing required key {key!r}")

    mdir = manifest_path.parent
    vectors = read_vectors(_resolve(manifest["vectors"], mdir, data_dir), mmap=mmap)
    ids = _read_id_lines(_resolve(manifest["ids"], mdir, data_dir))
    if manifest.get("normalize", False):
        vectors = normalize_rows(vectors, "dataset")
    else:
        _check_norms(vectors, "dataset")
    if len(ids) != vectors.shape[0]:
        raise DatasetError(f"{len(ids)} ids for {vectors.shape[0]} rows")

    id_to_row = {ext: i for i, ext in enumerate(ids)}
    if len(id_to_row) != len(ids):
        raise DatasetError("ids are not unique")

    concepts: dict[str, np.ndarray] = {}
    for entry in manifest.get("concepts", []):
        name = entry["name"]
        if name in concepts:
            raise DatasetError(f"duplicate concept {name!r}")
        bits = np.zeros(len(ids), dtype=bool)
        for ext in _read_id_lines(_resolve(entry["positives"], mdir, data_dir)):
            row = id_to_row.get(ext)
            if row is None:
                raise DatasetError(f"concept {name!r}: unknown id {ext!r}")
            bits[row] = True
        concepts[name] = bits
    return EmbeddingDataset(vectors=vectors, ids=ids, concepts=concepts)


def save_dataset(dataset: EmbeddingDataset, out_dir: str | Path) -> Path:
    """Write vectors, ids, and concept files plus a manifest; returns its path."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_vectors(out / "vectors.sev", dataset.vectors)
    with open(out / "ids.txt", "w", encoding="utf-8") as fh:
        fh.writelines(ext + "\n" for ext in dataset.ids)
    entries = []
    for name, bits in dataset.concepts.items():
        fname = f"concept-{len(entries):03d}.txt"
        with open(out / fname, "w", encoding="utf-8") as fh:
            fh.writelines(dataset.ids[row] + "\n" for row in np.flatnonzero(bits))
        entries.append({"name": name, "positives": fname})
    manifest = {
        "vectors": "vectors.sev",
        "ids": "ids.txt",
        "concepts": entries,
        "normalize": False,
    }
    manifest_path = out / "manifest.json"
    with open(manifest_path, "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2)
        fh.write("\n")
    return manifest_path


@dataclass(frozen=True)
class SeedSpec:
    """How to draw the initial labeled set for a concept."""

    num_positives: int = 5
    negative_ratio: int = 19
    rng_seed: int = 0

    def __post_init__(self) -> None:
        if self.num_positives < 1:
            raise DatasetError("num_positives must be >= 1")
        if self.negative_ratio < 0:
            raise DatasetError("negative_ratio must be >= 0")

    @property
    def num_negatives(self) -> int:
        return self.num_positives * self.negative_ratio


class LabeledSet:
    """Ordered labeled examples (row, +1/-1); a row may appear only once."""

    def __init__(self, entries: list[tuple[int, int]] | None = None) -> None:
        self.entries: list[tuple[int, int]] = []
        self._labels: dict[int, int] = {}
        for row, label in entries or []:
            self.add(row, label)

    def add(self, row: int, label: int) -> None:
        row = int(row)
        label = int(label)
        if label not in (-1, 1):
            raise DatasetError(f"label must be +1 or -1, got {label}")
        if row in self._labels:
            raise DatasetError(f"row {row} already labeled")
        self.entries.append((row, label))
        self._labels[row] = label

    def __len__(self) -> int:
        return len(self.entries)

    def __contains__(self, row: int) -> bool:
        return int(row) in self._labels

    def label_of(self, row: int) -> int:
        return self._labels[int(row)]

    def rows(self) -> np.ndarray:
        return np.array([r for r, _ in self.entries], dtype=np.int64)

    def labels(self) -> np.ndarray:
        return np.array([y for _, y in self.entries], dtype=np.int64)

    @property
    def num_positives(self) -> int:
        return sum(1 for _, y in self.entries if y == 1)

    def copy(self) -> "LabeledSet":
        return LabeledSet(list(self.entries))


def build_seed(dataset: EmbeddingDataset, concept: str, spec: SeedSpec) -> LabeledSet:
    """Draw the seed: uniform positives then uniform negatives, no replacement.

    Deterministic for a fixed spec.rng_seed. Raises when the corpus cannot
    supply the requested counts.
    """
    bits = dataset._bits(concept)
    pos_pool = np.flatnonzero(bits)
    neg_pool = np.flatnonzero(~bits)
    if pos_pool.size < spec.num_positives:
        raise DatasetError(
            f"concept {concept!r} has {pos_pool.size} positives, "
            f"seed needs {spec.num_positives}"
        )
    if neg_pool.size < spec.num_negatives:
        raise DatasetError(
            f"concept {concept!r} has {neg_pool.size} negatives, "
            f"seed needs {spec.num_negatives}"
        )
    rng = np.random.default_rng(spec.rng_seed)
    pos = rng.choice(pos_pool, size=spec.num_positives, replace=False)
    neg = rng.choice(neg_pool, size=spec.num_negatives, replace=False)
    seed = LabeledSet()
    for row in pos:
        seed.add(int(row), 1)
    for row in neg:
        seed.add(int(row), -1)
    return seed
