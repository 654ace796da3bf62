"""Normalized-Euclidean similarity and exact search over fragment matrices.

The metric is ``distance = euclidean(e1, e2) / (|e1| + |e2|)`` and
``similarity = 1 - distance``, both bounded in [0, 1]. Two all-zero vectors
are defined to be at distance 0. All comparisons run in 64-bit floats even
though matrices are stored as 32-bit, so threshold decisions near the bug
cutoff stay stable.

Search is an exact linear scan; result order is descending similarity with
ties broken by ascending row index, so outputs are fully deterministic.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .embedding import FragmentVector
from .errors import (
    DimensionMismatchError,
    FormatVersionMismatchError,
    NonFiniteInputError,
    SmartEmbedError,
    TruncatedFileError,
)
from .frontend.documents import Granularity

MATRIX_MAGIC = b"SMAT"
MATRIX_FORMAT_VERSION = 1

_NORM_RTOL = 1e-6

_GRANULARITY_CODE = {g: i for i, g in enumerate(Granularity)}
_CODE_GRANULARITY = {i: g for g, i in _GRANULARITY_CODE.items()}


def _as_checked_f64(vec, name: str) -> np.ndarray:
    arr = np.asarray(vec, dtype=np.float64).reshape(-1)
    if not np.all(np.isfinite(arr)):
        raise NonFiniteInputError(f"{name} contains NaN or infinite entries")
    return arr


def distance(e1, e2) -> float:
    """Euclidean distance normalized by the sum of the operand norms."""
    a = _as_checked_f64(e1, "e1")
    b = _as_checked_f64(e2, "e2")
    if a.shape != b.shape:
        raise DimensionMismatchError(
            f"vector dimensions differ: {a.shape[0]} vs {b.shape[0]}")
    diff = a - b
    euclidean = math.sqrt(float(np.dot(diff, diff)))
    denominator = (math.sqrt(float(np.dot(a, a)))
                   + math.sqrt(float(np.dot(b, b))))
    if denominator == 0.0:
        return 0.0
    return min(max(euclidean / denominator, 0.0), 1.0)


def similarity(e1, e2) -> float:
    return 1.0 - distance(e1, e2)


@dataclass
class RowMeta:
    fragment_id: str
    granularity: Granularity
    source_ref: str = ""
    label: str = ""
    external_link: str = ""
    norm: float = 0.0

    @property
    def line_count(self) -> int:
        start, _, end = self.fragment_id.partition("_")
        try:
            return int(end) - int(start) + 1
        except ValueError:
            return 0


@dataclass
class Match:
    row_index: int
    similarity: float
    meta: RowMeta


@dataclass
class EmbeddingMatrix:
    rows: np.ndarray
    meta: list[RowMeta] = field(default_factory=list)

    def __post_init__(self) -> None:
        if self.rows.ndim != 2:
            raise ValueError("rows must be a 2-D array")
        if len(self.meta) != self.rows.shape[0]:
            raise ValueError("meta entries must align with matrix rows")

    @property
    def row_count(self) -> int:
        return self.rows.shape[0]

    @property
    def dim(self) -> int:
        return self.rows.shape[1]


def build_matrix(fragments: Sequence[FragmentVector],
                 meta: Sequence[RowMeta] | None = None,
                 dim: int | None = None) -> EmbeddingMatrix:
    """Stack fragment vectors row-wise, preserving input order.

    ``meta`` rows, when given, are completed with the recomputed norms;
    otherwise minimal metadata is derived from the fragments themselves.
    """
    fragments = list(fragments)
    if meta is not None and len(meta) != len(fragments):
        raise ValueError("meta entries must align with fragments")
    if not fragments:
        return EmbeddingMatrix(np.zeros((0, dim or 0), dtype=np.float32), [])
    width = fragments[0].values.shape[0]
    for frag in fragments:
        if frag.values.shape[0] != width:
            raise DimensionMismatchError(
                f"fragment {frag.source_id!r} has dimension "
                f"{frag.values.shape[0]}, expected {width}")
    rows = np.vstack([frag.values.astype(np.float32) for frag in fragments])
    out_meta: list[RowMeta] = []
    for i, frag in enumerate(fragments):
        entry = (RowMeta(frag.source_id, frag.granularity) if meta is None
                 else meta[i])
        entry.norm = float(np.float32(math.sqrt(float(
            np.dot(rows[i].astype(np.float64), rows[i].astype(np.float64))))))
        out_meta.append(entry)
    return EmbeddingMatrix(rows, out_meta)


def _similarities(query, matrix: EmbeddingMatrix) -> list[float]:
    if matrix.row_count == 0:
        return []
    q = _as_checked_f64(query, "query")
    if q.shape[0] != matrix.dim:
        raise DimensionMismatchError(
            f"query dimension {q.shape[0]} does not match matrix dimension "
            f"{matrix.dim}")
    # Per-row scalar evaluation keeps results bit-identical to the public
    # metric, which is what the brute-force equivalence tests rely on.
    return [similarity(q, matrix.rows[i]) for i in range(matrix.row_count)]


def top_k(query, matrix: EmbeddingMatrix, k: int) -> list[Match]:
    """The ``min(k, n)`` most similar rows, exact, deterministically ordered."""
    if k < 1:
        raise ValueError("k must be at least 1")
    sims = _similarities(query, matrix)
    order = sorted(range(len(sims)), key=lambda i: (-sims[i], i))[:k]
    return [Match(i, sims[i], matrix.meta[i]) for i in order]


def threshold_query(query, matrix: EmbeddingMatrix, delta: float) -> list[Match]:
    """Every row whose similarity is at least ``delta``."""
    if not 0.0 <= delta <= 1.0:
        raise ValueError("threshold must lie in [0, 1]")
    sims = _similarities(query, matrix)
    order = sorted((i for i in range(len(sims)) if sims[i] >= delta),
                   key=lambda i: (-sims[i], i))
    return [Match(i, sims[i], matrix.meta[i]) for i in order]


# -- persistence ---------------------------------------------------------------

def _read_exact(fh, size: int, what: str) -> bytes:
    data = fh.read(size)
    if len(data) != size:
        raise TruncatedFileError(f"matrix file ended while reading {what}")
    return data


def _write_string(fh, value: str) -> None:
    raw = value.encode("utf-8")
    fh.write(struct.pack("<I", len(raw)))
    fh.write(raw)


def _read_string(fh, what: str) -> str:
    (length,) = struct.unpack("<I", _read_exact(fh, 4, f"{what} length"))
    return _read_exact(fh, length, what).decode("utf-8")


def save_matrix(matrix: EmbeddingMatrix, path) -> None:
    with open(path, "wb") as fh:
        fh.write(MATRIX_MAGIC)
        fh.write(struct.pack("<I", MATRIX_FORMAT_VERSION))
        fh.write(struct.pack("<QQ", matrix.row_count, matrix.dim))
        for entry in matrix.meta:
            _write_string(fh, entry.fragment_id)
            fh.write(struct.pack("<B", _GRANULARITY_CODE[entry.granularity]))
            _write_string(fh, entry.source_ref)
            _write_string(fh, entry.label)
            _write_string(fh, entry.external_link)
        matrix.rows.astype("<f4", copy=False).tofile(fh)
        norms = np.array([entry.norm for entry in matrix.meta], dtype="<f4")
        norms.tofile(fh)


def load_matrix(path) -> EmbeddingMatrix:
    with open(path, "rb") as fh:
        magic = _read_exact(fh, 4, "magic bytes")
        if magic != MATRIX_MAGIC:
            raise FormatVersionMismatchError("not an embedding-matrix file")
        (version,) = struct.unpack("<I", _read_exact(fh, 4, "format version"))
        if version != MATRIX_FORMAT_VERSION:
            raise FormatVersionMismatchError(
                "unsupported embedding-matrix format",
                found=version, supported=MATRIX_FORMAT_VERSION)
        n, dim = struct.unpack("<QQ", _read_exact(fh, 16, "matrix shape"))
        meta: list[RowMeta] = []
        for _ in range(n):
            fragment_id = _read_string(fh, "fragment id")
            (code,) = struct.unpack("<B", _read_exact(fh, 1, "granularity"))
            if code not in _CODE_GRANULARITY:
                raise FormatVersionMismatchError(f"unknown granularity code {code}")
            source_ref = _read_string(fh, "source ref")
            label = _read_string(fh, "label")
            link = _read_string(fh, "external link")
            meta.append(RowMeta(fragment_id, _CODE_GRANULARITY[code],
                                source_ref, label, link))
        rows = np.fromfile(fh, dtype="<f4", count=n * dim)
        if rows.size != n * dim:
            raise TruncatedFileError("matrix file ended inside the row block")
        norms = np.fromfile(fh, dtype="<f4", count=n)
        if norms.size != n:
            raise TruncatedFileError("matrix file ended inside the norm block")
    rows = rows.reshape(n, dim)
    for i, entry in enumerate(meta):
        entry.norm = float(norms[i])
        recomputed = math.sqrt(float(np.dot(rows[i].astype(np.float64),
                                            rows[i].astype(np.float64))))
        if abs(entry.norm - recomputed) > _NORM_RTOL * max(recomputed, 1e-12):
            raise SmartEmbedError(
                f"stored norm of row {i} does not match its data")
    return EmbeddingMatrix(rows, meta)
