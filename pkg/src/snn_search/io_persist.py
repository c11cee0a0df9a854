"""
Dataset ingestion and index serialization.

Binary layouts (all little endian):

* matrix: ``b"SNNB"``, version ``u32 = 1``, ``n u64``, ``d u64``, then
  ``n * d`` binary64 values row-major.
* index: ``b"SNNI"``, version ``u32 = 1``, ``n u64``, ``d u64``, then mean
  (``d``), direction (``d``), singular values (``d``, zero padded), scores
  (``n``), half norms (``n``), permutation (``n`` x ``u64``) and the sorted
  centered points (``n * d``), all binary64 unless noted.

Serialization is canonical: save, load and save again gives identical bytes.
"""

import csv
import logging
import math
import struct
from pathlib import Path

import numpy as np
from numpy.typing import NDArray

from snn_search.dataset import PointMatrix, as_points
from snn_search.errors import FormatError
from snn_search.indexer import SnnIndex, half_norms, row_dots

log = logging.getLogger(__name__)

MATRIX_MAGIC = b"SNNB"
INDEX_MAGIC = b"SNNI"
VERSION = 1
_HEADER = struct.Struct("<4sIQQ")
_F64 = np.dtype("<f8")
_U64 = np.dtype("<u8")

# tolerances for invariant checks on load
_UNIT_TOL = 1e-12
_SCORE_TOL = 1e-10
_NORM_TOL = 1e-12


def load_csv(path: Path, has_header: bool = False) -> PointMatrix:
    """
    Read a comma separated file of decimals, one point per line.

    Args:
        path: File to read. LF and CRLF line endings are accepted.
        has_header: Skip the first line.

    Raises:
        FormatError: For ragged rows, non-numeric or non-finite fields and
                     files without data rows. Row numbers are file line numbers.
    """
    rows: list[list[float]] = []
    width = None
    with Path(path).open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        for line_no, fields in enumerate(reader, start=1):
            if has_header and line_no == 1:
                continue
            if not fields or (len(fields) == 1 and not fields[0].strip()):
                continue
            if width is None:
                width = len(fields)
            elif len(fields) != width:
                raise FormatError(
                    f"ragged row {line_no}: expected {width} fields, got {len(fields)}"
                )
            rows.append(
                [
                    _parse_field(field, line_no, col)
                    for col, field in enumerate(fields, start=1)
                ]
            )
    if not rows:
        raise FormatError(f"empty file: no data rows in {path}")
    log.debug("Loaded %d x %d matrix from %s", len(rows), width, path)
    return as_points(rows)


def _parse_field(field: str, row: int, col: int) -> float:
    try:
        value = float(field)
    except ValueError:
        raise FormatError(
            f"non-numeric field at row {row}, column {col}: {field!r}"
        ) from None
    if not math.isfinite(value):
        raise FormatError(f"non-finite field at row {row}, column {col}: {field!r}")
    return value


def _header(magic: bytes, n: int, d: int) -> bytes:
    return _HEADER.pack(magic, VERSION, n, d)


def _read_header(data: bytes, magic: bytes) -> tuple[int, int]:
    if len(data) < _HEADER.size:
        if data[: len(magic)] != magic[: len(data)]:
            raise FormatError("bad magic")
        raise FormatError("truncated: file shorter than its header")
    found, version, n, d = _HEADER.unpack_from(data)
    if found != magic:
        raise FormatError(f"bad magic: expected {magic!r}, found {found!r}")
    if version != VERSION:
        raise FormatError(f"unsupported version {version}")
    if d < 1:
        raise FormatError("invalid dimension 0")
    return n, d


class _Reader:
    """Sequential typed reads from a payload with exact length accounting."""

    def __init__(self, data: bytes, offset: int):
        self.data = data
        self.offset = offset

    def take(self, count: int, dtype: np.dtype) -> NDArray:
        end = self.offset + count * dtype.itemsize
        if end > len(self.data):
            raise FormatError(
                f"truncated: payload needs at least {end} bytes, "
                f"file has {len(self.data)}"
            )
        arr = np.frombuffer(self.data, dtype=dtype, count=count, offset=self.offset)
        self.offset = end
        return arr.astype(dtype.newbyteorder("="))

    def finish(self) -> None:
        if self.offset != len(self.data):
            extra = len(self.data) - self.offset
            raise FormatError(f"trailing bytes: {extra} after payload")


def save_binary(points: PointMatrix, path: Path) -> None:
    """Write ``points`` in the ``SNNB`` layout."""
    pts = as_points(points)
    n, d = pts.shape
    payload = pts.astype(_F64).tobytes(order="C")
    Path(path).write_bytes(_header(MATRIX_MAGIC, n, d) + payload)


def load_binary(path: Path) -> PointMatrix:
    """Read an ``SNNB`` matrix file."""
    data = Path(path).read_bytes()
    n, d = _read_header(data, MATRIX_MAGIC)
    reader = _Reader(data, _HEADER.size)
    values = reader.take(n * d, _F64)
    reader.finish()
    if not np.isfinite(values).all():
        raise FormatError("matrix file contains NaN or infinite values")
    log.debug("Loaded %d x %d matrix from %s", n, d, path)
    return as_points(values.reshape(n, d))


def load_matrix(path: Path, fmt: str = "csv", has_header: bool = False) -> PointMatrix:
    if fmt == "binary":
        return load_binary(path)
    return load_csv(path, has_header)


def save_index(idx: SnnIndex, path: Path) -> None:
    """Write ``idx`` in the ``SNNI`` layout."""
    sigma = np.zeros(idx.d)
    if idx.sigma is not None:
        sigma[: idx.sigma.shape[0]] = idx.sigma[: idx.d]
    parts = [
        _header(INDEX_MAGIC, idx.n, idx.d),
        idx.mean.astype(_F64).tobytes(),
        idx.direction.astype(_F64).tobytes(),
        sigma.astype(_F64).tobytes(),
        idx.scores.astype(_F64).tobytes(),
        idx.half_norms.astype(_F64).tobytes(),
        idx.perm.astype(_U64).tobytes(),
        idx.sorted_points.astype(_F64).tobytes(order="C"),
    ]
    Path(path).write_bytes(b"".join(parts))


def load_index(path: Path) -> SnnIndex:
    """
    Read an ``SNNI`` index file and validate the index invariants.

    Raises:
        FormatError: For malformed files and for indexes that violate an
                     invariant (unsorted scores, non-unit direction, invalid
                     permutation, inconsistent scores or half norms).
    """
    data = Path(path).read_bytes()
    n, d = _read_header(data, INDEX_MAGIC)
    reader = _Reader(data, _HEADER.size)
    mean = reader.take(d, _F64)
    direction = reader.take(d, _F64)
    sigma = reader.take(d, _F64)
    scores = reader.take(n, _F64)
    norms = reader.take(n, _F64)
    perm = reader.take(n, _U64)
    sorted_points = reader.take(n * d, _F64).reshape(n, d)
    reader.finish()

    for name, arr in (
        ("mean", mean),
        ("direction", direction),
        ("singular values", sigma),
        ("scores", scores),
        ("half norms", norms),
        ("points", sorted_points),
    ):
        if not np.isfinite(arr).all():
            raise FormatError(f"index {name} contain NaN or infinite values")
    _validate_index(n, direction, scores, norms, perm, sorted_points)

    idx = SnnIndex(
        mean=mean,
        direction=direction,
        sorted_points=np.ascontiguousarray(sorted_points),
        scores=scores,
        half_norms=norms,
        perm=perm.astype(np.int64),
        sigma=sigma,
    )
    for arr in (
        idx.mean,
        idx.direction,
        idx.sorted_points,
        idx.scores,
        idx.half_norms,
        idx.perm,
        idx.sigma,
    ):
        arr.setflags(write=False)
    log.debug("Loaded index over %d x %d points from %s", n, d, path)
    return idx


def _validate_index(
    n: int,
    direction: NDArray,
    scores: NDArray,
    norms: NDArray,
    perm: NDArray,
    sorted_points: NDArray,
) -> None:
    if n < 1:
        raise FormatError("invalid index: no points")
    if abs(float(np.linalg.norm(direction)) - 1) > _UNIT_TOL:
        raise FormatError("invalid index: direction is not a unit vector")
    if (np.diff(scores) < 0).any():
        raise FormatError("invalid index: scores are not sorted")
    if not np.array_equal(np.sort(perm), np.arange(n, dtype=perm.dtype)):
        raise FormatError("invalid index: permutation is not a permutation of 0..n-1")
    expected_norms = half_norms(sorted_points)
    if (norms < 0).any() or not np.allclose(
        norms, expected_norms, rtol=_NORM_TOL, atol=0
    ):
        raise FormatError("invalid index: half norms do not match the points")
    expected = row_dots(sorted_points, direction)
    tolerance = _SCORE_TOL * np.maximum(1.0, np.abs(scores))
    if (np.abs(scores - expected) > tolerance).any():
        raise FormatError("invalid index: scores do not match the points")


def load_labels(path: Path) -> NDArray[np.int64]:
    """Read one integer label per line (blank lines ignored)."""
    labels = []
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    for line_no, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        try:
            labels.append(int(line))
        except ValueError:
            raise FormatError(
                f"non-integer label at line {line_no}: {line!r}"
            ) from None
    if not labels:
        raise FormatError(f"empty file: no labels in {path}")
    return np.array(labels, dtype=np.int64)


def format_labels(labels: NDArray[np.int64]) -> str:
    return "".join(f"{int(label)}\n" for label in labels)


def save_labels(labels: NDArray[np.int64], path: Path) -> None:
    Path(path).write_text(format_labels(labels), encoding="utf-8")
