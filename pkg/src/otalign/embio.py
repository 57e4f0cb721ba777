"""Read, write, and validate dense embedding matrices.

The canonical on-disk representation is the EMB1 binary format: a fixed
little-endian header followed by a row-major float32 payload.

    offset  size  field
    0       4     magic, ASCII "EMB1"
    4       2     version, uint16 LE (currently 1)
    6       1     dtype code, uint8 (0 = float32 little-endian)
    7       1     reserved, must be 0
    8       8     rows M, uint64 LE
    16      8     dims D, uint64 LE
    24      -     payload, M*D float32 LE values, row-major

A file is valid iff its size is exactly ``HEADER_SIZE + M*D*4`` and every
payload value is finite.  A CSV sidecar format (one embedding per line,
comma-separated decimals) exists for fixtures and debugging; binary is
canonical.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import (
    BadMagic,
    InvalidShape,
    NonFiniteValue,
    ParseError,
    RaggedRows,
    TrailingData,
    TruncatedFile,
    UnsupportedDtype,
    UnsupportedVersion,
)

MAGIC = b"EMB1"
VERSION = 1
DTYPE_FLOAT32 = 0

_HEADER = struct.Struct("<4sHBBQQ")
HEADER_SIZE = _HEADER.size  # 24 bytes


@dataclass(frozen=True)
class EmbeddingMatrix:
    """Immutable M x D matrix of float32 embeddings, one per row.

    Values are validated to be finite on construction and the underlying
    array is marked read-only, so instances are safe to share across
    threads.
    """

    data: np.ndarray
    source_tag: str | None = field(default=None, compare=False)

    def __post_init__(self) -> None:
        arr = np.ascontiguousarray(self.data, dtype=np.float32)
        if arr.ndim != 2:
            raise InvalidShape(f"embedding data must be 2-D, got ndim={arr.ndim}")
        if arr.shape[0] < 1 or arr.shape[1] < 1:
            raise InvalidShape(f"embedding matrix must be at least 1x1, got {arr.shape}")
        if not np.isfinite(arr).all():
            bad = int(np.argwhere(~np.isfinite(arr))[0, 0])
            raise NonFiniteValue(f"non-finite value in row {bad}")
        arr.flags.writeable = False
        object.__setattr__(self, "data", arr)

    @property
    def rows(self) -> int:
        return self.data.shape[0]

    @property
    def dims(self) -> int:
        return self.data.shape[1]

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, EmbeddingMatrix):
            return NotImplemented
        return self.data.shape == other.data.shape and bool(
            np.array_equal(self.data, other.data)
        )

    def __hash__(self) -> int:
        return hash((self.data.shape, self.data.tobytes()))


def save_embeddings(m: EmbeddingMatrix, path: str | Path) -> None:
    """Write ``m`` to ``path`` in EMB1 format.

    Round-trips bit-exactly through :func:`load_embeddings`.
    """
    header = _HEADER.pack(MAGIC, VERSION, DTYPE_FLOAT32, 0, m.rows, m.dims)
    payload = np.ascontiguousarray(m.data, dtype="<f4")
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(payload.tobytes())


def load_embeddings(path: str | Path) -> EmbeddingMatrix:
    """Parse an EMB1 file, validating header, size, and finiteness."""
    raw = Path(path).read_bytes()
    if len(raw) < HEADER_SIZE:
        raise TruncatedFile(
            f"{path}: file is {len(raw)} bytes, shorter than the {HEADER_SIZE}-byte header"
        )
    magic, version, dtype, reserved, rows, dims = _HEADER.unpack_from(raw)
    if magic != MAGIC:
        raise BadMagic(f"{path}: bad magic {magic!r} at offset 0 (expected {MAGIC!r})")
    if version != VERSION:
        raise UnsupportedVersion(f"{path}: version {version} at offset 4 (expected {VERSION})")
    if dtype != DTYPE_FLOAT32:
        raise UnsupportedDtype(f"{path}: dtype code {dtype} at offset 6 (expected {DTYPE_FLOAT32})")
    if reserved != 0:
        raise UnsupportedVersion(f"{path}: reserved byte {reserved} at offset 7 (expected 0)")
    if rows < 1 or dims < 1:
        raise InvalidShape(f"{path}: header declares {rows}x{dims} matrix")
    expected = HEADER_SIZE + rows * dims * 4
    if len(raw) < expected:
        raise TruncatedFile(
            f"{path}: payload ends at byte {len(raw)}, header declares {rows}x{dims} "
            f"({expected} bytes total)"
        )
    if len(raw) > expected:
        raise TrailingData(f"{path}: {len(raw) - expected} unexpected bytes after offset {expected}")
    data = np.frombuffer(raw, dtype="<f4", count=rows * dims, offset=HEADER_SIZE)
    data = data.reshape(rows, dims)
    finite_rows = np.isfinite(data).all(axis=1)
    if not finite_rows.all():
        bad = int(np.argmin(finite_rows))
        raise NonFiniteValue(f"{path}: non-finite value in row {bad}")
    return EmbeddingMatrix(data.astype(np.float32, copy=True))


def save_csv(m: EmbeddingMatrix, path: str | Path) -> None:
    """Write ``m`` as one comma-separated line per embedding.

    Values are printed with 9 significant digits, enough to round-trip
    float32 exactly.
    """
    with open(path, "w", encoding="ascii") as fh:
        for row in m.data:
            fh.write(",".join(f"{v:.9g}" for v in row))
            fh.write("\n")


def load_csv(path: str | Path) -> EmbeddingMatrix:
    """Parse a CSV embedding file; errors carry 1-based line numbers."""
    rows: list[list[float]] = []
    width: int | None = None
    with open(path, "r", encoding="ascii") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            cells = line.split(",")
            if width is None:
                width = len(cells)
            elif len(cells) != width:
                raise RaggedRows(
                    f"{path}: line {lineno} has {len(cells)} columns, expected {width}"
                )
            try:
                parsed = [float(c) for c in cells]
            except ValueError as exc:
                raise ParseError(f"{path}: line {lineno}: {exc}") from exc
            if not all(np.isfinite(parsed)):
                raise NonFiniteValue(f"{path}: non-finite value on line {lineno}")
            rows.append(parsed)
    if not rows:
        raise InvalidShape(f"{path}: no embedding rows found")
    return EmbeddingMatrix(np.asarray(rows, dtype=np.float32))
