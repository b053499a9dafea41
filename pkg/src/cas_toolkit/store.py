"""Embedding storage: in-memory matrices, the CASE binary file format,
and the dataset manifest.

CASE layout (all integers little-endian):

| offset | size | field                     |
|--------|------|---------------------------|
| 0      | 4    | magic ``CASE``            |
| 4      | 4    | format version, u32 (=1)  |
| 8      | 8    | row count, u64            |
| 16     | 4    | dimension, u32            |
| 20     | 1    | dtype code, u8 (1=f32 LE) |
| 21     | 3    | reserved, zero            |
| 24     | ...  | row-major float32 payload |
| ...    | ...  | per row: u16 id length + UTF-8 id |

Round-trips are bit-exact: payload bytes are stored as-is, so subnormal
values survive unchanged.  Non-finite values are rejected on both read
and write.
"""

import struct
from dataclasses import dataclass, field

import numpy as np

from ._util import atomic_write_bytes, read_jsonl, write_jsonl
from .errors import FormatError, ValidationError

CASE_MAGIC = b"CASE"
CASE_VERSION = 1
CASE_DTYPE_F32 = 1
_HEADER = struct.Struct("<4sIQIB3s")

# guards against absurd headers produced by corrupt or hostile files
_MAX_DIM = 1 << 20
_MAX_ROWS = 1 << 40


@dataclass
class EmbeddingMatrix:
    """A float32 matrix with one unique string id per row."""

    rows: np.ndarray
    ids: list

    def __post_init__(self):
        rows = np.asarray(self.rows)
        if rows.ndim != 2:
            raise ValidationError(f"embedding matrix must be 2-D, got shape {rows.shape}")
        if rows.dtype != np.float32:
            rows = rows.astype(np.float32)
        rows = np.ascontiguousarray(rows)
        if rows.size and not np.isfinite(rows).all():
            raise ValidationError("embedding matrix contains NaN or Inf")
        ids = list(self.ids)
        if len(ids) != rows.shape[0]:
            raise ValidationError(
                f"id count {len(ids)} does not match row count {rows.shape[0]}"
            )
        seen = set()
        for row_id in ids:
            if not isinstance(row_id, str) or not row_id:
                raise ValidationError(f"row id must be a non-empty string, got {row_id!r}")
            if row_id in seen:
                raise ValidationError(f"duplicate row id {row_id!r}")
            seen.add(row_id)
        self.rows = rows
        self.ids = ids

    @property
    def count(self):
        return self.rows.shape[0]

    @property
    def dim(self):
        return self.rows.shape[1]

    def index_of(self):
        """id -> row index mapping."""
        return {row_id: k for k, row_id in enumerate(self.ids)}

    def row(self, row_id):
        try:
            k = self.ids.index(row_id)
        except ValueError:
            raise ValidationError(f"unknown row id {row_id!r}") from None
        return self.rows[k]


def l2_normalize(matrix):
    """Unit-normalize every row; a zero-norm row is a hard error.

    Norms are accumulated in float64 and the result is cast back to
    float32, which keeps normalization invariant under positive scaling
    of the input.
    """
    rows64 = matrix.rows.astype(np.float64)
    norms = np.sqrt((rows64 * rows64).sum(axis=1))
    bad = np.flatnonzero(norms == 0.0)
    if bad.size:
        raise ValidationError(f"zero-norm embedding row: {matrix.ids[int(bad[0])]!r}")
    normalized = (rows64 / norms[:, None]).astype(np.float32)
    return EmbeddingMatrix(rows=normalized, ids=list(matrix.ids))


def write_embeddings(matrix, path):
    """Serialize an EmbeddingMatrix to a CASE file (atomic)."""
    header = _HEADER.pack(
        CASE_MAGIC,
        CASE_VERSION,
        matrix.count,
        matrix.dim,
        CASE_DTYPE_F32,
        b"\x00\x00\x00",
    )
    payload = np.ascontiguousarray(matrix.rows, dtype="<f4").tobytes()
    chunks = [header, payload]
    for row_id in matrix.ids:
        encoded = row_id.encode("utf-8")
        if len(encoded) > 0xFFFF:
            raise ValidationError(f"row id longer than 65535 bytes: {row_id[:32]!r}...")
        chunks.append(struct.pack("<H", len(encoded)))
        chunks.append(encoded)
    atomic_write_bytes(path, b"".join(chunks))


def read_embeddings(path):
    """Parse a CASE file back into an EmbeddingMatrix."""
    with open(path, "rb") as handle:
        blob = handle.read()
    if len(blob) < _HEADER.size:
        raise FormatError(f"{path}: truncated header ({len(blob)} bytes)")
    magic, version, count, dim, dtype, reserved = _HEADER.unpack_from(blob, 0)
    if magic != CASE_MAGIC:
        raise FormatError(f"{path}: bad magic {magic!r}")
    if version != CASE_VERSION:
        raise FormatError(f"{path}: unsupported version {version}")
    if dtype != CASE_DTYPE_F32:
        raise FormatError(f"{path}: unsupported dtype code {dtype}")
    if reserved != b"\x00\x00\x00":
        raise FormatError(f"{path}: reserved header bytes are not zero")
    if dim == 0 or dim > _MAX_DIM:
        raise FormatError(f"{path}: implausible dimension {dim}")
    if count > _MAX_ROWS:
        raise FormatError(f"{path}: implausible row count {count}")
    offset = _HEADER.size
    payload_size = count * dim * 4
    if len(blob) < offset + payload_size:
        raise FormatError(
            f"{path}: truncated payload (expected {payload_size} bytes, "
            f"have {len(blob) - offset})"
        )
    rows = np.frombuffer(
        blob, dtype="<f4", count=count * dim, offset=offset
    ).reshape(count, dim)
    offset += payload_size
    ids = []
    for k in range(count):
        if len(blob) < offset + 2:
            raise FormatError(f"{path}: truncated id section at row {k}")
        (id_len,) = struct.unpack_from("<H", blob, offset)
        offset += 2
        if len(blob) < offset + id_len:
            raise FormatError(f"{path}: truncated id at row {k}")
        try:
            ids.append(blob[offset : offset + id_len].decode("utf-8"))
        except UnicodeDecodeError as exc:
            raise FormatError(f"{path}: row {k} id is not valid UTF-8") from exc
        offset += id_len
    if offset != len(blob):
        raise FormatError(f"{path}: {len(blob) - offset} trailing bytes")
    rows = rows.copy()
    if rows.size and not np.isfinite(rows).all():
        raise FormatError(f"{path}: payload contains NaN or Inf")
    try:
        return EmbeddingMatrix(rows=rows, ids=ids)
    except ValidationError as exc:
        raise FormatError(f"{path}: {exc}") from exc


@dataclass(frozen=True)
class ManifestEntry:
    """One dataset image: id, class label, optional path on disk."""

    image_id: str
    class_label: str
    source_path: str = None

    def __post_init__(self):
        if not isinstance(self.image_id, str) or not self.image_id:
            raise ValidationError(f"image_id must be a non-empty string: {self.image_id!r}")
        if not isinstance(self.class_label, str) or not self.class_label:
            raise ValidationError(
                f"class_label must be a non-empty string: {self.class_label!r}"
            )
        if self.source_path is not None and not isinstance(self.source_path, str):
            raise ValidationError(f"source_path must be a string: {self.source_path!r}")


@dataclass
class DatasetManifest:
    """Ordered dataset listing with unique image ids."""

    entries: list
    _by_id: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        entries = list(self.entries)
        by_id = {}
        for entry in entries:
            if not isinstance(entry, ManifestEntry):
                raise ValidationError("manifest entries must be ManifestEntry instances")
            if entry.image_id in by_id:
                raise ValidationError(f"duplicate image_id {entry.image_id!r}")
            by_id[entry.image_id] = entry
        self.entries = entries
        self._by_id = by_id

    def __len__(self):
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)

    def get(self, image_id):
        try:
            return self._by_id[image_id]
        except KeyError:
            raise ValidationError(f"image_id {image_id!r} not in manifest") from None

    def has(self, image_id):
        return image_id in self._by_id

    def class_labels(self):
        """Sorted unique class labels."""
        return sorted({entry.class_label for entry in self.entries})


def read_manifest(path):
    rows = read_jsonl(path, FormatError)
    entries = []
    for k, row in enumerate(rows):
        if not isinstance(row, dict):
            raise FormatError(f"{path}: entry {k} is not a JSON object")
        unknown = set(row) - {"image_id", "class_label", "source_path"}
        if unknown:
            raise FormatError(f"{path}: entry {k} has unknown keys {sorted(unknown)}")
        try:
            entries.append(
                ManifestEntry(
                    image_id=row.get("image_id"),
                    class_label=row.get("class_label"),
                    source_path=row.get("source_path"),
                )
            )
        except ValidationError as exc:
            raise FormatError(f"{path}: entry {k}: {exc}") from exc
    try:
        return DatasetManifest(entries=entries)
    except ValidationError as exc:
        raise FormatError(f"{path}: {exc}") from exc


def write_manifest(manifest, path):
    rows = []
    for entry in manifest.entries:
        row = {"image_id": entry.image_id, "class_label": entry.class_label}
        if entry.source_path is not None:
            row["source_path"] = entry.source_path
        rows.append(row)
    write_jsonl(path, rows)
