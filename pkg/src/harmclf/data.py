"""Dataset ingestion and persistence.

IDX-format image/label files (optionally gzipped) are parsed into labeled
sets of flattened pixel vectors in [0,1].  Sets round-trip bit-exactly
through a small versioned binary container with a text header that carries
provenance metadata.
"""

from __future__ import annotations

import gzip
import math
import struct
from dataclasses import dataclass, field
from enum import IntEnum

import numpy as np

IMAGES_MAGIC = 2051  # 0x00000803: ubyte, 3 dims
LABELS_MAGIC = 2049  # 0x00000801: ubyte, 1 dim
SET_VERSION = 1


class DataError(ValueError):
    pass


class IdxMagicError(DataError):
    pass


class IdxTruncatedError(DataError):
    pass


class IdxCountMismatchError(DataError):
    pass


class SetVersionError(DataError):
    pass


class Origin(IntEnum):
    NATURAL = 0
    ADVERSARIAL = 1


@dataclass
class LabeledSet:
    images: np.ndarray                    # (N, n) float64 in [0,1]
    labels: np.ndarray                    # (N,) int64
    origin_tags: np.ndarray | None = None  # (N,) uint8 Origin values
    meta: dict[str, str] = field(default_factory=dict)

    def __post_init__(self):
        self.images = np.ascontiguousarray(self.images, dtype=np.float64)
        self.labels = np.ascontiguousarray(self.labels, dtype=np.int64)
        if self.images.ndim != 2 or self.labels.ndim != 1:
            raise DataError("images must be (N, n) and labels (N,)")
        if self.images.shape[0] != self.labels.shape[0]:
            raise DataError("images and labels must have the same length")
        if self.images.size and (self.images.min() < 0 or self.images.max() > 1):
            raise DataError("pixels must lie in [0,1]")
        if self.origin_tags is not None:
            self.origin_tags = np.ascontiguousarray(self.origin_tags, dtype=np.uint8)
            if self.origin_tags.shape != self.labels.shape:
                raise DataError("origin tags must match the sample count")

    def __len__(self) -> int:
        return self.images.shape[0]

    def subset(self, idx) -> "LabeledSet":
        idx = np.asarray(idx)
        tags = self.origin_tags[idx] if self.origin_tags is not None else None
        return LabeledSet(self.images[idx], self.labels[idx], tags,
                          dict(self.meta))


def concat_sets(a: LabeledSet, b: LabeledSet, meta: dict[str, str] | None = None) -> LabeledSet:
    if a.images.shape[1] != b.images.shape[1]:
        raise DataError("cannot concatenate sets of different dimension")
    ta = a.origin_tags if a.origin_tags is not None else np.zeros(len(a), np.uint8)
    tb = b.origin_tags if b.origin_tags is not None else np.zeros(len(b), np.uint8)
    return LabeledSet(
        np.concatenate([a.images, b.images]),
        np.concatenate([a.labels, b.labels]),
        np.concatenate([ta, tb]),
        dict(meta or {}))


def _read_binary(path) -> bytes:
    with open(path, "rb") as fh:
        head = fh.read(2)
        fh.seek(0)
        if head == b"\x1f\x8b":
            with gzip.open(fh) as gz:
                return gz.read()
        return fh.read()


def load_idx(images_path, labels_path) -> LabeledSet:
    """Parse big-endian IDX image/label files (plain or gzipped)."""
    img = _read_binary(images_path)
    if len(img) < 16:
        raise IdxTruncatedError(f"{images_path}: header truncated")
    magic, count, rows, cols = struct.unpack(">IIII", img[:16])
    if magic != IMAGES_MAGIC:
        raise IdxMagicError(f"{images_path}: magic {magic} != {IMAGES_MAGIC}")
    if len(img) != 16 + count * rows * cols:
        raise IdxTruncatedError(
            f"{images_path}: payload is {len(img) - 16} bytes, "
            f"expected {count * rows * cols}")

    lab = _read_binary(labels_path)
    if len(lab) < 8:
        raise IdxTruncatedError(f"{labels_path}: header truncated")
    lmagic, lcount = struct.unpack(">II", lab[:8])
    if lmagic != LABELS_MAGIC:
        raise IdxMagicError(f"{labels_path}: magic {lmagic} != {LABELS_MAGIC}")
    if len(lab) != 8 + lcount:
        raise IdxTruncatedError(
            f"{labels_path}: payload is {len(lab) - 8} bytes, expected {lcount}")
    if count != lcount:
        raise IdxCountMismatchError(
            f"{count} images vs {lcount} labels")

    images = np.frombuffer(img, dtype=np.uint8, offset=16)
    images = images.reshape(count, rows * cols).astype(np.float64) / 255.0
    labels = np.frombuffer(lab, dtype=np.uint8, offset=8).astype(np.int64)
    return LabeledSet(images, labels,
                      meta={"rows": str(rows), "cols": str(cols)})


def to_feature_domain(x) -> np.ndarray:
    """Scale pixel coordinates [0,1] -> [0, pi]."""
    x = np.asarray(x, dtype=np.float64)
    if x.size and (x.min() < 0 or x.max() > 1):
        raise DataError("pixels must lie in [0,1]")
    return math.pi * x


def from_feature_domain(x) -> np.ndarray:
    return np.asarray(x, dtype=np.float64) / math.pi


# ---------------------------------------------------------------------------
# persisted container

def persist_set(s: LabeledSet, path) -> None:
    n = s.images.shape[1] if s.images.ndim == 2 else 0
    lines = [f"HARMSET {SET_VERSION}",
             f"count {len(s)} dim {n} tags {1 if s.origin_tags is not None else 0}"]
    for key in sorted(s.meta):
        val = str(s.meta[key])
        if "\n" in val or "\n" in key or " " in key:
            raise DataError("meta keys must be atoms and values single-line")
        lines.append(f"meta {key} {val}")
    header = "\n".join(lines) + "\n---\n"
    with open(path, "wb") as fh:
        fh.write(header.encode())
        fh.write(s.images.astype("<f8").tobytes())
        fh.write(s.labels.astype("<i8").tobytes())
        if s.origin_tags is not None:
            fh.write(s.origin_tags.astype(np.uint8).tobytes())


def load_set(path) -> LabeledSet:
    with open(path, "rb") as fh:
        blob = fh.read()
    sep = blob.find(b"\n---\n")
    if sep < 0:
        raise SetVersionError("missing header terminator")
    head = blob[:sep].decode().splitlines()
    if not head or head[0] != f"HARMSET {SET_VERSION}":
        raise SetVersionError(f"unsupported container header: {head[:1]}")
    fields = head[1].split()
    count, dim, tags = int(fields[1]), int(fields[3]), int(fields[5])
    meta = {}
    for line in head[2:]:
        _, key, val = line.split(" ", 2)
        meta[key] = val
    body = blob[sep + 5:]
    need = count * dim * 8 + count * 8 + (count if tags else 0)
    if len(body) != need:
        raise DataError(f"container payload is {len(body)} bytes, expected {need}")
    off = count * dim * 8
    images = np.frombuffer(body, dtype="<f8", count=count * dim).reshape(count, dim)
    labels = np.frombuffer(body, dtype="<i8", count=count, offset=off)
    origin = None
    if tags:
        origin = np.frombuffer(body, dtype=np.uint8, count=count, offset=off + count * 8)
    return LabeledSet(images.copy(), labels.copy(),
                      origin.copy() if origin is not None else None, meta)


def export_csv(s: LabeledSet, path) -> None:
    """Plain-text dump for inspection: label, tag, then pixel columns."""
    with open(path, "w") as fh:
        n = s.images.shape[1]
        fh.write("label,tag," + ",".join(f"p{i}" for i in range(n)) + "\n")
        tags = (s.origin_tags if s.origin_tags is not None
                else np.zeros(len(s), np.uint8))
        for i in range(len(s)):
            row = ",".join(repr(v) for v in s.images[i])
            fh.write(f"{s.labels[i]},{tags[i]},{row}\n")
