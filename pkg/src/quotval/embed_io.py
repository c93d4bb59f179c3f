"""EMBED1 embedding-file format.

Layout: 6-byte magic "EMBED1", u8 version (=1), u32le row count N, u32le
dimension D, N*D float32le row-major vectors, N int32le class labels, then
an optional u32le-length-prefixed JSON metadata blob. All load failures
report the byte offset at which parsing stopped.
"""

from __future__ import annotations

import json
import struct

import numpy as np

MAGIC = b"EMBED1"
VERSION = 1


class EmbedLoadError(ValueError):
    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (byte offset {offset})")
        self.offset = offset


def write_embed1(path, vectors: np.ndarray, labels: np.ndarray, metadata: dict | None = None):
    vectors = np.ascontiguousarray(vectors, dtype="<f4")
    labels = np.ascontiguousarray(labels, dtype="<i4")
    if vectors.ndim != 2:
        raise ValueError("vectors must be a 2-d array")
    if labels.shape != (vectors.shape[0],):
        raise ValueError("labels length must match vector rows")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<B", VERSION))
        fh.write(struct.pack("<II", vectors.shape[0], vectors.shape[1]))
        fh.write(vectors.tobytes())
        fh.write(labels.tobytes())
        if metadata is not None:
            blob = json.dumps(metadata, sort_keys=True).encode("utf-8")
            fh.write(struct.pack("<I", len(blob)))
            fh.write(blob)


def read_embed1(path) -> tuple[np.ndarray, np.ndarray, dict | None]:
    """Parse an EMBED1 file; returns (vectors float32 (N, D), labels int32,
    metadata or None)."""
    with open(path, "rb") as fh:
        data = fh.read()
    off = 0
    if data[:6] != MAGIC:
        raise EmbedLoadError(f"bad magic {data[:6]!r}, expected {MAGIC!r}", 0)
    off = 6
    if len(data) < off + 1:
        raise EmbedLoadError("truncated before version byte", off)
    version = data[off]
    if version != VERSION:
        raise EmbedLoadError(f"unsupported version {version}", off)
    off += 1
    if len(data) < off + 8:
        raise EmbedLoadError("truncated header", off)
    n, d = struct.unpack_from("<II", data, off)
    off += 8
    vec_bytes = n * d * 4
    if len(data) < off + vec_bytes:
        raise EmbedLoadError(f"truncated vectors: need {vec_bytes} bytes", off)
    vectors = np.frombuffer(data, dtype="<f4", count=n * d, offset=off).reshape(n, d)
    off += vec_bytes
    lab_bytes = n * 4
    if len(data) < off + lab_bytes:
        raise EmbedLoadError(f"truncated labels: need {lab_bytes} bytes", off)
    labels = np.frombuffer(data, dtype="<i4", count=n, offset=off)
    off += lab_bytes
    metadata = None
    if len(data) > off:
        if len(data) < off + 4:
            raise EmbedLoadError("truncated metadata length prefix", off)
        (blob_len,) = struct.unpack_from("<I", data, off)
        off += 4
        if len(data) < off + blob_len:
            raise EmbedLoadError(f"truncated metadata blob: need {blob_len} bytes", off)
        try:
            metadata = json.loads(data[off : off + blob_len].decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError) as exc:
            raise EmbedLoadError(f"metadata blob is not valid JSON: {exc}", off) from exc
        off += blob_len
        if len(data) != off:
            raise EmbedLoadError(f"{len(data) - off} trailing bytes after metadata", off)
    bad = np.where(~np.isfinite(vectors).all(axis=1))[0]
    if bad.size:
        row_off = 15 + int(bad[0]) * d * 4
        raise EmbedLoadError(f"non-finite values in row {int(bad[0])}", row_off)
    return vectors.copy(), labels.copy(), metadata
