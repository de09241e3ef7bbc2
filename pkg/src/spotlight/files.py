"""Dataset ingestion.

Embeddings and losses are read either as CSV or as a flat little-endian binary
container::

    b"SPTL" | version: u32 | N: u64 | d: u64 | N*d float32, row-major

Losses use the same container with ``d == 1``. Metadata is JSON Lines with one
object per example and optional keys ``label``, ``tokens`` and ``category``.
Both encodings load to float32 so they compare bit for bit.
"""

from __future__ import annotations

import json
import os
import struct
from pathlib import Path
from typing import Optional

import numpy as np

from spotlight.core import EmbeddingDataset
from spotlight.errors import FormatError, MetadataCountError, NonFiniteError, ShapeMismatchError

MAGIC = b"SPTL"
VERSION = 1
_HEADER = struct.Struct("<4sIQQ")


def write_binary(path, matrix) -> None:
    m = np.asarray(matrix, dtype="<f4")
    if m.ndim == 1:
        m = m[:, None]
    if m.ndim != 2:
        raise ValueError(f"expected a 1-D or 2-D array, got shape {m.shape}")
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(MAGIC, VERSION, m.shape[0], m.shape[1]))
        fh.write(np.ascontiguousarray(m).tobytes())


def read_binary(path) -> np.ndarray:
    with open(path, "rb") as fh:
        head = fh.read(_HEADER.size)
        if len(head) < _HEADER.size:
            raise FormatError(f"{path}: truncated header")
        magic, version, n, d = _HEADER.unpack(head)
        if magic != MAGIC:
            raise FormatError(f"{path}: bad magic {magic!r}")
        if version != VERSION:
            raise FormatError(f"{path}: unsupported format version {version}")
        payload = fh.read()
    if len(payload) != 4 * n * d:
        raise FormatError(f"{path}: header says {n}x{d} float32 but payload has {len(payload)} bytes")
    return np.frombuffer(payload, dtype="<f4").reshape(n, d).astype(np.float32)


def write_csv(path, matrix) -> None:
    m = np.asarray(matrix, dtype=np.float32)
    if m.ndim == 1:
        m = m[:, None]
    # 9 significant digits round-trip any float32
    np.savetxt(path, m, delimiter=",", fmt="%.9g")


def _is_binary(path) -> bool:
    with open(path, "rb") as fh:
        return fh.read(4) == MAGIC


def read_matrix(path) -> np.ndarray:
    """Read a CSV or flat-binary matrix as float32 ``(rows, cols)``."""
    path = os.fspath(path)
    if _is_binary(path):
        return read_binary(path)
    try:
        m = np.loadtxt(path, delimiter=",", dtype=np.float64, ndmin=2)
    except ValueError as exc:
        raise FormatError(f"{path}: not a numeric CSV ({exc})") from exc
    return m.astype(np.float32)


def read_metadata(path) -> list:
    records = []
    with open(path, encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    while lines and not lines[-1].strip():
        lines.pop()
    for lineno, line in enumerate(lines, 1):
        try:
            rec = json.loads(line)
        except json.JSONDecodeError as exc:
            raise FormatError(f"{path}:{lineno}: invalid JSON ({exc.msg})") from exc
        if not isinstance(rec, dict):
            raise FormatError(f"{path}:{lineno}: expected a JSON object")
        tokens = rec.get("tokens")
        if tokens is not None and not (isinstance(tokens, list) and all(isinstance(t, str) for t in tokens)):
            raise FormatError(f"{path}:{lineno}: 'tokens' must be an array of strings")
        records.append(rec)
    return records


def write_metadata(path, records) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(json.dumps(rec, ensure_ascii=False, sort_keys=True) + "\n")


def load_dataset(embeddings_path, losses_path, metadata_path=None) -> EmbeddingDataset:
    X = read_matrix(embeddings_path)
    losses = read_matrix(losses_path)
    if losses.shape[1] != 1:
        raise ShapeMismatchError(f"{losses_path}: losses must be a single column, got {losses.shape[1]}")
    if losses.shape[0] != X.shape[0]:
        raise ShapeMismatchError(
            f"{embeddings_path} has {X.shape[0]} rows but {losses_path} has {losses.shape[0]} losses"
        )
    if not np.all(np.isfinite(X)):
        raise NonFiniteError(f"{embeddings_path}: embeddings contain non-finite values")
    if not np.all(np.isfinite(losses)):
        raise NonFiniteError(f"{losses_path}: non-finite loss values")
    metadata = None
    if metadata_path is not None:
        metadata = read_metadata(metadata_path)
        if len(metadata) != X.shape[0]:
            raise MetadataCountError(
                f"{metadata_path} has {len(metadata)} records, expected {X.shape[0]}"
            )
    return EmbeddingDataset(X, losses[:, 0].astype(np.float64), metadata)


def save_dataset(directory, dataset: EmbeddingDataset, fmt: str = "csv") -> dict:
    """Write the dataset's files into ``directory`` and return their paths."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    ext = "csv" if fmt == "csv" else "bin"
    write = write_csv if fmt == "csv" else write_binary
    paths = {"embeddings": directory / f"embeddings.{ext}", "losses": directory / f"losses.{ext}"}
    write(paths["embeddings"], dataset.embeddings)
    write(paths["losses"], dataset.losses)
    if dataset.metadata is not None:
        paths["metadata"] = directory / "metadata.jsonl"
        write_metadata(paths["metadata"], dataset.metadata)
    return paths
