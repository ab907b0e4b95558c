"""Directory containers: a JSON manifest plus little-endian binary blobs.

Layout::

    DIR/manifest.json
    DIR/assignments.bin     uint16, (num_items, num_splits), row-major
    DIR/subemb_<m>.bin      float32, (num_subids, dim // num_splits), one per split
    DIR/queries.bin         float32, (num_queries, dim)   workloads only

Every blob's byte length and CRC32 are recorded in the manifest. Inverted
indexes are rebuilt from the assignments and never written.
"""

from __future__ import annotations

import json
import os
import zlib
from pathlib import Path

import numpy as np

from .builder import SyntheticWorkload
from .core import Codebook, InputError

SCHEMA_VERSION = 1
MANIFEST = "manifest.json"

_U16 = np.dtype("<u2")
_F32 = np.dtype("<f4")


class StorageError(Exception):
    pass


class CorruptionError(StorageError):
    """A blob is missing, truncated or fails its checksum."""


class FormatError(StorageError):
    """The manifest is malformed or inconsistent with the blobs."""


class UnsupportedFormatError(FormatError):
    pass


def _write_blob(root: Path, name: str, arr: np.ndarray, dtype: np.dtype) -> dict:
    data = np.ascontiguousarray(arr, dtype=dtype).tobytes()
    (root / name).write_bytes(data)
    return {"size": len(data), "crc32": zlib.crc32(data)}


def _save(root, cb: Codebook, meta: dict, queries: np.ndarray | None) -> None:
    root = Path(root)
    root.mkdir(parents=True, exist_ok=True)
    blobs = {"assignments.bin": _write_blob(root, "assignments.bin", cb.assignments, _U16)}
    for m in range(cb.num_splits):
        name = f"subemb_{m}.bin"
        blobs[name] = _write_blob(root, name, cb.sub_embeddings[m], _F32)
    if queries is not None:
        blobs["queries.bin"] = _write_blob(root, "queries.bin", queries, _F32)
    manifest = {
        "schema_version": SCHEMA_VERSION,
        "num_items": cb.num_items,
        "num_splits": cb.num_splits,
        "num_subids": cb.num_subids,
        "dim": cb.dim,
        **meta,
        "blobs": blobs,
    }
    # manifest last, atomically: a directory with a manifest is complete
    tmp = root / (MANIFEST + ".tmp")
    tmp.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    os.replace(tmp, root / MANIFEST)


def _read_manifest(root: Path) -> dict:
    try:
        manifest = json.loads((root / MANIFEST).read_text(encoding="utf-8"))
    except FileNotFoundError as exc:
        raise FormatError(f"no {MANIFEST} in {root}") from exc
    except json.JSONDecodeError as exc:
        raise FormatError(f"unreadable manifest: {exc}") from exc
    if not isinstance(manifest, dict):
        raise FormatError("manifest must be a JSON object")
    version = manifest.get("schema_version")
    if version != SCHEMA_VERSION:
        raise UnsupportedFormatError(f"schema version {version!r} is not supported (expected {SCHEMA_VERSION})")
    for key in ("num_items", "num_splits", "num_subids", "dim"):
        value = manifest.get(key)
        if not isinstance(value, int) or isinstance(value, bool) or value < 1:
            raise FormatError(f"manifest field {key!r} must be a positive integer")
    if not isinstance(manifest.get("blobs"), dict):
        raise FormatError("manifest has no blob table")
    return manifest


def _read_blob(root: Path, manifest: dict, name: str, dtype: np.dtype, shape: tuple[int, ...]) -> np.ndarray:
    entry = manifest["blobs"].get(name)
    if not isinstance(entry, dict) or "size" not in entry or "crc32" not in entry:
        raise FormatError(f"manifest has no entry for {name}")
    try:
        data = (root / name).read_bytes()
    except FileNotFoundError as exc:
        raise CorruptionError(f"missing blob {name}") from exc
    if len(data) != entry["size"] or zlib.crc32(data) != entry["crc32"]:
        raise CorruptionError(f"blob {name} does not match its manifest checksum")
    expected = int(np.prod(shape)) * dtype.itemsize
    if len(data) != expected:
        raise FormatError(f"blob {name} holds {len(data)} bytes, manifest dimensions imply {expected}")
    return np.frombuffer(data, dtype=dtype).reshape(shape)


def _load_codebook(root: Path, manifest: dict) -> Codebook:
    n, M, B, d = (manifest[k] for k in ("num_items", "num_splits", "num_subids", "dim"))
    if d % M:
        raise FormatError(f"dim {d} is not divisible by {M} splits")
    assignments = _read_blob(root, manifest, "assignments.bin", _U16, (n, M))
    sub = np.stack([_read_blob(root, manifest, f"subemb_{m}.bin", _F32, (B, d // M)) for m in range(M)])
    try:
        return Codebook(assignments, sub)
    except InputError as exc:
        raise FormatError(str(exc)) from exc


def save_codebook(cb: Codebook, path) -> None:
    _save(path, cb, {}, None)


def load_codebook(path) -> Codebook:
    root = Path(path)
    return _load_codebook(root, _read_manifest(root))


def save_workload(wl: SyntheticWorkload, path) -> None:
    meta = {"seed": wl.seed, "skew": wl.skew, "num_users": wl.num_users, "num_queries": wl.num_queries}
    _save(path, wl.codebook, meta, wl.queries)


def load_workload(path) -> SyntheticWorkload:
    root = Path(path)
    manifest = _read_manifest(root)
    nq = manifest.get("num_queries")
    if not isinstance(nq, int) or nq < 0:
        raise FormatError("workload manifest needs a non-negative num_queries")
    cb = _load_codebook(root, manifest)
    queries = _read_blob(root, manifest, "queries.bin", _F32, (nq, cb.dim))
    return SyntheticWorkload(
        cb,
        queries,
        seed=manifest.get("seed", 0),
        skew=float(manifest.get("skew", 0.0)),
        num_users=manifest.get("num_users", 0),
    )


def workloads_equal(a: SyntheticWorkload, b: SyntheticWorkload) -> bool:
    return (
        a.codebook.equals(b.codebook)
        and a.queries.shape == b.queries.shape
        and a.queries.tobytes() == b.queries.tobytes()
        and (a.seed, a.skew, a.num_users) == (b.seed, b.skew, b.num_users)
    )
