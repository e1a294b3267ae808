"""On-disk cache of assembled single-layer matrices.

Each entry is one file: a fixed binary header followed by the matrix as
row-major little-endian doubles.  Header layout (little-endian)::

    magic     4 bytes   b"SLPC"
    version   uint32    1
    N         uint64    matrix dimension
    lambda    float64   spectral parameter
    mesh_hash 64 bytes  ASCII hex SHA-256 of the mesh

File modification times record last use, which drives LRU eviction.
"""

from __future__ import annotations

import hashlib
import os
import struct
import threading
from contextlib import contextmanager
from pathlib import Path

import numpy as np

from .errors import ObliqueError

MAGIC = b"SLPC"
VERSION = 1
_HEADER = struct.Struct("<4sIQd64s")
ENV_VAR = "OBLIQUE_CACHE_DIR"


class IoError(ObliqueError, OSError):
    pass


def default_cache_dir() -> Path:
    env = os.environ.get(ENV_VAR)
    if env:
        return Path(env)
    return Path.home() / ".cache" / "oblique"


class MatrixCache:
    """Directory of cached matrices keyed by (mesh hash, lambda)."""

    def __init__(self, directory: str | os.PathLike):
        self.directory = Path(directory)
        try:
            self.directory.mkdir(parents=True, exist_ok=True)
        except OSError as exc:
            raise IoError(str(exc)) from exc
        self._lock = threading.Lock()

    def _path(self, mesh_hash: str, lam: float) -> Path:
        key = hashlib.sha256(f"{mesh_hash}:{float(lam).hex()}".encode()).hexdigest()
        return self.directory / f"{key[:32]}.slp"

    def put(self, mesh_hash: str, lam: float, matrix: np.ndarray) -> Path:
        a = np.ascontiguousarray(matrix, dtype="<f8")
        n = a.shape[0]
        header = _HEADER.pack(MAGIC, VERSION, n, float(lam), mesh_hash.encode()[:64].ljust(64))
        path = self._path(mesh_hash, lam)
        tmp = path.with_suffix(f".tmp{os.getpid()}.{threading.get_ident()}")
        try:
            with open(tmp, "wb") as fh:
                fh.write(header)
                fh.write(a.tobytes())
            os.replace(tmp, path)
        except OSError as exc:
            raise IoError(str(exc)) from exc
        return path

    def get(self, mesh_hash: str, lam: float, n: int | None = None):
        path = self._path(mesh_hash, lam)
        if not path.exists():
            return None
        entry = read_entry(path)
        if entry is None:
            return None
        hdr, a = entry
        if hdr["mesh_hash"] != mesh_hash or hdr["lambda"] != float(lam):
            return None
        if n is not None and hdr["N"] != n:
            return None
        os.utime(path)
        return a


def read_entry(path) -> tuple[dict, np.ndarray] | None:
    """Parse one cache file; returns None for foreign or truncated files."""
    with open(path, "rb") as fh:
        raw = fh.read(_HEADER.size)
        if len(raw) != _HEADER.size:
            return None
        magic, version, n, lam, mh = _HEADER.unpack(raw)
        if magic != MAGIC or version != VERSION:
            return None
        data = np.frombuffer(fh.read(), dtype="<f8")
    if data.size != n * n:
        return None
    hdr = {"N": int(n), "lambda": float(lam), "mesh_hash": mh.decode().strip()}
    return hdr, data.reshape(n, n).copy()


def cache_gc(directory, max_bytes: int) -> int:
    """Delete least-recently-used entries until the total size fits.

    Returns the number of bytes freed.
    """
    d = Path(directory)
    if not d.is_dir():
        raise IoError(f"cache directory {d} does not exist")
    try:
        entries = [(p.stat().st_mtime_ns, p.stat().st_size, p) for p in d.glob("*.slp")]
    except OSError as exc:
        raise IoError(str(exc)) from exc
    total = sum(size for _, size, _ in entries)
    freed = 0
    for _, size, path in sorted(entries, key=lambda e: (e[0], e[2].name)):
        if total <= max_bytes:
            break
        try:
            path.unlink()
        except OSError as exc:
            raise IoError(str(exc)) from exc
        total -= size
        freed += size
    return freed


_global: list[MatrixCache | None] = [None]


def active_cache() -> MatrixCache | None:
    return _global[0]


def set_cache(cache: MatrixCache | None) -> None:
    """Install a process-wide cache (None disables caching)."""
    _global[0] = cache


@contextmanager
def using_cache(cache: MatrixCache | None):
    prev = _global[0]
    _global[0] = cache
    try:
        yield cache
    finally:
        _global[0] = prev
