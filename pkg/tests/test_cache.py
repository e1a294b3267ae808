import os
import struct
import time

import numpy as np
import pytest

from oblique.cache import MAGIC, MatrixCache, IoError, cache_gc, read_entry, using_cache
from oblique.geometry import build_circle
from oblique.layer_operators import single_layer


def test_put_get_round_trip(tmp_path):
    c = MatrixCache(tmp_path)
    a = np.random.default_rng(0).standard_normal((5, 5))
    c.put("abc", -1.5, a)
    np.testing.assert_array_equal(c.get("abc", -1.5), a)
    assert c.get("abc", -1.25) is None
    assert c.get("abd", -1.5) is None
    assert c.get("abc", -1.5, n=6) is None


def test_file_layout_is_header_then_row_major_doubles(tmp_path):
    c = MatrixCache(tmp_path)
    a = np.arange(6.0).reshape(2, 3)[:, :2].copy()  # 2x2, non-trivial strides before copy
    path = c.put("h", -2.0, a)
    raw = path.read_bytes()
    magic, version, n, lam, mh = struct.unpack("<4sIQd64s", raw[:88])
    assert (magic, n, lam, mh.strip()) == (MAGIC, 2, -2.0, b"h")
    np.testing.assert_array_equal(np.frombuffer(raw[88:], "<f8"), a.ravel())
    hdr, back = read_entry(path)
    assert hdr == {"N": 2, "lambda": -2.0, "mesh_hash": "h"}


def test_truncated_or_foreign_file_is_a_miss(tmp_path):
    c = MatrixCache(tmp_path)
    path = c.put("h", -1.0, np.eye(3))
    path.write_bytes(path.read_bytes()[:-8])
    assert c.get("h", -1.0) is None
    path.write_bytes(b"not a cache file at all")
    assert c.get("h", -1.0) is None


def test_cached_assembly_matches_fresh(tmp_path):
    m = build_circle(1.0, 128, quadrature="gauss")
    assert not m.symmetric
    fresh = single_layer(m).matrix(-2.0)
    with using_cache(MatrixCache(tmp_path)):
        first = single_layer(m).matrix(-2.0)
        assert len(list(tmp_path.glob("*.slp"))) == 1
        second = single_layer(m).matrix(-2.0)
    np.testing.assert_array_equal(first, fresh)
    np.testing.assert_array_equal(second, fresh)


def test_gc_empty_cache_frees_nothing(tmp_path):
    assert cache_gc(tmp_path, 0) == 0


def _three_entries(tmp_path):
    c = MatrixCache(tmp_path)
    paths = []
    for i in range(3):
        p = c.put("m", -1.0 - i, np.eye(4))
        t = time.time() - 100 + 10 * i
        os.utime(p, (t, t))
        paths.append(p)
    return paths


def test_gc_removes_oldest_first(tmp_path):
    paths = _three_entries(tmp_path)
    size = paths[0].stat().st_size
    freed = cache_gc(tmp_path, 2 * size + 1)
    assert freed == size
    assert not paths[0].exists() and paths[1].exists() and paths[2].exists()


def test_gc_respects_recent_reads(tmp_path):
    paths = _three_entries(tmp_path)
    MatrixCache(tmp_path).get("m", -1.0)  # touches the oldest entry
    size = paths[0].stat().st_size
    cache_gc(tmp_path, 2 * size)
    assert paths[0].exists() and not paths[1].exists()


def test_gc_budget_above_total_frees_nothing(tmp_path):
    paths = _three_entries(tmp_path)
    total = sum(p.stat().st_size for p in paths)
    assert cache_gc(tmp_path, total) == 0
    assert all(p.exists() for p in paths)


def test_gc_missing_directory_raises(tmp_path):
    with pytest.raises(IoError):
        cache_gc(tmp_path / "absent", 10)


def test_unwritable_directory_raises(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("x")
    with pytest.raises(IoError):
        MatrixCache(blocker / "sub")
