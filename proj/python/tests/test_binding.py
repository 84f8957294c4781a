# Copyright (C) 2026 The kvlsm Authors
# SPDX-License-Identifier: Apache-2.0

import array
import os
import random
import shutil
import subprocess
import threading
from pathlib import Path

import pytest

import kvlsm

BT = 4
SMALL = {"block_tokens": BT, "buffer_bytes": 4096, "controller": False, "codec": "raw"}


def payload(rng, n=64):
    return bytes(rng.getrandbits(8) for _ in range(n))


def test_round_trip(tmp_path):
    rng = random.Random(1)
    with kvlsm.open(tmp_path, SMALL) as e:
        tokens = list(range(16))
        tensors = [payload(rng) for _ in range(4)]
        assert e.put_batch(tokens, tensors) == 4
        assert e.put_batch(tokens, tensors) == 0
        assert e.probe(tokens) == 4
        assert e.probe(tokens[:7]) == 1
        assert e.get_batch(tokens, 4) == tensors
        assert e.get_batch(tokens, 2) == tensors[:2]
        assert e.probe([99] * 8) == 0


def test_token_buffers_and_zero_copy_tensors(tmp_path):
    np = pytest.importorskip("numpy")
    with kvlsm.open(tmp_path, SMALL) as e:
        tensors = [np.arange(32, dtype=np.float16), memoryview(b"x" * 10)]
        for dtype in (np.int32, np.int64, np.uint32, np.uint64):
            assert e.probe(np.arange(8, dtype=dtype)) == 0
        assert e.put_batch(np.arange(8, dtype=np.int64), tensors) == 2
        assert e.probe(array.array("I", range(8))) == 2
        got = e.get_batch(range(8), 2)
        assert got[0] == tensors[0].tobytes()
        assert got[1] == b"x" * 10


def test_reopen_keeps_config_and_data(tmp_path):
    rng = random.Random(2)
    tokens = [rng.randrange(1000) for _ in range(12)]
    tensors = [payload(rng) for _ in range(3)]
    e = kvlsm.open(tmp_path, SMALL)
    e.put_batch(tokens, tensors)
    e.close()
    e = kvlsm.open(tmp_path)
    assert e.block_tokens == BT
    assert e.probe(tokens) == 3
    assert e.get_batch(tokens, 3) == tensors
    e.close()


def test_errors_are_typed(tmp_path):
    e = kvlsm.open(tmp_path, SMALL)
    with pytest.raises(kvlsm.UsageError):
        e.put_batch(list(range(8)), [b"only one"])
    with pytest.raises(kvlsm.UsageError):
        kvlsm.open(tmp_path, SMALL)
    with pytest.raises(kvlsm.UsageError):
        e.probe([-1, 0, 0, 0])
    e.close()
    assert e.closed
    with pytest.raises(kvlsm.UsageError):
        e.close()
    with pytest.raises(kvlsm.UsageError):
        e.probe([1, 2, 3, 4])
    with pytest.raises(kvlsm.UsageError):
        kvlsm.open(tmp_path / "bad", {"block_tokens": 0})
    with pytest.raises(kvlsm.UsageError):
        kvlsm.open(tmp_path / "bad2", {"no_such_key": 1})
    with pytest.raises(kvlsm.UsageError):
        kvlsm.open(tmp_path, {**SMALL, "block_tokens": 8})
    assert issubclass(kvlsm.CorruptionError, kvlsm.Error)


def test_stats_and_maintenance(tmp_path):
    rng = random.Random(3)
    with kvlsm.open(tmp_path, SMALL) as e:
        for _ in range(50):
            e.put_batch([rng.randrange(50) for _ in range(8)], [payload(rng), payload(rng)])
        e.probe([1, 2, 3, 4])
        s = e.stats()
        assert s["put_calls"] == 50
        assert s["probe_calls"] >= 1
        report = e.maintenance_tick()
        assert set(report) >= {"compaction", "merged", "log_files_before", "log_files_after"}
        assert e.stats(total=True)["put_calls"] == 50


def test_concurrent_readers(tmp_path):
    rng = random.Random(4)
    with kvlsm.open(tmp_path, SMALL) as e:
        seqs = []
        for i in range(40):
            t = [i] + [rng.randrange(9) for _ in range(7)]
            p = [payload(rng), payload(rng)]
            e.put_batch(t, p)
            seqs.append((t, p))
        errors = []

        def reader():
            for t, p in seqs * 5:
                if e.probe(t) != 2 or e.get_batch(t, 2) != p:
                    errors.append(t)

        threads = [threading.Thread(target=reader) for _ in range(4)]
        for th in threads:
            th.start()
        for th in threads:
            th.join()
        assert not errors


def _bench_binary():
    env = os.environ.get("KVLSM_BENCH_BIN")
    if env:
        return env
    root = Path(__file__).resolve().parents[2]
    for cand in (root / "build" / "bench", shutil.which("kvlsm-bench")):
        if cand and Path(cand).exists():
            return str(cand)
    return None


def test_scripted_sequence_matches_model_and_native_verify(tmp_path):
    """Binding ops against a dict model; the native tool then re-validates the directory."""
    rng = random.Random(5)
    model = {}
    e = kvlsm.open(tmp_path, {**SMALL, "merge_threshold": 3, "file_cap": 4096})
    for step in range(600):
        t = [rng.randrange(3) for _ in range(BT * rng.randrange(1, 6))]
        blocks = len(t) // BT
        depth = 0
        while depth < blocks and tuple(t[: (depth + 1) * BT]) in model:
            depth += 1
        assert e.probe(t) == depth
        if rng.random() < 0.5:
            p = [payload(rng, rng.randrange(1, 80)) for _ in range(blocks)]
            assert e.put_batch(t, p) == blocks - depth
            for d in range(depth, blocks):
                model[tuple(t[: (d + 1) * BT])] = p[d]
        elif depth:
            assert e.get_batch(t, depth) == [model[tuple(t[: (d + 1) * BT])] for d in range(depth)]
        if step % 50 == 49:
            e.maintenance_tick()
    e.close()

    tool = _bench_binary()
    if tool is None:
        pytest.skip("native bench tool not built")
    out = subprocess.run([tool, "verify", "--dir", str(tmp_path)], capture_output=True, text=True)
    assert out.returncode == 0, out.stderr
    assert out.stdout.split()[:2] == ["entries", str(len(model))]
