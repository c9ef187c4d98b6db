from __future__ import annotations

import pytest

from treepack.exceptions import PreconditionError
from treepack.packer import KINDS, gl_instance, ringel_instances, run_bench
from treepack.packer.bench import COLUMNS


def test_gl_instance_shape():
    G, trees = gl_instance(7, 3)
    assert G.m == 21
    assert sorted(trees) == list(range(1, 8))
    assert all(trees[k].n == k for k in trees)


def test_ringel_instances():
    instances = ringel_instances(3)
    assert [name for name, _, _ in instances] == ["ringel-3-0", "ringel-3-1"]
    for _, G, trees in instances:
        assert G.n == 7
        assert len(trees) == 7
        assert sum(T.m for T in trees.values()) == G.m
    with pytest.raises(PreconditionError):
        ringel_instances(0)


def test_gl_bench_rows():
    frame = run_bench("gl", 5, instances=3, seed=1)
    assert list(frame.columns) == COLUMNS
    assert frame["instance"].tolist() == [0, 1, 2]
    assert frame["seed"].tolist() == [1, 2, 3]
    assert (frame["verdict"] == "pass").all()
    assert (frame["trees"] == 5).all()


def test_ringel_bench_ignores_instance_count():
    frame = run_bench("ringel", 2, instances=9)
    assert len(frame) == 1
    assert frame.loc[0, "verdict"] == "pass"
    assert frame.loc[0, "reason"] == "ringel-2-0"


def test_orient_bench_passes():
    frame = run_bench("orient", 0, instances=3, seed=4)
    assert (frame["verdict"] == "pass").all()
    assert set(frame["reason"]) <= {"layered", "oracle"}


def test_walk_bench_rows():
    frame = run_bench("walk", 60, instances=2, seed=0, ell=5, slack=0.5, retries=20)
    assert len(frame) == 2
    assert set(frame["verdict"]) <= {"pass", "fail"}
    assert (frame["trees"] == 1).all()


def test_bench_is_deterministic():
    first = run_bench("gl", 5, instances=2, seed=7).drop(columns=["seconds"])
    second = run_bench("gl", 5, instances=2, seed=7).drop(columns=["seconds"])
    assert first.equals(second)


def test_bench_workers_match_sequential():
    sequential = run_bench("gl", 4, instances=3, seed=2).drop(columns=["seconds"])
    parallel = run_bench("gl", 4, instances=3, seed=2, workers=2).drop(columns=["seconds"])
    assert sequential.equals(parallel)


def test_bench_argument_errors():
    assert "heuristic" in KINDS
    with pytest.raises(PreconditionError):
        run_bench("sorting", 5, instances=1)
    with pytest.raises(PreconditionError):
        run_bench("gl", 5, instances=0)


@pytest.mark.slow
def test_gl_bench_order_eight():
    frame = run_bench("gl", 8, instances=50, seed=1)
    assert len(frame) == 50
    assert (frame["verdict"] == "pass").all()
