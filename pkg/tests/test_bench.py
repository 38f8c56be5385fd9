from __future__ import annotations

import json

import pytest

from abi_bridge import bench
from abi_bridge.bench import BenchPreconditionError, BenchReport, bench_pingpong, bench_type_size


@pytest.mark.parametrize("n", [0, 10, bench.MIN_TYPE_SIZE_ITERATIONS - 1])
def test_type_size_iteration_guard(n):
    with pytest.raises(BenchPreconditionError):
        bench_type_size(n)


@pytest.mark.parametrize("n", [0, bench.MIN_PINGPONG_ITERATIONS - 1])
def test_pingpong_iteration_guard(n):
    with pytest.raises(BenchPreconditionError):
        bench_pingpong(n)


def test_other_guards():
    with pytest.raises(BenchPreconditionError):
        bench_type_size(runs=0)
    with pytest.raises(BenchPreconditionError):
        bench_pingpong(nbytes=-1)


def test_report_ratio_and_csv():
    r = BenchReport("type_size", "int", 10, 50.0, 100.0, ((50.0, 100.0), (40.0, 120.0)))
    assert r.ratio == 2.0 and r.run_ratios == [2.0, 3.0]
    assert r.csv_lines() == ["type_size,int,direct,50.0", "type_size,int,shim,100.0"]
    assert r.as_dict()["ratio"] == 2.0
    assert BenchReport("x", "y", 1, 0.0, 1.0).ratio == float("inf")


def test_type_size_reports_both_backends():
    reports = bench_type_size(runs=1)
    assert [r.backend for r in reports] == ["int", "token"]
    assert all(r.direct_ns > 0 and r.shim_ns > 0 and r.ratio >= 0 for r in reports)


def test_harness_rechecks_results(monkeypatch):
    from abi_bridge import shim as shim_module

    real = shim_module.Shim.type_size
    monkeypatch.setattr(shim_module.Shim, "type_size", lambda self, dt: real(self, dt) + 1)
    with pytest.raises(AssertionError):
        bench_type_size(runs=1, backends=["int"])


def test_main_csv(capsys):
    assert bench.main(["--scenario", "type_size", "--runs", "1", "--backend", "int"]) == 0
    out, err = capsys.readouterr()
    lines = out.splitlines()
    assert lines[0] == "scenario,backend,variant,ns_per_call"
    assert [l.split(",")[:3] for l in lines[1:]] == [["type_size", "int", "direct"], ["type_size", "int", "shim"]]
    assert all(float(l.split(",")[3]) > 0 for l in lines[1:])
    assert "shim/direct" in err


def test_main_json(capsys):
    assert bench.main(["--scenario", "type_size", "--runs", "1", "--backend", "token", "--json"]) == 0
    data = json.loads(capsys.readouterr().out)
    assert data[0]["backend"] == "token" and data[0]["ratio"] > 0


def test_main_rejects_small_iterations(capsys):
    with pytest.raises(SystemExit) as exc:
        bench.main(["--iterations", "5"])
    assert exc.value.code == 2
