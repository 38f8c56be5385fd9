from __future__ import annotations

import time
from pathlib import Path

import pytest

from abi_bridge import simcore
from abi_bridge.abi_model import HandleKind
from abi_bridge.shim import Shim

DATA = Path(__file__).parent / "data"
BACKENDS = ("int", "token")


def handle_code_rows() -> list[tuple[int, str, str]]:
    """(value, printed name, table) from the transcribed code tables."""
    rows = []
    for line in (DATA / "handle_codes.tsv").read_text().splitlines():
        if line.startswith("#") or not line.strip():
            continue
        bits, name, table = line.split("\t")
        rows.append((int(bits, 2), name, table))
    return rows


def run_shims(nranks: int, backend: str, program, *, seed: int = 0, audit: bool = False, fault=None, finalize: bool = True):
    """Run ``program(shim, rank)`` on every rank; returns (results, shims)."""
    world = simcore.world_create(nranks, seed)
    shims = [Shim(backend, audit=audit, fault=fault) for _ in range(nranks)]

    def body(rank):
        shims[rank].init(world, rank)
        out = program(shims[rank], rank)
        if finalize:
            out = (out, shims[rank].finalize())
        return out

    return world.run(body, timeout=30), shims


@pytest.fixture(params=BACKENDS)
def backend(request) -> str:
    return request.param


@pytest.fixture
def solo(backend):
    """An initialized single-rank shim; finalized afterwards if still live."""
    world = simcore.world_create(1, seed=0)
    shim = Shim(backend)
    shim.init(world, 0)
    yield shim
    if shim.initialized:
        shim.finalize()


K = HandleKind


# ----------------------------------------------------------------------
# acceptance verdicts: one line per criterion, repeated in the summary

_VERDICTS: list[str] = []


class _Criterion:
    def __init__(self, label: str) -> None:
        self.label = label
        self.detail = ""

    def __enter__(self) -> "_Criterion":
        self._t0 = time.perf_counter()
        return self

    def __exit__(self, exc_type, exc, tb) -> bool:
        elapsed = time.perf_counter() - self._t0
        verdict = "PASS" if exc_type is None else "FAIL"
        note = self.detail if exc_type is None else f"{exc_type.__name__}: {exc}".splitlines()[0]
        line = f"{verdict} {self.label} [{elapsed:.2f}s] {note}".rstrip()
        _VERDICTS.append(line)
        print(line)
        return False


@pytest.fixture
def criterion():
    return _Criterion


def pytest_terminal_summary(terminalreporter):
    if _VERDICTS:
        terminalreporter.section("acceptance criteria")
        for line in _VERDICTS:
            terminalreporter.write_line(line)
