"""Shim overhead microbenchmarks.

Two scenarios, each timed directly against a backend instance and through
a :class:`~abi_bridge.shim.Shim` on top of the same instance:

``type_size``
    a tight loop of ``type_size`` on a built-in fixed-size datatype; the
    shim adds a lifecycle check and one table index before delegating.
``pingpong``
    round trips of a small message between two simulated ranks.

Absolute numbers describe this interpreter on this machine and nothing
else; the ratio is the quantity of interest.  Run as
``python -m abi_bridge.bench`` for CSV (``--json`` for JSON).
"""

from __future__ import annotations

import argparse
import json
import statistics
import sys
import threading
from dataclasses import asdict, dataclass, field
from time import perf_counter_ns
from typing import Sequence

from . import mpi as M
from . import simcore
from .abi_model.handles import HandleKind, datatype_fixed_size, predefined_rows
from .backend_api import backend_names
from .shim import Shim

__all__ = [
    "MIN_TYPE_SIZE_ITERATIONS",
    "MIN_PINGPONG_ITERATIONS",
    "BenchPreconditionError",
    "BenchReport",
    "bench_type_size",
    "bench_pingpong",
    "main",
]

MIN_TYPE_SIZE_ITERATIONS = 10**5
MIN_PINGPONG_ITERATIONS = 10**4
_PINGPONG_TAG = 11


class BenchPreconditionError(ValueError):
    pass


@dataclass(frozen=True)
class BenchReport:
    """Median ns per call over ``len(runs)`` runs of both variants.

    ``ratio`` is shim time over direct time, i.e. direct rate over shim
    rate; ``runs`` keeps each run's (direct_ns, shim_ns) for noise checks.
    """

    scenario: str
    backend: str
    iterations: int
    direct_ns: float
    shim_ns: float
    runs: tuple = field(default=())

    @property
    def ratio(self) -> float:
        return self.shim_ns / self.direct_ns if self.direct_ns > 0 else float("inf")

    @property
    def run_ratios(self) -> list[float]:
        return [s / d for d, s in self.runs]

    def csv_lines(self) -> list[str]:
        return [
            f"{self.scenario},{self.backend},direct,{self.direct_ns:.1f}",
            f"{self.scenario},{self.backend},shim,{self.shim_ns:.1f}",
        ]

    def as_dict(self) -> dict:
        d = asdict(self)
        d["ratio"] = self.ratio
        d["runs"] = [list(r) for r in self.runs]
        return d


def _median_report(scenario, backend, iterations, runs) -> BenchReport:
    return BenchReport(
        scenario,
        backend,
        iterations,
        statistics.median(d for d, _ in runs),
        statistics.median(s for _, s in runs),
        tuple(runs),
    )


# ----------------------------------------------------------------------
# type_size


def _time_calls(fn, arg, iterations: int) -> float:
    it = range(iterations)
    t0 = perf_counter_ns()
    for _ in it:
        fn(arg)
    return (perf_counter_ns() - t0) / iterations


def _check_type_size(shim: Shim) -> None:
    api = shim.api
    for row in predefined_rows(HandleKind.DATATYPE):
        size = datatype_fixed_size(row.value)
        if size is None:
            continue
        native = shim.convert_std_to_native(HandleKind.DATATYPE, row.value)
        direct, through = api.type_size(native), shim.type_size(row.value)
        if not direct == through == size:
            raise AssertionError(f"{row.name}: direct {direct}, shim {through}, encoded {size}")


def bench_type_size(
    iterations: int = MIN_TYPE_SIZE_ITERATIONS,
    *,
    backends: Sequence[str] | None = None,
    runs: int = 5,
    datatype: int = M.MPI_INT32_T,
) -> list[BenchReport]:
    if iterations < MIN_TYPE_SIZE_ITERATIONS:
        raise BenchPreconditionError(f"type_size needs at least {MIN_TYPE_SIZE_ITERATIONS} iterations, got {iterations}")
    if runs < 1:
        raise BenchPreconditionError("runs must be >= 1")
    reports = []
    for name in backends or backend_names():
        world = simcore.world_create(1, seed=0)
        shim = Shim(name)
        shim.init(world, 0)
        try:
            _check_type_size(shim)
            native = shim.convert_std_to_native(HandleKind.DATATYPE, datatype)
            direct_fn, shim_fn = shim.api.type_size, shim.type_size
            expected = direct_fn(native)
            samples = []
            for k in range(runs):
                # alternate the order so drift does not favour one variant
                if k % 2:
                    s = _time_calls(shim_fn, datatype, iterations)
                    d = _time_calls(direct_fn, native, iterations)
                else:
                    d = _time_calls(direct_fn, native, iterations)
                    s = _time_calls(shim_fn, datatype, iterations)
                samples.append((d, s))
            if shim_fn(datatype) != expected:
                raise AssertionError("type_size changed during the benchmark")
        finally:
            shim.finalize()
        reports.append(_median_report("type_size", name, iterations, samples))
    return reports


# ----------------------------------------------------------------------
# pingpong


def _pingpong_once(backend: str, iterations: int, nbytes: int, through_shim: bool) -> float:
    world = simcore.world_create(2, seed=0)
    elapsed: list[float] = []
    ready = threading.Barrier(2)

    def program(rank: int) -> None:
        shim = Shim(backend)
        shim.init(world, rank)
        try:
            if through_shim:
                ep, dt, comm = shim, M.MPI_BYTE, M.MPI_COMM_WORLD
            else:
                ep = shim.api
                dt = shim.convert_std_to_native(HandleKind.DATATYPE, M.MPI_BYTE)
                comm = shim.convert_std_to_native(HandleKind.COMM, M.MPI_COMM_WORLD)
            peer = 1 - rank
            message = bytes((rank * 17 + k) % 256 for k in range(nbytes))
            expected = bytes((peer * 17 + k) % 256 for k in range(nbytes))
            buf = bytearray(nbytes)
            send, recv = ep.send, ep.recv
            ready.wait()
            t0 = perf_counter_ns()
            for _ in range(iterations):
                if rank == 0:
                    send(message, nbytes, dt, peer, _PINGPONG_TAG, comm)
                    recv(buf, nbytes, dt, peer, _PINGPONG_TAG, comm)
                else:
                    recv(buf, nbytes, dt, peer, _PINGPONG_TAG, comm)
                    send(message, nbytes, dt, peer, _PINGPONG_TAG, comm)
                if buf != expected:
                    raise AssertionError(f"rank {rank}: corrupted payload")
            if rank == 0:
                elapsed.append((perf_counter_ns() - t0) / iterations)
        finally:
            shim.finalize()

    world.run(program, timeout=120)
    return elapsed[0]


def bench_pingpong(
    iterations: int = MIN_PINGPONG_ITERATIONS,
    nbytes: int = 8,
    *,
    backends: Sequence[str] | None = None,
    runs: int = 1,
) -> list[BenchReport]:
    """Round-trip time of an ``nbytes`` message between two ranks."""
    if iterations < MIN_PINGPONG_ITERATIONS:
        raise BenchPreconditionError(f"pingpong needs at least {MIN_PINGPONG_ITERATIONS} iterations, got {iterations}")
    if nbytes < 0 or runs < 1:
        raise BenchPreconditionError("nbytes must be >= 0 and runs >= 1")
    reports = []
    for name in backends or backend_names():
        samples = []
        for _ in range(runs):
            samples.append((_pingpong_once(name, iterations, nbytes, False), _pingpong_once(name, iterations, nbytes, True)))
        reports.append(_median_report("pingpong", name, iterations, samples))
    return reports


# ----------------------------------------------------------------------
# command line


def main(argv: Sequence[str] | None = None) -> int:
    parser = argparse.ArgumentParser(prog="abi-bench", description="Measure shim overhead against direct backend calls.")
    parser.add_argument("--iterations", type=int, default=MIN_TYPE_SIZE_ITERATIONS, help="type_size calls per run")
    parser.add_argument("--pingpong-iterations", type=int, default=MIN_PINGPONG_ITERATIONS, help="round trips per run")
    parser.add_argument("--bytes", type=int, default=8, dest="nbytes", help="pingpong message size")
    parser.add_argument("--runs", type=int, default=5, help="type_size runs (median is reported)")
    parser.add_argument("--backend", choices=backend_names(), action="append", help="restrict to a backend (repeatable)")
    parser.add_argument("--scenario", choices=("type_size", "pingpong", "all"), default="all")
    parser.add_argument("--json", action="store_true", help="emit JSON instead of CSV")
    args = parser.parse_args(argv)
    try:
        reports = []
        if args.scenario in ("type_size", "all"):
            reports += bench_type_size(args.iterations, backends=args.backend, runs=args.runs)
        if args.scenario in ("pingpong", "all"):
            reports += bench_pingpong(args.pingpong_iterations, args.nbytes, backends=args.backend)
    except BenchPreconditionError as exc:
        parser.error(str(exc))
    if args.json:
        json.dump([r.as_dict() for r in reports], sys.stdout, indent=2)
        print()
    else:
        print("scenario,backend,variant,ns_per_call")
        for r in reports:
            print("\n".join(r.csv_lines()))
        for r in reports:
            print(f"# {r.scenario} {r.backend}: shim/direct = {r.ratio:.2f}", file=sys.stderr)
    return 0


if __name__ == "__main__":
    sys.exit(main())
