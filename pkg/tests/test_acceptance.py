"""Acceptance gate: one test per criterion, each printing a PASS/FAIL line."""

from __future__ import annotations

import ctypes
import random
import re
import struct
import time

import numpy as np

from abi_bridge import mpi as M
from abi_bridge.abi_model import (
    AbiStatus,
    Disposition,
    classify_handle,
    datatype_fixed_size,
    lookup_predefined,
    predefined_rows,
)
from abi_bridge.abi_model.constants import INT_CONSTANT_LIMIT, SHIPPED, validate_constant_tables
from abi_bridge.abi_model.handles import HandleKind
from abi_bridge.backend_int import NATIVE_HANDLES as INT_NATIVE
from abi_bridge.bench import bench_pingpong, bench_type_size
from abi_bridge.programs import PROGRAMS, TYPE_MIXES, alltoallw_exchange, alltoallw_oracle, fold_oracle, run_program
from conftest import BACKENDS, handle_code_rows, run_shims

K = HandleKind
RANKS = range(1, 9)

_OPAQUE_PREFIXES = {
    "MPI_COMM_": K.COMM,
    "MPI_GROUP_": K.GROUP,
    "MPI_WIN_": K.WIN,
    "MPI_FILE_": K.FILE,
    "MPI_SESSION_": K.SESSION,
    "MPI_MESSAGE_": K.MESSAGE,
    "MPI_ERRHANDLER_": K.ERRHANDLER,
    "MPI_ERRORS_": K.ERRHANDLER,
    "MPI_REQUEST_": K.REQUEST,
}


def _table_kind(name: str, table: str) -> HandleKind:
    if table == "op":
        return K.OP
    if table == "datatype":
        return K.DATATYPE
    return next(k for p, k in _OPAQUE_PREFIXES.items() if name.startswith(p))


def test_handle_code_table_conformance(criterion):
    with criterion("handle-code tables: classify/lookup round trips, < 1 s") as c:
        t0 = time.perf_counter()
        rows = handle_code_rows()
        named = 0
        for value, name, table in rows:
            cls = classify_handle(value)
            if name.startswith("MPI_"):
                assert cls.disposition is Disposition.PREDEFINED, name
                assert cls.kind is _table_kind(name, table), name
                assert lookup_predefined(name) == value and lookup_predefined(cls.name) == value, name
                named += 1
            else:
                assert cls.disposition in (Disposition.RESERVED, Disposition.INVALID), name
        elapsed = time.perf_counter() - t0
        assert len(rows) >= 55 and named == len(predefined_rows())
        assert elapsed < 1.0, f"{elapsed:.3f}s"
        c.detail = f"{len(rows)} rows ({named} named) in {elapsed * 1e3:.1f} ms"


def _implied_size(name: str) -> int:
    m = re.search(r"INT(\d+)_T$", name)
    if m:
        return int(m.group(1)) // 8
    if name in ("MPI_BYTE", "MPI_CHAR", "MPI_SIGNED_CHAR", "MPI_UNSIGNED_CHAR"):
        return ctypes.sizeof(ctypes.c_char)
    raise AssertionError(f"no implied size for {name}")


def test_datatype_size_decode(criterion):
    with criterion("fixed-size datatype decode matches bits 3-5 and the name") as c:
        checked = []
        for row in predefined_rows(K.DATATYPE):
            if row.value >> 6 != 0b1001:
                assert datatype_fixed_size(row.value) is None, row.name
                continue
            size = datatype_fixed_size(row.value)
            assert size == 2 ** ((row.value >> 3) & 0b111) == _implied_size(row.name), row.name
            checked.append(row.name)
        for v in range(1024):  # exhaustive over the code space
            if v >> 6 == 0b1001:
                assert datatype_fixed_size(v) == 2 ** ((v >> 3) & 7)
        for name, size in (("MPI_INT8_T", 1), ("MPI_INT16_T", 2), ("MPI_INT32_T", 4), ("MPI_INT64_T", 8), ("MPI_BYTE", 1)):
            assert datatype_fixed_size(lookup_predefined(name)) == size
        c.detail = f"{len(checked)} fixed-size rows"


def test_status_layout(criterion):
    with criterion("status: 32 bytes, SOURCE/TAG/ERROR at 0/4/8, 10^4 random round trips") as c:
        assert ctypes.sizeof(AbiStatus) == 32
        assert (AbiStatus.MPI_SOURCE.offset, AbiStatus.MPI_TAG.offset, AbiStatus.MPI_ERROR.offset) == (0, 4, 8)
        rng = random.Random(20240)
        n = 10_000
        for _ in range(n):
            src, tag, err = (rng.randint(-(2**31), 2**31 - 1) for _ in range(3))
            count = rng.choice((rng.randrange(2**31), rng.randrange(2**63)))
            cancelled = rng.random() < 0.5
            s = AbiStatus.make(src, tag, err, count, cancelled)
            assert s.fields() == (src, tag, err, count, cancelled)
            raw = bytes(s)
            assert struct.unpack_from("<3i", raw) == (src, tag, err)
            lo, hi = struct.unpack_from("<II", raw, 12)
            assert lo | ((hi & 0x7FFFFFFF) << 32) == count and bool(hi >> 31) == cancelled
            assert AbiStatus.from_buffer_copy(raw).fields() == s.fields()
        c.detail = f"{n} cases"


def test_constant_table_properties(criterion):
    with criterion("constant tables: unique, negative sentinels, power-of-two flags, |v| <= 32767, SUCCESS == 0") as c:
        assert validate_constant_tables() == []
        # the same rules, restated directly
        values = [v for fam, _, v in SHIPPED.items() if fam != "string_lengths"]
        assert len(values) == len(set(values))
        assert all(v < 0 for v in SHIPPED.sentinel.values())
        assert all(v > 0 and v & (v - 1) == 0 for v in SHIPPED.xor_flags.values())
        assert all(abs(v) <= INT_CONSTANT_LIMIT for v in values)
        assert SHIPPED.error_classes["MPI_SUCCESS"] == 0
        c.detail = f"{len(values)} constants checked (+{len(SHIPPED.string_lengths)} string lengths)"


def test_int_size_macro(criterion):
    with criterion("integer-handle size macro: CHAR/INT/DOUBLE -> 1/4/8") as c:
        table = INT_NATIVE[K.DATATYPE]
        expected = {"MPI_CHAR": (0x4C000101, 1), "MPI_INT": (0x4C000405, 4), "MPI_DOUBLE": (0x4C00080B, 8)}
        for name, (value, size) in expected.items():
            assert table[name] == value
            assert (value & 0xFF00) >> 8 == size
        c.detail = ", ".join(f"{n}={v:#x}" for n, (v, _) in expected.items())


def test_cross_backend_equivalence(criterion):
    with criterion("cross-backend equivalence: every program, 1-8 ranks, < 10 s") as c:
        required = {"pingpong_wildcards", "truncation", "comm_dup_isolation", "user_op_allreduce", "derived_type_send", "ialltoallw_hetero"}
        assert required <= set(PROGRAMS)
        t0 = time.perf_counter()
        runs = 0
        for name in PROGRAMS:
            for n in RANKS:
                a, b = (run_program(name, be, n, seed=n) for be in BACKENDS)
                assert a == b, f"{name} at {n} ranks"
                runs += 2
        elapsed = time.perf_counter() - t0
        assert elapsed < 10.0, f"{elapsed:.2f}s"
        c.detail = f"{len(PROGRAMS)} programs, {runs} runs in {elapsed:.2f}s"


def test_oracle_equivalence(criterion):
    with criterion("reductions equal a sequential fold; ialltoallw equals the serialization oracle (1-8 ranks, 3 mixes)") as c:
        assert len(TYPE_MIXES) >= 3
        ops = [(M.MPI_SUM, np.add), (M.MPI_PROD, np.multiply), (M.MPI_MAX, np.maximum), (M.MPI_MIN, np.minimum), (M.MPI_BXOR, np.bitwise_xor)]
        cases = 0
        for backend in BACKENDS:
            for n in RANKS:
                contrib = np.random.default_rng(n).integers(-9, 9, size=(n, 3)).astype(np.int64)

                def reduce_prog(s, rank, contrib=contrib):
                    outs = []
                    for op, _ in ops:
                        out = np.zeros(3, np.int64)
                        s.allreduce(contrib[rank], out, 3, M.MPI_INT64_T, op, M.MPI_COMM_WORLD)
                        outs.append(out.tolist())
                    return outs

                results, _ = run_shims(n, backend, reduce_prog, seed=n)
                expected = [[fold_oracle([int(x[k]) for x in contrib], lambda a, b, f=f: int(f(a, b))) for k in range(3)] for _, f in ops]
                assert all(out == expected for out, _ in results), (backend, n)
                cases += 1
                for mix in TYPE_MIXES.values():
                    results, _ = run_shims(n, backend, lambda s, r, mix=mix, n=n: alltoallw_exchange(s, r, n, mix), seed=n)
                    assert all(got == alltoallw_oracle(mix, n, r) for r, (got, _) in enumerate(results)), (backend, n, mix)
                    cases += 1
        c.detail = f"{cases} (backend, ranks, case) combinations"


def test_trampoline_fidelity(criterion):
    with criterion("user reduce callback sees only standard datatype handles, both backends") as c:
        names = ["MPI_INT32_T", "MPI_INT64_T", "MPI_UINT8_T", "MPI_INT16_T", "MPI_BYTE"]
        observed = 0
        for backend in BACKENDS:

            def prog(s, rank):
                seen = []

                def keep_first(invec, inoutvec, count, datatype):
                    seen.append(datatype)

                op = s.op_create(keep_first, False)
                pair = s.type_contiguous(2, M.MPI_INT32_T)
                s.type_commit(pair)
                plan = [(lookup_predefined(n), datatype_fixed_size(lookup_predefined(n))) for n in names] + [(pair, 8)]
                for dt, size in plan:
                    s.allreduce(bytes(size), bytearray(size), 1, dt, op, M.MPI_COMM_WORLD)
                s.type_free(pair)
                s.op_free(op)
                return seen, [dt for dt, _ in plan]

            results, shims = run_shims(3, backend, prog, audit=True)
            for ((seen, plan), report), shim in zip(results, shims):
                assert report.clean
                calls_per_type = len(seen) // len(plan)
                assert calls_per_type == 2 and seen == [dt for dt in plan for _ in range(calls_per_type)]
                natives = {v for m in shim.descriptor.predefined_map.values() for v in m.values()}
                assert not natives & set(seen[: -calls_per_type])
                observed += len(seen)
        c.detail = f"{observed} callback invocations checked"


def test_state_hygiene(criterion):
    with criterion("after completion and finalize, dynamic maps and request state are empty") as c:
        for backend in BACKENDS:

            def prog(s, rank):
                comm = s.comm_dup(M.MPI_COMM_WORLD)
                t = s.type_contiguous(3, M.MPI_INT32_T)
                s.type_commit(t)
                op = s.op_create(lambda *a: None)
                reqs = [s.isend(bytes(12), 1, t, rank, k, comm) for k in range(5)]
                reqs += [s.irecv(bytearray(12), 1, t, rank, k, comm) for k in range(5)]
                reqs.append(alltoallw_request(s, rank))
                live = (s.dynamic_handle_count(), s.request_state_count())
                s.waitall(reqs)
                s.type_free(t), s.op_free(op), s.comm_free(comm)
                return live

            results, shims = run_shims(4, backend, prog)
            for (live, report), shim in zip(results, shims):
                assert live == (14, 1)
                assert report.clean and shim.dynamic_handle_count() == 0 and shim.request_state_count() == 0
                assert not any(shim._u2n.values()) and not any(shim._n2u.values()) and not shim._op_registry
        c.detail = "4 ranks x 2 backends"


def alltoallw_request(s, rank):
    n = s.comm_size(M.MPI_COMM_WORLD)
    displs = [4 * k for k in range(n)]
    types = [M.MPI_INT32_T] * n
    return s.ialltoallw(np.zeros(n, np.int32), [1] * n, displs, types, np.zeros(n, np.int32), [1] * n, displs, types, M.MPI_COMM_WORLD)


def test_performance(criterion):
    with criterion("type_size shim/direct <= 3x (median of 5), pingpong reported, < 60 s") as c:
        t0 = time.perf_counter()
        sizes = bench_type_size(runs=5)
        pings = bench_pingpong()
        elapsed = time.perf_counter() - t0
        assert {r.backend for r in sizes} == set(BACKENDS) and all(len(r.runs) == 5 for r in sizes)
        for r in sizes:
            assert r.ratio <= 3.0, f"{r.backend}: {r.ratio:.2f}"
        assert all(r.ratio > 0 for r in pings)
        assert elapsed < 60.0, f"{elapsed:.1f}s"
        c.detail = "; ".join(f"{r.scenario}/{r.backend} {r.ratio:.2f}x" for r in sizes + pings) + f"; {elapsed:.1f}s"
