from __future__ import annotations

import itertools
import struct

import numpy as np
import pytest

from abi_bridge import mpi as M
from abi_bridge import simcore
from abi_bridge.abi_model import AbiStatus, lookup_predefined
from abi_bridge.abi_model.constants import ERROR_CLASSES
from abi_bridge.abi_model.handles import PREDEFINED_LIMIT, HandleKind, null_handle_of
from abi_bridge.backend_api import Backend, backend_registry_get
from abi_bridge.backend_int import IntBackend
from abi_bridge.shim import EARLY_VECTOR_FREE, InvalidHandleError, MPIError, Shim, library_identity
from conftest import BACKENDS, run_shims

K = HandleKind


# ----------------------------------------------------------------------
# conversion


def test_world_converts_to_backend_constant(solo):
    native = solo.convert_std_to_native(K.COMM, M.MPI_COMM_WORLD)
    assert native == solo.api.NATIVE_HANDLES[K.COMM]["MPI_COMM_WORLD"]
    assert solo.convert_native_to_std(K.COMM, native) == M.MPI_COMM_WORLD


def test_every_predefined_round_trips(solo):
    for kind, table in solo.descriptor.predefined_map.items():
        for std in table:
            assert solo.convert_native_to_std(kind, solo.convert_std_to_native(kind, std)) == std


def test_predefined_tables_are_bounded(solo):
    assert all(len(t) == PREDEFINED_LIMIT for t in solo._s2n.values())
    assert all(len(t) <= PREDEFINED_LIMIT for t in solo._n2s.values())


def test_zero_is_invalid_and_names_the_kind(solo):
    for kind in (K.COMM, K.DATATYPE, K.OP, K.REQUEST):
        with pytest.raises(InvalidHandleError) as exc:
            solo.convert_std_to_native(kind, 0)
        assert exc.value.kind is kind and kind.value in str(exc.value) and "uninitialized" in str(exc.value)
    with pytest.raises(InvalidHandleError) as exc:
        solo.convert_std_to_native(K.DATATYPE, 0)
    assert exc.value.error_class == ERROR_CLASSES["MPI_ERR_TYPE"]


def test_wrong_kind_is_rejected(solo):
    with pytest.raises(InvalidHandleError):
        solo.convert_std_to_native(K.COMM, M.MPI_INT32_T)


def test_unregistered_user_handle(solo):
    with pytest.raises(InvalidHandleError, match="Comm"):
        solo.convert_std_to_native(K.COMM, 5000)
    with pytest.raises(InvalidHandleError):
        solo.convert_native_to_std(K.COMM, 0xDEADBEEF)


def test_user_comm_round_trips(solo):
    comms = [solo.comm_dup(M.MPI_COMM_WORLD) for _ in range(20)]
    live = solo.api.live_user_handles()[K.COMM]
    assert {solo.convert_std_to_native(K.COMM, c) for c in comms} == live
    for c in comms:
        assert solo.convert_native_to_std(K.COMM, solo.convert_std_to_native(K.COMM, c)) == c
        assert c >= PREDEFINED_LIMIT
    for c in comms:
        assert solo.comm_free(c) == M.MPI_COMM_NULL
    assert solo.dynamic_handle_count() == 0


class _SmallHandleBackend(IntBackend):
    """Allocates user handles inside the standard predefined region."""

    def __init__(self) -> None:
        super().__init__()
        self._counter = itertools.count(1)


def test_small_native_handles_are_wrapped():
    backend = Backend("small", IntBackend.descriptor, _SmallHandleBackend)
    shim = Shim(backend)
    shim.init(simcore.world_create(1), 0)
    comms = [shim.comm_dup(M.MPI_COMM_WORLD) for _ in range(5)]
    natives = [shim.convert_std_to_native(K.COMM, c) for c in comms]
    assert all(n < PREDEFINED_LIMIT for n in natives)
    assert all(c >= PREDEFINED_LIMIT for c in comms) and len(set(comms)) == 5
    assert shim.comm_size(comms[2]) == 1
    for c in comms:
        shim.comm_free(c)
    assert shim.finalize().clean


def test_return_code_conversion(solo):
    errs = solo.api.NATIVE_ERRORS
    assert solo.convert_return_code(0) == 0
    assert solo.convert_return_code(errs["MPI_ERR_TRUNCATE"]) == M.MPI_ERR_TRUNCATE
    assert solo.convert_return_code(9999) == M.MPI_ERR_OTHER
    for name, native in errs.items():
        assert solo.convert_return_code(native) == ERROR_CLASSES[name]


def test_success_skips_table(solo):
    solo._err_in = None  # any table access would now fail
    assert solo.convert_return_code(0) == 0


def test_error_string(solo):
    assert solo.error_string(M.MPI_SUCCESS)
    with pytest.raises(MPIError):
        solo.error_string(123456)


# ----------------------------------------------------------------------
# lifecycle


def test_calls_before_init():
    shim = Shim("int")
    with pytest.raises(MPIError) as exc:
        shim.comm_size(M.MPI_COMM_WORLD)
    assert exc.value.error_class == M.MPIX_ERR_NOT_INITIALIZED
    with pytest.raises(MPIError):
        shim.type_size(M.MPI_INT32_T)


def test_calls_after_finalize(solo):
    assert solo.finalize().clean
    with pytest.raises(MPIError) as exc:
        solo.comm_rank(M.MPI_COMM_WORLD)
    assert exc.value.error_class == M.MPIX_ERR_NOT_INITIALIZED and "finalized" in str(exc.value)
    with pytest.raises(MPIError):
        solo.init(simcore.world_create(1), 0)


def test_library_identity():
    name, version = library_identity().split()
    assert name == "libmpi_abi" and len(version.split(".")) == 3


# ----------------------------------------------------------------------
# point to point and statuses


def test_comm_size_four_ranks(backend):
    results, _ = run_shims(4, backend, lambda s, r: (s.comm_size(M.MPI_COMM_WORLD), s.comm_rank(M.MPI_COMM_WORLD)))
    assert [out for out, _ in results] == [(4, r) for r in range(4)]


def test_recv_status_matches_native_record(backend):
    def prog(s, rank):
        if rank == 1:
            s.send(np.arange(3, dtype=np.int64), 3, M.MPI_INT64_T, 0, 77, M.MPI_COMM_WORLD)
            return None
        buf = np.zeros(3, np.int64)
        native = s.api.recv(buf, 3, s.convert_std_to_native(K.DATATYPE, M.MPI_INT64_T), 1, 77,
                            s.convert_std_to_native(K.COMM, M.MPI_COMM_WORLD))
        return native, s.status_from_native(native)

    results, shims = run_shims(2, backend, prog)
    raw, status = results[0][0]
    fields = shims[0].descriptor.status_layout.unpack(raw)
    # field-by-field against the native record
    assert (status.source, status.tag, status.error, status.count, status.cancelled) == (
        fields.source, fields.tag, 0, fields.count, fields.cancelled)
    assert (status.source, status.tag, status.count) == (1, 77, 24)
    blob = bytes(status)
    assert len(blob) == 32 and struct.unpack_from("<3i", blob) == (1, 77, 0)


def test_wildcard_sentinels_in_and_out(backend):
    def prog(s, rank):
        if rank:
            s.send(b"x", 1, M.MPI_BYTE, 0, rank, M.MPI_COMM_WORLD)
            return None
        buf = bytearray(1)
        st = [s.recv(buf, 1, M.MPI_BYTE, M.MPI_ANY_SOURCE, M.MPI_ANY_TAG, M.MPI_COMM_WORLD) for _ in range(2)]
        return sorted((x.source, x.tag) for x in st)

    results, _ = run_shims(3, backend, prog)
    assert results[0][0] == [(1, 1), (2, 2)]


def test_proc_null_receive(solo):
    st = solo.recv(bytearray(4), 4, M.MPI_BYTE, M.MPI_PROC_NULL, 0, M.MPI_COMM_WORLD)
    assert st.source == M.MPI_PROC_NULL and st.tag == M.MPI_ANY_TAG and st.count == 0


def test_sentinel_misuse_names_the_constant(solo):
    with pytest.raises(MPIError) as exc:
        solo.send(b"x", 1, M.MPI_BYTE, M.MPI_ANY_SOURCE, 0, M.MPI_COMM_WORLD)
    assert exc.value.error_class == M.MPI_ERR_RANK
    assert "MPI_ANY_SOURCE" in str(exc.value) and "destination" in str(exc.value)
    with pytest.raises(MPIError) as exc:
        solo.send(b"x", 1, M.MPI_BYTE, 0, M.MPI_ANY_TAG, M.MPI_COMM_WORLD)
    assert exc.value.error_class == M.MPI_ERR_TAG
    with pytest.raises(MPIError, match="-7 is not a valid"):
        solo.recv(bytearray(1), 1, M.MPI_BYTE, -7, 0, M.MPI_COMM_WORLD)


def test_native_sentinels_never_leak(solo):
    values = solo.descriptor.constant_map
    st = solo.recv(bytearray(1), 1, M.MPI_BYTE, M.MPI_PROC_NULL, M.MPI_ANY_TAG, M.MPI_COMM_WORLD)
    assert st.source not in set(values.values()) - {M.MPI_PROC_NULL}


def test_truncation_error_class(backend):
    def prog(s, rank):
        s.send(b"abcdef", 6, M.MPI_BYTE, 0, 3, M.MPI_COMM_WORLD)
        buf = bytearray(4)
        with pytest.raises(MPIError) as exc:
            s.recv(buf, 4, M.MPI_BYTE, 0, 3, M.MPI_COMM_WORLD)
        return exc.value.error_class, exc.value.status.error, bytes(buf)

    results, _ = run_shims(1, backend, prog)
    assert results[0][0] == (M.MPI_ERR_TRUNCATE, M.MPI_ERR_TRUNCATE, b"abcd")


def test_get_count(solo):
    st = AbiStatus.make(0, 0, 0, 10)
    assert solo.get_count(st, M.MPI_BYTE) == 10
    assert solo.get_count(st, M.MPI_INT32_T) == M.MPI_UNDEFINED


def test_status_to_native_round_trip(solo):
    for st in (AbiStatus.make(M.MPI_ANY_SOURCE, M.MPI_ANY_TAG, M.MPI_ERR_TRUNCATE, 2**40, True), AbiStatus.make(3, 4, 0, 5)):
        back = solo.status_from_native(solo.status_to_native(st))
        assert (back.source, back.tag, back.error, back.count, back.cancelled) == (st.source, st.tag, st.error, st.count, st.cancelled)


# ----------------------------------------------------------------------
# requests


def test_test_before_completion_then_wait(solo):
    buf = bytearray(1)
    req = solo.irecv(buf, 1, M.MPI_BYTE, 0, 5, M.MPI_COMM_WORLD)
    assert solo.test(req) == (False, None)
    assert solo.convert_std_to_native(K.REQUEST, req) is not None
    solo.send(b"z", 1, M.MPI_BYTE, 0, 5, M.MPI_COMM_WORLD)
    flag, st = solo.test(req)
    assert flag and st.tag == 5 and buf == b"z"
    with pytest.raises(InvalidHandleError):
        solo.wait(req)  # already retired


def test_waitall_nulls_requests(solo):
    reqs = [solo.isend(b"a", 1, M.MPI_BYTE, 0, t, M.MPI_COMM_WORLD) for t in range(3)]
    reqs += [solo.irecv(bytearray(1), 1, M.MPI_BYTE, 0, t, M.MPI_COMM_WORLD) for t in range(3)]
    statuses = solo.waitall(reqs)
    assert len(statuses) == 6 and reqs == [M.MPI_REQUEST_NULL] * 6
    assert solo.dynamic_handle_count() == 0


def _alltoallw(s, rank, nranks):
    send = np.arange(nranks, dtype=np.int32) + 100 * rank
    recv = np.zeros(nranks, np.int32)
    displs = [4 * k for k in range(nranks)]
    types = [M.MPI_INT32_T] * nranks
    req = s.ialltoallw(send, [1] * nranks, displs, types, recv, [1] * nranks, displs, types, M.MPI_COMM_WORLD)
    return req, recv


def test_ialltoallw_state_is_held_until_completion(backend):
    def prog(s, rank):
        req, recv = _alltoallw(s, rank, 2)
        held = s.request_state_count()
        vectors = s._requests[req].native_vectors
        reqs = [req]
        s.waitall(reqs)
        null = s.convert_std_to_native(K.DATATYPE, M.MPI_DATATYPE_NULL)
        return held, s.request_state_count(), all(v == null for vec in vectors for v in vec), list(recv)

    results, _ = run_shims(2, backend, prog)
    for rank, ((held, after, released, recv), report) in enumerate(results):
        assert (held, after, released) == (1, 0, True)
        assert recv == [100 * src + rank for src in range(2)]
        assert report.clean


def test_ialltoallw_state_retained_while_pending(backend):
    def prog(s, rank):
        if rank == 1:
            s.recv(bytearray(1), 1, M.MPI_BYTE, 0, 9, M.MPI_COMM_WORLD)
        req, _ = _alltoallw(s, rank, 2)
        if rank == 0:
            flag, _ = s.test(req)
            pending = (flag, s.request_state_count())
            s.send(b"g", 1, M.MPI_BYTE, 1, 9, M.MPI_COMM_WORLD)
        else:
            pending = None
        s.wait(req)
        return pending, s.request_state_count()

    results, _ = run_shims(2, backend, prog)
    assert results[0][0] == ((False, 1), 0)
    assert results[1][0] == (None, 0)


def test_ialltoallw_length_mismatch(solo):
    with pytest.raises(MPIError) as exc:
        solo.ialltoallw(bytes(8), [1, 1], [0, 4], [M.MPI_INT32_T] * 2, bytearray(8), [1, 1], [0, 4], [M.MPI_INT32_T] * 2, M.MPI_COMM_WORLD)
    assert exc.value.error_class == M.MPI_ERR_ARG
    assert solo.request_state_count() == 0


def test_early_vector_free_is_detected(backend):
    def prog(s, rank):
        req, recv = _alltoallw(s, rank, 2)
        try:
            s.wait(req)
        except MPIError as exc:
            return exc.error_class
        return list(recv)

    results, _ = run_shims(2, backend, prog, fault=EARLY_VECTOR_FREE)
    outs = [out for out, _ in results]
    healthy = [[100 * src + rank for src in range(2)] for rank in range(2)]
    assert outs != healthy
    assert M.MPI_ERR_TYPE in outs


def test_testall_worst_case(backend):
    def prog(s, rank):
        reqs = []
        for t in range(25):
            reqs.append(s.irecv(bytearray(1), 1, M.MPI_BYTE, 0, t, M.MPI_COMM_SELF))
            reqs.append(s.isend(b"q", 1, M.MPI_BYTE, 0, t, M.MPI_COMM_SELF))
        req, recv = _alltoallw(s, rank, s.comm_size(M.MPI_COMM_WORLD))
        reqs.append(req)
        calls, flag = 0, False
        while not flag:
            before = s.state_lookups
            flag, statuses = s.testall(reqs)
            assert s.state_lookups - before == 51
            calls += 1
        return calls, len(statuses), reqs == [M.MPI_REQUEST_NULL] * 51, s.request_state_count()

    results, _ = run_shims(3, backend, prog)
    for (calls, n, nulled, states), report in results:
        assert calls >= 1 and n == 51 and nulled and states == 0 and report.clean


# ----------------------------------------------------------------------
# datatypes and reductions


def test_type_size_int32(solo):
    assert solo.type_size(M.MPI_INT32_T) == 4


def test_type_size_rejects_unknown(solo):
    with pytest.raises(InvalidHandleError):
        solo.type_size(0)
    with pytest.raises(InvalidHandleError):
        solo.type_size(M.MPI_COMM_WORLD)  # valid code, wrong kind


def test_derived_type_lifecycle(solo):
    t = solo.type_contiguous(3, M.MPI_INT32_T)
    assert solo.type_size(t) == 12
    solo.type_commit(t)
    assert solo.type_free(t) == M.MPI_DATATYPE_NULL
    with pytest.raises(InvalidHandleError):
        solo.type_size(t)


def test_user_op_sees_standard_datatype(backend):
    expected = lookup_predefined("MPI_INT32_T")
    assert expected == 0x250

    def prog(s, rank):
        seen = []

        def add(invec, inoutvec, count, datatype):
            seen.append(datatype)
            a = np.frombuffer(invec, np.int32, count)
            b = np.frombuffer(inoutvec, np.int32, count)
            b += a

        op = s.register_user_op(add, True)
        out = np.zeros(1, np.int32)
        s.allreduce(np.array([rank + 1], np.int32), out, 1, M.MPI_INT32_T, op, M.MPI_COMM_WORLD)
        s.op_free(op)
        return int(out[0]), seen

    results, _ = run_shims(4, backend, prog)
    for (total, seen), report in results:
        assert total == 10 and seen and set(seen) == {expected} and report.clean


def test_freed_op_is_invalid(solo):
    op = solo.op_create(lambda *a: None)
    solo.op_free(op)
    with pytest.raises(InvalidHandleError) as exc:
        solo.allreduce(np.zeros(1, np.int32), np.zeros(1, np.int32), 1, M.MPI_INT32_T, op, M.MPI_COMM_WORLD)
    assert exc.value.error_class == M.MPI_ERR_OP


def test_distinct_ops_are_distinct(solo):
    ops = [solo.op_create(lambda *a: None) for _ in range(5)]
    natives = [solo.convert_std_to_native(K.OP, o) for o in ops]
    assert len(set(ops)) == len(set(natives)) == 5
    for o in ops:
        solo.op_free(o)


def test_null_callback_rejected(solo):
    with pytest.raises(MPIError) as exc:
        solo.op_create(None)
    assert exc.value.error_class == M.MPI_ERR_ARG


def test_reduce_root_only(backend):
    def prog(s, rank):
        out = np.full(1, -1, np.int64)
        s.reduce(np.array([rank], np.int64), out, 1, M.MPI_INT64_T, M.MPI_SUM, 2, M.MPI_COMM_WORLD)
        return int(out[0])

    results, _ = run_shims(3, backend, prog)
    assert [o for o, _ in results] == [-1, -1, 3]


# ----------------------------------------------------------------------
# laundering and leaks


def test_no_native_handle_reaches_user_code(backend):
    def prog(s, rank):
        c = s.comm_dup(M.MPI_COMM_WORLD)
        t = s.type_contiguous(2, M.MPI_INT32_T)
        s.type_commit(t)
        op = s.op_create(lambda i, o, n, d: None)
        reqs = [s.isend(bytes(8), 1, t, rank, 0, c), s.irecv(bytearray(8), 1, t, rank, 0, c)]
        s.waitall(reqs)
        s.allreduce(np.zeros(2, np.int32), np.zeros(2, np.int32), 1, t, op, M.MPI_COMM_WORLD)
        s.type_free(t), s.op_free(op), s.comm_free(c)
        return list(s.audit)

    results, shims = run_shims(2, backend, prog, audit=True)
    for (audit, report), shim in zip(results, shims):
        assert report.clean and audit
        desc = shim.descriptor
        for kind, value in audit:
            predefined_native = set(desc.predefined_map.get(kind, {}).values())
            std_predefined = set(desc.predefined_map.get(kind, {}))
            assert value not in predefined_native or value in std_predefined, (kind, hex(value))
            if value < PREDEFINED_LIMIT:
                assert value in std_predefined or value == null_handle_of(kind), (kind, hex(value))


def test_leak_report_lists_live_objects(backend):
    def prog(s, rank):
        s.comm_dup(M.MPI_COMM_WORLD)
        s.type_contiguous(2, M.MPI_BYTE)
        return None

    results, shims = run_shims(1, backend, prog)
    report = results[0][1]
    assert not report.clean and report.user_handles == {K.COMM: 1, K.DATATYPE: 1}
    assert "Comm" in str(report)
    assert shims[0].dynamic_handle_count() == 0 and shims[0].request_state_count() == 0


def test_pending_request_state_is_reported(backend):
    def prog(s, rank):
        if rank == 1:
            return None
        _alltoallw(s, rank, 2)
        return s.leak_report()

    world = simcore.world_create(2)
    shims = [Shim(backend) for _ in range(2)]

    def body(rank):
        shims[rank].init(world, rank)
        return prog(shims[rank], rank)

    report = world.run(body)[0]
    assert report.request_states == 1 and not report.clean
    state = shims[0]._requests[next(iter(shims[0]._requests))]
    shims[0].finalize()
    assert state.native_vectors == [] and shims[0].request_state_count() == 0


def test_backends_used_are_the_registered_ones():
    for name in BACKENDS:
        assert Shim(name).backend is backend_registry_get(name)
