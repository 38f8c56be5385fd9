"""End-to-end programs written against the standard ABI.

Each program runs on every rank of a simulated world through a
:class:`~abi_bridge.shim.Shim`, checks its own results against a plain
Python oracle (raising ``AssertionError`` on mismatch) and returns only
standard-ABI-visible values: status fields, payload bytes, error classes
and reduction results.  Running the same program on two backends must
therefore give equal return values.
"""

from __future__ import annotations

import time
from typing import Callable, Sequence

import numpy as np

from . import mpi as M
from . import simcore
from .abi_model.handles import datatype_fixed_size, lookup_predefined
from .shim import MPIError, Shim

__all__ = ["PROGRAMS", "TYPE_MIXES", "run_program", "alltoallw_oracle", "alltoallw_layout", "fold_oracle"]

Program = Callable[[Shim, int, int], object]
PROGRAMS: dict[str, Program] = {}


def _program(fn: Program) -> Program:
    PROGRAMS[fn.__name__] = fn
    return fn


def _payload(src: int, dst: int, nbytes: int, salt: int = 0) -> bytes:
    return bytes((src * 31 + dst * 7 + salt * 13 + k) % 256 for k in range(nbytes))


def run_program(name: str, backend: str = "int", nranks: int = 2, seed: int = 0, *, timeout: float = 30.0) -> list:
    """Run ``PROGRAMS[name]`` on ``nranks`` ranks; returns per-rank results.

    Every rank must finish with no leaked handles or request state.
    """
    program = PROGRAMS[name]
    world = simcore.world_create(nranks, seed)

    def body(rank: int):
        shim = Shim(backend)
        shim.init(world, rank)
        result = program(shim, rank, nranks)
        report = shim.finalize()
        assert report.clean, f"rank {rank}: {report}"
        return result

    return world.run(body, timeout=timeout)


# ----------------------------------------------------------------------
# point to point


@_program
def pingpong_wildcards(mpi: Shim, rank: int, nranks: int, rounds: int = 8):
    """Every other rank sends ``rounds`` tagged messages to rank 0, which
    receives them with ``MPI_ANY_SOURCE``/``MPI_ANY_TAG`` and echoes each
    one back to the reported source with the reported tag."""
    world = M.MPI_COMM_WORLD
    if nranks == 1:
        mpi.send(_payload(0, 0, 8), 8, M.MPI_BYTE, 0, 3, world)
        buf = bytearray(8)
        st = mpi.recv(buf, 8, M.MPI_BYTE, M.MPI_ANY_SOURCE, M.MPI_ANY_TAG, world)
        assert bytes(buf) == _payload(0, 0, 8) and (st.source, st.tag, st.count) == (0, 3, 8)
        return [(st.fields(), bytes(buf))]

    if rank == 0:
        seen = []
        for _ in range((nranks - 1) * rounds):
            buf = bytearray(16)
            st = mpi.recv(buf, 16, M.MPI_BYTE, M.MPI_ANY_SOURCE, M.MPI_ANY_TAG, world)
            i = st.tag - 100 * st.source
            assert bytes(buf[: st.count]) == _payload(st.source, 0, st.count, i), "payload mismatch"
            seen.append((st.source, i, st.fields(), bytes(buf[: st.count])))
            mpi.send(buf, st.count, M.MPI_BYTE, st.source, st.tag, world)
        for src in range(1, nranks):
            order = [i for s, i, _, _ in seen if s == src]
            assert order == list(range(rounds)), f"messages from {src} overtook: {order}"
        return sorted((s, i, f, p) for s, i, f, p in seen)

    echoes = []
    for i in range(rounds):
        n = 1 + (rank + i) % 16
        mpi.send(_payload(rank, 0, n, i), n, M.MPI_BYTE, 0, 100 * rank + i, world)
        buf = bytearray(16)
        st = mpi.recv(buf, 16, M.MPI_BYTE, 0, M.MPI_ANY_TAG, world)
        assert (st.source, st.tag, st.count) == (0, 100 * rank + i, n)
        assert bytes(buf[:n]) == _payload(rank, 0, n, i)
        echoes.append((st.fields(), bytes(buf[:n])))
    return echoes


@_program
def truncation(mpi: Shim, rank: int, nranks: int):
    """An 8-byte message into a 4-byte buffer, blocking and nonblocking."""
    world = M.MPI_COMM_WORLD
    peer = (rank + 1) % nranks
    src = (rank - 1) % nranks
    out = []
    for tag in (1, 2):
        mpi.send(np.array([7 + rank, -rank], dtype=np.int32), 2, M.MPI_INT32_T, peer, tag, world)
    buf = np.zeros(1, dtype=np.int32)
    try:
        mpi.recv(buf, 1, M.MPI_INT32_T, src, 1, world)
    except MPIError as exc:
        assert exc.error_class == M.MPI_ERR_TRUNCATE, exc
        assert exc.status.error == M.MPI_ERR_TRUNCATE
        out.append((exc.error_class, exc.status.fields(), buf.tobytes()))
    else:
        raise AssertionError("truncated blocking receive did not fail")
    buf = np.zeros(1, dtype=np.int32)
    req = mpi.irecv(buf, 1, M.MPI_INT32_T, M.MPI_ANY_SOURCE, 2, world)
    try:
        mpi.wait(req)
    except MPIError as exc:
        assert exc.error_class == M.MPI_ERR_TRUNCATE, exc
        out.append((exc.error_class, exc.status.fields(), buf.tobytes()))
    else:
        raise AssertionError("truncated nonblocking receive did not fail")
    assert int(buf[0]) == 7 + src, "the bytes that fit must be delivered"
    return out


@_program
def comm_dup_isolation(mpi: Shim, rank: int, nranks: int):
    """Traffic on a duplicate never matches receives on the original."""
    world = M.MPI_COMM_WORLD
    dup = mpi.comm_dup(world)
    assert dup != world and mpi.comm_size(dup) == nranks and mpi.comm_rank(dup) == rank
    peer = (rank + 1) % nranks
    src = (rank - 1) % nranks
    mpi.send(b"dup-" + bytes([rank]), 5, M.MPI_BYTE, peer, 5, dup)
    mpi.send(b"wld-" + bytes([rank]), 5, M.MPI_BYTE, peer, 5, world)
    first, second = bytearray(5), bytearray(5)
    s1 = mpi.recv(first, 5, M.MPI_BYTE, M.MPI_ANY_SOURCE, M.MPI_ANY_TAG, world)
    s2 = mpi.recv(second, 5, M.MPI_BYTE, M.MPI_ANY_SOURCE, M.MPI_ANY_TAG, dup)
    assert bytes(first) == b"wld-" + bytes([src]), bytes(first)
    assert bytes(second) == b"dup-" + bytes([src]), bytes(second)
    assert mpi.comm_free(dup) == M.MPI_COMM_NULL
    return [(s1.fields(), bytes(first)), (s2.fields(), bytes(second))]


@_program
def derived_type_send(mpi: Shim, rank: int, nranks: int):
    """Two elements of contiguous(3, int32) arrive as six int32 values."""
    world = M.MPI_COMM_WORLD
    triple = mpi.type_contiguous(3, M.MPI_INT32_T)
    mpi.type_commit(triple)
    assert mpi.type_size(triple) == 12
    peer = (rank + 1) % nranks
    src = (rank - 1) % nranks
    mpi.send(np.arange(6, dtype=np.int32) + 10 * rank, 2, triple, peer, 0, world)
    buf = np.zeros(6, dtype=np.int32)
    st = mpi.recv(buf, 2, triple, src, 0, world)
    assert list(buf) == [10 * src + k for k in range(6)]
    five = mpi.type_contiguous(5, M.MPI_INT32_T)
    mpi.type_commit(five)
    counts = (mpi.get_count(st, triple), mpi.get_count(st, M.MPI_INT32_T), mpi.get_count(st, five))
    assert counts == (2, 6, M.MPI_UNDEFINED), counts
    assert mpi.type_free(five) == M.MPI_DATATYPE_NULL
    assert mpi.type_free(triple) == M.MPI_DATATYPE_NULL
    return (st.fields(), buf.tobytes(), counts)


# ----------------------------------------------------------------------
# reductions


def fold_oracle(values: Sequence[int], op: Callable[[int, int], int]) -> int:
    acc = values[0]
    for v in values[1:]:
        acc = op(acc, v)
    return acc


@_program
def allreduce(mpi: Shim, rank: int, nranks: int):
    """SUM, PROD and MAX of per-rank int64 contributions."""
    world = M.MPI_COMM_WORLD
    contrib = [r + 1 for r in range(nranks)]
    results = []
    for op, py in ((M.MPI_SUM, int.__add__), (M.MPI_PROD, int.__mul__), (M.MPI_MAX, max)):
        out = np.zeros(1, dtype=np.int64)
        mpi.allreduce(np.array([contrib[rank]], dtype=np.int64), out, 1, M.MPI_INT64_T, op, world)
        assert int(out[0]) == fold_oracle(contrib, py), (op, int(out[0]))
        results.append(int(out[0]))
    out = np.zeros(1, dtype=np.int32)
    mpi.reduce(np.array([rank], dtype=np.int32), out, 1, M.MPI_INT32_T, M.MPI_SUM, 0, world)
    if rank == 0:
        assert int(out[0]) == nranks * (nranks - 1) // 2
    results.append(int(out[0]) if rank == 0 else None)
    return results


@_program
def user_op_allreduce(mpi: Shim, rank: int, nranks: int):
    """A user SUM over int32 sees the standard MPI_INT32_T handle."""
    seen: list[int] = []

    def user_sum(invec, inoutvec, count, datatype):
        seen.append(datatype)
        a = np.frombuffer(invec, dtype=np.int32, count=count)
        b = np.frombuffer(inoutvec, dtype=np.int32, count=count)
        b += a

    op = mpi.op_create(user_sum, True)
    out = np.zeros(2, dtype=np.int32)
    mpi.allreduce(np.array([rank + 1, 2 * rank], dtype=np.int32), out, 2, M.MPI_INT32_T, op, M.MPI_COMM_WORLD)
    assert list(out) == [nranks * (nranks + 1) // 2, nranks * (nranks - 1)], list(out)
    expected = lookup_predefined("MPI_INT32_T")
    assert all(h == expected for h in seen), [hex(h) for h in seen]
    assert len(seen) == nranks - 1
    assert mpi.op_free(op) == M.MPI_OP_NULL
    return (out.tobytes(), sorted(set(seen)))


# ----------------------------------------------------------------------
# alltoallw

# each mix is a cycle of element types used per (sender, receiver) pair;
# ("contig", n, base) builds contiguous(n, base)
TYPE_MIXES: dict[str, tuple] = {
    "int32_int64": ("MPI_INT32_T", "MPI_INT64_T"),
    "int32_int64_pairs": ("MPI_INT32_T", "MPI_INT64_T", ("contig", 2, "MPI_INT16_T")),
    "bytes_and_triples": ("MPI_UINT8_T", ("contig", 3, "MPI_INT32_T"), "MPI_UINT16_T", "MPI_INT64_T"),
}


def _element_size(elem) -> int:
    if isinstance(elem, tuple):
        _, n, base = elem
        return n * datatype_fixed_size(lookup_predefined(base))
    return datatype_fixed_size(lookup_predefined(elem))


def alltoallw_layout(mix: tuple, nranks: int, rank: int):
    """Per-peer (element type, count, byte displacement) for sends and receives."""

    def pair(i, j):
        return mix[(i + j) % len(mix)], 1 + (i + 2 * j) % 3

    sends, recvs, at = [], [], 0
    for j in range(nranks):
        elem, count = pair(rank, j)
        sends.append((elem, count, at))
        at += count * _element_size(elem) + 1  # deliberate one-byte gap
    send_total, at = at, 0
    for i in range(nranks):
        elem, count = pair(i, rank)
        recvs.append((elem, count, at))
        at += count * _element_size(elem) + 2
    return sends, recvs, send_total, at


def _send_buffer(mix: tuple, nranks: int, rank: int) -> bytes:
    sends, _, total, _ = alltoallw_layout(mix, nranks, rank)
    buf = bytearray(b"\xee" * total)
    for j, (elem, count, at) in enumerate(sends):
        n = count * _element_size(elem)
        buf[at : at + n] = _payload(rank, j, n)
    return bytes(buf)


def alltoallw_oracle(mix: tuple, nranks: int, rank: int) -> bytes:
    """Receive buffer of ``rank`` built by serializing each sender's block."""
    _, recvs, _, total = alltoallw_layout(mix, nranks, rank)
    out = bytearray(total)
    for i, (elem, count, at) in enumerate(recvs):
        sender_sends, _, _, _ = alltoallw_layout(mix, nranks, i)
        s_elem, s_count, s_at = sender_sends[rank]
        n = s_count * _element_size(s_elem)
        out[at : at + n] = _send_buffer(mix, nranks, i)[s_at : s_at + n]
    return bytes(out)


def alltoallw_exchange(mpi: Shim, rank: int, nranks: int, mix: tuple) -> bytes:
    made: dict = {}

    def handle(elem):
        if not isinstance(elem, tuple):
            return lookup_predefined(elem)
        if elem not in made:
            _, n, base = elem
            made[elem] = mpi.type_contiguous(n, lookup_predefined(base))
            mpi.type_commit(made[elem])
        return made[elem]

    sends, recvs, _, recv_total = alltoallw_layout(mix, nranks, rank)
    recvbuf = bytearray(recv_total)
    req = mpi.ialltoallw(
        _send_buffer(mix, nranks, rank),
        [c for _, c, _ in sends],
        [a for _, _, a in sends],
        [handle(s) for s, _, _ in sends],
        recvbuf,
        [c for _, c, _ in recvs],
        [a for _, _, a in recvs],
        [handle(s) for s, _, _ in recvs],
        M.MPI_COMM_WORLD,
    )
    assert mpi.request_state_count() == 1
    reqs = [req]
    statuses = mpi.waitall(reqs)
    assert reqs == [M.MPI_REQUEST_NULL] and mpi.request_state_count() == 0
    assert statuses[0].error == M.MPI_SUCCESS
    for h in made.values():
        mpi.type_free(h)
    return bytes(recvbuf)


@_program
def ialltoallw_hetero(mpi: Shim, rank: int, nranks: int):
    """Alltoallw with per-peer int32/int64/contiguous(int16) blocks."""
    mix = TYPE_MIXES["int32_int64_pairs"]
    got = alltoallw_exchange(mpi, rank, nranks, mix)
    assert got == alltoallw_oracle(mix, nranks, rank), "alltoallw result differs from the serialization oracle"
    return got


@_program
def testall_worst_case(mpi: Shim, rank: int, nranks: int, p2p: int = 50):
    """Testall over one stateful ialltoallw request and ``p2p`` plain ones.

    Rank 0 holds back the other ranks until after its first testall, so
    with more than one rank that call must report incomplete and keep the
    alltoallw state.  Every testall looks every request up in the state map.
    """
    world = M.MPI_COMM_WORLD
    one = np.ones(nranks, dtype=np.int32)
    recv = np.zeros(nranks, dtype=np.int32)
    vec = [M.MPI_INT32_T] * nranks
    counts, displs = [1] * nranks, [4 * k for k in range(nranks)]
    if rank != 0:
        mpi.recv(bytearray(1), 1, M.MPI_BYTE, 0, 99, world)
        req = mpi.ialltoallw(one, counts, displs, vec, recv, counts, displs, vec, world)
        mpi.wait(req)
        assert list(recv) == [1] * nranks
        return None

    reqs = []
    sink = [bytearray(4) for _ in range(p2p // 2)]
    for k in range(p2p - p2p // 2):
        reqs.append(mpi.isend(np.int32(k).tobytes(), 1, M.MPI_INT32_T, 0, k, M.MPI_COMM_SELF))
    for k, buf in enumerate(sink):
        reqs.append(mpi.irecv(buf, 1, M.MPI_INT32_T, 0, k, M.MPI_COMM_SELF))
    reqs.append(mpi.ialltoallw(one, counts, displs, vec, recv, counts, displs, vec, world))
    before = mpi.state_lookups
    first, statuses = mpi.testall(reqs)
    per_call = mpi.state_lookups - before
    assert per_call == len(reqs), (per_call, len(reqs))
    if nranks > 1:
        assert not first and mpi.request_state_count() == 1 and M.MPI_REQUEST_NULL not in reqs
    for peer in range(1, nranks):
        mpi.send(b"g", 1, M.MPI_BYTE, peer, 99, world)
    flag = first
    while not flag:
        flag, statuses = mpi.testall(reqs)
        if not flag:
            time.sleep(0)
    assert mpi.request_state_count() == 0 and set(reqs) == {M.MPI_REQUEST_NULL}
    assert [np.frombuffer(b, dtype=np.int32)[0] for b in sink] == list(range(p2p // 2))
    return (first, per_call, None if statuses is None else len(statuses))
