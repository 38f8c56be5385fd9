"""Shared in-process message-passing engine.

Both mock backends are thin skins over one :class:`World`: simulated ranks
are threads, point-to-point sends are eager (buffered) with FIFO matching
per destination, collectives rendezvous on a per-communicator sequence
number, and reductions fold contributions left to right in rank order.

All engine state sits behind one condition variable.  User reduction
callbacks always run with it released.
"""

from __future__ import annotations

import ctypes
import enum
import itertools
import random
import threading
from collections import deque
from dataclasses import dataclass, field
from typing import Any, Callable, Optional, Sequence

import numpy as np

__all__ = [
    "ANY_SOURCE",
    "ANY_TAG",
    "PROC_NULL",
    "UNDEFINED",
    "TAG_UB",
    "Err",
    "SimError",
    "SimStatus",
    "EMPTY_STATUS",
    "SimDatatype",
    "SimOp",
    "SimRequest",
    "World",
    "RankFailure",
    "BUILTIN_TYPES",
    "BUILTIN_OPS",
    "world_create",
]

ANY_SOURCE = -1
ANY_TAG = -1
PROC_NULL = -2
UNDEFINED = -32766
TAG_UB = 32767

WORLD_COMM = 0


class Err(enum.Enum):
    BUFFER = "buffer"
    COUNT = "count"
    TYPE = "type"
    TAG = "tag"
    COMM = "comm"
    RANK = "rank"
    REQUEST = "request"
    ROOT = "root"
    OP = "op"
    ARG = "arg"
    TRUNCATE = "truncate"
    OTHER = "other"
    INTERN = "intern"
    IN_STATUS = "in_status"
    PENDING = "pending"


class SimError(Exception):
    def __init__(self, err: Err, message: str = "") -> None:
        super().__init__(f"{err.value}: {message}" if message else err.value)
        self.err = err


class RankFailure(RuntimeError):
    """A rank's program raised; the original exception is ``__cause__``."""

    def __init__(self, rank: int, exc: BaseException) -> None:
        super().__init__(f"rank {rank} failed: {exc!r}")
        self.rank = rank


@dataclass(frozen=True)
class SimStatus:
    source: int
    tag: int
    error: Optional[Err]
    count: int
    cancelled: bool = False


EMPTY_STATUS = SimStatus(ANY_SOURCE, ANY_TAG, None, 0)


# name -> (byte size, numpy dtype or None)
BUILTIN_TYPES: dict[str, tuple[int, Optional[str]]] = {
    "char": (1, "i1"),
    "signed_char": (1, "i1"),
    "unsigned_char": (1, "u1"),
    "byte": (1, "u1"),
    "packed": (1, None),
    "short": (ctypes.sizeof(ctypes.c_short), "h"),
    "unsigned_short": (ctypes.sizeof(ctypes.c_ushort), "H"),
    "int": (ctypes.sizeof(ctypes.c_int), "i"),
    "unsigned": (ctypes.sizeof(ctypes.c_uint), "I"),
    "long": (ctypes.sizeof(ctypes.c_long), "l"),
    "unsigned_long": (ctypes.sizeof(ctypes.c_ulong), "L"),
    "long_long": (ctypes.sizeof(ctypes.c_longlong), "q"),
    "unsigned_long_long": (ctypes.sizeof(ctypes.c_ulonglong), "Q"),
    "float": (4, "f4"),
    "double": (8, "f8"),
    "int8_t": (1, "i1"),
    "uint8_t": (1, "u1"),
    "int16_t": (2, "i2"),
    "uint16_t": (2, "u2"),
    "int32_t": (4, "i4"),
    "uint32_t": (4, "u4"),
    "int64_t": (8, "i8"),
    "uint64_t": (8, "u8"),
    "aint": (ctypes.sizeof(ctypes.c_ssize_t), "i%d" % ctypes.sizeof(ctypes.c_ssize_t)),
    "offset": (8, "i8"),
    "count": (8, "i8"),
}


def _logical(fn):
    def apply(a, b):
        return fn(a != 0, b != 0).astype(b.dtype)

    return apply


# name -> (numpy binary function over (in, inout), requires integer dtype)
_OP_KERNELS: dict[str, Optional[tuple[Callable, bool]]] = {
    "sum": (np.add, False),
    "prod": (np.multiply, False),
    "min": (np.minimum, False),
    "max": (np.maximum, False),
    "land": (_logical(np.logical_and), False),
    "lor": (_logical(np.logical_or), False),
    "lxor": (_logical(np.logical_xor), False),
    "band": (np.bitwise_and, True),
    "bor": (np.bitwise_or, True),
    "bxor": (np.bitwise_xor, True),
    # need pair types or RMA context; present so handles exist
    "minloc": None,
    "maxloc": None,
    "replace": None,
    "no_op": None,
}
BUILTIN_OPS = tuple(_OP_KERNELS)


@dataclass
class SimDatatype:
    id: int
    name: str
    size: int
    np_dtype: Optional[str] = None
    base: Optional[int] = None
    count: int = 1
    committed: bool = False
    freed: bool = False

    @property
    def extent(self) -> int:
        return self.size


@dataclass
class SimOp:
    id: int
    name: str
    callback: Callable[[memoryview, memoryview, int, int], None]
    commute: bool = True
    freed: bool = False


@dataclass(eq=False)
class SimRequest:
    id: int
    kind: str
    owner: int
    state: str = "pending"
    status: SimStatus = EMPTY_STATUS
    # receive-only matching data
    comm: int = -1
    source: int = ANY_SOURCE
    tag: int = ANY_TAG
    buf: Optional[memoryview] = None
    capacity: int = 0

    @property
    def done(self) -> bool:
        return self.state != "pending"


@dataclass
class _Message:
    source: int
    tag: int
    data: bytes


@dataclass
class _Slot:
    kind: str
    size: int
    values: dict = field(default_factory=dict)
    result: Any = None
    done: bool = False
    readers: int = 0


@dataclass
class _Comm:
    id: int
    ranks: tuple[int, ...]
    index: dict[int, int] = field(init=False)
    unexpected: list = field(init=False)
    posted: list = field(init=False)
    coll_seq: list = field(init=False)
    slots: dict = field(default_factory=dict)
    released: set = field(default_factory=set)

    def __post_init__(self) -> None:
        n = len(self.ranks)
        self.index = {r: i for i, r in enumerate(self.ranks)}
        self.unexpected = [deque() for _ in range(n)]
        self.posted = [[] for _ in range(n)]
        self.coll_seq = [0] * n

    @property
    def size(self) -> int:
        return len(self.ranks)


@dataclass
class _A2AW:
    req: SimRequest
    sendbuf: memoryview
    sendcounts: Sequence[int]
    sdispls: Sequence[int]
    sendtypes: Sequence[int]
    recvbuf: memoryview
    recvcounts: Sequence[int]
    rdispls: Sequence[int]
    recvtypes: Sequence[int]


def _bytes_view(buf) -> memoryview:
    mv = memoryview(buf)
    if mv.format != "B" or mv.ndim != 1:
        mv = mv.cast("B")
    return mv


def _matches(req: SimRequest, msg: _Message) -> bool:
    return (req.source == ANY_SOURCE or req.source == msg.source) and (
        req.tag == ANY_TAG or req.tag == msg.tag
    )


class World:
    """N simulated ranks sharing one engine.

    Every operation takes the calling rank's world rank explicitly; the
    backends bind it once at init.
    """

    def __init__(self, nranks: int, seed: Optional[int] = None) -> None:
        if nranks < 1:
            raise ValueError(f"nranks must be >= 1, got {nranks}")
        self.nranks = nranks
        self.seed = seed
        self.rng = random.Random(seed)
        self._cv = threading.Condition()
        self._failed_rank: Optional[int] = None
        self._ids = itertools.count(1)
        self._comms: dict[int, _Comm] = {WORLD_COMM: _Comm(WORLD_COMM, tuple(range(nranks)))}
        self._self_comms = []
        for r in range(nranks):
            cid = next(self._ids)
            self._comms[cid] = _Comm(cid, (r,))
            self._self_comms.append(cid)
        self._types: dict[int, SimDatatype] = {}
        self._type_names: dict[str, int] = {}
        for name, (size, np_dtype) in BUILTIN_TYPES.items():
            tid = next(self._ids)
            self._types[tid] = SimDatatype(tid, name, size, np_dtype, committed=True)
            self._type_names[name] = tid
        self._ops: dict[int, SimOp] = {}
        self._op_names: dict[str, int] = {}
        for name in BUILTIN_OPS:
            oid = next(self._ids)
            self._ops[oid] = SimOp(oid, name, self._kernel(name), True)
            self._op_names[name] = oid

    # ------------------------------------------------------------------
    # execution harness

    def run(self, program: Callable[[int], Any], *, timeout: float = 30.0) -> list:
        """Run ``program(rank)`` in one thread per rank and collect results.

        Thread start order is shuffled with the world's seeded RNG.  When a
        rank raises, the world is aborted: ranks blocked in or polling the
        engine get a :class:`SimError` instead of waiting forever, and the
        first failure is the one reported.
        """
        results: list = [None] * self.nranks
        failures: list = [None] * self.nranks

        def body(rank: int) -> None:
            try:
                results[rank] = program(rank)
            except BaseException as exc:  # noqa: BLE001 - re-raised below
                failures[rank] = exc
                with self._cv:
                    if self._failed_rank is None:
                        self._failed_rank = rank
                    self._cv.notify_all()

        order = list(range(self.nranks))
        self.rng.shuffle(order)
        threads = {r: threading.Thread(target=body, args=(r,), name=f"rank-{r}", daemon=True) for r in order}
        for r in order:
            threads[r].start()
        for r in order:
            threads[r].join(timeout)
            if threads[r].is_alive():
                raise TimeoutError(f"rank {r} did not finish within {timeout}s (deadlock?)")
        first = self._failed_rank
        if first is not None:
            raise RankFailure(first, failures[first]) from failures[first]
        return results

    def _check_abort(self) -> None:
        # caller holds self._cv
        if self._failed_rank is not None:
            raise SimError(Err.OTHER, f"aborted: rank {self._failed_rank} failed")

    # ------------------------------------------------------------------
    # lookups

    @property
    def world_comm(self) -> int:
        return WORLD_COMM

    def self_comm(self, rank: int) -> int:
        return self._self_comms[rank]

    def builtin_type(self, name: str) -> int:
        return self._type_names[name]

    def builtin_op(self, name: str) -> int:
        return self._op_names[name]

    def _member(self, comm_id: int, rank: int) -> tuple[_Comm, int]:
        comm = self._comms.get(comm_id)
        if comm is None or rank in comm.released:
            raise SimError(Err.COMM, f"no communicator {comm_id}")
        local = comm.index.get(rank)
        if local is None:
            raise SimError(Err.COMM, f"rank {rank} is not in communicator {comm_id}")
        return comm, local

    def datatype(self, type_id: int) -> SimDatatype:
        dt = self._types.get(type_id)
        if dt is None or dt.freed:
            raise SimError(Err.TYPE, f"no datatype {type_id}")
        return dt

    def _committed(self, type_id: int) -> SimDatatype:
        dt = self.datatype(type_id)
        if not dt.committed:
            raise SimError(Err.TYPE, f"datatype {dt.name} is not committed")
        return dt

    def op(self, op_id: int) -> SimOp:
        op = self._ops.get(op_id)
        if op is None or op.freed:
            raise SimError(Err.OP, f"no op {op_id}")
        return op

    def _element_view(self, type_id: int, count: int) -> tuple[str, int]:
        dt = self.datatype(type_id)
        n = count
        while dt.base is not None:
            n *= dt.count
            dt = self.datatype(dt.base)
        if dt.np_dtype is None:
            raise SimError(Err.OP, f"no arithmetic on datatype {dt.name}")
        return dt.np_dtype, n

    def _kernel(self, name: str) -> Callable:
        kernel = _OP_KERNELS[name]

        def apply(invec: memoryview, inoutvec: memoryview, count: int, type_id: int) -> None:
            if kernel is None:
                raise SimError(Err.OP, f"MPI op {name} is not valid in a reduction")
            fn, needs_int = kernel
            np_dtype, n = self._element_view(type_id, count)
            a = np.frombuffer(invec, dtype=np_dtype, count=n)
            b = np.frombuffer(inoutvec, dtype=np_dtype, count=n)
            if needs_int and b.dtype.kind not in "iu":
                raise SimError(Err.OP, f"{name} needs an integer datatype")
            b[...] = fn(a, b)

        return apply

    # ------------------------------------------------------------------
    # communicators

    def comm_size(self, comm_id: int, rank: int) -> int:
        return self._member(comm_id, rank)[0].size

    def comm_rank(self, comm_id: int, rank: int) -> int:
        return self._member(comm_id, rank)[1]

    def comm_dup(self, comm_id: int, rank: int) -> int:
        comm, _ = self._member(comm_id, rank)

        def make(_values):
            cid = next(self._ids)
            self._comms[cid] = _Comm(cid, comm.ranks)
            return cid

        _, new_id = self._collective(comm, rank, "dup", None, make)
        return new_id

    def comm_free(self, comm_id: int, rank: int) -> None:
        if comm_id == WORLD_COMM or comm_id in self._self_comms:
            raise SimError(Err.COMM, "cannot free a predefined communicator")
        with self._cv:
            comm, _ = self._member(comm_id, rank)
            comm.released.add(rank)
            if len(comm.released) == comm.size:
                del self._comms[comm_id]

    def live_comms(self) -> list[int]:
        return sorted(self._comms)

    # ------------------------------------------------------------------
    # datatypes

    def type_contiguous(self, count: int, base_id: int) -> int:
        if count < 0:
            raise SimError(Err.COUNT, f"negative count {count}")
        base = self.datatype(base_id)
        with self._cv:
            tid = next(self._ids)
            self._types[tid] = SimDatatype(tid, f"contiguous({count},{base.name})", count * base.extent, None, base_id, count)
        return tid

    def type_commit(self, type_id: int) -> None:
        self.datatype(type_id).committed = True

    def type_free(self, type_id: int) -> None:
        dt = self.datatype(type_id)
        if dt.base is None:
            raise SimError(Err.TYPE, f"cannot free builtin datatype {dt.name}")
        dt.freed = True

    def type_size(self, type_id: int) -> int:
        return self.datatype(type_id).size

    def get_count(self, status: SimStatus, type_id: int) -> int:
        size = self.datatype(type_id).size
        if size == 0:
            return 0 if status.count == 0 else UNDEFINED
        q, r = divmod(status.count, size)
        return UNDEFINED if r else q

    # ------------------------------------------------------------------
    # reduction operations

    def op_create(self, callback: Callable[[memoryview, memoryview, int, int], None], commute: bool) -> int:
        if callback is None:
            raise SimError(Err.ARG, "null op callback")
        with self._cv:
            oid = next(self._ids)
            self._ops[oid] = SimOp(oid, "user", callback, bool(commute))
        return oid

    def op_free(self, op_id: int) -> None:
        op = self.op(op_id)
        if op.name != "user":
            raise SimError(Err.OP, f"cannot free builtin op {op.name}")
        op.freed = True

    def reduce_apply(self, op_id: int, type_id: int, count: int, contributions: Sequence[bytes]) -> bytes:
        """Left-to-right fold of per-rank contributions with ``op``.

        ``acc = c[0]``, then for each later contribution the callback is
        invoked with ``(acc, c[i])`` as (in, inout), so the result is
        ``c[0] op c[1] op ... op c[n-1]`` regardless of commutativity.
        """
        op = self.op(op_id)
        self._committed(type_id)
        acc = bytearray(contributions[0])
        for c in contributions[1:]:
            inout = bytearray(c)
            op.callback(memoryview(acc), memoryview(inout), count, type_id)
            acc = inout
        return bytes(acc)

    def reduce(self, rank, sendbuf, recvbuf, count, type_id, op_id, root, comm_id) -> None:
        comm, local = self._member(comm_id, rank)
        if not 0 <= root < comm.size:
            raise SimError(Err.ROOT, f"root {root} out of range")
        data = self._reduction_input(sendbuf, count, type_id, op_id)
        values, _ = self._collective(comm, rank, "reduce", data)
        if local == root:
            result = self.reduce_apply(op_id, type_id, count, [values[i] for i in range(comm.size)])
            self._write(recvbuf, result)

    def allreduce(self, rank, sendbuf, recvbuf, count, type_id, op_id, comm_id) -> None:
        comm, _ = self._member(comm_id, rank)
        data = self._reduction_input(sendbuf, count, type_id, op_id)
        values, _ = self._collective(comm, rank, "allreduce", data)
        # every rank folds with its own callback, in its own thread
        result = self.reduce_apply(op_id, type_id, count, [values[i] for i in range(comm.size)])
        self._write(recvbuf, result)

    def _reduction_input(self, sendbuf, count, type_id, op_id) -> bytes:
        dt = self._committed(type_id)
        self.op(op_id)
        nbytes = count * dt.extent
        src = _bytes_view(sendbuf)
        if len(src) < nbytes:
            raise SimError(Err.BUFFER, f"send buffer holds {len(src)} bytes, need {nbytes}")
        return bytes(src[:nbytes])

    @staticmethod
    def _write(recvbuf, data: bytes) -> None:
        dst = _bytes_view(recvbuf)
        if len(dst) < len(data):
            raise SimError(Err.BUFFER, f"receive buffer holds {len(dst)} bytes, need {len(data)}")
        dst[: len(data)] = data

    def _collective(self, comm: _Comm, rank: int, kind: str, value, finish=None):
        with self._cv:
            local = comm.index[rank]
            seq = comm.coll_seq[local]
            comm.coll_seq[local] += 1
            slot = comm.slots.setdefault(seq, _Slot(kind, comm.size))
            if slot.kind != kind:
                raise SimError(Err.OTHER, f"collective mismatch: {kind} vs {slot.kind}")
            slot.values[local] = value
            if len(slot.values) == slot.size:
                if finish is not None:
                    slot.result = finish(slot.values)
                slot.done = True
                self._cv.notify_all()
            while not slot.done:
                self._check_abort()
                self._cv.wait()
            slot.readers += 1
            if slot.readers == slot.size:
                del comm.slots[seq]
            return slot.values, slot.result

    # ------------------------------------------------------------------
    # point to point

    def _new_request(self, kind: str, owner: int) -> SimRequest:
        return SimRequest(next(self._ids), kind, owner)

    def isend(self, rank, buf, count, type_id, dest, tag, comm_id) -> SimRequest:
        comm, local = self._member(comm_id, rank)
        dt = self._committed(type_id)
        if tag < 0 or tag > TAG_UB:
            raise SimError(Err.TAG, f"invalid send tag {tag}")
        if count < 0:
            raise SimError(Err.COUNT, f"negative count {count}")
        req = self._new_request("send", rank)
        if dest == PROC_NULL:
            self._complete(req, SimStatus(PROC_NULL, ANY_TAG, None, 0))
            return req
        if not 0 <= dest < comm.size:
            raise SimError(Err.RANK, f"destination {dest} out of range for size {comm.size}")
        nbytes = count * dt.extent
        src = _bytes_view(buf)
        if len(src) < nbytes:
            raise SimError(Err.BUFFER, f"send buffer holds {len(src)} bytes, need {nbytes}")
        msg = _Message(local, tag, bytes(src[:nbytes]))
        with self._cv:
            posted = comm.posted[dest]
            for i, recv in enumerate(posted):
                if _matches(recv, msg):
                    del posted[i]
                    self._deliver(recv, msg)
                    break
            else:
                comm.unexpected[dest].append(msg)
            self._complete(req, SimStatus(ANY_SOURCE, ANY_TAG, None, nbytes))
        return req

    def irecv(self, rank, buf, count, type_id, source, tag, comm_id) -> SimRequest:
        comm, local = self._member(comm_id, rank)
        dt = self._committed(type_id)
        if tag != ANY_TAG and not 0 <= tag <= TAG_UB:
            raise SimError(Err.TAG, f"invalid receive tag {tag}")
        if count < 0:
            raise SimError(Err.COUNT, f"negative count {count}")
        req = self._new_request("recv", rank)
        if source == PROC_NULL:
            self._complete(req, SimStatus(PROC_NULL, ANY_TAG, None, 0))
            return req
        if source != ANY_SOURCE and not 0 <= source < comm.size:
            raise SimError(Err.RANK, f"source {source} out of range for size {comm.size}")
        view = _bytes_view(buf)
        capacity = count * dt.extent
        if len(view) < capacity:
            raise SimError(Err.BUFFER, f"receive buffer holds {len(view)} bytes, need {capacity}")
        req.comm, req.source, req.tag, req.buf, req.capacity = comm_id, source, tag, view, capacity
        with self._cv:
            queue = comm.unexpected[local]
            for msg in queue:
                if _matches(req, msg):
                    queue.remove(msg)
                    self._deliver(req, msg)
                    break
            else:
                comm.posted[local].append(req)
        return req

    def _deliver(self, req: SimRequest, msg: _Message) -> None:
        n = min(len(msg.data), req.capacity)
        req.buf[:n] = msg.data[:n]
        err = Err.TRUNCATE if len(msg.data) > req.capacity else None
        req.buf = None
        self._complete(req, SimStatus(msg.source, msg.tag, err, n))

    def _complete(self, req: SimRequest, status: SimStatus) -> None:
        with self._cv:
            req.status = status
            req.state = "complete"
            self._cv.notify_all()

    def send(self, rank, buf, count, type_id, dest, tag, comm_id) -> None:
        self.isend(rank, buf, count, type_id, dest, tag, comm_id)

    def recv(self, rank, buf, count, type_id, source, tag, comm_id) -> SimStatus:
        return self.wait(self.irecv(rank, buf, count, type_id, source, tag, comm_id))

    # ------------------------------------------------------------------
    # completion

    def wait(self, req: SimRequest) -> SimStatus:
        with self._cv:
            while req.state == "pending":
                self._check_abort()
                self._cv.wait()
            req.state = "inactive"
            return req.status

    def test(self, req: SimRequest) -> Optional[SimStatus]:
        with self._cv:
            if req.state == "pending":
                self._check_abort()
                return None
            req.state = "inactive"
            return req.status

    def waitall(self, reqs: Sequence[SimRequest]) -> list[SimStatus]:
        return [self.wait(r) for r in reqs]

    def testall(self, reqs: Sequence[SimRequest]) -> Optional[list[SimStatus]]:
        """All statuses if every request is done, otherwise ``None`` (no request changes state)."""
        with self._cv:
            if any(r.state == "pending" for r in reqs):
                self._check_abort()
                return None
            for r in reqs:
                r.state = "inactive"
            return [r.status for r in reqs]

    def request_free(self, req: SimRequest) -> None:
        if req.state == "pending":
            raise SimError(Err.REQUEST, "cannot free a pending request")
        req.state = "inactive"

    # ------------------------------------------------------------------
    # nonblocking alltoallw

    def ialltoallw(
        self,
        rank,
        sendbuf,
        sendcounts,
        sdispls,
        sendtypes,
        recvbuf,
        recvcounts,
        rdispls,
        recvtypes,
        comm_id,
    ) -> SimRequest:
        """Post this rank's part of an alltoallw; completes once all ranks posted.

        Displacements are in bytes.  The type sequences are read only when
        the exchange runs, so they must stay valid until completion.
        """
        comm, local = self._member(comm_id, rank)
        n = comm.size
        for name, vec in (
            ("sendcounts", sendcounts),
            ("sdispls", sdispls),
            ("sendtypes", sendtypes),
            ("recvcounts", recvcounts),
            ("rdispls", rdispls),
            ("recvtypes", recvtypes),
        ):
            if len(vec) != n:
                raise SimError(Err.ARG, f"{name} has length {len(vec)}, communicator size is {n}")
        req = self._new_request("ialltoallw", rank)
        part = _A2AW(req, _bytes_view(sendbuf), sendcounts, sdispls, sendtypes, _bytes_view(recvbuf), recvcounts, rdispls, recvtypes)
        with self._cv:
            seq = comm.coll_seq[local]
            comm.coll_seq[local] += 1
            slot = comm.slots.setdefault(seq, _Slot("ialltoallw", n))
            if slot.kind != "ialltoallw":
                raise SimError(Err.OTHER, f"collective mismatch: ialltoallw vs {slot.kind}")
            slot.values[local] = part
            if len(slot.values) == n:
                del comm.slots[seq]
                self._exchange([slot.values[i] for i in range(n)])
        return req

    def _exchange(self, parts: list[_A2AW]) -> None:
        n = len(parts)
        errors: list[Optional[Err]] = [None] * n
        received = [0] * n

        def extent(types, k, who):
            try:
                return self._committed(types[k]).extent
            except SimError as exc:
                errors[who] = errors[who] or exc.err
                return None

        for j, dst in enumerate(parts):
            for i, src in enumerate(parts):
                s_ext = extent(src.sendtypes, j, i)
                r_ext = extent(dst.recvtypes, i, j)
                if s_ext is None or r_ext is None:
                    continue
                start = src.sdispls[j]
                block = src.sendbuf[start : start + src.sendcounts[j] * s_ext]
                cap = dst.recvcounts[i] * r_ext
                if len(block) > cap:
                    errors[j] = errors[j] or Err.TRUNCATE
                    block = block[:cap]
                at = dst.rdispls[i]
                dst.recvbuf[at : at + len(block)] = block
                received[j] += len(block)
        for k, part in enumerate(parts):
            self._complete(part.req, SimStatus(ANY_SOURCE, ANY_TAG, errors[k], received[k]))


def world_create(nranks: int, seed: Optional[int] = None) -> World:
    return World(nranks, seed)
