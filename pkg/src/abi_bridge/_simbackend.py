"""Common machinery for the mock backends.

Both backends keep a per-process handle table mapping native handle values
to simcore objects and translate their native sentinels and error codes at
the boundary.  Subclasses decide what handle values look like and how
``type_size`` is answered.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass
from typing import Any, Callable, Mapping, Optional, Sequence

from . import simcore
from .abi_model.handles import HandleKind
from .backend_api import BackendApi, NativeError, StatusFields
from .simcore import Err, SimError, SimRequest, SimStatus

K = HandleKind

_OPAQUE_ONLY = (K.GROUP, K.WIN, K.FILE, K.SESSION, K.MESSAGE, K.ERRHANDLER)


@dataclass
class Entry:
    """One live native handle.

    ``ref`` is the simcore object (communicator id, datatype id, op id or
    request), ``None`` for null handles, or the constant's name for kinds
    the engine does not model.  ``size`` is filled in for datatypes.
    """

    kind: HandleKind
    ref: Any
    user: bool
    size: Optional[int] = None


class _Guard:
    """Context manager turning engine errors into native error codes."""

    __slots__ = ("_backend",)

    def __init__(self, backend: SimBackend) -> None:
        self._backend = backend

    def __enter__(self) -> None:
        if not self._backend._initialized:
            raise NativeError(self._backend._code(Err.OTHER), f"{self._backend.descriptor.name}: not initialized")

    def __exit__(self, exc_type, exc, tb) -> bool:
        if exc_type is SimError:
            raise NativeError(self._backend._code(exc.err), str(exc)) from exc
        return False


class _LazyTypes:
    """Native datatype vector resolved element by element on access."""

    __slots__ = ("_backend", "_natives")

    def __init__(self, backend: SimBackend, natives: Sequence[int]) -> None:
        self._backend = backend
        self._natives = natives

    def __len__(self) -> int:
        return len(self._natives)

    def __getitem__(self, i: int) -> int:
        return self._backend._ref(K.DATATYPE, self._natives[i])


class SimBackend(BackendApi):
    NATIVE_HANDLES: Mapping[HandleKind, Mapping[str, int]]
    NATIVE_ERRORS: Mapping[str, int]
    NATIVE_CONSTANTS: Mapping[str, int]
    ERROR_TEXT: Mapping[str, str]

    def __init__(self) -> None:
        self.world: Optional[simcore.World] = None
        self.rank = -1
        self._initialized = False
        self._finalized = False
        self._lock = threading.Lock()
        self._entries: dict[HandleKind, dict[int, Entry]] = {k: {} for k in HandleKind}
        self._by_ref: dict[HandleKind, dict[Any, int]] = {k: {} for k in HandleKind}
        self._guard = _Guard(self)
        c = self.NATIVE_CONSTANTS
        self._any_source = c["MPI_ANY_SOURCE"]
        self._any_tag = c["MPI_ANY_TAG"]
        self._proc_null = c["MPI_PROC_NULL"]
        self._undefined = c["MPI_UNDEFINED"]
        self._err_codes = {e: self.NATIVE_ERRORS[f"MPI_ERR_{e.name}"] for e in Err}
        self._err_names = {v: k for k, v in self.NATIVE_ERRORS.items()}

    # ------------------------------------------------------------------
    # handle table

    def _allocate(self, kind: HandleKind, entry: Entry) -> int:
        """Pick a fresh native value for a user object (under ``_lock``)."""
        raise NotImplementedError

    def _predefined_ref(self, kind: HandleKind, name: str):
        w = self.world
        if name.endswith("_NULL"):
            return None
        if kind is K.COMM:
            return w.world_comm if name == "MPI_COMM_WORLD" else w.self_comm(self.rank)
        if kind is K.DATATYPE:
            return w.builtin_type(name[4:].lower())
        if kind is K.OP:
            return w.builtin_op(name[4:].lower())
        return name

    def _install_predefined(self) -> None:
        for kind, names in self.NATIVE_HANDLES.items():
            for name, value in names.items():
                ref = self._predefined_ref(kind, name)
                entry = Entry(kind, ref, False)
                if kind is K.DATATYPE and ref is not None:
                    entry.size = self.world.type_size(ref)
                self._entries[kind][value] = entry
                if ref is not None:
                    self._by_ref[kind][ref] = value

    def _register(self, kind: HandleKind, ref, size: Optional[int] = None) -> int:
        with self._lock:
            entry = Entry(kind, ref, True, size)
            native = self._allocate(kind, entry)
            self._entries[kind][native] = entry
            self._by_ref[kind][ref] = native
        return native

    def _release(self, kind: HandleKind, native: int) -> None:
        with self._lock:
            entry = self._entries[kind].pop(native)
            self._by_ref[kind].pop(entry.ref, None)

    def _entry(self, kind: HandleKind, native: int) -> Entry:
        entry = self._entries[kind].get(native)
        if entry is None:
            raise SimError(_KIND_ERR[kind], f"invalid {kind} handle {native:#x}")
        return entry

    def _ref(self, kind: HandleKind, native: int):
        ref = self._entry(kind, native).ref
        if ref is None:
            raise SimError(_KIND_ERR[kind], f"null {kind} handle")
        return ref

    def _native_of(self, kind: HandleKind, ref) -> int:
        return self._by_ref[kind][ref]

    def _null(self, kind: HandleKind) -> int:
        return self.NATIVE_HANDLES[kind][_NULL_NAME[kind]]

    def is_live(self, kind: HandleKind, native: int) -> bool:
        return native in self._entries[kind]

    def live_user_handles(self) -> dict[HandleKind, set[int]]:
        return {k: {v for v, e in t.items() if e.user} for k, t in self._entries.items() if any(e.user for e in t.values())}

    # ------------------------------------------------------------------
    # constants and errors

    def _code(self, err: Err) -> int:
        return self._err_codes[err]

    def _source_in(self, source: int) -> int:
        if source == self._any_source:
            return simcore.ANY_SOURCE
        if source == self._proc_null:
            return simcore.PROC_NULL
        if source < 0:
            raise SimError(Err.RANK, f"invalid rank {source}")
        return source

    def _dest_in(self, dest: int) -> int:
        if dest == self._proc_null:
            return simcore.PROC_NULL
        if dest < 0:
            raise SimError(Err.RANK, f"invalid rank {dest}")
        return dest

    def _tag_in(self, tag: int) -> int:
        if tag == self._any_tag:
            return simcore.ANY_TAG
        if tag < 0:
            raise SimError(Err.TAG, f"invalid tag {tag}")
        return tag

    def _status_out(self, st: SimStatus) -> bytes:
        if st.source == simcore.PROC_NULL:
            source = self._proc_null
        elif st.source == simcore.ANY_SOURCE:
            source = self._any_source
        else:
            source = st.source
        tag = self._any_tag if st.tag == simcore.ANY_TAG else st.tag
        error = 0 if st.error is None else self._code(st.error)
        return self.descriptor.status_layout.pack(StatusFields(source, tag, error, st.count, st.cancelled))

    # ------------------------------------------------------------------
    # lifecycle

    def init(self, world: simcore.World, rank: int) -> None:
        if self._initialized or self._finalized:
            raise NativeError(self._code(Err.OTHER), "init called twice")
        if not 0 <= rank < world.nranks:
            raise NativeError(self._code(Err.RANK), f"rank {rank} outside world of {world.nranks}")
        self.world, self.rank = world, rank
        self._install_predefined()
        self._initialized = True

    def finalize(self) -> None:
        with self._guard:
            self._initialized = False
            self._finalized = True
            for kind in HandleKind:
                for native in [v for v, e in self._entries[kind].items() if e.user]:
                    self._release(kind, native)

    # ------------------------------------------------------------------
    # communicators

    def comm_size(self, comm: int) -> int:
        with self._guard:
            return self.world.comm_size(self._ref(K.COMM, comm), self.rank)

    def comm_rank(self, comm: int) -> int:
        with self._guard:
            return self.world.comm_rank(self._ref(K.COMM, comm), self.rank)

    def comm_dup(self, comm: int) -> int:
        with self._guard:
            return self._register(K.COMM, self.world.comm_dup(self._ref(K.COMM, comm), self.rank))

    def comm_free(self, comm: int) -> int:
        with self._guard:
            entry = self._entry(K.COMM, comm)
            if not entry.user:
                raise SimError(Err.COMM, "cannot free a predefined communicator")
            self.world.comm_free(entry.ref, self.rank)
            self._release(K.COMM, comm)
            return self._null(K.COMM)

    # ------------------------------------------------------------------
    # point to point

    def send(self, buf, count, datatype, dest, tag, comm) -> None:
        with self._guard:
            self.world.send(self.rank, buf, count, self._ref(K.DATATYPE, datatype), self._dest_in(dest), tag, self._ref(K.COMM, comm))

    def isend(self, buf, count, datatype, dest, tag, comm) -> int:
        with self._guard:
            req = self.world.isend(self.rank, buf, count, self._ref(K.DATATYPE, datatype), self._dest_in(dest), tag, self._ref(K.COMM, comm))
            return self._register(K.REQUEST, req)

    def irecv(self, buf, count, datatype, source, tag, comm) -> int:
        with self._guard:
            req = self.world.irecv(
                self.rank, buf, count, self._ref(K.DATATYPE, datatype), self._source_in(source), self._tag_in(tag), self._ref(K.COMM, comm)
            )
            return self._register(K.REQUEST, req)

    def recv(self, buf, count, datatype, source, tag, comm) -> bytes:
        with self._guard:
            st = self.world.recv(
                self.rank, buf, count, self._ref(K.DATATYPE, datatype), self._source_in(source), self._tag_in(tag), self._ref(K.COMM, comm)
            )
            return self._checked(st)

    def _checked(self, st: SimStatus) -> bytes:
        raw = self._status_out(st)
        if st.error is not None:
            raise NativeError(self._code(st.error), f"request failed: {st.error.value}", status=raw)
        return raw

    def _request(self, request: int) -> Optional[SimRequest]:
        entry = self._entry(K.REQUEST, request)
        return entry.ref

    def wait(self, request: int) -> bytes:
        with self._guard:
            req = self._request(request)
            if req is None:
                return self._status_out(simcore.EMPTY_STATUS)
            st = self.world.wait(req)
            self._release(K.REQUEST, request)
            return self._checked(st)

    def test(self, request: int) -> tuple[bool, Optional[bytes]]:
        with self._guard:
            req = self._request(request)
            if req is None:
                return True, self._status_out(simcore.EMPTY_STATUS)
            st = self.world.test(req)
            if st is None:
                return False, None
            self._release(K.REQUEST, request)
            return True, self._checked(st)

    def _completed_all(self, requests: Sequence[int], reqs, statuses) -> list[bytes]:
        out, failed = [], False
        it = iter(statuses)
        for native, req in zip(requests, reqs):
            if req is None:
                out.append(self._status_out(simcore.EMPTY_STATUS))
                continue
            st = next(it)
            self._release(K.REQUEST, native)
            failed = failed or st.error is not None
            out.append(self._status_out(st))
        if failed:
            raise NativeError(self._code(Err.IN_STATUS), "one or more requests failed", statuses=out)
        return out

    def waitall(self, requests: Sequence[int]) -> list[bytes]:
        with self._guard:
            reqs = [self._request(r) for r in requests]
            statuses = self.world.waitall([r for r in reqs if r is not None])
            return self._completed_all(requests, reqs, statuses)

    def testall(self, requests: Sequence[int]) -> tuple[bool, Optional[list[bytes]]]:
        with self._guard:
            reqs = [self._request(r) for r in requests]
            statuses = self.world.testall([r for r in reqs if r is not None])
            if statuses is None:
                return False, None
            return True, self._completed_all(requests, reqs, statuses)

    def get_count(self, status: bytes, datatype: int) -> int:
        with self._guard:
            fields = self.descriptor.status_layout.unpack(status)
            n = self.world.get_count(SimStatus(fields.source, fields.tag, None, fields.count), self._ref(K.DATATYPE, datatype))
            return self._undefined if n == simcore.UNDEFINED else n

    # ------------------------------------------------------------------
    # datatypes

    def type_contiguous(self, count: int, oldtype: int) -> int:
        with self._guard:
            tid = self.world.type_contiguous(count, self._ref(K.DATATYPE, oldtype))
            return self._register(K.DATATYPE, tid, self.world.type_size(tid))

    def type_commit(self, datatype: int) -> None:
        with self._guard:
            self.world.type_commit(self._ref(K.DATATYPE, datatype))

    def type_free(self, datatype: int) -> int:
        with self._guard:
            entry = self._entry(K.DATATYPE, datatype)
            if not entry.user:
                raise SimError(Err.TYPE, "cannot free a predefined datatype")
            self.world.type_free(entry.ref)
            self._release(K.DATATYPE, datatype)
            return self._null(K.DATATYPE)

    # ------------------------------------------------------------------
    # reductions

    def op_create(self, fn: Callable[[memoryview, memoryview, int, int], None], commute: bool) -> int:
        with self._guard:
            if fn is None:
                raise SimError(Err.ARG, "null user function")
            native_of = self._native_of

            def callback(invec, inoutvec, count, type_id):
                fn(invec, inoutvec, count, native_of(K.DATATYPE, type_id))

            return self._register(K.OP, self.world.op_create(callback, commute))

    def op_free(self, op: int) -> int:
        with self._guard:
            entry = self._entry(K.OP, op)
            if not entry.user:
                raise SimError(Err.OP, "cannot free a predefined op")
            self.world.op_free(entry.ref)
            self._release(K.OP, op)
            return self._null(K.OP)

    def reduce(self, sendbuf, recvbuf, count, datatype, op, root, comm) -> None:
        with self._guard:
            if root < 0:
                raise SimError(Err.ROOT, f"invalid root {root}")
            self.world.reduce(
                self.rank, sendbuf, recvbuf, count, self._ref(K.DATATYPE, datatype), self._ref(K.OP, op), root, self._ref(K.COMM, comm)
            )

    def allreduce(self, sendbuf, recvbuf, count, datatype, op, comm) -> None:
        with self._guard:
            self.world.allreduce(
                self.rank, sendbuf, recvbuf, count, self._ref(K.DATATYPE, datatype), self._ref(K.OP, op), self._ref(K.COMM, comm)
            )

    def ialltoallw(self, sendbuf, sendcounts, sdispls, sendtypes, recvbuf, recvcounts, rdispls, recvtypes, comm) -> int:
        with self._guard:
            req = self.world.ialltoallw(
                self.rank,
                sendbuf,
                sendcounts,
                sdispls,
                _LazyTypes(self, sendtypes),
                recvbuf,
                recvcounts,
                rdispls,
                _LazyTypes(self, recvtypes),
                self._ref(K.COMM, comm),
            )
            return self._register(K.REQUEST, req)

    def error_string(self, code: int) -> str:
        name = self._err_names.get(code)
        if name is None:
            raise NativeError(self._code(Err.ARG), f"unknown error code {code}")
        return self.ERROR_TEXT.get(name, name)


_NULL_NAME = {
    K.OP: "MPI_OP_NULL",
    K.COMM: "MPI_COMM_NULL",
    K.GROUP: "MPI_GROUP_NULL",
    K.WIN: "MPI_WIN_NULL",
    K.FILE: "MPI_FILE_NULL",
    K.SESSION: "MPI_SESSION_NULL",
    K.MESSAGE: "MPI_MESSAGE_NULL",
    K.ERRHANDLER: "MPI_ERRHANDLER_NULL",
    K.REQUEST: "MPI_REQUEST_NULL",
    K.DATATYPE: "MPI_DATATYPE_NULL",
}

_KIND_ERR = {
    K.OP: Err.OP,
    K.COMM: Err.COMM,
    K.GROUP: Err.ARG,
    K.WIN: Err.ARG,
    K.FILE: Err.ARG,
    K.SESSION: Err.ARG,
    K.MESSAGE: Err.ARG,
    K.ERRHANDLER: Err.ARG,
    K.REQUEST: Err.REQUEST,
    K.DATATYPE: Err.TYPE,
}
