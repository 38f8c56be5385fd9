"""Standard-ABI front end that forwards to a backend with its own native ABI.

A :class:`Shim` is what an application linked against ``libmpi_abi`` talks
to.  Every call takes and returns standard-ABI values (the handle codes,
sentinels, error classes and 32-byte status of :mod:`abi_bridge.abi_model`)
and is forwarded to one backend instance after converting:

* handles, through per-kind tables indexed directly by the 10-bit code for
  predefined objects and a dynamic map for objects created at run time;
* sentinels (``MPI_ANY_SOURCE`` and friends), per argument role;
* statuses, between :class:`AbiStatus` and the backend's native layout;
* error codes, with success short-circuited before any table is touched;
* user reduction callbacks, through one fixed dispatcher that recovers the
  user function from a registry keyed by native op;
* ``ialltoallw`` datatype vectors, which must outlive the call and are kept
  in a :class:`RequestState` until the request completes.

One shim instance models one process; each simulated rank builds its own.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass, field
from typing import Any, Callable, MutableSequence, Optional, Sequence

from .abi_model.constants import ERROR_CLASSES, SHIPPED, error_class_name
from .abi_model.handles import PREDEFINED_LIMIT, HandleKind, null_handle_of
from .abi_model.status import AbiStatus
from .backend_api import Backend, BackendApi, NativeError, StatusFields, backend_registry_get, default_backend_name

__all__ = [
    "LIBRARY_NAME",
    "LIBRARY_VERSION",
    "MPIError",
    "InvalidHandleError",
    "RequestState",
    "LeakReport",
    "Shim",
    "library_identity",
    "EARLY_VECTOR_FREE",
]

K = HandleKind

LIBRARY_NAME = "libmpi_abi"
LIBRARY_VERSION = "0.1.0"

EARLY_VECTOR_FREE = "early_vector_free"

MPI_SUCCESS = ERROR_CLASSES["MPI_SUCCESS"]
MPI_ERR_OTHER = ERROR_CLASSES["MPI_ERR_OTHER"]
MPI_ERR_ARG = ERROR_CLASSES["MPI_ERR_ARG"]
MPI_ERR_RANK = ERROR_CLASSES["MPI_ERR_RANK"]
MPI_ERR_TAG = ERROR_CLASSES["MPI_ERR_TAG"]
MPI_ERR_ROOT = ERROR_CLASSES["MPI_ERR_ROOT"]
MPIX_ERR_NOT_INITIALIZED = ERROR_CLASSES["MPIX_ERR_NOT_INITIALIZED"]

_KIND_ERROR = {
    K.OP: "MPI_ERR_OP",
    K.COMM: "MPI_ERR_COMM",
    K.GROUP: "MPI_ERR_GROUP",
    K.WIN: "MPI_ERR_WIN",
    K.FILE: "MPI_ERR_FILE",
    K.SESSION: "MPI_ERR_SESSION",
    K.MESSAGE: "MPI_ERR_ARG",
    K.ERRHANDLER: "MPI_ERR_ARG",
    K.REQUEST: "MPI_ERR_REQUEST",
    K.DATATYPE: "MPI_ERR_TYPE",
}

_SENTINELS = SHIPPED.family("sentinel")
_SENTINEL_NAMES = {v: k for k, v in _SENTINELS.items()}
STD_ANY_SOURCE = _SENTINELS["MPI_ANY_SOURCE"]
STD_ANY_TAG = _SENTINELS["MPI_ANY_TAG"]
STD_PROC_NULL = _SENTINELS["MPI_PROC_NULL"]
STD_UNDEFINED = _SENTINELS["MPI_UNDEFINED"]

_REQUEST_NULL = null_handle_of(K.REQUEST)


def library_identity() -> str:
    return f"{LIBRARY_NAME} {LIBRARY_VERSION}"


class MPIError(Exception):
    """A call failed; ``error_class`` is a standard error class."""

    def __init__(self, error_class: int, message: str = "", *, status: Optional[AbiStatus] = None, statuses=None) -> None:
        self.error_class = error_class
        self.status = status
        self.statuses = statuses
        super().__init__(f"{error_class_name(error_class)}: {message}" if message else error_class_name(error_class))


class InvalidHandleError(MPIError):
    def __init__(self, kind: HandleKind, value: int, why: str = "not a known handle") -> None:
        self.kind = kind
        self.value = value
        super().__init__(ERROR_CLASSES[_KIND_ERROR[kind]], f"invalid {kind} handle {value:#x}: {why}")


@dataclass
class RequestState:
    """Shim-side state that must live exactly as long as one request."""

    operation: str
    native_vectors: list[list[int]] = field(default_factory=list)
    contexts: tuple = ()

    def release(self, null_type: int) -> None:
        # models freeing the converted arrays: a reader after this sees only nulls
        for vec in self.native_vectors:
            vec[:] = [null_type] * len(vec)
        self.native_vectors = []


@dataclass(frozen=True)
class LeakReport:
    user_handles: dict
    request_states: int

    @property
    def clean(self) -> bool:
        return not self.user_handles and self.request_states == 0

    def __str__(self) -> str:
        if self.clean:
            return "no leaked handles or request state"
        parts = [f"{n} {kind}" for kind, n in sorted(self.user_handles.items(), key=lambda kv: kv[0].value)]
        if self.request_states:
            parts.append(f"{self.request_states} request states")
        return "leaked: " + ", ".join(parts)


# ----------------------------------------------------------------------
# op trampoline

# The backend stores one function for every user op, so the dispatcher
# learns which op is being applied from the calling thread: the reduction
# fold runs in the thread that entered the shim's reduce/allreduce.
_active = threading.local()


def _op_dispatcher(invec: memoryview, inoutvec: memoryview, count: int, native_datatype: int) -> None:
    shim, native_op = _active.context
    callback = shim._op_registry[native_op]
    std_datatype = shim.convert_native_to_std(K.DATATYPE, native_datatype)
    if shim.audit is not None:
        shim.audit.append((K.DATATYPE, std_datatype))
    callback(invec, inoutvec, count, std_datatype)


class _ReductionContext:
    __slots__ = ("_entry", "_saved")

    def __init__(self, shim: Shim, native_op: int) -> None:
        self._entry = (shim, native_op)

    def __enter__(self) -> None:
        self._saved = getattr(_active, "context", None)
        _active.context = self._entry

    def __exit__(self, *exc) -> None:
        _active.context = self._saved


# ----------------------------------------------------------------------
# shim


_NEW, _LIVE, _DONE = "new", "live", "finalized"


class Shim:
    """Standard-ABI MPI for one simulated process.

    ``backend`` is a registered backend name or a :class:`Backend`; the
    default comes from ``$ABI_BRIDGE_BACKEND``.  With ``audit=True`` every
    handle handed to user code is recorded in :attr:`audit`.  ``fault``
    enables deliberate misbehaviour for tests (``EARLY_VECTOR_FREE``).
    """

    def __init__(self, backend: str | Backend | None = None, *, audit: bool = False, fault: Optional[str] = None) -> None:
        if not isinstance(backend, Backend):
            backend = backend_registry_get(default_backend_name(backend))
        self.backend = backend
        self.descriptor = backend.descriptor
        self.audit: Optional[list[tuple[HandleKind, int]]] = [] if audit else None
        self.fault = fault
        self.state_lookups = 0
        self._state = _NEW
        self._api: Optional[BackendApi] = None
        self._lock = threading.Lock()

        d = self.descriptor
        # std -> native, indexed by the 10-bit code; None marks "no such constant"
        self._s2n: dict[HandleKind, list[Optional[int]]] = {}
        self._n2s: dict[HandleKind, dict[int, int]] = {}
        for kind in HandleKind:
            table: list[Optional[int]] = [None] * PREDEFINED_LIMIT
            for std, native in d.predefined_map.get(kind, {}).items():
                table[std] = native
            self._s2n[kind] = table
            self._n2s[kind] = {n: s for s, n in d.predefined_map.get(kind, {}).items()}
        self._dt_s2n = self._s2n[K.DATATYPE]
        self._native_null = {kind: self._s2n[kind][null_handle_of(kind)] for kind in HandleKind}

        self._u2n: dict[HandleKind, dict[int, int]] = {k: {} for k in HandleKind}
        self._n2u: dict[HandleKind, dict[int, int]] = {k: {} for k in HandleKind}
        self._wrap_next = 1 << 30
        self._requests: dict[int, RequestState] = {}
        self._op_registry: dict[int, Callable] = {}

        c = d.constant_map
        self._in_source = {STD_ANY_SOURCE: c["MPI_ANY_SOURCE"], STD_PROC_NULL: c["MPI_PROC_NULL"]}
        self._in_dest = {STD_PROC_NULL: c["MPI_PROC_NULL"]}
        self._in_tag = {STD_ANY_TAG: c["MPI_ANY_TAG"]}
        self._out_source = {v: k for k, v in self._in_source.items()}
        self._out_tag = {v: k for k, v in self._in_tag.items()}
        self._native_undefined = c["MPI_UNDEFINED"]
        self._err_in = d.error_to_std()
        self._err_out = d.error_map
        self._native_other = d.error_map[MPI_ERR_OTHER]

    # ------------------------------------------------------------------
    # lifecycle

    def init(self, world, rank: int) -> None:
        if self._state is not _NEW:
            raise MPIError(MPI_ERR_OTHER, f"init called on a {self._state} shim")
        api = self.backend.open()
        try:
            api.init(world, rank)
        except NativeError as exc:
            raise self._error(exc) from None
        self._api = api
        self._state = _LIVE

    def finalize(self) -> LeakReport:
        """Shut down; returns what was still alive, then drops all of it."""
        self._live()
        report = self.leak_report()
        try:
            self._api.finalize()
        except NativeError as exc:
            raise self._error(exc) from None
        finally:
            self._state = _DONE
            for kind in HandleKind:
                self._u2n[kind].clear()
                self._n2u[kind].clear()
            for st in self._requests.values():
                st.release(self._native_null[K.DATATYPE])
            self._requests.clear()
            self._op_registry.clear()
        return report

    @property
    def initialized(self) -> bool:
        return self._state is _LIVE

    @property
    def api(self) -> BackendApi:
        """The backend instance behind this shim (for inspection only)."""
        return self._api

    def leak_report(self) -> LeakReport:
        with self._lock:
            handles = {kind: len(m) for kind, m in self._u2n.items() if m}
            return LeakReport(handles, len(self._requests))

    def dynamic_handle_count(self) -> int:
        return sum(len(m) for m in self._u2n.values())

    def request_state_count(self) -> int:
        return len(self._requests)

    def _live(self) -> None:
        if self._state is not _LIVE:
            raise MPIError(MPIX_ERR_NOT_INITIALIZED, "not initialized" if self._state is _NEW else "already finalized")

    # ------------------------------------------------------------------
    # handle conversion

    def convert_std_to_native(self, kind: HandleKind, std: int) -> int:
        if 0 <= std < PREDEFINED_LIMIT:
            native = self._s2n[kind][std]
            if native is None:
                raise InvalidHandleError(kind, std, "uninitialized" if std == 0 else "no such predefined constant")
            return native
        native = self._u2n[kind].get(std)
        if native is None:
            raise InvalidHandleError(kind, std)
        return native

    def convert_native_to_std(self, kind: HandleKind, native: int) -> int:
        std = self._n2s[kind].get(native)
        if std is None:
            std = self._n2u[kind].get(native)
            if std is None:
                raise InvalidHandleError(kind, native, f"native handle unknown to the {self.descriptor.name} conversion maps")
        return std

    def _adopt(self, kind: HandleKind, native: int) -> int:
        """Enter a freshly created native object into the dynamic map."""
        with self._lock:
            u2n = self._u2n[kind]
            if native >= PREDEFINED_LIMIT and native not in u2n:
                std = native  # pass-through: the common case
            else:
                while self._wrap_next in u2n:
                    self._wrap_next += 1
                std = self._wrap_next
                self._wrap_next += 1
            u2n[std] = native
            self._n2u[kind][native] = std
        if self.audit is not None:
            self.audit.append((kind, std))
        return std

    def _forget(self, kind: HandleKind, std: int) -> None:
        with self._lock:
            native = self._u2n[kind].pop(std)
            del self._n2u[kind][native]

    def _null_out(self, kind: HandleKind) -> int:
        std = null_handle_of(kind)
        if self.audit is not None:
            self.audit.append((kind, std))
        return std

    # ------------------------------------------------------------------
    # sentinels, error codes, statuses

    @staticmethod
    def _sentinel_in(value: int, role: dict, what: str, error_name: str) -> int:
        if value >= 0:
            return value
        native = role.get(value)
        if native is not None:
            return native
        name = _SENTINEL_NAMES.get(value)
        detail = f"{name} ({value}) is not valid as {what}" if name else f"{value} is not a valid {what}"
        raise MPIError(ERROR_CLASSES[error_name], detail)

    def convert_return_code(self, native: int) -> int:
        if native == 0:
            return 0
        return self._err_in.get(native, MPI_ERR_OTHER)

    def _error(self, exc: NativeError) -> MPIError:
        status = self.status_from_native(exc.status) if exc.status is not None else None
        statuses = [self.status_from_native(s) for s in exc.statuses] if exc.statuses is not None else None
        return MPIError(self.convert_return_code(exc.code), str(exc), status=status, statuses=statuses)

    def status_from_native(self, raw: bytes) -> AbiStatus:
        f = self.descriptor.status_layout.unpack(raw)
        source = self._out_source.get(f.source, f.source)
        tag = self._out_tag.get(f.tag, f.tag)
        return AbiStatus.make(source, tag, self.convert_return_code(f.error), f.count, f.cancelled)

    def status_to_native(self, status: AbiStatus) -> bytes:
        source = self._in_source.get(status.source, status.source)
        tag = self._in_tag.get(status.tag, status.tag)
        error = 0 if status.error == 0 else self._err_out.get(status.error, self._native_other)
        fields = StatusFields(source, tag, error, status.count, status.cancelled)
        return self.descriptor.status_layout.pack(fields)

    def error_string(self, error_class: int) -> str:
        self._live()
        native = self._err_out.get(error_class)
        if native is None:
            raise MPIError(MPI_ERR_ARG, f"unknown error class {error_class}")
        try:
            return self._api.error_string(native)
        except NativeError as exc:
            raise self._error(exc) from None

    # ------------------------------------------------------------------
    # communicators

    def comm_size(self, comm: int) -> int:
        self._live()
        native = self.convert_std_to_native(K.COMM, comm)
        try:
            return self._api.comm_size(native)
        except NativeError as exc:
            raise self._error(exc) from None

    def comm_rank(self, comm: int) -> int:
        self._live()
        native = self.convert_std_to_native(K.COMM, comm)
        try:
            return self._api.comm_rank(native)
        except NativeError as exc:
            raise self._error(exc) from None

    def comm_dup(self, comm: int) -> int:
        self._live()
        native = self.convert_std_to_native(K.COMM, comm)
        try:
            new = self._api.comm_dup(native)
        except NativeError as exc:
            raise self._error(exc) from None
        return self._adopt(K.COMM, new)

    def comm_free(self, comm: int) -> int:
        self._live()
        native = self.convert_std_to_native(K.COMM, comm)
        try:
            self._api.comm_free(native)
        except NativeError as exc:
            raise self._error(exc) from None
        self._forget(K.COMM, comm)
        return self._null_out(K.COMM)

    # ------------------------------------------------------------------
    # point to point

    def send(self, buf, count: int, datatype: int, dest: int, tag: int, comm: int) -> None:
        self._live()
        args = self._p2p_out(datatype, dest, tag, comm)
        try:
            self._api.send(buf, count, *args)
        except NativeError as exc:
            raise self._error(exc) from None

    def isend(self, buf, count: int, datatype: int, dest: int, tag: int, comm: int) -> int:
        self._live()
        args = self._p2p_out(datatype, dest, tag, comm)
        try:
            req = self._api.isend(buf, count, *args)
        except NativeError as exc:
            raise self._error(exc) from None
        return self._adopt(K.REQUEST, req)

    def recv(self, buf, count: int, datatype: int, source: int, tag: int, comm: int) -> AbiStatus:
        self._live()
        args = self._p2p_in(datatype, source, tag, comm)
        try:
            raw = self._api.recv(buf, count, *args)
        except NativeError as exc:
            raise self._error(exc) from None
        return self.status_from_native(raw)

    def irecv(self, buf, count: int, datatype: int, source: int, tag: int, comm: int) -> int:
        self._live()
        args = self._p2p_in(datatype, source, tag, comm)
        try:
            req = self._api.irecv(buf, count, *args)
        except NativeError as exc:
            raise self._error(exc) from None
        return self._adopt(K.REQUEST, req)

    def _p2p_out(self, datatype, dest, tag, comm):
        return (
            self.convert_std_to_native(K.DATATYPE, datatype),
            self._sentinel_in(dest, self._in_dest, "a destination rank", "MPI_ERR_RANK"),
            self._sentinel_in(tag, {}, "a send tag", "MPI_ERR_TAG"),
            self.convert_std_to_native(K.COMM, comm),
        )

    def _p2p_in(self, datatype, source, tag, comm):
        return (
            self.convert_std_to_native(K.DATATYPE, datatype),
            self._sentinel_in(source, self._in_source, "a source rank", "MPI_ERR_RANK"),
            self._sentinel_in(tag, self._in_tag, "a receive tag", "MPI_ERR_TAG"),
            self.convert_std_to_native(K.COMM, comm),
        )

    # ------------------------------------------------------------------
    # completion

    def _request_state(self, request: int) -> Optional[RequestState]:
        self.state_lookups += 1
        return self._requests.get(request)

    def _retire(self, request: int) -> None:
        """The backend has completed and released ``request``."""
        if request == _REQUEST_NULL:
            return
        state = self._requests.pop(request, None)
        if state is not None:
            state.release(self._native_null[K.DATATYPE])
        self._forget(K.REQUEST, request)

    def wait(self, request: int) -> AbiStatus:
        self._live()
        native = self.convert_std_to_native(K.REQUEST, request)
        try:
            raw = self._api.wait(native)
        except NativeError as exc:
            if exc.status is not None:
                self._retire(request)
            raise self._error(exc) from None
        self._retire(request)
        return self.status_from_native(raw)

    def test(self, request: int) -> tuple[bool, Optional[AbiStatus]]:
        self._live()
        native = self.convert_std_to_native(K.REQUEST, request)
        try:
            flag, raw = self._api.test(native)
        except NativeError as exc:
            if exc.status is not None:
                self._retire(request)
            raise self._error(exc) from None
        if not flag:
            return False, None
        self._retire(request)
        return True, self.status_from_native(raw)

    def waitall(self, requests: MutableSequence[int]) -> list[AbiStatus]:
        """Complete every request; entries of ``requests`` become ``MPI_REQUEST_NULL``."""
        self._live()
        natives = [self.convert_std_to_native(K.REQUEST, r) for r in requests]
        try:
            raws = self._api.waitall(natives)
        except NativeError as exc:
            if exc.statuses is not None:
                self._retire_all(requests)
            raise self._error(exc) from None
        self._retire_all(requests)
        return [self.status_from_native(r) for r in raws]

    def testall(self, requests: MutableSequence[int]) -> tuple[bool, Optional[list[AbiStatus]]]:
        """All-or-nothing test.

        Every request is looked up in the request-state map on each call,
        whether or not it carries state; no index over stateful requests is
        kept, so the cost is linear in ``len(requests)``.
        """
        self._live()
        natives = []
        for r in requests:
            natives.append(self.convert_std_to_native(K.REQUEST, r))
            self._request_state(r)
        try:
            flag, raws = self._api.testall(natives)
        except NativeError as exc:
            if exc.statuses is not None:
                self._retire_all(requests)
            raise self._error(exc) from None
        if not flag:
            return False, None
        self._retire_all(requests)
        return True, [self.status_from_native(r) for r in raws]

    def _retire_all(self, requests: MutableSequence[int]) -> None:
        for i, r in enumerate(requests):
            self._retire(r)
            requests[i] = self._null_out(K.REQUEST)

    def get_count(self, status: AbiStatus, datatype: int) -> int:
        self._live()
        native = self.convert_std_to_native(K.DATATYPE, datatype)
        try:
            n = self._api.get_count(self.status_to_native(status), native)
        except NativeError as exc:
            raise self._error(exc) from None
        return STD_UNDEFINED if n == self._native_undefined else n

    # ------------------------------------------------------------------
    # datatypes

    def type_size(self, datatype: int) -> int:
        if self._state is not _LIVE:
            self._live()
        if 0 < datatype < PREDEFINED_LIMIT:
            native = self._dt_s2n[datatype]
            if native is None:
                raise InvalidHandleError(K.DATATYPE, datatype, "no such predefined constant")
        else:
            native = self.convert_std_to_native(K.DATATYPE, datatype)
        try:
            return self._api.type_size(native)
        except NativeError as exc:
            raise self._error(exc) from None

    def type_contiguous(self, count: int, oldtype: int) -> int:
        self._live()
        native = self.convert_std_to_native(K.DATATYPE, oldtype)
        try:
            new = self._api.type_contiguous(count, native)
        except NativeError as exc:
            raise self._error(exc) from None
        return self._adopt(K.DATATYPE, new)

    def type_commit(self, datatype: int) -> None:
        self._live()
        native = self.convert_std_to_native(K.DATATYPE, datatype)
        try:
            self._api.type_commit(native)
        except NativeError as exc:
            raise self._error(exc) from None

    def type_free(self, datatype: int) -> int:
        self._live()
        native = self.convert_std_to_native(K.DATATYPE, datatype)
        try:
            self._api.type_free(native)
        except NativeError as exc:
            raise self._error(exc) from None
        self._forget(K.DATATYPE, datatype)
        return self._null_out(K.DATATYPE)

    # ------------------------------------------------------------------
    # reductions

    def op_create(self, callback: Callable[[memoryview, memoryview, int, int], Any], commute: bool = True) -> int:
        """Register a user reduction.

        ``callback(invec, inoutvec, count, datatype)`` receives the standard
        datatype handle, never the backend's.
        """
        self._live()
        if callback is None:
            raise MPIError(MPI_ERR_ARG, "null user function")
        try:
            native = self._api.op_create(_op_dispatcher, commute)
        except NativeError as exc:
            raise self._error(exc) from None
        self._op_registry[native] = callback
        return self._adopt(K.OP, native)

    register_user_op = op_create

    def op_free(self, op: int) -> int:
        self._live()
        native = self.convert_std_to_native(K.OP, op)
        try:
            self._api.op_free(native)
        except NativeError as exc:
            raise self._error(exc) from None
        self._op_registry.pop(native, None)
        self._forget(K.OP, op)
        return self._null_out(K.OP)

    def reduce(self, sendbuf, recvbuf, count: int, datatype: int, op: int, root: int, comm: int) -> None:
        self._live()
        dt = self.convert_std_to_native(K.DATATYPE, datatype)
        native_op = self.convert_std_to_native(K.OP, op)
        root = self._sentinel_in(root, {}, "a root rank", "MPI_ERR_ROOT")
        native_comm = self.convert_std_to_native(K.COMM, comm)
        try:
            with _ReductionContext(self, native_op):
                self._api.reduce(sendbuf, recvbuf, count, dt, native_op, root, native_comm)
        except NativeError as exc:
            raise self._error(exc) from None

    def allreduce(self, sendbuf, recvbuf, count: int, datatype: int, op: int, comm: int) -> None:
        self._live()
        dt = self.convert_std_to_native(K.DATATYPE, datatype)
        native_op = self.convert_std_to_native(K.OP, op)
        native_comm = self.convert_std_to_native(K.COMM, comm)
        try:
            with _ReductionContext(self, native_op):
                self._api.allreduce(sendbuf, recvbuf, count, dt, native_op, native_comm)
        except NativeError as exc:
            raise self._error(exc) from None

    # ------------------------------------------------------------------
    # alltoallw

    def ialltoallw(
        self,
        sendbuf,
        sendcounts: Sequence[int],
        sdispls: Sequence[int],
        sendtypes: Sequence[int],
        recvbuf,
        recvcounts: Sequence[int],
        rdispls: Sequence[int],
        recvtypes: Sequence[int],
        comm: int,
    ) -> int:
        """Nonblocking alltoallw with byte displacements.

        The converted datatype vectors are read by the backend whenever the
        exchange actually runs, so they are parked in a
        :class:`RequestState` and released when the request completes.
        """
        self._live()
        native_comm = self.convert_std_to_native(K.COMM, comm)
        to_native = self.convert_std_to_native
        send_native = [to_native(K.DATATYPE, t) for t in sendtypes]
        recv_native = [to_native(K.DATATYPE, t) for t in recvtypes]
        state = RequestState("ialltoallw", [send_native, recv_native])
        try:
            req = self._api.ialltoallw(
                sendbuf, sendcounts, sdispls, send_native, recvbuf, recvcounts, rdispls, recv_native, native_comm
            )
        except NativeError as exc:
            raise self._error(exc) from None
        std = self._adopt(K.REQUEST, req)
        if self.fault == EARLY_VECTOR_FREE:
            state.release(self._native_null[K.DATATYPE])
        else:
            self._requests[std] = state
        return std
