"""What every backend provides, and how the shim learns to talk to it.

A backend is a stand-in MPI implementation with its own native ABI: its own
handle values, status layout, sentinel constants and error codes.  The
:class:`BackendDescriptor` carries the tables a translation layer needs,
the :class:`BackendApi` subclass carries the operations.  One API instance
models one loaded library in one process, so each simulated rank opens its
own.
"""

from __future__ import annotations

import abc
import ctypes
import importlib
import os
import threading
from dataclasses import dataclass, field
from types import MappingProxyType
from typing import Callable, Mapping, Optional, Sequence

from .abi_model.constants import ERROR_CLASSES
from .abi_model.handles import HandleKind, lookup_predefined

__all__ = [
    "BACKEND_ENV",
    "NativeError",
    "StatusFields",
    "NativeStatusLayout",
    "IntStyleStatus",
    "TokenStyleStatus",
    "INT_STYLE",
    "TOKEN_STYLE",
    "BackendDescriptor",
    "BackendApi",
    "Backend",
    "backend_registry_get",
    "backend_names",
    "default_backend_name",
]

BACKEND_ENV = "ABI_BRIDGE_BACKEND"

NativeHandle = int


class NativeError(Exception):
    """A backend call failed; ``code`` is in the backend's own numbering."""

    def __init__(self, code: int, message: str = "", *, status: Optional[bytes] = None, statuses=None) -> None:
        super().__init__(message or f"native error {code}")
        self.code = code
        self.status = status
        self.statuses = statuses


@dataclass(frozen=True)
class StatusFields:
    """Status contents in some backend's numbering (sentinels and error codes)."""

    source: int
    tag: int
    error: int
    count: int
    cancelled: bool = False


# ----------------------------------------------------------------------
# native status layouts


class IntStyleStatus(ctypes.Structure):
    _fields_ = [
        ("count_lo", ctypes.c_int32),
        ("count_hi_and_cancelled", ctypes.c_int32),
        ("MPI_SOURCE", ctypes.c_int32),
        ("MPI_TAG", ctypes.c_int32),
        ("MPI_ERROR", ctypes.c_int32),
    ]


class TokenStyleStatus(ctypes.Structure):
    _fields_ = [
        ("MPI_SOURCE", ctypes.c_int32),
        ("MPI_TAG", ctypes.c_int32),
        ("MPI_ERROR", ctypes.c_int32),
        ("_cancelled", ctypes.c_int32),
        ("_ucount", ctypes.c_size_t),
    ]


class NativeStatusLayout(abc.ABC):
    name: str
    struct: type

    @property
    def size(self) -> int:
        return ctypes.sizeof(self.struct)

    def slots(self) -> list[tuple[str, int, int]]:
        """(field, byte offset, byte width) in declaration order."""
        return [
            (name, getattr(self.struct, name).offset, getattr(self.struct, name).size)
            for name, _ in self.struct._fields_
        ]

    @abc.abstractmethod
    def pack(self, fields: StatusFields) -> bytes: ...

    @abc.abstractmethod
    def unpack(self, raw: bytes) -> StatusFields: ...


def _u32(v: int) -> int:
    return v & 0xFFFFFFFF


def _s32(v: int) -> int:
    v &= 0xFFFFFFFF
    return v - (1 << 32) if v & 0x80000000 else v


class _IntStyle(NativeStatusLayout):
    """count_lo, count_hi_and_cancelled, SOURCE, TAG, ERROR (20 bytes).

    The cancelled flag is bit 0 of the second slot and the upper count bits
    sit above it, so a 63-bit count fits in the two slots.
    """

    name = "IntStyle"
    struct = IntStyleStatus

    def pack(self, f: StatusFields) -> bytes:
        if not 0 <= f.count < 1 << 63:
            raise OverflowError(f"count {f.count} does not fit in 63 bits")
        st = IntStyleStatus()
        st.count_lo = _s32(f.count)
        st.count_hi_and_cancelled = _s32(((f.count >> 32) << 1) | int(bool(f.cancelled)))
        st.MPI_SOURCE, st.MPI_TAG, st.MPI_ERROR = f.source, f.tag, f.error
        return bytes(st)

    def unpack(self, raw: bytes) -> StatusFields:
        st = IntStyleStatus.from_buffer_copy(raw)
        hi = _u32(st.count_hi_and_cancelled)
        count = _u32(st.count_lo) | ((hi >> 1) << 32)
        return StatusFields(st.MPI_SOURCE, st.MPI_TAG, st.MPI_ERROR, count, bool(hi & 1))


class _TokenStyle(NativeStatusLayout):
    """SOURCE, TAG, ERROR, _cancelled, then a word-sized unsigned count."""

    name = "TokenStyle"
    struct = TokenStyleStatus

    def pack(self, f: StatusFields) -> bytes:
        if not 0 <= f.count < 1 << 63:
            raise OverflowError(f"count {f.count} does not fit in 63 bits")
        st = TokenStyleStatus(f.source, f.tag, f.error, int(bool(f.cancelled)), f.count)
        return bytes(st)

    def unpack(self, raw: bytes) -> StatusFields:
        st = TokenStyleStatus.from_buffer_copy(raw)
        return StatusFields(st.MPI_SOURCE, st.MPI_TAG, st.MPI_ERROR, st._ucount, bool(st._cancelled))


INT_STYLE = _IntStyle()
TOKEN_STYLE = _TokenStyle()


# ----------------------------------------------------------------------
# descriptor


def _bimap_inverse(m: Mapping[int, int]) -> Mapping[int, int]:
    inv = {v: k for k, v in m.items()}
    if len(inv) != len(m):
        raise ValueError("mapping is not injective")
    return MappingProxyType(inv)


@dataclass(frozen=True)
class BackendDescriptor:
    """Conversion tables for one backend.

    ``predefined_map`` maps, per kind, standard handle value to native
    handle value for every constant both sides define.  ``error_map`` maps
    standard error classes to native codes.  ``constant_map`` gives the
    native value of each standard sentinel by name.
    """

    name: str
    status_layout: NativeStatusLayout
    predefined_map: Mapping[HandleKind, Mapping[int, int]]
    error_map: Mapping[int, int]
    constant_map: Mapping[str, int]
    native_names: Mapping[HandleKind, Mapping[int, str]] = field(default_factory=dict)

    def __post_init__(self) -> None:
        inverse = {kind: _bimap_inverse(m) for kind, m in self.predefined_map.items()}
        object.__setattr__(self, "_inverse", MappingProxyType(inverse))
        object.__setattr__(self, "_error_inverse", _bimap_inverse(self.error_map))
        if self.error_map.get(0) != 0:
            raise ValueError("error_map must map success to success")

    def std_to_impl(self, kind: HandleKind, std: int) -> int:
        return self.predefined_map[kind][std]

    def impl_to_std(self, kind: HandleKind, native: int) -> int:
        return self._inverse[kind][native]

    def error_to_std(self) -> Mapping[int, int]:
        return self._error_inverse

    @classmethod
    def build(
        cls,
        name: str,
        layout: NativeStatusLayout,
        native_handles: Mapping[HandleKind, Mapping[str, int]],
        native_errors: Mapping[str, int],
        native_constants: Mapping[str, int],
    ) -> BackendDescriptor:
        """Join a backend's named constants against the standard tables by name."""
        pmap = {}
        for kind, names in native_handles.items():
            pmap[kind] = MappingProxyType(
                {lookup_predefined(n): v for n, v in names.items() if _has_std(n)}
            )
        emap = {ERROR_CLASSES[n]: v for n, v in native_errors.items()}
        nnames = {kind: MappingProxyType({v: n for n, v in names.items()}) for kind, names in native_handles.items()}
        return cls(
            name,
            layout,
            MappingProxyType(pmap),
            MappingProxyType(emap),
            MappingProxyType(dict(native_constants)),
            MappingProxyType(nnames),
        )


def _has_std(name: str) -> bool:
    try:
        lookup_predefined(name)
    except KeyError:
        return False
    return True


# ----------------------------------------------------------------------
# operation set


class BackendApi(abc.ABC):
    """Native-ABI operation set.

    Handles, sentinels and error codes are all in the backend's own
    numbering.  Status outputs are raw bytes in the backend's status layout.
    Failures raise :class:`NativeError`.
    """

    descriptor: BackendDescriptor

    @abc.abstractmethod
    def init(self, world, rank: int) -> None: ...

    @abc.abstractmethod
    def finalize(self) -> None: ...

    @abc.abstractmethod
    def comm_size(self, comm: NativeHandle) -> int: ...

    @abc.abstractmethod
    def comm_rank(self, comm: NativeHandle) -> int: ...

    @abc.abstractmethod
    def comm_dup(self, comm: NativeHandle) -> NativeHandle: ...

    @abc.abstractmethod
    def comm_free(self, comm: NativeHandle) -> NativeHandle: ...

    @abc.abstractmethod
    def send(self, buf, count: int, datatype: NativeHandle, dest: int, tag: int, comm: NativeHandle) -> None: ...

    @abc.abstractmethod
    def recv(self, buf, count: int, datatype: NativeHandle, source: int, tag: int, comm: NativeHandle) -> bytes: ...

    @abc.abstractmethod
    def isend(self, buf, count: int, datatype: NativeHandle, dest: int, tag: int, comm: NativeHandle) -> NativeHandle: ...

    @abc.abstractmethod
    def irecv(self, buf, count: int, datatype: NativeHandle, source: int, tag: int, comm: NativeHandle) -> NativeHandle: ...

    @abc.abstractmethod
    def wait(self, request: NativeHandle) -> bytes: ...

    @abc.abstractmethod
    def test(self, request: NativeHandle) -> tuple[bool, Optional[bytes]]: ...

    @abc.abstractmethod
    def waitall(self, requests: Sequence[NativeHandle]) -> list[bytes]: ...

    @abc.abstractmethod
    def testall(self, requests: Sequence[NativeHandle]) -> tuple[bool, Optional[list[bytes]]]: ...

    @abc.abstractmethod
    def get_count(self, status: bytes, datatype: NativeHandle) -> int: ...

    @abc.abstractmethod
    def type_size(self, datatype: NativeHandle) -> int: ...

    @abc.abstractmethod
    def type_contiguous(self, count: int, oldtype: NativeHandle) -> NativeHandle: ...

    @abc.abstractmethod
    def type_commit(self, datatype: NativeHandle) -> None: ...

    @abc.abstractmethod
    def type_free(self, datatype: NativeHandle) -> NativeHandle: ...

    @abc.abstractmethod
    def op_create(self, fn: Callable[[memoryview, memoryview, int, NativeHandle], None], commute: bool) -> NativeHandle: ...

    @abc.abstractmethod
    def op_free(self, op: NativeHandle) -> NativeHandle: ...

    @abc.abstractmethod
    def reduce(self, sendbuf, recvbuf, count: int, datatype: NativeHandle, op: NativeHandle, root: int, comm: NativeHandle) -> None: ...

    @abc.abstractmethod
    def allreduce(self, sendbuf, recvbuf, count: int, datatype: NativeHandle, op: NativeHandle, comm: NativeHandle) -> None: ...

    @abc.abstractmethod
    def ialltoallw(
        self,
        sendbuf,
        sendcounts: Sequence[int],
        sdispls: Sequence[int],
        sendtypes: Sequence[NativeHandle],
        recvbuf,
        recvcounts: Sequence[int],
        rdispls: Sequence[int],
        recvtypes: Sequence[NativeHandle],
        comm: NativeHandle,
    ) -> NativeHandle: ...

    @abc.abstractmethod
    def error_string(self, code: int) -> str: ...

    @abc.abstractmethod
    def is_live(self, kind: HandleKind, native: NativeHandle) -> bool:
        """Whether ``native`` is a handle this instance currently recognises."""

    @abc.abstractmethod
    def live_user_handles(self) -> dict[HandleKind, set[NativeHandle]]: ...


# ----------------------------------------------------------------------
# registry


@dataclass(frozen=True, eq=False)
class Backend:
    """A registered backend: its descriptor plus a factory for API instances."""

    name: str
    descriptor: BackendDescriptor
    api: type

    def open(self) -> BackendApi:
        return self.api()


_MODULES = {"int": "abi_bridge.backend_int", "token": "abi_bridge.backend_token"}
_LOADED: dict[str, Backend] = {}
_LOCK = threading.Lock()


def backend_names() -> tuple[str, ...]:
    return tuple(_MODULES)


def backend_registry_get(name: str) -> Backend:
    """Look a backend up by name, loading it on first use."""
    with _LOCK:
        backend = _LOADED.get(name)
        if backend is None:
            module = _MODULES.get(name)
            if module is None:
                raise KeyError(f"unknown backend {name!r}; choose from {', '.join(_MODULES)}")
            api = importlib.import_module(module).BACKEND_CLASS
            backend = _LOADED[name] = Backend(name, api.descriptor, api)
        return backend


def default_backend_name(explicit: Optional[str] = None) -> str:
    """Explicit choice, else ``$ABI_BRIDGE_BACKEND``, else ``"int"``."""
    return explicit or os.environ.get(BACKEND_ENV) or "int"
