"""Backend with Open-MPI-style opaque handles.

Handles are word-sized tokens that name descriptor records in a
:class:`TokenTable`; they carry no information themselves.  ``type_size``
therefore reads the size field of the datatype record.  Predefined objects
get their tokens when the module is loaded (the analogue of link-time
addresses of global structs), user objects are appended after them.
"""

from __future__ import annotations

import threading
from typing import Optional

from ._simbackend import Entry, SimBackend
from .abi_model.handles import PREDEFINED_LIMIT
from .abi_model.handles import HandleKind as K
from .backend_api import TOKEN_STYLE, BackendDescriptor

__all__ = ["TokenBackend", "TokenTable", "TOKEN_BASE", "TOKEN_STRIDE", "NATIVE_HANDLES", "token_status_pack", "token_status_unpack"]

TOKEN_BASE = 0x55D3_A1C0_0000
TOKEN_STRIDE = 352  # sizeof the record a token points at

_PREDEFINED_NAMES = {
    K.COMM: ["MPI_COMM_WORLD", "MPI_COMM_SELF", "MPI_COMM_NULL"],
    K.GROUP: ["MPI_GROUP_NULL", "MPI_GROUP_EMPTY"],
    K.WIN: ["MPI_WIN_NULL"],
    K.FILE: ["MPI_FILE_NULL"],
    K.SESSION: ["MPI_SESSION_NULL"],
    K.MESSAGE: ["MPI_MESSAGE_NULL", "MPI_MESSAGE_NO_PROC"],
    K.ERRHANDLER: ["MPI_ERRHANDLER_NULL", "MPI_ERRORS_ARE_FATAL", "MPI_ERRORS_RETURN", "MPI_ERRORS_ABORT"],
    K.REQUEST: ["MPI_REQUEST_NULL"],
    K.OP: [
        "MPI_OP_NULL",
        "MPI_MAX",
        "MPI_MIN",
        "MPI_SUM",
        "MPI_PROD",
        "MPI_LAND",
        "MPI_BAND",
        "MPI_LOR",
        "MPI_BOR",
        "MPI_LXOR",
        "MPI_BXOR",
        "MPI_MINLOC",
        "MPI_MAXLOC",
        "MPI_REPLACE",
        "MPI_NO_OP",
    ],
    K.DATATYPE: [
        "MPI_DATATYPE_NULL",
        "MPI_CHAR",
        "MPI_SIGNED_CHAR",
        "MPI_UNSIGNED_CHAR",
        "MPI_BYTE",
        "MPI_PACKED",
        "MPI_SHORT",
        "MPI_UNSIGNED_SHORT",
        "MPI_INT",
        "MPI_UNSIGNED",
        "MPI_LONG",
        "MPI_UNSIGNED_LONG",
        "MPI_LONG_LONG",
        "MPI_UNSIGNED_LONG_LONG",
        "MPI_FLOAT",
        "MPI_DOUBLE",
        "MPI_INT8_T",
        "MPI_UINT8_T",
        "MPI_INT16_T",
        "MPI_UINT16_T",
        "MPI_INT32_T",
        "MPI_UINT32_T",
        "MPI_INT64_T",
        "MPI_UINT64_T",
        "MPI_AINT",
        "MPI_OFFSET",
        "MPI_COUNT",
    ],
}


def _layout_predefined():
    handles, slot = {}, 0
    for kind, names in _PREDEFINED_NAMES.items():
        handles[kind] = {}
        for name in names:
            handles[kind][name] = TOKEN_BASE + slot * TOKEN_STRIDE
            slot += 1
    return handles, slot


NATIVE_HANDLES, _FIRST_USER_SLOT = _layout_predefined()

NATIVE_ERRORS = {
    "MPI_SUCCESS": 0,
    "MPI_ERR_BUFFER": 1,
    "MPI_ERR_COUNT": 2,
    "MPI_ERR_TYPE": 3,
    "MPI_ERR_TAG": 4,
    "MPI_ERR_COMM": 5,
    "MPI_ERR_RANK": 6,
    "MPI_ERR_REQUEST": 7,
    "MPI_ERR_ROOT": 8,
    "MPI_ERR_GROUP": 9,
    "MPI_ERR_OP": 10,
    "MPI_ERR_ARG": 13,
    "MPI_ERR_UNKNOWN": 14,
    "MPI_ERR_TRUNCATE": 15,
    "MPI_ERR_OTHER": 16,
    "MPI_ERR_INTERN": 17,
    "MPI_ERR_IN_STATUS": 18,
    "MPI_ERR_PENDING": 19,
}

NATIVE_CONSTANTS = {
    "MPI_ANY_SOURCE": -1,
    "MPI_ANY_TAG": -1,
    "MPI_PROC_NULL": -2,
    "MPI_ROOT": -4,
    "MPI_UNDEFINED": -32766,
}

ERROR_TEXT = {name: f"{name}: {name[8:].lower().replace('_', ' ')}" for name in NATIVE_ERRORS}
ERROR_TEXT["MPI_SUCCESS"] = "MPI_SUCCESS: no errors"


class TokenTable:
    """Token -> record registry.

    Tokens are never 0 and never fall in the standard predefined code
    space; resolving a live token always succeeds.  Creation and release
    are serialized, resolution is a plain dict read.
    """

    def __init__(self) -> None:
        self._records: dict[int, Entry] = {}
        self._next_slot = _FIRST_USER_SLOT
        self._lock = threading.Lock()

    def add_predefined(self, token: int, record: Entry) -> None:
        self._check(token)
        self._records[token] = record

    def create(self, record: Entry) -> int:
        with self._lock:
            # freed tokens are not recycled, so a stale handle never aliases a new object
            token = TOKEN_BASE + self._next_slot * TOKEN_STRIDE
            self._next_slot += 1
            self._check(token)
            self._records[token] = record
        return token

    def release(self, token: int) -> None:
        with self._lock:
            del self._records[token]

    def resolve(self, token: int) -> Optional[Entry]:
        return self._records.get(token)

    def __len__(self) -> int:
        return len(self._records)

    @staticmethod
    def _check(token: int) -> None:
        if token == 0 or 0 <= token < PREDEFINED_LIMIT:
            raise AssertionError(f"token {token:#x} overlaps the standard predefined region")


class TokenBackend(SimBackend):
    NATIVE_HANDLES = NATIVE_HANDLES
    NATIVE_ERRORS = NATIVE_ERRORS
    NATIVE_CONSTANTS = NATIVE_CONSTANTS
    ERROR_TEXT = ERROR_TEXT

    descriptor = BackendDescriptor.build("token", TOKEN_STYLE, NATIVE_HANDLES, NATIVE_ERRORS, NATIVE_CONSTANTS)

    def __init__(self) -> None:
        super().__init__()
        self.tokens = TokenTable()

    def _install_predefined(self) -> None:
        super()._install_predefined()
        for kind, entries in self._entries.items():
            for token, entry in entries.items():
                self.tokens.add_predefined(token, entry)

    def _allocate(self, kind, entry: Entry) -> int:
        return self.tokens.create(entry)

    def _release(self, kind, native: int) -> None:
        super()._release(kind, native)
        self.tokens.release(native)

    def type_size(self, datatype: int) -> int:
        record = self.tokens.resolve(datatype)
        if record is not None and record.kind is K.DATATYPE and record.size is not None and self._initialized:
            return record.size
        with self._guard:
            self._ref(K.DATATYPE, datatype)
            raise AssertionError("unreachable")  # pragma: no cover


def token_status_pack(fields) -> bytes:
    return TOKEN_STYLE.pack(fields)


def token_status_unpack(raw: bytes):
    return TOKEN_STYLE.unpack(raw)


BACKEND_CLASS = TokenBackend
