"""Backend with MPICH-style integer handles.

Handles are 32-bit integers with structure: built-in datatypes follow the
``0x4c00ssnn`` pattern, ``ss`` being the type's byte size, so
``type_size`` of a built-in type is a mask and a shift.  User objects are
numbered from ``0x2000000`` upward.  Statuses use the five-int layout with
the count split across ``count_lo`` and ``count_hi_and_cancelled``.
"""

from __future__ import annotations

import itertools

from ._simbackend import Entry, SimBackend
from .abi_model.handles import HandleKind as K
from .backend_api import INT_STYLE, BackendDescriptor

__all__ = ["IntBackend", "NATIVE_HANDLES", "USER_HANDLE_BASE", "int_native_type_size", "int_status_pack", "int_status_unpack"]

USER_HANDLE_BASE = 0x2000000
_BUILTIN_DATATYPE_MASK = 0xFF000000
_BUILTIN_DATATYPE_TAG = 0x4C000000

NATIVE_HANDLES = {
    K.COMM: {"MPI_COMM_NULL": 0x04000000, "MPI_COMM_WORLD": 0x44000000, "MPI_COMM_SELF": 0x44000001},
    K.GROUP: {"MPI_GROUP_NULL": 0x08000000, "MPI_GROUP_EMPTY": 0x48000000},
    K.WIN: {"MPI_WIN_NULL": 0x20000000},
    K.FILE: {"MPI_FILE_NULL": 0},
    K.SESSION: {"MPI_SESSION_NULL": 0x38000000},
    K.MESSAGE: {"MPI_MESSAGE_NULL": 0x2C000000, "MPI_MESSAGE_NO_PROC": 0x6C000000},
    K.ERRHANDLER: {
        "MPI_ERRHANDLER_NULL": 0x14000000,
        "MPI_ERRORS_ARE_FATAL": 0x54000000,
        "MPI_ERRORS_RETURN": 0x54000001,
        "MPI_ERRORS_ABORT": 0x54000003,
    },
    K.REQUEST: {"MPI_REQUEST_NULL": 0x2C000000},
    K.OP: {
        "MPI_OP_NULL": 0x18000000,
        "MPI_MAX": 0x58000001,
        "MPI_MIN": 0x58000002,
        "MPI_SUM": 0x58000003,
        "MPI_PROD": 0x58000004,
        "MPI_LAND": 0x58000005,
        "MPI_BAND": 0x58000006,
        "MPI_LOR": 0x58000007,
        "MPI_BOR": 0x58000008,
        "MPI_LXOR": 0x58000009,
        "MPI_BXOR": 0x5800000A,
        "MPI_MINLOC": 0x5800000B,
        "MPI_MAXLOC": 0x5800000C,
        "MPI_REPLACE": 0x5800000D,
        "MPI_NO_OP": 0x5800000E,
    },
    K.DATATYPE: {
        "MPI_DATATYPE_NULL": 0x0C000000,
        "MPI_CHAR": 0x4C000101,
        "MPI_UNSIGNED_CHAR": 0x4C000102,
        "MPI_SHORT": 0x4C000203,
        "MPI_UNSIGNED_SHORT": 0x4C000204,
        "MPI_INT": 0x4C000405,
        "MPI_UNSIGNED": 0x4C000406,
        "MPI_LONG": 0x4C000807,
        "MPI_UNSIGNED_LONG": 0x4C000808,
        "MPI_LONG_LONG": 0x4C000809,
        "MPI_FLOAT": 0x4C00040A,
        "MPI_DOUBLE": 0x4C00080B,
        "MPI_BYTE": 0x4C00010D,
        "MPI_PACKED": 0x4C00010F,
        "MPI_SIGNED_CHAR": 0x4C000118,
        "MPI_UNSIGNED_LONG_LONG": 0x4C000819,
        "MPI_INT8_T": 0x4C000137,
        "MPI_INT16_T": 0x4C000238,
        "MPI_INT32_T": 0x4C000439,
        "MPI_INT64_T": 0x4C00083A,
        "MPI_UINT8_T": 0x4C00013B,
        "MPI_UINT16_T": 0x4C00023C,
        "MPI_UINT32_T": 0x4C00043D,
        "MPI_UINT64_T": 0x4C00083E,
        "MPI_AINT": 0x4C000843,
        "MPI_OFFSET": 0x4C000844,
        "MPI_COUNT": 0x4C000845,
    },
}

NATIVE_ERRORS = {
    "MPI_SUCCESS": 0,
    "MPI_ERR_BUFFER": 1,
    "MPI_ERR_COUNT": 2,
    "MPI_ERR_TYPE": 3,
    "MPI_ERR_TAG": 4,
    "MPI_ERR_COMM": 5,
    "MPI_ERR_RANK": 6,
    "MPI_ERR_ROOT": 7,
    "MPI_ERR_GROUP": 8,
    "MPI_ERR_OP": 9,
    "MPI_ERR_ARG": 12,
    "MPI_ERR_UNKNOWN": 13,
    "MPI_ERR_TRUNCATE": 14,
    "MPI_ERR_OTHER": 15,
    "MPI_ERR_INTERN": 16,
    "MPI_ERR_IN_STATUS": 17,
    "MPI_ERR_PENDING": 18,
    "MPI_ERR_REQUEST": 19,
}

NATIVE_CONSTANTS = {
    "MPI_ANY_SOURCE": -2,
    "MPI_ANY_TAG": -1,
    "MPI_PROC_NULL": -1,
    "MPI_ROOT": -3,
    "MPI_UNDEFINED": -32766,
}

ERROR_TEXT = {
    "MPI_SUCCESS": "No MPI error",
    "MPI_ERR_BUFFER": "Invalid buffer pointer",
    "MPI_ERR_COUNT": "Invalid count",
    "MPI_ERR_TYPE": "Invalid datatype",
    "MPI_ERR_TAG": "Invalid tag",
    "MPI_ERR_COMM": "Invalid communicator",
    "MPI_ERR_RANK": "Invalid rank",
    "MPI_ERR_ROOT": "Invalid root",
    "MPI_ERR_GROUP": "Invalid group",
    "MPI_ERR_OP": "Invalid MPI_Op",
    "MPI_ERR_ARG": "Invalid argument",
    "MPI_ERR_UNKNOWN": "Unknown error",
    "MPI_ERR_TRUNCATE": "Message truncated",
    "MPI_ERR_OTHER": "Other MPI error",
    "MPI_ERR_INTERN": "Internal MPI error!",
    "MPI_ERR_IN_STATUS": "See the MPI_ERROR field in MPI_Status for the error code",
    "MPI_ERR_PENDING": "Pending request (no error)",
    "MPI_ERR_REQUEST": "Invalid MPI_Request",
}

_PREDEFINED_VALUES = frozenset(v for names in NATIVE_HANDLES.values() for v in names.values())


def int_native_type_size(handle: int) -> int:
    """Byte size of a built-in datatype, read from the handle bits."""
    return (handle & 0x0000FF00) >> 8


def int_status_pack(fields) -> bytes:
    return INT_STYLE.pack(fields)


def int_status_unpack(raw: bytes):
    return INT_STYLE.unpack(raw)


class IntBackend(SimBackend):
    NATIVE_HANDLES = NATIVE_HANDLES
    NATIVE_ERRORS = NATIVE_ERRORS
    NATIVE_CONSTANTS = NATIVE_CONSTANTS
    ERROR_TEXT = ERROR_TEXT

    descriptor = BackendDescriptor.build("int", INT_STYLE, NATIVE_HANDLES, NATIVE_ERRORS, NATIVE_CONSTANTS)

    def __init__(self) -> None:
        super().__init__()
        self._counter = itertools.count(USER_HANDLE_BASE)

    def _allocate(self, kind, entry: Entry) -> int:
        for value in self._counter:
            if value not in _PREDEFINED_VALUES:
                return value
        raise AssertionError("unreachable")  # pragma: no cover

    def type_size(self, datatype: int) -> int:
        # built-ins: no table lookup, no validity check
        if self._initialized and datatype & _BUILTIN_DATATYPE_MASK == _BUILTIN_DATATYPE_TAG:
            return (datatype & 0x0000FF00) >> 8
        with self._guard:
            return self.world.type_size(self._ref(K.DATATYPE, datatype))


BACKEND_CLASS = IntBackend
