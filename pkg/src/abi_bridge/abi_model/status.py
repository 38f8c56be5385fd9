"""The 32-byte standard status record.

Slots 0-2 are the public ``MPI_SOURCE``, ``MPI_TAG`` and ``MPI_ERROR``
fields.  Of the five reserved slots, this package uses slot 3 for the low
32 bits of the byte count and slot 4 for the next 31 bits, with bit 31 of
slot 4 holding the cancelled flag.
"""

from __future__ import annotations

import ctypes

__all__ = ["AbiStatus", "STATUS_FIELDS", "status_get", "status_set", "COUNT_LIMIT"]

COUNT_LIMIT = 1 << 63
_CANCEL_BIT = 1 << 31
_LOW32 = 0xFFFFFFFF
_LOW31 = 0x7FFFFFFF

STATUS_FIELDS = ("source", "tag", "error", "count", "cancelled")


def _as_unsigned(v: int) -> int:
    return v & _LOW32


def _as_signed(v: int) -> int:
    v &= _LOW32
    return v - (1 << 32) if v & 0x80000000 else v


class AbiStatus(ctypes.Structure):
    _fields_ = [
        ("MPI_SOURCE", ctypes.c_int32),
        ("MPI_TAG", ctypes.c_int32),
        ("MPI_ERROR", ctypes.c_int32),
        ("mpi_reserved", ctypes.c_int32 * 5),
    ]

    @property
    def source(self) -> int:
        return self.MPI_SOURCE

    @property
    def tag(self) -> int:
        return self.MPI_TAG

    @property
    def error(self) -> int:
        return self.MPI_ERROR

    @property
    def count(self) -> int:
        return status_get(self, "count")

    @property
    def cancelled(self) -> bool:
        return status_get(self, "cancelled")

    def fields(self) -> tuple[int, int, int, int, bool]:
        return (self.MPI_SOURCE, self.MPI_TAG, self.MPI_ERROR, self.count, self.cancelled)

    @classmethod
    def make(cls, source=0, tag=0, error=0, count=0, cancelled=False) -> AbiStatus:
        st = cls()
        st.MPI_SOURCE, st.MPI_TAG, st.MPI_ERROR = source, tag, error
        status_set(st, "count", count)
        status_set(st, "cancelled", cancelled)
        return st

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, AbiStatus):
            return NotImplemented
        return bytes(self) == bytes(other)

    __hash__ = None  # mutable

    def __repr__(self) -> str:
        s, t, e, c, x = self.fields()
        return f"AbiStatus(source={s}, tag={t}, error={e}, count={c}, cancelled={x})"


assert ctypes.sizeof(AbiStatus) == 32


def status_get(status: AbiStatus, field: str):
    """Read ``source``, ``tag``, ``error``, ``count`` or ``cancelled``."""
    if field == "source":
        return status.MPI_SOURCE
    if field == "tag":
        return status.MPI_TAG
    if field == "error":
        return status.MPI_ERROR
    res = status.mpi_reserved
    if field == "count":
        return _as_unsigned(res[0]) | ((_as_unsigned(res[1]) & _LOW31) << 32)
    if field == "cancelled":
        return bool(_as_unsigned(res[1]) & _CANCEL_BIT)
    raise KeyError(f"unknown status field {field!r}")


def status_set(status: AbiStatus, field: str, value) -> AbiStatus:
    """Write one field in place and return the record."""
    if field == "source":
        status.MPI_SOURCE = value
    elif field == "tag":
        status.MPI_TAG = value
    elif field == "error":
        status.MPI_ERROR = value
    elif field == "count":
        if not 0 <= value < COUNT_LIMIT:
            raise OverflowError(f"status count {value} does not fit in 63 bits")
        res = status.mpi_reserved
        keep = _as_unsigned(res[1]) & _CANCEL_BIT
        res[0] = _as_signed(value & _LOW32)
        res[1] = _as_signed(keep | (value >> 32))
    elif field == "cancelled":
        res = status.mpi_reserved
        hi = _as_unsigned(res[1]) & _LOW31
        res[1] = _as_signed(hi | (_CANCEL_BIT if value else 0))
    else:
        raise KeyError(f"unknown status field {field!r}")
    return status
