"""Predefined handle encoding.

Predefined handles live in a 10-bit code space (values below 1024).  The top
two bits select the family: ``0b00`` for reduction operations, ``0b01`` for
the other opaque objects and ``0b10`` for datatypes.  Within the datatype
family, ``0b1001`` marks fixed-size types whose byte size is ``2**k`` where
``k`` is held in bits 3-5 of the value.

Classification is purely table driven: enumerated rows first, then the
reserved wildcard rows (most specific first), then the family regions.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import NamedTuple, Optional

__all__ = [
    "PREDEFINED_LIMIT",
    "HandleKind",
    "Disposition",
    "HandleRow",
    "HandleClassification",
    "HANDLE_ROWS",
    "PLACEHOLDER_ROWS",
    "RESERVED_PATTERNS",
    "EXTENSION_ROWS",
    "TABLE_SPELLINGS",
    "classify_handle",
    "null_handle_of",
    "datatype_fixed_size",
    "lookup_predefined",
    "is_predefined",
    "predefined_rows",
]

PREDEFINED_LIMIT = 1 << 10


class HandleKind(enum.Enum):
    OP = "Op"
    COMM = "Comm"
    GROUP = "Group"
    WIN = "Win"
    FILE = "File"
    SESSION = "Session"
    MESSAGE = "Message"
    ERRHANDLER = "Errhandler"
    REQUEST = "Request"
    DATATYPE = "Datatype"

    def __str__(self) -> str:
        return self.value


class Disposition(enum.Enum):
    INVALID = "Invalid"
    RESERVED = "Reserved"
    PREDEFINED = "Predefined"
    USER = "UserSpace"

    def __str__(self) -> str:
        return self.value


class HandleRow(NamedTuple):
    value: int
    kind: HandleKind
    name: str


@dataclass(frozen=True)
class HandleClassification:
    disposition: Disposition
    kind: Optional[HandleKind] = None
    name: Optional[str] = None

    def __str__(self) -> str:
        if self.disposition is Disposition.INVALID:
            return "Invalid (uninitialized)"
        parts = [str(self.disposition)]
        if self.kind is not None:
            parts.append(str(self.kind))
        if self.name is not None:
            parts.append(self.name)
        return " ".join(parts)


def _b(bits: str) -> int:
    return int(bits, 2)


_K = HandleKind

# Enumerated rows, in table order.
HANDLE_ROWS: tuple[HandleRow, ...] = tuple(
    HandleRow(_b(bits), kind, name)
    for bits, kind, name in [
        # operations
        ("0000100000", _K.OP, "MPI_OP_NULL"),
        ("0000100001", _K.OP, "MPI_SUM"),
        ("0000100010", _K.OP, "MPI_MIN"),
        ("0000100011", _K.OP, "MPI_MAX"),
        ("0000100100", _K.OP, "MPI_PROD"),
        ("0000101000", _K.OP, "MPI_BAND"),
        ("0000101001", _K.OP, "MPI_BOR"),
        ("0000101010", _K.OP, "MPI_BXOR"),
        ("0000110000", _K.OP, "MPI_LAND"),
        ("0000110001", _K.OP, "MPI_LOR"),
        ("0000110010", _K.OP, "MPI_LXOR"),
        ("0000111000", _K.OP, "MPI_MINLOC"),
        ("0000111001", _K.OP, "MPI_MAXLOC"),
        ("0000111100", _K.OP, "MPI_REPLACE"),
        ("0000111101", _K.OP, "MPI_NO_OP"),
        # communicators
        ("0100000000", _K.COMM, "MPI_COMM_NULL"),
        ("0100000001", _K.COMM, "MPI_COMM_WORLD"),
        ("0100000010", _K.COMM, "MPI_COMM_SELF"),
        # groups
        ("0100000100", _K.GROUP, "MPI_GROUP_NULL"),
        ("0100000101", _K.GROUP, "MPI_GROUP_EMPTY"),
        # windows, files, sessions
        ("0100001000", _K.WIN, "MPI_WIN_NULL"),
        ("0100001100", _K.FILE, "MPI_FILE_NULL"),
        ("0100010000", _K.SESSION, "MPI_SESSION_NULL"),
        # messages
        ("0100010100", _K.MESSAGE, "MPI_MESSAGE_NULL"),
        ("0100010101", _K.MESSAGE, "MPI_MESSAGE_NO_PROC"),
        # error handlers
        ("0100011000", _K.ERRHANDLER, "MPI_ERRHANDLER_NULL"),
        ("0100011001", _K.ERRHANDLER, "MPI_ERRORS_ARE_FATAL"),
        ("0100011010", _K.ERRHANDLER, "MPI_ERRORS_RETURN"),
        ("0100011011", _K.ERRHANDLER, "MPI_ERRORS_ABORT"),
        # requests
        ("0100100000", _K.REQUEST, "MPI_REQUEST_NULL"),
        # variable-size datatypes
        ("1000000000", _K.DATATYPE, "MPI_DATATYPE_NULL"),
        ("1000000001", _K.DATATYPE, "MPI_AINT"),
        ("1000000010", _K.DATATYPE, "MPI_COUNT"),
        ("1000000011", _K.DATATYPE, "MPI_OFFSET"),
        ("1000000111", _K.DATATYPE, "MPI_PACKED"),
        ("1000001000", _K.DATATYPE, "MPI_SHORT"),
        ("1000001001", _K.DATATYPE, "MPI_INT"),
        ("1000001010", _K.DATATYPE, "MPI_LONG"),
        ("1000001011", _K.DATATYPE, "MPI_LONG_LONG"),
        ("1000001100", _K.DATATYPE, "MPI_UNSIGNED_SHORT"),
        ("1000001101", _K.DATATYPE, "MPI_UNSIGNED"),
        ("1000001110", _K.DATATYPE, "MPI_UNSIGNED_LONG"),
        ("1000001111", _K.DATATYPE, "MPI_UNSIGNED_LONG_LONG"),
        ("1000010000", _K.DATATYPE, "MPI_FLOAT"),
        # fixed-size datatypes
        ("1001000000", _K.DATATYPE, "MPI_INT8_T"),
        ("1001000001", _K.DATATYPE, "MPI_UINT8_T"),
        ("1001000011", _K.DATATYPE, "MPI_CHAR"),
        ("1001000100", _K.DATATYPE, "MPI_SIGNED_CHAR"),
        ("1001000101", _K.DATATYPE, "MPI_UNSIGNED_CHAR"),
        ("1001000111", _K.DATATYPE, "MPI_BYTE"),
        ("1001001000", _K.DATATYPE, "MPI_INT16_T"),
        ("1001001001", _K.DATATYPE, "MPI_UINT16_T"),
        ("1001010000", _K.DATATYPE, "MPI_INT32_T"),
        ("1001010001", _K.DATATYPE, "MPI_UINT32_T"),
        ("1001011000", _K.DATATYPE, "MPI_INT64_T"),
        ("1001011001", _K.DATATYPE, "MPI_UINT64_T"),
    ]
)

# Positions assigned to types that have no MPI name yet.  They classify as
# reserved datatype codes carrying the descriptive label.
PLACEHOLDER_ROWS: tuple[HandleRow, ...] = tuple(
    HandleRow(_b(bits), _K.DATATYPE, label)
    for bits, label in [
        ("1001000010", "<float 8b>"),
        ("1001001010", "<float 16b>"),
        ("1001001011", "<C complex 2x8b>"),
        ("1001001111", "<C++ complex 2x8b>"),
        ("1001010010", "<C float 32b>"),
        ("1001010011", "<C complex 2x16b>"),
        ("1001011010", "<C float64>"),
        ("1001011011", "<C complex 2x32b>"),
    ]
)

# Continuation of the variable-size enumeration for types the published
# table elides.  Not part of the canonical tables; opt in with extended=True.
EXTENSION_ROWS: tuple[HandleRow, ...] = (
    HandleRow(_b("1000010001"), _K.DATATYPE, "MPI_DOUBLE"),
    HandleRow(_b("1000010010"), _K.DATATYPE, "MPI_LONG_DOUBLE"),
)

# Spellings used by the published encoding table where they differ from the
# MPI names.  Accepted by lookup_predefined.
TABLE_SPELLINGS: dict[str, str] = {
    "MPI_OP_SUM": "MPI_SUM",
    "MPI_OP_MIN": "MPI_MIN",
    "MPI_OP_MAX": "MPI_MAX",
    "MPI_OP_PROD": "MPI_PROD",
    "MPI_OP_BAND": "MPI_BAND",
    "MPI_OP_BOR": "MPI_BOR",
    "MPI_OP_BXOR": "MPI_BXOR",
    "MPI_OP_LAND": "MPI_LAND",
    "MPI_OP_LOR": "MPI_LOR",
    "MPI_OP_LXOR": "MPI_LXOR",
    "MPI_OP_MINLOC": "MPI_MINLOC",
    "MPI_OP_MAXLOC": "MPI_MAXLOC",
    "MPI_OP_REPLACE": "MPI_REPLACE",
    "MPI_UNSIGNED_INT": "MPI_UNSIGNED",
}


class _Pattern(NamedTuple):
    mask: int
    bits: int
    wildcards: int
    kind: Optional[HandleKind]
    label: str


def _pattern(text: str, kind: Optional[HandleKind], label: str) -> _Pattern:
    mask = int("".join("0" if c == "*" else "1" for c in text), 2)
    bits = int(text.replace("*", "0"), 2)
    return _Pattern(mask, bits, text.count("*"), kind, label)


# Reserved wildcard rows.  Several overlap; the one with the fewest
# wildcards wins.
RESERVED_PATTERNS: tuple[_Pattern, ...] = tuple(
    sorted(
        (
            _pattern("00000*****", None, "reserved handle"),
            _pattern("00001001**", _K.OP, "reserved arithmetic op"),
            _pattern("000010****", _K.OP, "reserved bit op"),
            _pattern("000011****", _K.OP, "reserved logical op"),
            _pattern("00001110**", _K.OP, "reserved other op"),
            _pattern("000011111*", _K.OP, "reserved other op"),
            _pattern("00********", None, "reserved handles"),
            _pattern("0100000011", _K.COMM, "reserved comm"),
            _pattern("01000001**", _K.GROUP, "reserved group"),
            _pattern("01000010**", _K.WIN, "reserved win"),
            _pattern("01000011**", _K.FILE, "reserved file"),
            _pattern("010001****", _K.SESSION, "reserved session"),
            _pattern("01000101**", _K.MESSAGE, "reserved message"),
            _pattern("01000111**", None, "reserved handle"),
            _pattern("01001000**", _K.REQUEST, "reserved request"),
            _pattern("01********", None, "reserved handle"),
            _pattern("10000001**", _K.DATATYPE, "reserved datatype"),
            _pattern("1001000110", _K.DATATYPE, "reserved datatype"),
            _pattern("10010011**", _K.DATATYPE, "reserved datatype"),
            _pattern("10********", _K.DATATYPE, "reserved datatype"),
            _pattern("11********", None, "unassigned"),
        ),
        key=lambda p: p.wildcards,
    )
)

_FIXED_PREFIX = 0b1001


def _build_index(rows) -> tuple[list, dict[str, HandleRow]]:
    by_value: list = [None] * PREDEFINED_LIMIT
    by_name: dict[str, HandleRow] = {}
    for row in rows:
        if by_value[row.value] is not None:
            raise ValueError(f"duplicate handle code {row.value:#05x}")
        by_value[row.value] = row
        by_name[row.name] = row
    return by_value, by_name


_BY_VALUE, _BY_NAME = _build_index(HANDLE_ROWS)
_EXT_BY_VALUE, _EXT_BY_NAME = _build_index(HANDLE_ROWS + EXTENSION_ROWS)
_PLACEHOLDER = {row.value: row for row in PLACEHOLDER_ROWS}

_NULL_NAMES = {
    _K.OP: "MPI_OP_NULL",
    _K.COMM: "MPI_COMM_NULL",
    _K.GROUP: "MPI_GROUP_NULL",
    _K.WIN: "MPI_WIN_NULL",
    _K.FILE: "MPI_FILE_NULL",
    _K.SESSION: "MPI_SESSION_NULL",
    _K.MESSAGE: "MPI_MESSAGE_NULL",
    _K.ERRHANDLER: "MPI_ERRHANDLER_NULL",
    _K.REQUEST: "MPI_REQUEST_NULL",
    _K.DATATYPE: "MPI_DATATYPE_NULL",
}

_INVALID = HandleClassification(Disposition.INVALID)
_USER = HandleClassification(Disposition.USER)


def classify_handle(value: int, *, extended: bool = False) -> HandleClassification:
    """Decode a handle value using only its bit pattern.

    Total over all integers: 0 is invalid, values of 1024 and above are
    user-space handles, and every code below 1024 is either a predefined
    constant or reserved.  Negative values cannot be predefined and are
    treated as user-space handles.
    """
    if value == 0:
        return _INVALID
    if value < 0 or value >= PREDEFINED_LIMIT:
        return _USER
    row = (_EXT_BY_VALUE if extended else _BY_VALUE)[value]
    if row is not None:
        return HandleClassification(Disposition.PREDEFINED, row.kind, row.name)
    placeholder = _PLACEHOLDER.get(value)
    if placeholder is not None:
        return HandleClassification(Disposition.RESERVED, placeholder.kind, placeholder.name)
    for pat in RESERVED_PATTERNS:
        if value & pat.mask == pat.bits:
            return HandleClassification(Disposition.RESERVED, pat.kind, pat.label)
    raise AssertionError("reserved patterns cover the code space")  # pragma: no cover


def is_predefined(value: int) -> bool:
    return 0 < value < PREDEFINED_LIMIT and _BY_VALUE[value] is not None


def null_handle_of(kind: HandleKind) -> int:
    """The kind's null handle: its prefix bits followed by zeros."""
    return _BY_NAME[_NULL_NAMES[HandleKind(kind)]].value


def datatype_fixed_size(handle: int) -> Optional[int]:
    """Byte size encoded in a fixed-size datatype handle.

    Returns ``None`` for variable-size types (whose size depends on the
    platform ABI) and for ``MPI_DATATYPE_NULL``.  Raises ``ValueError`` if the
    handle is not a datatype code.
    """
    cls = classify_handle(handle, extended=True)
    if cls.kind is not HandleKind.DATATYPE:
        raise ValueError(f"{handle:#x} is not a datatype handle ({cls})")
    if handle >> 6 == _FIXED_PREFIX:
        return 1 << ((handle >> 3) & 0b111)
    return None


def lookup_predefined(name: str, *, extended: bool = False) -> int:
    """Handle value of a predefined constant, by MPI name."""
    index = _EXT_BY_NAME if extended else _BY_NAME
    row = index.get(TABLE_SPELLINGS.get(name, name))
    if row is None:
        raise KeyError(f"no predefined handle named {name!r}")
    return row.value


def predefined_rows(kind: Optional[HandleKind] = None) -> list[HandleRow]:
    """Enumerated rows, optionally restricted to one kind, in value order."""
    rows = sorted(HANDLE_ROWS)
    if kind is not None:
        rows = [r for r in rows if r.kind is kind]
    return rows
