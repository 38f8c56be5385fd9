"""Integer constants and predefined attribute callbacks.

Sentinel values and the error-class numbering are placeholders: the
required properties (unique negative sentinels, power-of-two assertion
flags, magnitudes within 32767, ``MPI_SUCCESS == 0``) are normative, the
particular numbers are not.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from types import MappingProxyType
from typing import Mapping

__all__ = [
    "INT_CONSTANT_LIMIT",
    "IntegerConstantTable",
    "AttributeCallbackConstants",
    "Violation",
    "SHIPPED",
    "ATTRIBUTE_CALLBACKS",
    "ERROR_CLASSES",
    "validate_constant_tables",
    "attribute_callback_rows",
    "error_class_name",
]

INT_CONSTANT_LIMIT = 32767


def _frozen(d: Mapping[str, int]) -> Mapping[str, int]:
    return MappingProxyType(dict(d))


@dataclass(frozen=True)
class IntegerConstantTable:
    sentinel: Mapping[str, int]
    xor_flags: Mapping[str, int]
    string_lengths: Mapping[str, int]
    error_classes: Mapping[str, int]

    FAMILIES = ("sentinel", "xor_flags", "string_lengths", "error_classes")

    def family(self, name: str) -> Mapping[str, int]:
        return getattr(self, name)

    def items(self):
        """(family, name, value) for every constant."""
        for fam in self.FAMILIES:
            for name, value in self.family(fam).items():
                yield fam, name, value

    def value(self, name: str) -> int:
        for _, n, v in self.items():
            if n == name:
                return v
        raise KeyError(name)

    def replace(self, **families: Mapping[str, int]) -> IntegerConstantTable:
        """Copy with some families swapped out (used for fault injection)."""
        current = {f: self.family(f) for f in self.FAMILIES}
        current.update({k: _frozen(v) for k, v in families.items()})
        return IntegerConstantTable(**current)


@dataclass(frozen=True)
class AttributeCallbackConstants:
    null_copy_fn: int = 0x0
    null_delete_fn: int = 0x0
    dup_fn: int = 0xD


@dataclass(frozen=True)
class Violation:
    rule: str
    names: tuple[str, ...]
    detail: str = field(default="", compare=False)

    def __str__(self) -> str:
        return f"{self.rule}: {', '.join(self.names)} {self.detail}".rstrip()


# MPI-4 error-class order.  Two entries beyond it: a class for calls made
# outside init/finalize, and the customary MPI_ERR_LASTCODE bound.
_ERROR_CLASS_ORDER = [
    "MPI_SUCCESS",
    "MPI_ERR_BUFFER",
    "MPI_ERR_COUNT",
    "MPI_ERR_TYPE",
    "MPI_ERR_TAG",
    "MPI_ERR_COMM",
    "MPI_ERR_RANK",
    "MPI_ERR_REQUEST",
    "MPI_ERR_ROOT",
    "MPI_ERR_GROUP",
    "MPI_ERR_OP",
    "MPI_ERR_TOPOLOGY",
    "MPI_ERR_DIMS",
    "MPI_ERR_ARG",
    "MPI_ERR_UNKNOWN",
    "MPI_ERR_TRUNCATE",
    "MPI_ERR_OTHER",
    "MPI_ERR_INTERN",
    "MPI_ERR_PENDING",
    "MPI_ERR_IN_STATUS",
    "MPI_ERR_ACCESS",
    "MPI_ERR_AMODE",
    "MPI_ERR_ASSERT",
    "MPI_ERR_BAD_FILE",
    "MPI_ERR_BASE",
    "MPI_ERR_CONVERSION",
    "MPI_ERR_DISP",
    "MPI_ERR_DUP_DATAREP",
    "MPI_ERR_FILE_EXISTS",
    "MPI_ERR_FILE_IN_USE",
    "MPI_ERR_FILE",
    "MPI_ERR_INFO_KEY",
    "MPI_ERR_INFO_NOKEY",
    "MPI_ERR_INFO_VALUE",
    "MPI_ERR_INFO",
    "MPI_ERR_IO",
    "MPI_ERR_KEYVAL",
    "MPI_ERR_LOCKTYPE",
    "MPI_ERR_NAME",
    "MPI_ERR_NO_MEM",
    "MPI_ERR_NOT_SAME",
    "MPI_ERR_NO_SPACE",
    "MPI_ERR_NO_SUCH_FILE",
    "MPI_ERR_PORT",
    "MPI_ERR_PROC_ABORTED",
    "MPI_ERR_QUOTA",
    "MPI_ERR_READ_ONLY",
    "MPI_ERR_RMA_ATTACH",
    "MPI_ERR_RMA_CONFLICT",
    "MPI_ERR_RMA_RANGE",
    "MPI_ERR_RMA_SHARED",
    "MPI_ERR_RMA_SYNC",
    "MPI_ERR_RMA_FLAVOR",
    "MPI_ERR_SERVICE",
    "MPI_ERR_SESSION",
    "MPI_ERR_SIZE",
    "MPI_ERR_SPAWN",
    "MPI_ERR_UNSUPPORTED_DATAREP",
    "MPI_ERR_UNSUPPORTED_OPERATION",
    "MPI_ERR_VALUE_TOO_LARGE",
    "MPI_ERR_WIN",
    "MPI_ERR_ERRHANDLER",
    "MPIX_ERR_NOT_INITIALIZED",
    "MPI_ERR_LASTCODE",
]

ERROR_CLASSES: Mapping[str, int] = _frozen({name: i for i, name in enumerate(_ERROR_CLASS_ORDER)})
_ERROR_NAMES = {v: k for k, v in ERROR_CLASSES.items()}

SHIPPED = IntegerConstantTable(
    sentinel=_frozen(
        {
            "MPI_ANY_SOURCE": -101,
            "MPI_ANY_TAG": -102,
            "MPI_PROC_NULL": -103,
            "MPI_ROOT": -104,
            "MPI_UNDEFINED": -105,
            "MPI_KEYVAL_INVALID": -106,
            "MPI_IDENT": -107,
            "MPI_CONGRUENT": -108,
            "MPI_SIMILAR": -109,
            "MPI_UNEQUAL": -110,
        }
    ),
    # above every error class, below the magnitude limit, clear of 256 and 8192
    xor_flags=_frozen(
        {
            "MPI_MODE_NOCHECK": 1 << 9,
            "MPI_MODE_NOSTORE": 1 << 10,
            "MPI_MODE_NOPUT": 1 << 11,
            "MPI_MODE_NOPRECEDE": 1 << 12,
            "MPI_MODE_NOSUCCEED": 1 << 14,
        }
    ),
    string_lengths=_frozen(
        {
            "MPI_MAX_DATAREP_STRING": 256,
            "MPI_MAX_ERROR_STRING": 256,
            "MPI_MAX_INFO_KEY": 256,
            "MPI_MAX_INFO_VAL": 256,
            "MPI_MAX_LIBRARY_VERSION_STRING": 8192,
            "MPI_MAX_OBJECT_NAME": 256,
            "MPI_MAX_PORT_NAME": 256,
            "MPI_MAX_PROCESSOR_NAME": 256,
            "MPI_MAX_PSET_NAME_LEN": 256,
            "MPI_MAX_STRINGTAG_LEN": 256,
        }
    ),
    error_classes=ERROR_CLASSES,
)

ATTRIBUTE_CALLBACKS = AttributeCallbackConstants()


def error_class_name(value: int) -> str:
    return _ERROR_NAMES.get(value, f"<error class {value}>")


def attribute_callback_rows(cb: AttributeCallbackConstants = ATTRIBUTE_CALLBACKS) -> list[tuple[str, int]]:
    """Per-object-kind names of the predefined attribute callbacks."""
    rows = []
    for obj in ("COMM", "TYPE", "WIN"):
        rows.append((f"MPI_{obj}_NULL_COPY_FN", cb.null_copy_fn))
        rows.append((f"MPI_{obj}_NULL_DELETE_FN", cb.null_delete_fn))
        rows.append((f"MPI_{obj}_DUP_FN", cb.dup_fn))
    return rows


def _is_power_of_two(v: int) -> bool:
    return v > 0 and v & (v - 1) == 0


def validate_constant_tables(
    table: IntegerConstantTable = SHIPPED,
    callbacks: AttributeCallbackConstants = ATTRIBUTE_CALLBACKS,
) -> list[Violation]:
    """Check every structural rule; an empty list means the tables conform.

    String lengths are array sizes and are exempt from uniqueness; all other
    constants must be pairwise distinct across families so that a misplaced
    constant can be reported by name.
    """
    out: list[Violation] = []

    seen: dict[int, str] = {}
    for fam, name, value in table.items():
        if fam == "string_lengths":
            continue
        if value in seen:
            out.append(Violation("unique", (seen[value], name), f"share value {value}"))
        else:
            seen[value] = name

    for name, value in table.sentinel.items():
        if value >= 0:
            out.append(Violation("negative", (name,), f"sentinel is {value}"))

    for name, value in table.xor_flags.items():
        if not _is_power_of_two(value):
            out.append(Violation("power_of_two", (name,), f"flag is {value}"))

    for fam, name, value in table.items():
        if fam != "string_lengths" and abs(value) > INT_CONSTANT_LIMIT:
            out.append(Violation("magnitude", (name,), f"|{value}| > {INT_CONSTANT_LIMIT}"))

    for name, value in table.string_lengths.items():
        if value <= 0:
            out.append(Violation("positive_length", (name,), f"length is {value}"))

    success = table.error_classes.get("MPI_SUCCESS")
    if success != 0:
        out.append(Violation("success_zero", ("MPI_SUCCESS",), f"is {success}"))
    for name, value in table.error_classes.items():
        if value < 0:
            out.append(Violation("error_class_nonnegative", (name,), f"is {value}"))

    expected = AttributeCallbackConstants()
    for attr in ("null_copy_fn", "null_delete_fn", "dup_fn"):
        if getattr(callbacks, attr) != getattr(expected, attr):
            out.append(Violation("attribute_callback", (attr,), f"is {getattr(callbacks, attr):#x}"))
    return out
