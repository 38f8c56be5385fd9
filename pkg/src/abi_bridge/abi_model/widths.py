"""Integer-type model: widths of MPI_Aint, MPI_Offset and MPI_Count."""

from __future__ import annotations

import ctypes
import re
from dataclasses import dataclass

__all__ = ["AbiWidthProfile", "A32O64", "A64O64", "SUPPORTED_PROFILES"]

_CTYPES = {32: ctypes.c_int32, 64: ctypes.c_int64}
_NAME_RE = re.compile(r"^A(\d+)O(\d+)$")


@dataclass(frozen=True)
class AbiWidthProfile:
    """Bit widths of the three MPI integer types, written ``A<n>O<m>``.

    ``MPI_Count`` is as wide as the wider of the other two, all three are
    signed, and only 32- or 64-bit addresses with 64-bit offsets are
    accepted.
    """

    address_bits: int
    offset_bits: int = 64

    def __post_init__(self) -> None:
        if self.offset_bits != 64:
            raise ValueError(f"offset width must be 64 bits, got {self.offset_bits}")
        if self.address_bits not in (32, 64):
            raise ValueError(f"address width must be 32 or 64 bits, got {self.address_bits}")

    @property
    def count_bits(self) -> int:
        return max(self.address_bits, self.offset_bits)

    @property
    def name(self) -> str:
        return f"A{self.address_bits}O{self.offset_bits}"

    @classmethod
    def from_name(cls, name: str) -> AbiWidthProfile:
        m = _NAME_RE.match(name)
        if m is None:
            raise ValueError(f"not a width profile name: {name!r}")
        return cls(int(m.group(1)), int(m.group(2)))

    @classmethod
    def host(cls) -> AbiWidthProfile:
        return cls(ctypes.sizeof(ctypes.c_void_p) * 8)

    def ctype(self, which: str) -> type:
        """ctypes integer type for ``"aint"``, ``"offset"`` or ``"count"``."""
        bits = {"aint": self.address_bits, "offset": self.offset_bits, "count": self.count_bits}[which]
        return _CTYPES[bits]

    def limits(self, which: str) -> tuple[int, int]:
        """Inclusive (min, max) of the signed type."""
        bits = ctypes.sizeof(self.ctype(which)) * 8
        return -(1 << (bits - 1)), (1 << (bits - 1)) - 1

    def __str__(self) -> str:
        return self.name


A32O64 = AbiWidthProfile(32)
A64O64 = AbiWidthProfile(64)
SUPPORTED_PROFILES = (A32O64, A64O64)
