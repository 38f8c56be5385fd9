"""Machine-readable constants manifest.

One record per line, ``NAME<TAB>KIND<TAB>VALUE_HEX``, sorted by value then
name.  Handle rows use their handle kind (``Comm``, ``Datatype``, ...);
integer constants use their family.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable

from .constants import SHIPPED, attribute_callback_rows
from .handles import HANDLE_ROWS

__all__ = ["ManifestRow", "FAMILY_KINDS", "manifest_rows", "emit_manifest", "parse_manifest", "diff_manifests", "format_hex"]

FAMILY_KINDS = {
    "sentinel": "Sentinel",
    "xor_flags": "XorFlag",
    "string_lengths": "StringLength",
    "error_classes": "ErrorClass",
}
ATTR_CALLBACK_KIND = "AttrCallback"


@dataclass(frozen=True, order=True)
class ManifestRow:
    value: int
    name: str
    kind: str

    def line(self) -> str:
        return f"{self.name}\t{self.kind}\t{format_hex(self.value)}"


def format_hex(value: int) -> str:
    return f"-0x{-value:03x}" if value < 0 else f"0x{value:03x}"


def manifest_rows() -> list[ManifestRow]:
    rows = [ManifestRow(r.value, r.name, str(r.kind)) for r in HANDLE_ROWS]
    rows += [ManifestRow(v, n, FAMILY_KINDS[f]) for f, n, v in SHIPPED.items()]
    rows += [ManifestRow(v, n, ATTR_CALLBACK_KIND) for n, v in attribute_callback_rows()]
    return sorted(rows)


def emit_manifest(rows: Iterable[ManifestRow] | None = None) -> str:
    rows = manifest_rows() if rows is None else sorted(rows)
    return "".join(r.line() + "\n" for r in rows)


def parse_manifest(text: str) -> list[ManifestRow]:
    rows = []
    for lineno, line in enumerate(text.splitlines(), 1):
        if not line.strip():
            continue
        parts = line.split("\t")
        if len(parts) != 3:
            raise ValueError(f"line {lineno}: expected 3 tab-separated fields, got {len(parts)}")
        name, kind, value = parts
        try:
            rows.append(ManifestRow(int(value, 16), name, kind))
        except ValueError:
            raise ValueError(f"line {lineno}: bad hex value {value!r}") from None
    return rows


def diff_manifests(a: Iterable[ManifestRow], b: Iterable[ManifestRow]) -> list[str]:
    """Human-readable differences; empty when the manifests agree."""
    left = {r.name: r for r in a}
    right = {r.name: r for r in b}
    out = []
    for name in sorted(left.keys() | right.keys()):
        ra, rb = left.get(name), right.get(name)
        if rb is None:
            out.append(f"- {ra.line()}")
        elif ra is None:
            out.append(f"+ {rb.line()}")
        elif ra != rb:
            out.append(
                f"~ {name}: {ra.kind} {format_hex(ra.value)} -> {rb.kind} {format_hex(rb.value)}"
            )
    return out
