"""``abidump``: inspect the standard ABI tables and run the demo programs.

Subcommands::

    abidump dump [--out FILE]              constants manifest
    abidump classify VALUE...              decode handle values (hex or decimal)
    abidump gen-header [--out FILE]        C rendering of the ABI
    abidump diff A B                       compare two manifest files
    abidump demo PROGRAM [--backend B] [--ranks N]

Exit status is 0 on success, 1 when ``diff`` finds differences or a demo
check fails, 2 on usage errors (bad values, unknown backend or program).
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path
from typing import Iterable, Optional, Sequence

from .abi_model import (
    AbiStatus,
    ManifestRow,
    classify_handle,
    diff_manifests,
    emit_manifest,
    manifest_rows,
    parse_manifest,
)
from .abi_model.handles import HandleKind
from .abi_model.manifest import ATTR_CALLBACK_KIND
from .backend_api import BACKEND_ENV, backend_names, default_backend_name
from .simcore import RankFailure

__all__ = ["main", "cmd_dump", "cmd_classify", "cmd_gen_header", "cmd_diff", "cmd_demo", "render_c_header", "EXIT_OK", "EXIT_FAIL", "EXIT_USAGE"]

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2

_HANDLE_KINDS = {k.value: k for k in HandleKind}


class UsageError(Exception):
    pass


# ----------------------------------------------------------------------
# commands (text in, text out)


def cmd_dump() -> str:
    return emit_manifest()


def parse_value(text: str) -> int:
    try:
        return int(text, 0)
    except ValueError:
        raise UsageError(f"not an integer: {text!r}") from None


def cmd_classify(text: str, *, extended: bool = False) -> str:
    return str(classify_handle(parse_value(text), extended=extended))


def _c_literal(value: int) -> str:
    return f"(-{-value:#x})" if value < 0 else f"{value:#x}"


def render_c_header(rows: Optional[Iterable[ManifestRow]] = None) -> str:
    """C declarations for the ABI: integer typedefs, handle types, the
    status struct and one ``#define`` per manifest row, in manifest order."""
    rows = list(manifest_rows() if rows is None else rows)
    out = [
        "/* Standard MPI ABI (libmpi_abi). Generated by abidump gen-header; do not edit. */",
        "#ifndef MPI_ABI_H",
        "#define MPI_ABI_H",
        "",
        "#include <stdint.h>",
        "",
        "typedef intptr_t MPI_Aint;",
        "typedef int64_t MPI_Offset;",
        "typedef int64_t MPI_Count;",
        "",
    ]
    for kind in HandleKind:
        out.append(f"typedef struct MPI_ABI_{kind.value} *MPI_{kind.value};")
    out += [
        "",
        "typedef struct MPI_Status {",
    ]
    for name, ctype in AbiStatus._fields_:
        length = getattr(ctype, "_length_", None)
        out.append(f"    int {name}[{length}];" if length else f"    int {name};")
    out += [
        "} MPI_Status;",
        "",
        "typedef void MPI_ABI_Attr_callback(void);",
        "",
    ]
    for row in rows:
        kind = _HANDLE_KINDS.get(row.kind)
        if kind is not None:
            value = f"((MPI_{kind.value}){row.value:#x})"
        elif row.kind == ATTR_CALLBACK_KIND:
            value = f"((MPI_ABI_Attr_callback *){row.value:#x})"
        else:
            value = _c_literal(row.value)
        out.append(f"#define {row.name} {value}")
    out += ["", "#endif /* MPI_ABI_H */", ""]
    return "\n".join(out)


def cmd_gen_header() -> str:
    return render_c_header()


def cmd_diff(text_a: str, text_b: str) -> list[str]:
    try:
        return diff_manifests(parse_manifest(text_a), parse_manifest(text_b))
    except ValueError as exc:
        raise UsageError(f"bad manifest: {exc}") from None


def cmd_demo(program: str, backend: Optional[str] = None, ranks: int = 4, seed: int = 0) -> str:
    from .programs import PROGRAMS, run_program

    name = default_backend_name(backend)
    if name not in backend_names():
        raise UsageError(f"unknown backend {name!r} (from {'--backend' if backend else BACKEND_ENV}); choose from {', '.join(backend_names())}")
    names = list(PROGRAMS) if program == "all" else [program]
    unknown = [p for p in names if p not in PROGRAMS]
    if unknown:
        raise UsageError(f"unknown program {unknown[0]!r}; choose from all, {', '.join(PROGRAMS)}")
    if ranks < 1:
        raise UsageError("--ranks must be >= 1")
    lines = []
    for p in names:
        run_program(p, name, ranks, seed)
        lines.append(f"{p}: ok ({name} backend, {ranks} ranks)")
    return "\n".join(lines)


# ----------------------------------------------------------------------
# argument handling


def _write(text: str, out: Optional[str]) -> None:
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def _build_parser() -> argparse.ArgumentParser:
    from .shim import library_identity

    parser = argparse.ArgumentParser(prog="abidump", description="Inspect the standard MPI ABI tables.")
    parser.add_argument("--version", action="version", version=library_identity())
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("dump", help="print the constants manifest")
    p.add_argument("--out", help="write to FILE instead of stdout")

    p = sub.add_parser("classify", help="classify handle values")
    p.add_argument("values", nargs="+", help="hex (0x...) or decimal values")
    p.add_argument("--extended", action="store_true", help="also decode the non-normative extension rows")

    p = sub.add_parser("gen-header", help="emit a C header for the ABI")
    p.add_argument("--out", help="write to FILE instead of stdout")

    p = sub.add_parser("diff", help="compare two manifests; exit 1 if they differ")
    p.add_argument("a")
    p.add_argument("b")
    p.add_argument("--out", help="write the report to FILE")

    p = sub.add_parser("demo", help="run an end-to-end program through the shim")
    p.add_argument("program", help="program name, or 'all'")
    p.add_argument("--backend", help=f"{' | '.join(backend_names())} (default: ${BACKEND_ENV}, else int)")
    p.add_argument("--ranks", type=int, default=4)
    p.add_argument("--seed", type=int, default=0)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "dump":
            _write(cmd_dump(), args.out)
        elif args.command == "classify":
            values = [parse_value(v) for v in args.values]  # reject bad input before printing anything
            for v in values:
                print(classify_handle(v, extended=args.extended))
        elif args.command == "gen-header":
            _write(cmd_gen_header(), args.out)
        elif args.command == "diff":
            try:
                texts = [Path(f).read_text() for f in (args.a, args.b)]
            except OSError as exc:
                raise UsageError(str(exc)) from None
            report = cmd_diff(*texts)
            _write("".join(line + "\n" for line in report), args.out)
            return EXIT_FAIL if report else EXIT_OK
        elif args.command == "demo":
            try:
                print(cmd_demo(args.program, args.backend, args.ranks, args.seed))
            except (RankFailure, AssertionError) as exc:
                cause = exc.__cause__ or exc
                print(f"abidump: demo {args.program} failed: {cause!r}", file=sys.stderr)
                return EXIT_FAIL
    except UsageError as exc:
        print(f"abidump: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
