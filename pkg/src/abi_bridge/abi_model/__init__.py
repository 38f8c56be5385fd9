"""Table-driven model of the standard MPI ABI."""

from .constants import (
    ATTRIBUTE_CALLBACKS,
    ERROR_CLASSES,
    INT_CONSTANT_LIMIT,
    SHIPPED,
    AttributeCallbackConstants,
    IntegerConstantTable,
    Violation,
    attribute_callback_rows,
    error_class_name,
    validate_constant_tables,
)
from .handles import (
    EXTENSION_ROWS,
    HANDLE_ROWS,
    PLACEHOLDER_ROWS,
    PREDEFINED_LIMIT,
    Disposition,
    HandleClassification,
    HandleKind,
    HandleRow,
    classify_handle,
    datatype_fixed_size,
    is_predefined,
    lookup_predefined,
    null_handle_of,
    predefined_rows,
)
from .manifest import ManifestRow, diff_manifests, emit_manifest, manifest_rows, parse_manifest
from .status import AbiStatus, status_get, status_set
from .widths import A32O64, A64O64, AbiWidthProfile

__all__ = [
    "A32O64",
    "A64O64",
    "ATTRIBUTE_CALLBACKS",
    "ERROR_CLASSES",
    "EXTENSION_ROWS",
    "HANDLE_ROWS",
    "INT_CONSTANT_LIMIT",
    "PLACEHOLDER_ROWS",
    "PREDEFINED_LIMIT",
    "SHIPPED",
    "AbiStatus",
    "AbiWidthProfile",
    "AttributeCallbackConstants",
    "Disposition",
    "HandleClassification",
    "HandleKind",
    "HandleRow",
    "IntegerConstantTable",
    "ManifestRow",
    "Violation",
    "attribute_callback_rows",
    "classify_handle",
    "datatype_fixed_size",
    "diff_manifests",
    "emit_manifest",
    "error_class_name",
    "is_predefined",
    "lookup_predefined",
    "manifest_rows",
    "null_handle_of",
    "parse_manifest",
    "predefined_rows",
    "status_get",
    "status_set",
    "validate_constant_tables",
]
