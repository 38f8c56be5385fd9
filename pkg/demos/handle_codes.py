"""
Reading a standard handle value
===============================

Every predefined handle fits in ten bits, and the leading bits say what
kind of object it is.  Datatypes with a fixed size carry log2 of that
size in three more bits, so a size query needs no table at all.
"""

from abi_bridge.abi_model import classify_handle, datatype_fixed_size, lookup_predefined, predefined_rows
from abi_bridge.abi_model.handles import HandleKind

# A few values, decoded.  Zero is reserved so that a handle that was never
# assigned is caught instead of being mistaken for a real object, and
# anything at or above 1024 belongs to an object created at run time.
for value in (0x000, 0x021, 0x101, 0x250, 0x247, 0x3FF, 5000):
    print(f"{value:#06x}  {classify_handle(value)}")
print()

# The kind is the prefix: ops start 00, other opaque objects 01, datatypes 10.
for name in ("MPI_SUM", "MPI_COMM_WORLD", "MPI_REQUEST_NULL", "MPI_INT64_T"):
    v = lookup_predefined(name)
    print(f"{name:18s} {v:010b}  prefix {v >> 8:02b}")
print()

# Fixed-size datatypes: prefix 1001, then the size exponent in bits 3-5.
for row in predefined_rows(HandleKind.DATATYPE):
    size = datatype_fixed_size(row.value)
    if size is not None:
        print(f"{row.name:20s} {row.value:#05x}  exponent {(row.value >> 3) & 7} -> {size} bytes")
