"""Standard-ABI constants as module attributes (``mpi.MPI_COMM_WORLD``...).

The moral equivalent of including the standard ``mpi.h``: every handle row,
integer constant and attribute callback from :mod:`abi_bridge.abi_model`.
"""

from .abi_model.constants import SHIPPED, attribute_callback_rows
from .abi_model.handles import HANDLE_ROWS

_g = globals()
for _row in HANDLE_ROWS:
    _g[_row.name] = _row.value
for _fam, _name, _value in SHIPPED.items():
    _g[_name] = _value
for _name, _value in attribute_callback_rows():
    _g[_name] = _value

del _g, _row, _fam, _name, _value
