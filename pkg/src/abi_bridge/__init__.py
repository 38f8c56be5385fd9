"""A standard MPI ABI model plus a translation shim onto two mock backends.

* :mod:`abi_bridge.abi_model`: handle codes, status record, constants.
* :mod:`abi_bridge.mpi`: the standard constants as module attributes.
* :mod:`abi_bridge.simcore`: the in-process message-passing engine.
* :mod:`abi_bridge.backend_int` / :mod:`abi_bridge.backend_token`: two
  native ABIs over that engine, found via :func:`backend_registry_get`.
* :mod:`abi_bridge.shim`: standard-ABI calls forwarded to a backend.
"""

from .backend_api import NativeError, backend_registry_get
from .shim import InvalidHandleError, MPIError, Shim, library_identity

__version__ = "0.1.0"

__all__ = ["Shim", "MPIError", "InvalidHandleError", "NativeError", "backend_registry_get", "library_identity", "__version__"]
