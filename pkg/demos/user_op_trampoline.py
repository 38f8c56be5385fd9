"""
User reductions through the shim
================================

A backend calls a user reduction with its own datatype handle.  The user
code was written against standard handles, so the shim installs one fixed
dispatcher with the backend and translates the handle on the way back in.
"""

import numpy as np

from abi_bridge import mpi as M
from abi_bridge import simcore
from abi_bridge.shim import Shim

NRANKS = 4


def run(backend):
    world = simcore.world_create(NRANKS, seed=1)
    seen = []

    def body(rank):
        mpi = Shim(backend)
        mpi.init(world, rank)

        # an elementwise max of absolute values
        def absmax(invec, inoutvec, count, datatype):
            seen.append(datatype)
            a = np.frombuffer(invec, np.int32, count)
            b = np.frombuffer(inoutvec, np.int32, count)
            np.maximum(np.abs(a), np.abs(b), out=b)

        op = mpi.op_create(absmax, True)
        out = np.zeros(3, np.int32)
        mine = np.array([rank - 2, 3 - 2 * rank, rank], np.int32)
        mpi.allreduce(mine, out, 3, M.MPI_INT32_T, op, M.MPI_COMM_WORLD)
        mpi.op_free(op)
        mpi.finalize()
        return out.tolist()

    results = world.run(body)
    return results[0], sorted({hex(h) for h in seen})


for backend in ("int", "token"):
    result, handles = run(backend)
    print(f"{backend:5s} result {result}  datatype handles seen by the callback: {handles}")

print(f"MPI_INT32_T is {M.MPI_INT32_T:#x} in the standard ABI")
