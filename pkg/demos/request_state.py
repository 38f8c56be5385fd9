"""
Keeping ialltoallw's datatype vectors alive
===========================================

``ialltoallw`` takes arrays of datatype handles.  The shim has to convert
them to native handles, and the backend may read the converted arrays at
any time until the request completes.  So they are parked with the
request and released only at completion.  Releasing them early is a real
bug class; the shim can simulate it.
"""

import numpy as np

from abi_bridge import mpi as M
from abi_bridge import simcore
from abi_bridge.shim import EARLY_VECTOR_FREE, MPIError, Shim

NRANKS = 3


def exchange(fault=None):
    world = simcore.world_create(NRANKS, seed=3)

    def body(rank):
        mpi = Shim("token", fault=fault)
        mpi.init(world, rank)
        send = np.arange(NRANKS, dtype=np.int32) + 10 * rank
        recv = np.zeros(NRANKS, np.int32)
        counts, displs, types = [1] * NRANKS, [4 * k for k in range(NRANKS)], [M.MPI_INT32_T] * NRANKS
        req = mpi.ialltoallw(send, counts, displs, types, recv, counts, displs, types, M.MPI_COMM_WORLD)
        held = mpi.request_state_count()
        try:
            mpi.wait(req)
            outcome = recv.tolist()
        except MPIError as exc:
            outcome = str(exc)
        left = mpi.request_state_count()
        mpi.finalize()
        return held, left, outcome

    return world.run(body)


# Normal operation: one piece of state per pending request, none afterwards.
for rank, (held, left, outcome) in enumerate(exchange()):
    print(f"rank {rank}: state held {held}, after wait {left}, received {outcome}")
print()

# With the vectors released right after posting, whichever exchange runs
# late reads null datatypes and fails.
for rank, (held, left, outcome) in enumerate(exchange(EARLY_VECTOR_FREE)):
    print(f"rank {rank}: state held {held}, after wait {left}, outcome {outcome}")
