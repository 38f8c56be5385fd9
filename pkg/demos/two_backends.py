"""
One program, two native ABIs
============================

The shim presents standard handle values to the application and converts
them for whichever backend sits underneath.  The integer backend encodes
datatype sizes in its handle bits; the token backend hands out opaque
words that name descriptor records.  The application cannot tell.
"""

import numpy as np

from abi_bridge import mpi as M
from abi_bridge import simcore
from abi_bridge.abi_model.handles import HandleKind
from abi_bridge.programs import run_program
from abi_bridge.shim import Shim

# Where do MPI_COMM_WORLD and MPI_INT32_T end up on each side?
for backend in ("int", "token"):
    shim = Shim(backend)
    shim.init(simcore.world_create(1), 0)
    comm = shim.convert_std_to_native(HandleKind.COMM, M.MPI_COMM_WORLD)
    dt = shim.convert_std_to_native(HandleKind.DATATYPE, M.MPI_INT32_T)
    print(f"{backend:5s}  MPI_COMM_WORLD {M.MPI_COMM_WORLD:#x} -> {comm:#x}   MPI_INT32_T {M.MPI_INT32_T:#x} -> {dt:#x}")
    print(f"       type_size(MPI_INT32_T) = {shim.type_size(M.MPI_INT32_T)}")
    shim.finalize()
print()

# The same user-level exchange, run on both.  Rank 0 receives from
# whoever is ready first, so the status carries standard wildcards out.
def wildcard_gather(backend, nranks=4):
    world = simcore.world_create(nranks, seed=7)

    def body(rank):
        mpi = Shim(backend)
        mpi.init(world, rank)
        out = None
        if rank:
            mpi.send(np.array([rank * rank], np.int32), 1, M.MPI_INT32_T, 0, 40 + rank, M.MPI_COMM_WORLD)
        else:
            buf = np.zeros(1, np.int32)
            got = []
            for _ in range(nranks - 1):
                st = mpi.recv(buf, 1, M.MPI_INT32_T, M.MPI_ANY_SOURCE, M.MPI_ANY_TAG, M.MPI_COMM_WORLD)
                got.append((st.source, st.tag, int(buf[0])))
            out = sorted(got)
        mpi.finalize()
        return out

    return world.run(body)[0]


for backend in ("int", "token"):
    print(backend, wildcard_gather(backend))
print()

# The packaged programs make the same comparison for every feature.
for name in ("truncation", "comm_dup_isolation", "allreduce"):
    same = run_program(name, "int", 4) == run_program(name, "token", 4)
    print(f"{name:20s} identical on both backends: {same}")
