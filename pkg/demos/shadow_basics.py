"""
Classical shadows of a scrambled three-qubit state.

A random unitary is applied to |000>, every qubit is measured in a random
Pauli basis, and the snapshots are averaged into Pauli expectation values.
"""
import numpy as np
from scipy.stats import unitary_group

from qproc.dense import DenseBackend, DenseChannel, expectation
from qproc.pauli import SparsePauliOp
from qproc.shadows import shadow_estimate
from qproc.states import STAB_BLOCH

# %%
rng = np.random.default_rng(1)
n = 3
backend = DenseBackend(DenseChannel.from_unitary(unitary_group.rvs(2**n, random_state=rng)))
zero = np.tile(STAB_BLOCH[0], (n, 1))
rho = backend.output_state(zero)

# %% one snapshot per row: a stabilizer label code for each qubit
N = 20_000
bases = rng.integers(0, 3, size=(N, n))
snapshots = backend.sample_batch(np.broadcast_to(zero, (N, n, 3)), bases, rng)
print(snapshots[:3])

# %%
for word in ("ZII", "XXI", "YZX"):
    op = SparsePauliOp(n, {word: 1.0})
    print(f"{word}: shadow {shadow_estimate(snapshots, op):+.3f}   exact {expectation(op, rho):+.3f}")
