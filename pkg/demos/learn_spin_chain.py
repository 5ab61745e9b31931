"""
Learning <Z_i(t)> of an XY chain from random product inputs.

The training set is 3000 random stabilizer product states evolved for t = 5,
each labelled with 500-shot estimates of every <Z_i>. One LASSO model per
site is then asked about a state it never saw: a single domain wall.
"""
import numpy as np

from qproc.experiments import heldout_rmse, random_test_states, train_chain
from qproc.fermion import ChainModel, z_expectations
from qproc.states import domain_wall

# %%
n, t = 20, 5.0
chain = ChainModel.homogeneous("xy", n)
models = train_chain(chain, t, N=3000, shots=500, seed=0)
print("held-out rmse", round(heldout_rmse(models, chain, t, random_test_states(n, 200, 0)), 4))

# %%
wall = domain_wall(n).bloch
exact = z_expectations(chain, t, wall)[0]
pred = np.array([m.predict(wall) for m in models])
for i in range(n):
    print(f"site {i + 1:2d}  exact {exact[i]:+.3f}  predicted {pred[i]:+.3f}")
print("max error", np.abs(pred - exact).max().round(3))
