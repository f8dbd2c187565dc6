# %% [markdown]
# # Linearised flow and the Malliavin matrix
#
# The Jacobian of the discrete solution map is checked against finite
# differences on a frozen noise path. Then we look at how strongly the noise
# pushes each direction in state space.

# %%
import numpy as np

from ns2dlab import FORCING_SPANNING, IntegratorConfig, NoiseModel, get_grid, simulate
from ns2dlab.spectral import random_field
from ns2dlab.tangent import LinearizedFlow, jacobian_apply, malliavin_matrix

g = get_grid(5)
cfg = IntegratorConfig(0.3, 0.01, seed=3)
noise = NoiseModel.uniform(FORCING_SPANNING, 1.0)
tr = simulate(g, random_field(g, np.random.default_rng(3), 2.0), 1.0, cfg, noise)
flow = LinearizedFlow(tr)
xi = random_field(g, np.random.default_rng(4), 1.0)
Jxi = jacobian_apply(flow, xi)
for eps in (1e-2, 1e-3, 1e-4):
    pert = simulate(g, tr.x0 + eps * xi, 1.0, cfg, noise, increments=tr.increments).states[-1]
    print(f"eps={eps:.0e}  |FD - J xi| = {np.linalg.norm((pert - tr.states[-1]) / eps - Jxi):.2e}")

# %% [markdown]
# The spectrum of `M` shows a few large eigenvalues from the forced
# directions, then a long tail of directions that the noise reaches only
# through the nonlinearity.

# %%
ev = np.linalg.eigvalsh(malliavin_matrix(flow).matrix)[::-1]
for i in (0, 3, 4, 10, 30, len(ev) - 1):
    print(f"eigenvalue {i:3d}: {ev[i]:.3e}")

# %% [markdown]
# Without the nonlinearity only the four forced directions get anything:

# %%
lin = simulate(g, tr.x0, 1.0, IntegratorConfig(0.3, 0.01, seed=3, nonlinear=False), noise)
ev_lin = np.linalg.eigvalsh(malliavin_matrix(LinearizedFlow(lin)).matrix)
print("nonzero eigenvalues without the nonlinearity:", int(np.sum(ev_lin > 1e-14)))
