# %% [markdown]
# # Which modes does the noise reach?
#
# The noise acts on a handful of Fourier modes. The nonlinearity moves energy
# to sums `l + j` of modes, but only when `l` and `j` are not parallel and
# have different lengths. This notebook classifies a few forcing sets and
# watches the reachable set grow.

# %%
from ns2dlab.forcing import FORCING_SPANNING, FORCING_AXES, FORCING_EVEN, classify, lattice_ball, zinfty_ball, zn_step

for name, z0 in [("two directions, two lengths", FORCING_SPANNING),
                 ("axis modes only", FORCING_AXES),
                 ("even modes", FORCING_EVEN)]:
    r = classify(z0)
    print(f"{name:28s} -> {r.classification.value:17s} gcd={r.gcd_det} basis={r.lattice_basis}")

# %% [markdown]
# The axis modes all have length one, so every interaction between them is
# forbidden and the dynamics never leave the four forced modes. The even
# modes span only the sublattice `2Z^2`, so fields stay periodic with half
# the box period:

# %%
print(classify(FORCING_EVEN).to_dict()["periods_over_2pi"])

# %% [markdown]
# Growth of the reachable set, one interaction at a time:

# %%
layer = set(FORCING_SPANNING)
seen = set(layer)
for n in range(1, 7):
    layer = set(zn_step(layer, FORCING_SPANNING)) - seen
    seen |= layer
    print(f"step {n}: {len(layer):3d} new modes, {len(seen):3d} in total")

# %% [markdown]
# In the end the walk fills the whole integer ball:

# %%
for R in (3, 6, 10):
    print(R, len(zinfty_ball(FORCING_SPANNING, R)), len(lattice_ball(FORCING_SPANNING, R)))
