# %% [markdown]
# # Oblivious keys and what Alice knows
#
# Bob holds every key bit. Alice holds a partial view: some bits outright,
# plus parities tying other bits together. This notebook builds such views
# from constraints, folds two keys together, and cross-checks the fast
# model against plain Gaussian elimination.

# %%
import numpy as np

from qpq_sim.gf2 import (
    LinearSpanOracle,
    ObliviousKey,
    combine_xor,
    cyclic_shift,
    knowledge_from_constraints,
    oracle_equivalent,
)

# %% [markdown]
# A two-photon detection leaves Alice with one bit and one parity.

# %%
kn = knowledge_from_constraints(6, [({4}, 0), ({3, 5}, 1)])
print(kn)
print("x3 ^ x5 =", kn.parity(3, 5), " x3 ^ x4 =", kn.parity(3, 4))

# %% [markdown]
# Chains collapse once any member is pinned.

# %%
print(knowledge_from_constraints(4, [({0, 1}, 1), ({1, 2}, 0), ({0}, 1)]))

# %% [markdown]
# XOR of two independent keys: a bit survives only if it is known in both,
# and a pair stays linked only if its parity is fixed in both.

# %%
rng = np.random.default_rng(0)
bits_a = rng.integers(0, 2, 6)
a = ObliviousKey(bits_a, knowledge_from_constraints(6, [([4], bits_a[4]), ([3, 5], bits_a[3] ^ bits_a[5])]))
b = ObliviousKey.from_known_mask(rng.integers(0, 2, 6), [False, False, False, True, True, True])
c = combine_xor(a, b)
c.check_consistency()
print(c.knowledge)

# %%
print(cyclic_shift(c, 2).knowledge)

# %% [markdown]
# For singleton and pairwise constraints the partition model is exact.
# A quick randomized comparison against the elimination oracle:

# %%
from qpq_sim.verify import random_instance

bad = 0
for _ in range(2000):
    n, _, cons = random_instance(rng, 16, 8)
    bad += not oracle_equivalent(knowledge_from_constraints(n, cons), LinearSpanOracle(n, cons))
print("disagreements:", bad)
