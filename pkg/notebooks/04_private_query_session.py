# %% [markdown]
# # A full private query
#
# Bob encrypts the database with the folded key; Alice decodes the one item
# she can. The transcript records what else she could deduce.

# %%
import numpy as np

from qpq_sim.protocol import Database, SessionConfig, run_session
from qpq_sim.sources import MALICIOUS, WEAK_COHERENT, SourceParams

db = Database.random(40, np.random.default_rng(3))

# %%
tr = run_session(SessionConfig("improved", N=40, l=8, k=4, i=17, seed=5), db)
print(tr.to_json())
print("true item:", db.items[16])

# %% [markdown]
# The single-train protocol with a multi-photon cheat leaks more than one item.

# %%
cheat = SourceParams(WEAK_COHERENT, 0.1, MALICIOUS)
tr = run_session(SessionConfig("original", N=40, i=17, source=cheat, seed=6), db)
print("known items:", tr.known_items)
print("parities:", tr.parity_items)

# %% [markdown]
# Generic oblivious keys go through block sifting first.

# %%
tr = run_session(SessionConfig("generic", N=40, l=10, k=6, i=2, p=0.25, seed=7), db)
print("discarded blocks:", tr.discarded_blocks, "known per step:", tr.trace.n_known)
