# %% [markdown]
# # Folding substrings with low shifts
#
# An honest user shifts every substring so her target index stays known.
# A greedy user instead picks whichever small shift keeps the most bits.
# Either way the known count collapses within a handful of additions.

# %%
import numpy as np

from qpq_sim.lsa import lsa_honest, lsa_malicious_greedy, shift_add_random, generic_sifted_substrings
from qpq_sim.sources import MALICIOUS, WEAK_COHERENT, SourceParams, gen_generic_raw_key, rrdps_substrings

rng = np.random.default_rng(2)
n, l = 2504, 8

# %%
final, plan, trace = lsa_honest(rrdps_substrings(n, l, SourceParams(), rng), 100, l, rng, stop=1)
print("honest shifts", plan.shifts, "known per step", trace.n_known)

# %%
src = SourceParams(WEAK_COHERENT, 0.1, MALICIOUS)
greedy = lsa_malicious_greedy(rrdps_substrings(n, l, src, rng), l, stop=1, snapshots=True)
for k, nk, mk in zip(greedy.k, greedy.n_known, greedy.n_correlated):
    print(f"k={k}: known={nk:5d} correlated={mk:5d}")

# %% [markdown]
# A strip of the first 80 indices after each step (`.` unknown, `#` known,
# `~` parity-linked):

# %%
glyph = np.array([".", "#", "~"])
for snap in greedy.snapshots:
    print("".join(glyph[snap[:80]]))

# %% [markdown]
# Without the one-bit-per-block structure, even the best unrestricted
# shift leaves several bits known after 24 additions.

# %%
def raw(n, p):
    while True:
        yield gen_generic_raw_key(n, p, rng)

wide = shift_add_random(raw(10_000, 0.25), "full", choice="optimal", max_k=24)
low = lsa_malicious_greedy(generic_sifted_substrings(10_000, 10, 0.25, rng), 10, stop=None, max_k=24)
print("unrestricted:", wide.n_known[-6:])
print("low l=10:    ", low.n_known[-6:])
