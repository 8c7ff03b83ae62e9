# %% [markdown]
# # Recovering the whole database
#
# Against the single-train protocol, a user who only reports multi-photon
# detections learns a bit and a parity per query. Choosing where to aim
# each query lets her stitch the parities together.

# %%
import numpy as np

from qpq_sim.attack import run_recovery
from qpq_sim.sources import MALICIOUS, WEAK_COHERENT, SourceParams

src = SourceParams(WEAK_COHERENT, 0.1, MALICIOUS)
n = 900

# %%
opt = run_recovery(n, src, np.random.default_rng(0))
rnd = run_recovery(n, src, np.random.default_rng(0), strategy="random")
print("aimed queries:", opt.queries, "correct:", opt.correct)
print("random queries:", rnd.queries, "correct:", rnd.correct)

# %%
for q in (50, 100, 200, 300, 400):
    if q <= len(opt.growth):
        print(f"after {q:3d} queries: {opt.growth[q - 1]:4d} items known")
