# %% [markdown]
# # Pulse trains and key blocks
#
# Each train of `l + 1` pulses gives Bob an `l`-bit block. With a single
# photon Alice learns one bit of it; with a weak coherent pulse and a
# cheating detector she learns a bit plus parities.

# %%
import numpy as np

from qpq_sim.sources import (
    MALICIOUS,
    WEAK_COHERENT,
    MeasurementOutcome,
    PulseTrain,
    SourceParams,
    block_key_from_measurement,
    conditional_photon_probability,
    measure_until_detected,
    sample_blocks,
)

rng = np.random.default_rng(1)

# %%
train = PulseTrain(np.array([0, 1, 1, 0, 0, 1, 1], dtype=np.uint8))
for dets in [(2,), (2, 3), (2, 4)]:
    key = block_key_from_measurement(train, MeasurementOutcome(2, dets, 2, len(dets)))
    print(dets, key.knowledge)

# %% [markdown]
# Photon-number statistics after Alice's reporting rule.

# %%
mu = 0.1
print("P(m=2 | report needs 2+) =", round(conditional_photon_probability(2, mu, 2), 4))
print("P(m=1 | report needs 1+) =", round(conditional_photon_probability(1, mu, 1), 4))

src = SourceParams(WEAK_COHERENT, mu, MALICIOUS)
photons = [measure_until_detected(8, src, rng)[1].photons for _ in range(20_000)]
print("empirical:", np.mean(np.array(photons) == 2))

# %% [markdown]
# The vectorized sampler builds many blocks at once.

# %%
key, t = sample_blocks(1000, 8, src, rng)
key.check_consistency()
print(key, "announced t histogram:", np.bincount(t, minlength=9))
