"""Samplers standing in for the optical layer.

A pulse train is a random phase string ``s_0 .. s_l``. Alice's interferometer
is modelled as: pick a delay ``r`` in ``1..l``, then each detected photon
reveals one phase difference ``s_j XOR s_{(j+r) mod (l+1)}``. Weak coherent
pulses carry ``m ~ Poisson(mu)`` photons; in the adversary-favouring model
every photon yields a distinct difference (detection indices drawn without
replacement).

Key bits are indexed 0..l-1 and correspond to the pulses ``q != t`` in
ascending order, where ``t`` is the announced detection; key bit for pulse
``q`` is ``s_t XOR s_q``.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from math import exp, factorial
from typing import Iterator, Optional

import numpy as np

from .gf2 import ObliviousKey, ParityKnowledge, knowledge_from_constraints

IDEAL = "ideal"
WEAK_COHERENT = "weak-coherent"
HONEST = "honest"
MALICIOUS = "malicious"


@dataclass(frozen=True)
class SourceParams:
    """Photon source and how Alice reports detections.

    ``reporting="malicious"`` means Alice only claims a detection when she
    saw at least two photons.
    """

    kind: str = IDEAL
    mu: float = 0.1
    reporting: str = HONEST

    def __post_init__(self):
        if self.kind not in (IDEAL, WEAK_COHERENT):
            raise ValueError(f"unknown source kind {self.kind!r}")
        if self.reporting not in (HONEST, MALICIOUS):
            raise ValueError(f"unknown reporting rule {self.reporting!r}")
        if self.kind == IDEAL and self.reporting == MALICIOUS:
            raise ValueError("a single-photon source never yields two photons")
        if self.kind == WEAK_COHERENT and not self.mu > 0:
            raise ValueError("mu must be positive for a weak coherent source")

    @property
    def min_photons(self) -> int:
        return 2 if self.reporting == MALICIOUS else 1

    def to_dict(self) -> dict:
        return {"kind": self.kind, "mu": self.mu, "reporting": self.reporting}


def photon_pmf(m: int, mu: float) -> float:
    return mu**m / factorial(m) * exp(-mu)


def acceptance_probability(mu: float, min_photons: int) -> float:
    """P(m >= min_photons) for a Poisson source."""
    return 1.0 - sum(photon_pmf(i, mu) for i in range(min_photons))


def conditional_photon_probability(m: int, mu: float, min_photons: int) -> float:
    """P(m photons | at least ``min_photons`` detected)."""
    if m < min_photons:
        return 0.0
    return photon_pmf(m, mu) / acceptance_probability(mu, min_photons)


@dataclass(frozen=True, eq=False)
class PulseTrain:
    phases: np.ndarray

    def __post_init__(self):
        if self.phases.size < 2:
            raise ValueError("a pulse train needs at least two pulses")

    @property
    def l(self) -> int:
        return int(self.phases.size) - 1


@dataclass(frozen=True)
class MeasurementOutcome:
    shift_r: int
    detections: tuple[int, ...]
    announced_t: Optional[int]
    photons: int = 1


def gen_train(l: int, rng: np.random.Generator) -> PulseTrain:
    if l < 1:
        raise ValueError("block length must be >= 1")
    return PulseTrain(rng.integers(0, 2, l + 1, dtype=np.uint8))


def _photon_number(params: SourceParams, rng: np.random.Generator) -> int:
    if params.kind == IDEAL:
        return 1
    return int(rng.poisson(params.mu))


def _outcome(m: int, l: int, rng: np.random.Generator) -> MeasurementOutcome:
    n_pulses = l + 1
    r = int(rng.integers(1, l + 1))
    dets = rng.choice(n_pulses, size=min(m, n_pulses), replace=False)
    t = int(dets[rng.integers(dets.size)])
    return MeasurementOutcome(r, tuple(sorted(int(j) for j in dets)), t, m)


def measure(train: PulseTrain, params: SourceParams, rng: np.random.Generator) -> Optional[MeasurementOutcome]:
    """Alice's measurement of one train; None when she reports no detection."""
    m = _photon_number(params, rng)
    if m < params.min_photons:
        return None
    return _outcome(m, train.l, rng)


def measure_until_detected(l: int, params: SourceParams, rng: np.random.Generator) -> tuple[PulseTrain, MeasurementOutcome]:
    """Discard trains until Alice reports a detection.

    Phases are independent of the photon number, so only the accepted
    train's phases are drawn.
    """
    while True:
        m = _photon_number(params, rng)
        if m >= params.min_photons:
            return gen_train(l, rng), _outcome(m, l, rng)


def key_index(pulse: int, t: int) -> int:
    """Key position of the bit ``s_t XOR s_pulse``."""
    if pulse == t:
        raise ValueError("the announced pulse carries no key bit")
    return pulse if pulse < t else pulse - 1


def _block_constraints(l: int, r: int, t: int, detections, parity_of) -> list:
    cons = []
    for j in detections:
        j2 = (j + r) % (l + 1)
        idx = [key_index(q, t) for q in (j, j2) if q != t]
        cons.append((idx, parity_of(j, j2)))
    return cons


def block_key_from_measurement(train: PulseTrain, out: MeasurementOutcome) -> ObliviousKey:
    """The ``l``-bit key block Bob holds after Alice announces ``t``, with Alice's view of it."""
    if out.announced_t is None or not out.detections:
        raise ValueError("measurement has no announced detection")
    s, t, l = train.phases, out.announced_t, train.l
    bits = np.delete(s ^ s[t], t).astype(np.uint8)
    cons = _block_constraints(l, out.shift_r, t, out.detections, lambda a, b: int(s[a] ^ s[b]))
    return ObliviousKey(bits, knowledge_from_constraints(l, cons))


@lru_cache(maxsize=None)
def block_pattern(l: int, r: int, t: int, detections: tuple[int, ...]) -> tuple[tuple[int, ...], tuple[tuple[int, ...], ...]]:
    """Which key positions Alice knows and which are parity-linked, for a given outcome.

    The structure does not depend on the phases, so it is computed once with
    all-zero parities and cached.
    """
    kn = knowledge_from_constraints(l, _block_constraints(l, r, t, detections, lambda a, b: 0))
    groups = tuple(tuple(sorted(g)) for g in kn.groups())
    return tuple(kn.known_dict()), groups


def _conditional_poisson(n: int, mu: float, min_photons: int, rng: np.random.Generator) -> np.ndarray:
    out = np.empty(0, dtype=np.int64)
    p_acc = acceptance_probability(mu, min_photons)
    while out.size < n:
        batch = int((n - out.size) / p_acc * 1.2) + 16
        draw = rng.poisson(mu, batch)
        out = np.concatenate([out, draw[draw >= min_photons]])
    return out[:n]


def sample_blocks(nblocks: int, l: int, params: SourceParams, rng: np.random.Generator) -> tuple[ObliviousKey, np.ndarray]:
    """Accepted key blocks from ``nblocks`` trains, concatenated.

    Equivalent in distribution to repeating :func:`measure_until_detected`
    and :func:`block_key_from_measurement`, but vectorized. Returns the key
    and the announced ``t`` of each train.
    """
    n_pulses = l + 1
    phases = rng.integers(0, 2, (nblocks, n_pulses), dtype=np.uint8)
    if params.kind == IDEAL:
        m = np.ones(nblocks, dtype=np.int64)
    else:
        m = np.minimum(_conditional_poisson(nblocks, params.mu, params.min_photons, rng), n_pulses)
    r = rng.integers(1, l + 1, nblocks)
    perm = np.argsort(rng.random((nblocks, n_pulses)), axis=1)
    pick = (rng.random(nblocks) * m).astype(np.int64)
    rows = np.arange(nblocks)
    t = perm[rows, pick]

    full = phases ^ phases[rows, t][:, None]
    keep = np.arange(n_pulses)[None, :] != t[:, None]
    bits = full[keep].reshape(nblocks, l).ravel()

    n = nblocks * l
    known = np.zeros(n, dtype=bool)
    group = np.full(n, -1, dtype=np.int64)
    single = np.flatnonzero(m == 1)
    q = (t[single] + r[single]) % n_pulses
    pos = np.where(q < t[single], q, q - 1)
    known[single * l + pos] = True
    for b in np.flatnonzero(m > 1):
        dets = tuple(sorted(perm[b, : m[b]].tolist()))
        kpos, groups = block_pattern(l, int(r[b]), int(t[b]), dets)
        base = b * l
        for p in kpos:
            known[base + p] = True
        for g in groups:
            for p in g:
                group[base + p] = base + g[0]
    offset = np.zeros(n, dtype=np.uint8)
    g = np.flatnonzero(group >= 0)
    offset[g] = bits[g] ^ bits[group[g]]
    return ObliviousKey(bits, ParityKnowledge.from_arrays(known, bits, group, offset)), t


def rrdps_substrings(length: int, l: int, params: SourceParams, rng: np.random.Generator) -> Iterator[ObliviousKey]:
    """Endless stream of ``length``-bit keys built from ``(l+1)``-pulse trains."""
    if length % l:
        raise ValueError("substring length must be a multiple of the block length")
    while True:
        key, _ = sample_blocks(length // l, l, params, rng)
        yield key


def gen_generic_raw_key(n: int, p: float, rng: np.random.Generator) -> ObliviousKey:
    """Raw oblivious key where Alice knows each bit independently with probability ``p``."""
    if not 0 < p < 1:
        raise ValueError("p must lie in (0, 1)")
    bits = rng.integers(0, 2, n, dtype=np.uint8)
    known = rng.random(n) < p
    return ObliviousKey.from_known_mask(bits, known)
