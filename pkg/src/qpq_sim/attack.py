"""Database recovery against the single-train protocol with a weak coherent source.

Alice reports a detection only when she sees two or more photons, so each
query leaves her with one known key bit plus parity information. She picks
the shift that maximises the number of database items determined after
merging the new constraints with everything learnt so far, and repeats
until the whole database is known.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .gf2 import ContradictionError, ParityKnowledge, cyclic_shift
from .protocol import encrypt_database
from .sources import MALICIOUS, WEAK_COHERENT, SourceParams, block_key_from_measurement, measure_until_detected

KNOWN = -1


class AdversaryState:
    """Alice's accumulated GF(2) knowledge of the database items.

    ``comp[q]`` is ``KNOWN`` or the label of the parity component holding
    ``q``; ``pot[q]`` is the value of ``x_q`` (known) or ``x_q XOR x_label``.
    Merges relabel the smaller component, so reads stay vectorized.
    """

    def __init__(self, n: int):
        self.n = n
        self.comp = np.arange(n, dtype=np.int64)
        self.pot = np.zeros(n, dtype=np.uint8)
        self.query_count = 0

    @property
    def n_known(self) -> int:
        return int(np.count_nonzero(self.comp == KNOWN))

    @property
    def complete(self) -> bool:
        return self.n_known == self.n

    def component_sizes(self) -> np.ndarray:
        return np.bincount(self.comp[self.comp >= 0], minlength=self.n)

    def _relabel(self, src: int, dst: int, flip: int) -> None:
        members = self.comp == src
        self.comp[members] = dst
        if flip:
            self.pot[members] ^= 1

    def add_value(self, q: int, v: int) -> None:
        c = self.comp[q]
        if c == KNOWN:
            if self.pot[q] != v:
                raise ContradictionError(f"x_{q} already known as {self.pot[q]}")
            return
        self._relabel(c, KNOWN, int(self.pot[q]) ^ v)

    def add_parity(self, a: int, b: int, p: int) -> None:
        ca, cb = int(self.comp[a]), int(self.comp[b])
        flip = int(self.pot[a]) ^ int(self.pot[b]) ^ p
        if ca == cb:
            if flip:
                raise ContradictionError(f"x_{a} ^ x_{b} already fixed")
            return
        if cb == KNOWN or (ca != KNOWN and np.count_nonzero(self.comp == ca) < np.count_nonzero(self.comp == cb)):
            ca, cb = cb, ca
        # fold cb into ca
        self._relabel(cb, ca, flip)

    def values(self) -> np.ndarray:
        """Reconstructed database (only meaningful once complete)."""
        return self.pot.copy()

    def to_knowledge(self) -> ParityKnowledge:
        known = self.comp == KNOWN
        return ParityKnowledge.from_arrays(known, self.pot, np.where(known, -1, self.comp), self.pot)


@dataclass
class QueryShape:
    """Alice's view of one query key: rows of (key position, cluster).

    Cluster 0 holds individually known positions; each parity group gets
    its own cluster id.
    """

    positions: np.ndarray
    clusters: np.ndarray

    @classmethod
    def from_knowledge(cls, kn: ParityKnowledge) -> "QueryShape":
        pos, cl = [], []
        for q in kn.known_dict():
            pos.append(q)
            cl.append(0)
        for gid, g in enumerate(kn.groups(), start=1):
            for q in g:
                pos.append(q)
                cl.append(gid)
        return cls(np.array(pos, dtype=np.int64), np.array(cl, dtype=np.int64))


def alignment_gains(state: AdversaryState, shape: QueryShape) -> np.ndarray:
    """Newly determined items for every cyclic shift ``s`` in ``0..N-1``.

    For each shift, a row's item becomes known if it is linked to a known
    item through its cluster or through an existing component; the gain is
    the total size of the distinct components newly pulled in.
    """
    n = state.n
    rows = shape.positions.size
    idx = (shape.positions[:, None] + np.arange(n)[None, :]) % n
    comps = state.comp[idx]
    sizes = state.component_sizes()
    same_cluster = shape.clusters[:, None] == shape.clusters[None, :]
    in_k = (shape.clusters == 0)[:, None] | (comps == KNOWN)
    eq = comps[:, None, :] == comps[None, :, :]
    link = eq | same_cluster[:, :, None]
    for _ in range(rows):
        in_k = in_k | np.any(in_k[:, None, :] & link, axis=0)
    first = np.ones_like(in_k)
    for r in range(1, rows):
        first[r] = ~np.any(eq[:r, r, :], axis=0)
    counted = in_k & first & (comps != KNOWN)
    gain_rows = np.where(counted, sizes[np.where(comps == KNOWN, 0, comps)], 0)
    return gain_rows.sum(axis=0)


def choose_query(state: AdversaryState, shape: QueryShape, rng: Optional[np.random.Generator] = None,
                 strategy: str = "optimal") -> tuple[int, int]:
    """Pick the shift for this query; returns ``(shift, address)`` with a 1-based address.

    The address is where the first individually known key bit lands. The
    optimal strategy maximises :func:`alignment_gains` and breaks ties by
    smallest address; ``strategy="random"`` picks a uniform shift.
    """
    n = state.n
    j0 = int(shape.positions[np.flatnonzero(shape.clusters == 0)[0]])
    if strategy == "random":
        s = int(rng.integers(n))
    elif strategy == "optimal":
        gains = alignment_gains(state, shape)
        best = np.flatnonzero(gains == gains.max())
        addresses = (j0 + best) % n
        s = int(best[np.argmin(addresses)])
    else:
        raise ValueError(f"unknown strategy {strategy!r}")
    return s, (j0 + s) % n + 1


@dataclass
class RecoveryResult:
    queries: int
    completed: bool
    growth: list[int] = field(default_factory=list)
    correct: bool = False


def run_recovery(n: int, source: SourceParams, rng: np.random.Generator, strategy: str = "optimal",
                 database: Optional[np.ndarray] = None, max_queries: Optional[int] = None) -> RecoveryResult:
    """Query the single-train protocol until every item is determined.

    Each query runs the full exchange: Bob's random ``(N+1)``-pulse train,
    Alice's measurement, her chosen shift, Bob's one-time-pad ciphertext,
    and Alice's decoding. ``growth[q]`` is the number of known items after
    ``q + 1`` queries. Stops with ``completed=False`` at ``max_queries``
    (default ``10 N``).
    """
    if source.kind != WEAK_COHERENT or source.reporting != MALICIOUS:
        raise ValueError("the attack needs a weak coherent source with multi-photon-only reporting")
    db = rng.integers(0, 2, n, dtype=np.uint8) if database is None else np.asarray(database, dtype=np.uint8)
    max_queries = 10 * n if max_queries is None else max_queries
    state = AdversaryState(n)
    growth = []
    while not state.complete and state.query_count < max_queries:
        train, out = measure_until_detected(n, source, rng)
        key = block_key_from_measurement(train, out)
        shape = QueryShape.from_knowledge(key.knowledge)
        s, _ = choose_query(state, shape, rng, strategy)
        final = cyclic_shift(key, s)
        c = encrypt_database(db, final)
        kn = final.knowledge
        for q, v in kn.known_dict().items():
            state.add_value(q, int(c[q]) ^ v)
        for g in kn.groups():
            members = list(g)
            rep = members[0]
            for q in members[1:]:
                state.add_parity(rep, q, int(c[rep] ^ c[q]) ^ g[rep] ^ g[q])
        state.query_count += 1
        growth.append(state.n_known)
    done = state.complete
    return RecoveryResult(state.query_count, done, growth, bool(done and np.array_equal(state.values(), db)))
