"""End-to-end private query sessions between Alice (user) and Bob (database).

Three variants:

* ``original``: one ``(N+1)``-pulse train gives an ``N``-bit key; Alice
  claims a shift moving her known bit onto the wanted address.
* ``improved``: many short ``(l+1)``-pulse trains, ``k`` substrings folded
  with low shifts.
* ``generic``: a Bernoulli oblivious key, block-sifted, then the same fold.

Addresses are 1-based in the transcript; key and pulse indices are 0-based.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .gf2 import ObliviousKey, concat_keys, cyclic_shift, knowledge_from_constraints
from .lsa import LsaTrace, block_sift, lsa_honest, raw_key_demand
from .sources import (
    MeasurementOutcome,
    PulseTrain,
    SourceParams,
    block_key_from_measurement,
    gen_generic_raw_key,
    measure_until_detected,
    sample_blocks,
)

VARIANTS = ("original", "improved", "generic")


@dataclass(frozen=True, eq=False)
class Database:
    items: np.ndarray

    def __post_init__(self):
        if self.items.size < 1:
            raise ValueError("database needs at least one item")

    @classmethod
    def random(cls, n: int, rng: np.random.Generator) -> "Database":
        return cls(rng.integers(0, 2, n, dtype=np.uint8))

    @classmethod
    def from_bits(cls, bits: Sequence[int]) -> "Database":
        return cls(np.asarray(bits, dtype=np.uint8))

    def __len__(self) -> int:
        return int(self.items.size)

    def padded(self, l: int) -> np.ndarray:
        """Items followed by zeros up to a multiple of ``l``."""
        extra = (-len(self)) % l
        return np.concatenate([self.items, np.zeros(extra, dtype=np.uint8)])


@dataclass(frozen=True)
class SessionConfig:
    variant: str = "improved"
    N: int = 64
    l: int = 8
    k: int = 8
    i: int = 1
    source: SourceParams = field(default_factory=SourceParams)
    p: float = 0.25
    seed: int = 0

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ValueError(f"unknown variant {self.variant!r}")
        if not 1 <= self.i <= self.N:
            raise ValueError("address i must satisfy 1 <= i <= N")
        if self.k < 1:
            raise ValueError("k must be >= 1")
        if self.variant != "original" and self.l < 2:
            raise ValueError("block length l must be >= 2")
        if self.variant == "generic" and not 0 < self.p < 1:
            raise ValueError("p must lie in (0, 1)")


@dataclass
class ProtocolTranscript:
    """Everything exchanged in one session plus Alice's resulting knowledge of the database."""

    variant: str
    n_items: int
    address: int
    ciphertext: np.ndarray
    recovered: dict[int, int]
    known_items: dict[int, int]
    parity_items: list[tuple[int, int, int]]
    announced_t: list[int] = field(default_factory=list)
    discarded_blocks: list[int] = field(default_factory=list)
    shifts: list[int] = field(default_factory=list)
    key_position: Optional[int] = None
    trace: Optional[LsaTrace] = None
    final_known_bits: int = 0
    final_correlated_bits: int = 0
    flags: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "variant": self.variant,
            "n_items": self.n_items,
            "address": self.address,
            "announced_t": [int(t) for t in self.announced_t],
            "discarded_blocks": [int(b) for b in self.discarded_blocks],
            "shifts": [int(s) for s in self.shifts],
            "key_position": self.key_position,
            "ciphertext": "".join(map(str, self.ciphertext.tolist())),
            "recovered": {str(a): v for a, v in sorted(self.recovered.items())},
            "known_items": {str(a): v for a, v in sorted(self.known_items.items())},
            "parity_items": [list(t) for t in self.parity_items],
            "final_known_bits": self.final_known_bits,
            "final_correlated_bits": self.final_correlated_bits,
            "trace": self.trace.to_dict() if self.trace is not None else None,
            "flags": list(self.flags),
        }

    def to_json(self) -> str:
        """One line of JSON (no embedded newlines)."""
        return json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))


def encrypt_database(items: np.ndarray, final_key: ObliviousKey) -> np.ndarray:
    """One-time pad with Bob's side of the final key."""
    items = np.asarray(items, dtype=np.uint8)
    if items.size != len(final_key):
        raise ValueError(f"length mismatch: {items.size} items, {len(final_key)} key bits")
    return items ^ final_key.bits


def item_knowledge(ciphertext: np.ndarray, final_key: ObliviousKey, n_items: int):
    """What Alice can deduce about the items from the ciphertext and her view of the key.

    Padding items (index >= ``n_items``) are public zeros, so they also pin
    the corresponding key bits; the closure accounts for that.
    Returns ``(known_items, parity_items)`` with 1-based addresses.
    """
    kn = final_key.knowledge
    cons = []
    for q, v in kn.known_dict().items():
        cons.append(([q], int(ciphertext[q]) ^ v))
    for g in kn.groups():
        members = list(g)
        rep = members[0]
        for q in members[1:]:
            cons.append(([rep, q], int(ciphertext[rep] ^ ciphertext[q]) ^ g[rep] ^ g[q]))
    for q in range(n_items, len(final_key)):
        cons.append(([q], 0))
    items = knowledge_from_constraints(len(final_key), cons)
    known = {q + 1: v for q, v in items.known_dict().items() if q < n_items}
    pairs = []
    for g in items.groups():
        members = [q for q in g if q < n_items]
        for q in members[1:]:
            pairs.append((members[0] + 1, q + 1, g[members[0]] ^ g[q]))
    return known, pairs


def _finish(variant, db: Database, address, final, ciphertext, **extra) -> ProtocolTranscript:
    known, pairs = item_knowledge(ciphertext, final, len(db))
    i0 = address - 1
    if not final.known[i0]:
        raise AssertionError("Alice does not know the key bit at her address")
    recovered = {address: int(ciphertext[i0] ^ final.knowledge.value[i0])}
    tr = ProtocolTranscript(
        variant=variant,
        n_items=len(db),
        address=address,
        ciphertext=ciphertext,
        recovered=recovered,
        known_items=known,
        parity_items=pairs,
        final_known_bits=final.n_known,
        final_correlated_bits=final.n_correlated,
        **extra,
    )
    if final.n_known == len(final):
        tr.flags.append("alice-knows-entire-key")
    if len(known) > 1:
        tr.flags.append("multiple-items-known")
    return tr


def run_original(cfg: SessionConfig, database: Optional[Database] = None,
                 measurement: Optional[tuple[PulseTrain, MeasurementOutcome]] = None) -> ProtocolTranscript:
    """Single long pulse train; no postprocessing."""
    rng = np.random.default_rng(cfg.seed)
    db = database if database is not None else Database.random(cfg.N, rng)
    n = len(db)
    train, out = measurement if measurement is not None else measure_until_detected(n, cfg.source, rng)
    key = block_key_from_measurement(train, out)
    known_pos = np.flatnonzero(key.known)
    j = int(known_pos[rng.integers(known_pos.size)])
    s = (cfg.i - 1 - j) % n
    final = cyclic_shift(key, s)
    ciphertext = encrypt_database(db.items, final)
    return _finish("original", db, cfg.i, final, ciphertext, announced_t=[out.announced_t],
                   shifts=[s], key_position=j + 1)


def _improved_substrings(cfg: SessionConfig, n_padded: int, rng):
    nb = n_padded // cfg.l
    key, ts = sample_blocks(cfg.k * nb, cfg.l, cfg.source, rng)
    subs = [key.select(np.arange(j * n_padded, (j + 1) * n_padded)) for j in range(cfg.k)]
    return subs, ts.tolist()


def run_improved(cfg: SessionConfig, database: Optional[Database] = None,
                 substrings: Optional[Sequence[ObliviousKey]] = None) -> ProtocolTranscript:
    """Short trains, ``k`` substrings, honest low-shift fold targeting address ``i``."""
    rng = np.random.default_rng(cfg.seed)
    db = database if database is not None else Database.random(cfg.N, rng)
    items = db.padded(cfg.l)
    ts: list[int] = []
    if substrings is None:
        substrings, ts = _improved_substrings(cfg, items.size, rng)
    final, plan, trace = lsa_honest(substrings, cfg.i - 1, cfg.l, rng)
    ciphertext = encrypt_database(items, final)
    return _finish("improved", db, cfg.i, final, ciphertext, announced_t=ts, shifts=plan.shifts, trace=trace)


def run_generic(cfg: SessionConfig, database: Optional[Database] = None) -> ProtocolTranscript:
    """Bernoulli oblivious key, block-sifting, honest low-shift fold."""
    rng = np.random.default_rng(cfg.seed)
    db = database if database is not None else Database.random(cfg.N, rng)
    items = db.padded(cfg.l)
    n = items.size
    need = cfg.k * n
    parts: list[ObliviousKey] = []
    discarded: list[int] = []
    have, block_base = 0, 0
    while have < need:
        raw = gen_generic_raw_key(raw_key_demand(1, need - have, cfg.p, cfg.l), cfg.p, rng)
        nb = len(raw) // cfg.l
        empty = ~raw.known.reshape(nb, cfg.l).any(axis=1)
        discarded.extend((block_base + np.flatnonzero(empty)).tolist())
        block_base += nb
        sifted, _ = block_sift(raw, cfg.l)
        parts.append(sifted)
        have += len(sifted)
    pool = concat_keys(parts) if len(parts) > 1 else parts[0]
    substrings = [pool.select(np.arange(j * n, (j + 1) * n)) for j in range(cfg.k)]
    final, plan, trace = lsa_honest(substrings, cfg.i - 1, cfg.l, rng)
    ciphertext = encrypt_database(items, final)
    return _finish("generic", db, cfg.i, final, ciphertext, discarded_blocks=discarded,
                   shifts=plan.shifts, trace=trace)


def run_session(cfg: SessionConfig, database: Optional[Database] = None) -> ProtocolTranscript:
    runner = {"original": run_original, "improved": run_improved, "generic": run_generic}[cfg.variant]
    return runner(cfg, database)

