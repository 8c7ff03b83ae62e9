import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qpq_sim.gf2 import ObliviousKey, ParityKnowledge
from qpq_sim.protocol import (
    Database,
    SessionConfig,
    encrypt_database,
    run_generic,
    run_improved,
    run_original,
    run_session,
)
from qpq_sim.sources import HONEST, MALICIOUS, WEAK_COHERENT, MeasurementOutcome, PulseTrain, SourceParams

WCS = SourceParams(WEAK_COHERENT, 0.1, HONEST)
WCS_MAL = SourceParams(WEAK_COHERENT, 0.1, MALICIOUS)


def mask_key(n, known_positions, rng):
    known = np.zeros(n, dtype=bool)
    known[list(known_positions)] = True
    return ObliviousKey.from_known_mask(rng.integers(0, 2, n), known)


def test_config_validation():
    with pytest.raises(ValueError):
        SessionConfig(variant="fancy")
    with pytest.raises(ValueError):
        SessionConfig(N=8, i=9)
    with pytest.raises(ValueError):
        SessionConfig(k=0)
    with pytest.raises(ValueError):
        SessionConfig(variant="generic", p=1.0)


def test_original_ideal_recovers_single_item():
    db = Database.from_bits([1, 0, 1, 1, 0, 0, 1, 0, 1, 1])
    tr = run_original(SessionConfig("original", N=10, i=7, seed=4), db)
    assert tr.recovered == {7: 1}
    assert tr.known_items == {7: 1} and tr.parity_items == []
    assert tr.final_known_bits == 1


def test_original_two_photon_leak():
    db = Database.from_bits([0, 1, 1, 0, 1, 0, 0, 1])
    phases = PulseTrain(np.array([0, 1, 1, 0, 0, 1, 1, 0, 1], dtype=np.uint8))
    out = MeasurementOutcome(2, (2, 3), 2, 2)
    tr = run_original(SessionConfig("original", N=8, i=4, source=WCS_MAL), db, measurement=(phases, out))
    assert tr.shifts == [0] and tr.key_position == 4
    assert tr.recovered == {4: 0}
    assert tr.known_items == {4: 0}
    assert tr.parity_items == [(3, 5, 1 ^ 1)]


def test_original_single_item_database():
    tr = run_original(SessionConfig("original", N=1, i=1, seed=2), Database.from_bits([1]))
    assert tr.shifts == [0] and tr.recovered == {1: 1}


def test_original_multiphoton_always_leaks_extra():
    for seed in range(200):
        db = Database.random(20, np.random.default_rng(seed))
        tr = run_original(SessionConfig("original", N=20, i=1 + seed % 20, source=WCS_MAL, seed=seed), db)
        rank = len(tr.known_items) + len(tr.parity_items)
        assert len(tr.known_items) >= 1 and rank >= 2


def test_three_substring_session():
    rng = np.random.default_rng(1)
    subs = [mask_key(8, [1, 4], rng), mask_key(8, [1, 6], rng), mask_key(8, [1, 5], rng)]
    db = Database.from_bits([0, 1, 1, 0, 1, 1, 0, 0])
    tr = run_improved(SessionConfig(N=8, l=4, k=3, i=6), db, substrings=subs)
    assert tr.shifts == [1, -1, 0]
    assert tr.recovered == {6: 1}


def test_improved_single_substring_knows_one_bit_per_block():
    db = Database.random(64, np.random.default_rng(0))
    tr = run_improved(SessionConfig(N=64, l=8, k=1, i=30, seed=3), db)
    assert tr.final_known_bits == 8
    assert 30 in tr.known_items and len(tr.announced_t) == 8


def test_improved_table_k_leaves_one_item():
    ones = 0
    for seed in range(100):
        tr = run_improved(SessionConfig(N=10_000, l=8, k=8, i=1 + seed, source=WCS, seed=seed))
        ones += len(tr.known_items) == 1
    assert ones >= 95


def test_generic_degenerate_known_everything():
    db = Database.random(16, np.random.default_rng(5))
    tr = run_generic(SessionConfig("generic", N=16, l=4, k=2, i=3, p=0.9999, seed=1), db)
    assert tr.final_known_bits == 16
    assert "alice-knows-entire-key" in tr.flags and "multiple-items-known" in tr.flags
    assert tr.recovered[3] == db.items[2]


def test_generic_single_substring_rate():
    tr = run_generic(SessionConfig("generic", N=10_000, l=10, k=1, i=1, p=0.25, seed=8))
    assert abs(tr.final_known_bits / 10_000 - 0.2649) < 0.01
    assert tr.discarded_blocks


def test_generic_thirteen_substrings_mostly_single_item():
    single = sum(
        run_generic(SessionConfig("generic", N=10_000, l=10, k=13, i=500, p=0.25, seed=s)).final_known_bits == 1
        for s in range(15)
    )
    assert single > 7


def test_encrypt_database():
    items = np.array([1, 0, 1, 1], dtype=np.uint8)
    zero = ObliviousKey(np.zeros(4, dtype=np.uint8), ParityKnowledge.empty(4))
    assert np.array_equal(encrypt_database(items, zero), items)
    key = ObliviousKey(np.array([1, 1, 0, 1], dtype=np.uint8), ParityKnowledge.empty(4))
    twice = encrypt_database(encrypt_database(items, key), key)
    assert np.array_equal(twice, items)
    with pytest.raises(ValueError):
        encrypt_database(items[:3], key)


@settings(max_examples=150, deadline=None)
@given(st.integers(0, 2**31 - 1), st.sampled_from(["original", "improved", "generic"]),
       st.sampled_from([SourceParams(), WCS, SourceParams(WEAK_COHERENT, 0.6)]),
       st.integers(1, 50), st.sampled_from([2, 4, 8]), st.integers(1, 6))
def test_every_variant_retrieves_correctly(seed, variant, source, n, l, k):
    rng = np.random.default_rng(seed)
    db = Database.random(n, rng)
    i = int(rng.integers(1, n + 1))
    tr = run_session(SessionConfig(variant, N=n, l=l, k=k, i=i, source=source, seed=seed), db)
    assert tr.recovered == {i: int(db.items[i - 1])}
    assert i in tr.known_items
    assert all(1 <= a <= n for a in tr.known_items)
    # every item Alice claims to know is right, and so is every claimed parity
    for a, v in tr.known_items.items():
        assert v == db.items[a - 1]
    for a, b, v in tr.parity_items:
        assert v == db.items[a - 1] ^ db.items[b - 1]


@settings(max_examples=80, deadline=None)
@given(st.integers(0, 2**31 - 1), st.sampled_from([SourceParams(), SourceParams(WEAK_COHERENT, 0.5)]))
def test_item_count_matches_known_key_bits_without_padding(seed, source):
    rng = np.random.default_rng(seed)
    l = 4
    n = l * int(rng.integers(1, 10))
    tr = run_improved(SessionConfig(N=n, l=l, k=int(rng.integers(1, 4)), i=int(rng.integers(1, n + 1)),
                                    source=source, seed=seed))
    assert len(tr.known_items) == tr.final_known_bits


def test_padding_is_never_claimed():
    for seed in range(100):
        db = Database.random(13, np.random.default_rng(seed))
        i = 1 + seed % 13
        tr = run_improved(SessionConfig(N=13, l=4, k=2, i=i, seed=seed), db)
        assert tr.recovered[i] == db.items[i - 1]
        assert max(tr.known_items) <= 13
        assert len(db.padded(4)) == 16


def test_transcript_json_line():
    tr = run_session(SessionConfig(N=16, l=4, k=2, i=5, seed=9))
    line = tr.to_json()
    assert "\n" not in line
    data = json.loads(line)
    assert data["address"] == 5 and data["variant"] == "improved"
    assert len(data["ciphertext"]) == 16
    assert data["trace"]["k"] == [1, 2]
