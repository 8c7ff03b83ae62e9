import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qpq_sim.gf2 import ObliviousKey
from qpq_sim.lsa import (
    SourceExhausted,
    _greedy_low,
    _overlap_counts,
    _overlap_counts_all,
    block_sift,
    discard_probability,
    double_run_failure,
    generic_sifted_substrings,
    honest_shift_for,
    jprotocol_stats,
    low_shifts,
    lsa_honest,
    lsa_malicious_greedy,
    raw_key_demand,
    shift_add_random,
    sifted_known_probability,
)
from qpq_sim.sources import (
    HONEST,
    MALICIOUS,
    WEAK_COHERENT,
    SourceParams,
    conditional_photon_probability,
    gen_generic_raw_key,
    rrdps_substrings,
)
from qpq_sim.verify import greedy_transitions


def mask_key(n, known_positions, rng=None):
    rng = rng or np.random.default_rng(0)
    known = np.zeros(n, dtype=bool)
    known[list(known_positions)] = True
    return ObliviousKey.from_known_mask(rng.integers(0, 2, n), known)


def test_discard_and_sifted_probability():
    assert discard_probability(0.25, 8) == pytest.approx(0.1001, abs=1e-4)
    assert discard_probability(0.25, 10) == pytest.approx(0.0563, abs=1e-4)
    assert discard_probability(0.25, 16) == pytest.approx(0.0100, abs=1e-4)
    assert sifted_known_probability(0.25, 10) == pytest.approx(0.2649, abs=1e-4)


def test_raw_key_demand_whole_blocks():
    d = raw_key_demand(3, 1000, 0.25, 8)
    assert d % 8 == 0 and d * (1 - discard_probability(0.25, 8)) >= 3000


def test_block_sift_basics():
    full = ObliviousKey.from_known_mask(np.zeros(16), np.ones(16, bool))
    kept, frac = block_sift(full, 4)
    assert frac == 0 and kept.same_as(full)
    raw = mask_key(12, [1, 9])
    kept, frac = block_sift(raw, 4)
    assert frac == pytest.approx(1 / 3)
    assert list(np.flatnonzero(kept.known)) == [1, 5]
    with pytest.raises(ValueError):
        block_sift(raw, 5)


def test_block_sift_empirical_rate():
    _, frac = block_sift(gen_generic_raw_key(1_000_000, 0.25, np.random.default_rng(12)), 8)
    assert abs(frac - 0.1001) < 0.005


def test_sifted_keys_have_known_bit_per_block():
    gen = generic_sifted_substrings(400, 10, 0.25, np.random.default_rng(3))
    for _ in range(5):
        sub = next(gen)
        assert len(sub) == 400
        assert sub.known.reshape(40, 10).any(axis=1).all()


def test_sifted_first_substring_rate():
    rng = np.random.default_rng(4)
    fracs = [next(generic_sifted_substrings(10_000, 10, 0.25, rng)).known.mean() for _ in range(10)]
    assert abs(np.mean(fracs) - sifted_known_probability(0.25, 10)) < 0.01


def test_honest_shift_candidates():
    rng = np.random.default_rng(0)
    k = mask_key(8, [2, 5])
    assert 0 in {honest_shift_for(k, 5, 4, rng) for _ in range(50)}
    single = mask_key(4, [0])
    assert all(honest_shift_for(single, 3, 4, rng) % 4 == 3 for _ in range(20))
    with pytest.raises(ValueError):
        honest_shift_for(mask_key(16, [0]), 8, 4, rng)


def test_three_substring_walkthrough():
    # one known bit per 4-bit block; only shifts 1, -1, 0 put a known bit on index 5
    rng = np.random.default_rng(1)
    subs = [mask_key(8, [1, 4], rng), mask_key(8, [1, 6], rng), mask_key(8, [1, 5], rng)]
    final, plan, trace = lsa_honest(subs, 5, 4, rng)
    assert plan.shifts == [1, -1, 0]
    assert final.known[5]
    expected = subs[0].bits[4] ^ subs[1].bits[6] ^ subs[2].bits[5]
    assert final.knowledge.value[5] == expected == final.bits[5]
    assert trace.k == [1, 2, 3]


def test_fold_base_case():
    rng = np.random.default_rng(2)
    sub = next(rrdps_substrings(80, 8, SourceParams(), rng))
    final, plan, trace = lsa_honest([sub], 17, 8, rng)
    assert trace.n_known == [sub.n_known] and final.known[17]


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**32 - 1), st.sampled_from([2, 4, 8]), st.integers(1, 8),
       st.sampled_from([SourceParams(), SourceParams(WEAK_COHERENT, 0.1), SourceParams(WEAK_COHERENT, 0.8)]))
def test_honest_fold_never_fails(seed, l, k, source):
    rng = np.random.default_rng(seed)
    n = l * int(rng.integers(1, 12))
    i = int(rng.integers(n))
    gen = rrdps_substrings(n, l, source, rng)
    final, _, trace = lsa_honest([next(gen) for _ in range(k)], i, l, rng)
    final.check_consistency()
    assert final.known[i]
    assert min(trace.n_known) >= 1
    assert all(a >= b for a, b in zip(trace.n_known, trace.n_known[1:]))
    assert all(a >= b for a, b in zip(trace.n_correlated, trace.n_correlated[1:]))
    if source.kind == "ideal":
        assert not any(trace.n_correlated)


def test_ideal_known_count_expectation():
    # E[n_{k+1} | n_k] = 1 + (n_k - 1) / l for single-photon blocks
    l, n = 8, 800
    pairs = []
    for r in range(200):
        rng = np.random.default_rng([17, r])
        _, _, tr = lsa_honest(rrdps_substrings(n, l, SourceParams(), rng), int(rng.integers(n)), l, rng, stop=1)
        pairs += list(zip(tr.n_known, tr.n_known[1:]))
    a = np.array(pairs, dtype=float)
    resid = a[:, 1] - (1 + (a[:, 0] - 1) / l)
    assert abs(resid.mean()) <= 3 * resid.std() / np.sqrt(len(resid))


def test_honest_parity_count_bound():
    l, n = 8, 800
    src = SourceParams(WEAK_COHERENT, 0.1, HONEST)
    factor = 1 - (l - 1) / l * conditional_photon_probability(1, 0.1, 1)
    before, after = [], []
    for r in range(200):
        rng = np.random.default_rng([18, r])
        _, _, tr = lsa_honest(rrdps_substrings(n, l, src, rng), int(rng.integers(n)), l, rng, max_k=4)
        for m0, m1 in zip(tr.n_correlated, tr.n_correlated[1:]):
            before.append(m0)
            after.append(m1)
    before, after = np.array(before, float), np.array(after, float)
    bound = (before * factor).sum()
    assert after.sum() <= bound + 3 * np.sqrt(max(bound, 1.0))


def test_greedy_known_count_drops_often():
    trans = greedy_transitions(400, 8, 0.1, seed=3, runs=150, min_transitions=300)
    frac = np.mean([b < a for a, b in trans])
    assert len(trans) >= 300
    assert frac >= ((8 - 1) / 8) ** 2 - 0.02


def test_greedy_reaches_single_bit():
    rng = np.random.default_rng(6)
    src = SourceParams(WEAK_COHERENT, 0.1, MALICIOUS)
    tr = lsa_malicious_greedy(rrdps_substrings(2504, 8, src, rng), 8, stop=1, snapshots=True)
    assert tr.converged and tr.n_known[-1] == 1 and tr.n_correlated[-1] == 0
    assert set(np.unique(tr.snapshots[0])) == {0, 1, 2}
    assert all(a >= b for a, b in zip(tr.n_known, tr.n_known[1:]))
    assert len(tr.shifts) == tr.final_k


def test_greedy_reports_non_convergence():
    full = ObliviousKey.from_known_mask(np.zeros(16), np.ones(16, bool))
    tr = lsa_malicious_greedy(iter(lambda: full, None), 4, stop=1, max_k=10)
    assert not tr.converged and tr.n_known == [16] * 10


def test_finite_source_runs_dry():
    k = mask_key(8, range(8))
    with pytest.raises(SourceExhausted):
        lsa_malicious_greedy([k, k], 4, stop=1)


def test_greedy_tie_breaking():
    pick_pair, pick_next = _greedy_low(4)
    acc = mask_key(16, [4, 12])
    new = mask_key(16, [5, 3])
    # s=-1 and s=+1 each align one bit; smaller magnitude ties go to the negative shift
    assert pick_next(acc, new) == -1
    a, b = pick_pair(mask_key(16, [0]), mask_key(16, [2]))
    assert (a, b) == (0, -2)


def test_fft_overlap_matches_roll():
    rng = np.random.default_rng(5)
    a, b = rng.random(97) < 0.3, rng.random(97) < 0.3
    fft = _overlap_counts_all(a, b)
    direct = _overlap_counts(a, b, range(97))
    assert [direct[d] for d in range(97)] == fft.tolist()


def test_shift_add_first_substring_is_raw():
    rng = np.random.default_rng(7)
    keys = [gen_generic_raw_key(1000, 0.25, rng) for _ in range(3)]
    tr = shift_add_random(iter(keys), "full", rng=np.random.default_rng(0), max_k=3)
    assert tr.n_known[0] == keys[0].n_known
    assert len(tr.n_known) == 3


def test_unrestricted_optimal_shifts_keep_bits():
    rng = np.random.default_rng(8)

    def stream():
        while True:
            yield gen_generic_raw_key(10_000, 0.25, rng)

    tr = shift_add_random(stream(), "full", choice="optimal", max_k=12)
    assert tr.n_known[-1] >= 5
    low = shift_add_random(generic_sifted_substrings(1000, 10, 0.25, rng), "low", l=10, choice="optimal", max_k=3)
    assert low.k == [1, 2, 3]


def test_shift_add_argument_checks():
    with pytest.raises(ValueError):
        shift_add_random(iter([]), "medium")
    with pytest.raises(ValueError):
        shift_add_random(iter([]), "low")
    with pytest.raises(ValueError):
        shift_add_random(iter([]), "full", choice="uniform", max_k=2)


def test_jprotocol_numbers():
    known, fail = jprotocol_stats(100_000, 0.25, 7)
    assert known == pytest.approx(6.10, abs=0.005) and fail == pytest.approx(0.0022, abs=3e-4)
    known, fail = jprotocol_stats(100_000, 0.25, 8)
    assert known == pytest.approx(1.53, abs=0.005) and fail == pytest.approx(0.2174, abs=5e-4)
    assert jprotocol_stats(40, 0.3, 1) == pytest.approx((12.0, 0.7**40))
    with pytest.raises(ValueError):
        jprotocol_stats(10, 0.0, 2)


def test_double_run_failure():
    assert double_run_failure(0.087, 0.087) == pytest.approx(0.1664, abs=1e-4)
    assert double_run_failure(0, 0) == 0
    assert double_run_failure(1, 0.3) == 1
    with pytest.raises(ValueError):
        double_run_failure(1.5, 0)


def test_low_shift_range():
    assert low_shifts(4) == [-3, -2, -1, 0, 1, 2, 3]
