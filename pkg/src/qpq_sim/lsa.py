"""Classical postprocessing: block-sifting and shift-and-add folding of oblivious keys.

Shifts follow :func:`~qpq_sim.gf2.cyclic_shift`: shifting by ``s`` moves bit
``j`` to ``(j + s) mod N``. "Low" shifts are restricted to ``|s| <= l - 1``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Iterator, Optional

import numpy as np

from .gf2 import ObliviousKey, combine_xor, concat_keys, cyclic_shift
from .sources import gen_generic_raw_key

MAX_ADDITIONS = 64


class SourceExhausted(RuntimeError):
    """The substring generator ran dry before the fold finished."""


@dataclass
class ShiftPlan:
    shifts: list[int] = field(default_factory=list)
    target_index: Optional[int] = None


@dataclass
class LsaTrace:
    """Known and parity-correlated counts after each addition (``k`` substrings folded)."""

    k: list[int] = field(default_factory=list)
    n_known: list[int] = field(default_factory=list)
    n_correlated: list[int] = field(default_factory=list)
    shifts: list[int] = field(default_factory=list)
    converged: bool = True
    snapshots: Optional[list[np.ndarray]] = None

    def record(self, key: ObliviousKey, snapshot: bool = False) -> None:
        self.k.append(len(self.k) + 1)
        self.n_known.append(key.n_known)
        self.n_correlated.append(key.n_correlated)
        if snapshot:
            if self.snapshots is None:
                self.snapshots = []
            self.snapshots.append(key.knowledge.classes())

    @property
    def final_k(self) -> int:
        return self.k[-1] if self.k else 0

    def first_k_at_most(self, n_target: int) -> Optional[int]:
        """Smallest ``k`` with at most ``n_target`` known bits, if reached."""
        for k, n in zip(self.k, self.n_known):
            if n <= n_target:
                return k
        return None

    def to_dict(self) -> dict:
        return {
            "k": list(self.k),
            "n_known": list(self.n_known),
            "n_correlated": list(self.n_correlated),
            "shifts": list(self.shifts),
            "converged": self.converged,
        }


def discard_probability(p: float, l: int) -> float:
    """Chance that an ``l``-bit block holds no bit known to Alice."""
    return (1.0 - p) ** l


def sifted_known_probability(p: float, l: int) -> float:
    """Per-bit known probability after discarding all-unknown blocks."""
    return p / (1.0 - discard_probability(p, l))


def raw_key_demand(k: int, n: int, p: float, l: int, overprovision: float = 1.1) -> int:
    """Raw bits to request so that ``k * n`` bits usually survive sifting (rounded up to whole blocks)."""
    bits = k * n / (1.0 - discard_probability(p, l)) * overprovision
    return int(np.ceil(bits / l)) * l


def block_sift(raw: ObliviousKey, l: int) -> tuple[ObliviousKey, float]:
    """Drop every ``l``-bit block in which Alice knows nothing; return the rest and the discarded fraction."""
    n = len(raw)
    if n % l:
        raise ValueError("raw key length must be a multiple of l")
    nb = n // l
    if nb == 0:
        return raw, 0.0
    keep = raw.known.reshape(nb, l).any(axis=1)
    positions = (np.flatnonzero(keep)[:, None] * l + np.arange(l)).ravel()
    return raw.select(positions), 1.0 - keep.mean()


def generic_sifted_substrings(n: int, l: int, p: float, rng: np.random.Generator) -> Iterator[ObliviousKey]:
    """Endless stream of block-sifted ``n``-bit generic keys; surplus blocks carry over."""
    if n % l:
        raise ValueError("substring length must be a multiple of l")
    pending: list[ObliviousKey] = []
    have = 0
    while True:
        while have < n:
            raw = gen_generic_raw_key(raw_key_demand(1, n - have, p, l), p, rng)
            sifted, _ = block_sift(raw, l)
            pending.append(sifted)
            have += len(sifted)
        pool = concat_keys(pending) if len(pending) > 1 else pending[0]
        out = pool.select(np.arange(n))
        rest = len(pool) - n
        pending = [pool.select(np.arange(n, len(pool)))] if rest else []
        have = rest
        yield out


def low_shifts(l: int) -> list[int]:
    return list(range(-(l - 1), l))


def honest_shift_for(sub: ObliviousKey, i: int, l: int, rng: np.random.Generator) -> int:
    """A low shift that lands one of Alice's known bits on index ``i`` (uniform among candidates)."""
    n = len(sub)
    candidates = [s for s in low_shifts(l) if sub.known[(i - s) % n]]
    if not candidates:
        raise ValueError(f"no known bit within distance {l - 1} of index {i}; key is not block-sifted")
    return int(candidates[rng.integers(len(candidates))])


def lsa_honest(substrings: Iterable[ObliviousKey], i: int, l: int, rng: np.random.Generator,
               stop: Optional[int] = None, max_k: Optional[int] = None) -> tuple[ObliviousKey, ShiftPlan, LsaTrace]:
    """Shift each substring so index ``i`` is known, then XOR-fold them.

    With a finite list every substring is used. With ``stop`` the fold ends
    once at most ``stop`` bits remain known (``max_k`` caps the length and
    defaults to :data:`MAX_ADDITIONS` in that case).
    """
    if stop is not None and max_k is None:
        max_k = MAX_ADDITIONS
    plan, trace = ShiftPlan(target_index=i), LsaTrace()
    final = None
    for sub in substrings:
        s = honest_shift_for(sub, i, l, rng)
        shifted = cyclic_shift(sub, s)
        final = shifted if final is None else combine_xor(final, shifted)
        plan.shifts.append(s)
        trace.shifts.append(s)
        trace.record(final)
        if stop is not None and final.n_known <= stop:
            break
        if max_k is not None and trace.final_k >= max_k:
            trace.converged = stop is None
            break
    if final is None:
        raise ValueError("need at least one substring")
    return final, plan, trace


def _next(source: Iterator[ObliviousKey]) -> ObliviousKey:
    try:
        return next(source)
    except StopIteration:
        raise SourceExhausted("substring source exhausted before the fold finished") from None


def _shift_order(s: int) -> tuple[int, int]:
    # smallest magnitude first, negative before positive
    return abs(s), int(s > 0)


def _overlap_counts(acc_known: np.ndarray, new_known: np.ndarray, shifts) -> dict[int, int]:
    return {int(d): int(np.count_nonzero(acc_known & np.roll(new_known, d))) for d in shifts}


def _overlap_counts_all(acc_known: np.ndarray, new_known: np.ndarray) -> np.ndarray:
    """``out[d] = |acc & roll(new, d)|`` for every ``d`` in ``0..N-1`` (FFT cross-correlation)."""
    n = acc_known.size
    fa = np.fft.rfft(acc_known.astype(np.float64))
    fb = np.fft.rfft(new_known.astype(np.float64))
    return np.rint(np.fft.irfft(fa * np.conj(fb), n)).astype(np.int64)


def _fold(source, pick_pair, pick_next, stop, max_k, snapshots) -> LsaTrace:
    if stop is None and max_k is None:
        raise ValueError("an open-ended fold needs stop or max_k")
    max_k = MAX_ADDITIONS if max_k is None else max_k
    source = iter(source)
    trace = LsaTrace()
    acc = _next(source)
    trace.record(acc, snapshots)
    if stop is not None and acc.n_known <= stop:
        return trace
    while trace.final_k < max_k:
        new = _next(source)
        if trace.final_k == 1:
            sa, sb = pick_pair(acc, new)
            if sa:
                acc = cyclic_shift(acc, sa)
            trace.shifts.append(sa)
        else:
            sb = pick_next(acc, new)
        trace.shifts.append(sb)
        acc = combine_xor(acc, cyclic_shift(new, sb))
        trace.record(acc, snapshots)
        if stop is not None and acc.n_known <= stop:
            return trace
    trace.converged = stop is None
    return trace


def _greedy_low(l: int):
    shifts = low_shifts(l)

    def pick_pair(a, b):
        rel = _overlap_counts(a.known, b.known, range(-2 * (l - 1), 2 * (l - 1) + 1))
        return min(
            ((sa, sb) for sa in shifts for sb in shifts),
            key=lambda ab: (-rel[ab[1] - ab[0]], _shift_order(ab[0]), _shift_order(ab[1])),
        )

    def pick_next(acc, new):
        counts = _overlap_counts(acc.known, new.known, shifts)
        return min(shifts, key=lambda s: (-counts[s], _shift_order(s)))

    return pick_pair, pick_next


def lsa_malicious_greedy(substring_source: Iterable[ObliviousKey], l: int, stop: Optional[int] = 1,
                         max_k: Optional[int] = None, snapshots: bool = False) -> LsaTrace:
    """Fold substrings with the low shifts that keep the most known bits.

    The first two substrings are aligned by searching all ``(2l-1)^2`` shift
    pairs; each later one by searching ``2l-1`` shifts against the running
    sum. Ties go to the smallest ``|shift|``, negative first. The trace has
    ``converged=False`` if ``stop`` was not reached within ``max_k``.
    """
    pick_pair, pick_next = _greedy_low(l)
    return _fold(substring_source, pick_pair, pick_next, stop, max_k, snapshots)


def shift_add_random(substring_source: Iterable[ObliviousKey], shift_range: str = "full", l: Optional[int] = None,
                     stop: Optional[int] = None, rng: Optional[np.random.Generator] = None,
                     choice: str = "uniform", max_k: Optional[int] = None) -> LsaTrace:
    """Shift-and-add without the block structure guarantee, for comparison curves.

    ``shift_range`` is ``"full"`` (any cyclic shift ``0..N-1``) or ``"low"``
    (``|s| <= l-1``). ``choice="uniform"`` draws shifts at random;
    ``choice="optimal"`` lets Alice pick the shift that keeps the most known
    bits (smallest shift on ties), i.e. unrestricted shift-addition.
    """
    if shift_range not in ("full", "low"):
        raise ValueError("shift_range must be 'full' or 'low'")
    if choice not in ("uniform", "optimal"):
        raise ValueError("choice must be 'uniform' or 'optimal'")
    if shift_range == "low" and l is None:
        raise ValueError("low range needs the block length l")

    if choice == "optimal" and shift_range == "low":
        pick_pair, pick_next = _greedy_low(l)
    elif choice == "optimal":
        def pick_next(acc, new):
            return int(np.argmax(_overlap_counts_all(acc.known, new.known)))

        def pick_pair(a, b):
            return 0, pick_next(a, b)
    else:
        if rng is None:
            raise ValueError("uniform shifts need an rng")

        def draw(n):
            if shift_range == "full":
                return int(rng.integers(n))
            return int(rng.integers(-(l - 1), l))

        def pick_next(acc, new):
            return draw(len(new))

        def pick_pair(a, b):
            return draw(len(a)), draw(len(b))

    return _fold(substring_source, pick_pair, pick_next, stop, max_k, False)


def jprotocol_stats(n: int, p: float, k: int) -> tuple[float, float]:
    """Expected known final bits ``N p^k`` and failure probability ``(1 - p^k)^N`` for k-fold XOR without shifts."""
    if n < 1 or not 0 < p < 1 or k < 1:
        raise ValueError("need N >= 1, 0 < p < 1, k >= 1")
    q = p**k
    return n * q, (1.0 - q) ** n


def double_run_failure(f1: float, f2: float) -> float:
    """Failure probability when two independent runs must both succeed."""
    if not (0 <= f1 <= 1 and 0 <= f2 <= 1):
        raise ValueError("failure probabilities must lie in [0, 1]")
    return 1.0 - (1.0 - f1) * (1.0 - f2)
