"""Partial knowledge of bit strings as GF(2) constraints.

Two models live here. :class:`ParityKnowledge` is the fast one: a partition
of bit indices into individually known bits, parity-linked groups and
unconstrained bits, stored as flat numpy arrays so that shifting and XOR
folding of long keys stays vectorized. :class:`LinearSpanOracle` is the slow
exact model (Gaussian elimination on integer bitmasks) used to cross-check
the fast one on small instances.

Group storage convention: ``group[i]`` holds the smallest index of the group
containing ``i`` (or -1), and ``offset[i]`` is ``x_i XOR x_rep``.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations
from typing import Iterable, Optional, Sequence

import numpy as np


class ContradictionError(ValueError):
    """Raised when constraints assign two different parities to one functional."""


class InconsistentKeyError(AssertionError):
    """Alice's recorded knowledge disagrees with Bob's true bits."""


def _canonical(known, value, group, offset):
    """Return arrays with groups keyed by their smallest member and singletons dissolved."""
    known = np.asarray(known, dtype=bool)
    value = np.where(known, np.asarray(value, dtype=np.uint8), 0).astype(np.uint8)
    group = np.asarray(group, dtype=np.int64).copy()
    offset = np.asarray(offset, dtype=np.uint8).copy()
    group[known] = -1

    idx = np.flatnonzero(group >= 0)
    new_group = np.full(group.shape, -1, dtype=np.int64)
    new_offset = np.zeros(group.shape, dtype=np.uint8)
    if idx.size:
        labels, inverse, counts = np.unique(group[idx], return_inverse=True, return_counts=True)
        reps = np.full(labels.size, np.iinfo(np.int64).max, dtype=np.int64)
        np.minimum.at(reps, inverse, idx)
        keep = counts[inverse] >= 2
        members = idx[keep]
        rep_of = reps[inverse][keep]
        new_group[members] = rep_of
        new_offset[members] = offset[members] ^ offset[rep_of]
    return known, value, new_group, new_offset


@dataclass(frozen=True, eq=False)
class ParityKnowledge:
    """Alice's view of a bit string: known values plus parity-linked groups.

    Build instances with :meth:`empty`, :meth:`from_arrays` or
    :func:`knowledge_from_constraints`; the arrays are treated as read-only.
    """

    known: np.ndarray
    value: np.ndarray
    group: np.ndarray
    offset: np.ndarray

    @classmethod
    def empty(cls, length: int) -> "ParityKnowledge":
        return cls(
            np.zeros(length, dtype=bool),
            np.zeros(length, dtype=np.uint8),
            np.full(length, -1, dtype=np.int64),
            np.zeros(length, dtype=np.uint8),
        )

    @classmethod
    def from_arrays(cls, known, value, group=None, offset=None) -> "ParityKnowledge":
        """Canonicalize raw arrays (group labels may be any member index)."""
        n = len(known)
        if group is None:
            group = np.full(n, -1, dtype=np.int64)
        if offset is None:
            offset = np.zeros(n, dtype=np.uint8)
        return cls(*_canonical(known, value, group, offset))

    def __len__(self) -> int:
        return int(self.known.size)

    @property
    def length(self) -> int:
        return int(self.known.size)

    @property
    def n_known(self) -> int:
        return int(np.count_nonzero(self.known))

    @property
    def n_correlated(self) -> int:
        """Number of indices that sit in some parity group."""
        return int(np.count_nonzero(self.group >= 0))

    def known_dict(self) -> dict[int, int]:
        return {int(i): int(self.value[i]) for i in np.flatnonzero(self.known)}

    def groups(self) -> list[dict[int, int]]:
        """Groups as ``{index: offset relative to the smallest member}``, ordered by representative."""
        out: dict[int, dict[int, int]] = {}
        for i in np.flatnonzero(self.group >= 0):
            out.setdefault(int(self.group[i]), {})[int(i)] = int(self.offset[i])
        return [out[r] for r in sorted(out)]

    @property
    def rank(self) -> int:
        """Number of independent constraints Alice holds."""
        n_groups = np.count_nonzero((self.group >= 0) & (self.group == np.arange(self.length)))
        return self.n_known + self.n_correlated - int(n_groups)

    def parity(self, i: int, j: int) -> Optional[int]:
        """Value of ``x_i XOR x_j`` when determined, else None."""
        if i == j:
            return 0
        if self.known[i] and self.known[j]:
            return int(self.value[i] ^ self.value[j])
        if self.group[i] >= 0 and self.group[i] == self.group[j]:
            return int(self.offset[i] ^ self.offset[j])
        return None

    def classes(self) -> np.ndarray:
        """Per-index class code: 0 unknown, 1 known, 2 parity-correlated."""
        out = np.zeros(self.length, dtype=np.int8)
        out[self.group >= 0] = 2
        out[self.known] = 1
        return out

    def potential(self) -> np.ndarray:
        """Known value, or offset inside a group; the XOR of two same-class potentials is their parity."""
        return np.where(self.known, self.value, self.offset).astype(np.uint8)

    def class_labels(self) -> np.ndarray:
        """-2 unconstrained, -1 known, otherwise the group representative."""
        return np.where(self.known, -1, np.where(self.group >= 0, self.group, -2))

    def select(self, positions: Sequence[int]) -> "ParityKnowledge":
        """Restrict to ``positions`` (in the given order), renumbering 0..len-1."""
        positions = np.asarray(positions, dtype=np.int64)
        return ParityKnowledge.from_arrays(
            self.known[positions], self.value[positions], self.group[positions], self.offset[positions]
        )

    def same_as(self, other: "ParityKnowledge") -> bool:
        return (
            np.array_equal(self.known, other.known)
            and np.array_equal(self.value, other.value)
            and np.array_equal(self.group, other.group)
            and np.array_equal(self.offset, other.offset)
        )

    def __repr__(self) -> str:
        return f"ParityKnowledge(length={self.length}, known={self.known_dict()}, groups={self.groups()})"


class ParityUnionFind:
    """Union-find where each node carries its parity relative to its parent.

    Node ``n`` (one past the last index) is a constant-zero anchor, so a known
    value ``x_i = v`` is stored as the parity ``x_i XOR 0 = v``.
    """

    def __init__(self, length: int):
        self.length = length
        self.parent = list(range(length + 1))
        self.parity = [0] * (length + 1)
        self.size = [1] * (length + 1)
        self.touched: set[int] = set()

    @property
    def anchor(self) -> int:
        return self.length

    def find(self, x: int) -> tuple[int, int]:
        path = []
        while self.parent[x] != x:
            path.append(x)
            x = self.parent[x]
        root = x
        # compress; accumulate parities from the top of the path down
        acc = 0
        for node in reversed(path):
            acc ^= self.parity[node]
            self.parity[node] = acc
            self.parent[node] = root
        return root, (self.parity[path[0]] if path else 0)

    def union(self, a: int, b: int, p: int) -> None:
        """Record ``x_a XOR x_b = p``."""
        self.touched.update((a, b))
        ra, pa = self.find(a)
        rb, pb = self.find(b)
        if ra == rb:
            if pa ^ pb != p:
                raise ContradictionError(f"x_{a} ^ x_{b} already fixed to {pa ^ pb}, got {p}")
            return
        if self.size[ra] < self.size[rb]:
            ra, rb, pa, pb = rb, ra, pb, pa
        self.parent[rb] = ra
        self.parity[rb] = pa ^ pb ^ p
        self.size[ra] += self.size[rb]

    def set_value(self, i: int, v: int) -> None:
        self.union(i, self.anchor, v)

    def to_knowledge(self) -> ParityKnowledge:
        n = self.length
        known = np.zeros(n, dtype=bool)
        value = np.zeros(n, dtype=np.uint8)
        group = np.full(n, -1, dtype=np.int64)
        offset = np.zeros(n, dtype=np.uint8)
        anchor_root, anchor_par = self.find(self.anchor)
        for i in sorted(self.touched - {self.anchor}):
            r, p = self.find(i)
            if r == anchor_root:
                known[i] = True
                value[i] = p ^ anchor_par
            else:
                group[i] = r
                offset[i] = p
        return ParityKnowledge.from_arrays(known, value, group, offset)


def knowledge_from_constraints(length: int, constraints: Iterable[tuple[Iterable[int], int]]) -> ParityKnowledge:
    """Build knowledge from singleton and pairwise parity constraints.

    >>> k = knowledge_from_constraints(6, [({4}, 0), ({3, 5}, 1)])
    >>> k.known_dict(), k.groups()
    ({4: 0}, [{3: 0, 5: 1}])
    """
    uf = ParityUnionFind(length)
    for indices, p in constraints:
        idx = sorted(set(int(i) for i in indices))
        if any(i < 0 or i >= length for i in idx):
            raise IndexError(f"constraint indices {idx} out of range for length {length}")
        p = int(p) & 1
        if len(idx) == 0:
            if p:
                raise ContradictionError("empty constraint with parity 1")
        elif len(idx) == 1:
            uf.set_value(idx[0], p)
        elif len(idx) == 2:
            uf.union(idx[0], idx[1], p)
        else:
            raise ValueError("pairwise model accepts constraints of arity <= 2; use LinearSpanOracle")
    return uf.to_knowledge()


@dataclass(frozen=True, eq=False)
class ObliviousKey:
    """Bob's complete bit string together with Alice's knowledge of it."""

    bits: np.ndarray
    knowledge: ParityKnowledge

    def __post_init__(self):
        if self.bits.shape != (self.knowledge.length,):
            raise ValueError("bits and knowledge lengths differ")

    @classmethod
    def from_known_mask(cls, bits, known) -> "ObliviousKey":
        bits = np.asarray(bits, dtype=np.uint8)
        return cls(bits, ParityKnowledge.from_arrays(known, bits))

    def __len__(self) -> int:
        return int(self.bits.size)

    @property
    def n_known(self) -> int:
        return self.knowledge.n_known

    @property
    def n_correlated(self) -> int:
        return self.knowledge.n_correlated

    @property
    def known(self) -> np.ndarray:
        return self.knowledge.known

    def check_consistency(self) -> None:
        """Raise :class:`InconsistentKeyError` unless Alice's view matches the true bits."""
        kn = self.knowledge
        if np.any(kn.value[kn.known] != self.bits[kn.known]):
            raise InconsistentKeyError("known value differs from true bit")
        g = np.flatnonzero(kn.group >= 0)
        if np.any((self.bits[g] ^ self.bits[kn.group[g]]) != kn.offset[g]):
            raise InconsistentKeyError("group parity differs from true XOR")

    def select(self, positions) -> "ObliviousKey":
        positions = np.asarray(positions, dtype=np.int64)
        return ObliviousKey(self.bits[positions].copy(), self.knowledge.select(positions))

    def same_as(self, other: "ObliviousKey") -> bool:
        return np.array_equal(self.bits, other.bits) and self.knowledge.same_as(other.knowledge)

    def __repr__(self) -> str:
        return f"ObliviousKey(length={len(self)}, n_known={self.n_known}, n_correlated={self.n_correlated})"


def concat_keys(keys: Sequence[ObliviousKey]) -> ObliviousKey:
    """Concatenate keys; group labels are shifted with their blocks."""
    bits, known, value, group, offset = [], [], [], [], []
    start = 0
    for k in keys:
        kn = k.knowledge
        bits.append(k.bits)
        known.append(kn.known)
        value.append(kn.value)
        group.append(np.where(kn.group >= 0, kn.group + start, -1))
        offset.append(kn.offset)
        start += len(k)
    kn = ParityKnowledge(*map(np.concatenate, (known, value, group, offset)))
    return ObliviousKey(np.concatenate(bits), kn)


def combine_xor(a: ObliviousKey, b: ObliviousKey) -> ObliviousKey:
    """Bitwise XOR of two independent oblivious keys.

    An output bit is known iff it is known in both inputs. A pair ``(i, j)``
    stays parity-linked iff ``x_i XOR x_j`` is determined in each input,
    which is the same as ``i`` and ``j`` sharing a class in both partitions.
    """
    if len(a) != len(b):
        raise ValueError(f"length mismatch: {len(a)} != {len(b)}")
    ka, kb = a.knowledge, b.knowledge
    bits = a.bits ^ b.bits
    known = ka.known & kb.known
    pot = ka.potential() ^ kb.potential()

    la, lb = ka.class_labels(), kb.class_labels()
    linked = (la != -2) & (lb != -2) & ~known
    group = np.full(len(a), -1, dtype=np.int64)
    offset = np.zeros(len(a), dtype=np.uint8)
    idx = np.flatnonzero(linked)
    if idx.size:
        n = len(a) + 2
        code = (la[idx] + 2) * n + (lb[idx] + 2)
        _, first, inverse = np.unique(code, return_index=True, return_inverse=True)
        rep = idx[first][inverse]
        group[idx] = rep
        offset[idx] = pot[idx] ^ pot[rep]
    kn = ParityKnowledge(*_canonical(known, pot, group, offset))
    return ObliviousKey(bits, kn)


def cyclic_shift(k: ObliviousKey, s: int) -> ObliviousKey:
    """Move the bit at index ``i`` to ``(i + s) mod n``, relabelling Alice's view the same way."""
    n = len(k)
    if n == 0:
        return k
    s = int(s) % n
    if s == 0:
        return k
    kn = k.knowledge
    # old labels still identify groups; canonicalization picks the new smallest member
    new = ParityKnowledge(
        *_canonical(np.roll(kn.known, s), np.roll(kn.value, s), np.roll(kn.group, s), np.roll(kn.offset, s))
    )
    return ObliviousKey(np.roll(k.bits, s), new)


class LinearSpanOracle:
    """Exact GF(2) affine knowledge: reduced rows of (index mask, parity).

    Rows are kept in a dict keyed by pivot (lowest set bit) with every other
    row's pivot cleared, so membership tests are a single reduction pass.
    """

    def __init__(self, length: int, constraints: Iterable[tuple[Iterable[int], int]] = ()):
        self.length = length
        self.rows: dict[int, tuple[int, int]] = {}
        for indices, p in constraints:
            self.add(indices, p)

    @staticmethod
    def _mask(indices: Iterable[int]) -> int:
        m = 0
        for i in indices:
            m ^= 1 << int(i)
        return m

    def _reduce(self, mask: int, parity: int) -> tuple[int, int]:
        for pivot, (row, p) in self.rows.items():
            if mask >> pivot & 1:
                mask ^= row
                parity ^= p
        return mask, parity

    def add(self, indices: Iterable[int], parity: int) -> None:
        mask = self._mask(indices)
        if mask >> self.length:
            raise IndexError("constraint index out of range")
        mask, parity = self._reduce(mask, int(parity) & 1)
        if mask == 0:
            if parity:
                raise ContradictionError("constraint contradicts earlier ones")
            return
        pivot = (mask & -mask).bit_length() - 1
        for q, (row, p) in list(self.rows.items()):
            if row >> pivot & 1:
                self.rows[q] = (row ^ mask, p ^ parity)
        self.rows[pivot] = (mask, parity)

    @property
    def rank(self) -> int:
        return len(self.rows)

    def value_of(self, indices: Iterable[int]) -> Optional[int]:
        """Value of the XOR over ``indices`` if it lies in the span, else None."""
        mask, parity = self._reduce(self._mask(indices), 0)
        return parity if mask == 0 else None

    def determined_singles(self) -> dict[int, int]:
        out = {}
        for i in range(self.length):
            v = self.value_of([i])
            if v is not None:
                out[i] = v
        return out

    def determined_pairs(self) -> dict[tuple[int, int], int]:
        out = {}
        for i, j in combinations(range(self.length), 2):
            v = self.value_of([i, j])
            if v is not None:
                out[(i, j)] = v
        return out

    def intersect(self, other: "LinearSpanOracle") -> "LinearSpanOracle":
        """Knowledge of ``a XOR b`` given independent knowledge of ``a`` (self) and ``b`` (other).

        A functional is determined for the sum iff it lies in both spans; its
        value is the sum of the two values. Computed with the Zassenhaus
        construction on rows ``[u | u | pa, 0]`` and ``[v | 0 | 0, pb]``.
        """
        if self.length != other.length:
            raise ValueError("length mismatch")
        n = self.length
        rows = [((m << n) | m, p, 0) for m, p in self.rows.values()]
        rows += [((m << n), 0, p) for m, p in other.rows.values()]
        basis: list[tuple[int, int, int]] = []
        for vec, pa, pb in rows:
            for bvec, bpa, bpb in basis:
                top = bvec.bit_length() - 1
                if vec >> top & 1:
                    vec, pa, pb = vec ^ bvec, pa ^ bpa, pb ^ bpb
            if vec:
                basis.append((vec, pa, pb))
                basis.sort(key=lambda r: -r[0])
        out = LinearSpanOracle(n)
        low = (1 << n) - 1
        for vec, pa, pb in basis:
            if vec >> n == 0:
                out.add([i for i in range(n) if (vec & low) >> i & 1], pa ^ pb)
        return out


def oracle_equivalent(k, o: LinearSpanOracle) -> bool:
    """True iff both models determine the same single bits and the same pairwise sums."""
    kn = k.knowledge if isinstance(k, ObliviousKey) else k
    if kn.length != o.length:
        return False
    if kn.known_dict() != o.determined_singles():
        return False
    pairs = {}
    for i, j in combinations(range(kn.length), 2):
        v = kn.parity(i, j)
        if v is not None:
            pairs[(i, j)] = v
    return pairs == o.determined_pairs()
