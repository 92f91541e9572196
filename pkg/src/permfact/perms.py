"""Core permutation type: validation, inversion, composition, cycle analysis.

Permutations are stored in inline notation with 1-indexed values, e.g.
``[3, 5, 4, 1, 2]`` means position 1 holds value 3. All operations are pure
and all values are immutable after construction.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator, Sequence

__all__ = [
    "InvalidPermutation",
    "LengthMismatch",
    "Permutation",
    "CycleDecomposition",
    "validate",
    "identity",
    "inverse",
    "compose",
    "cycles",
    "is_cyclic",
    "is_subpermutation",
]


class InvalidPermutation(ValueError):
    """A sequence that is not a bijection on {1..n}.

    ``reason`` is one of ``"duplicate"``, ``"out_of_range"``, ``"empty"``.
    ``item`` is set when raised for one element of a batch.
    """

    def __init__(self, reason: str, detail: str = "", item: int | None = None):
        self.reason = reason
        self.item = item
        msg = f"invalid permutation ({reason})"
        if detail:
            msg += f": {detail}"
        if item is not None:
            msg += f" [batch item {item}]"
        super().__init__(msg)


class LengthMismatch(ValueError):
    """Two sequences that must have equal length do not."""

    def __init__(self, expected: int, got: int):
        self.expected = expected
        self.got = got
        super().__init__(f"length mismatch: expected {expected}, got {got}")


@dataclass(frozen=True)
class Permutation:
    """Inline-notation permutation over {1..n}. Construct via :func:`validate`."""

    elems: tuple[int, ...]

    @property
    def n(self) -> int:
        return len(self.elems)

    def __len__(self) -> int:
        return len(self.elems)

    def __getitem__(self, i: int) -> int:
        return self.elems[i]

    def __iter__(self) -> Iterator[int]:
        return iter(self.elems)

    def apply(self, value: int) -> int:
        """The permutation as a map on {1..n}: value at 1-indexed position."""
        return self.elems[value - 1]


@dataclass(frozen=True)
class CycleDecomposition:
    """Disjoint cycles of a permutation; each cycle starts at its smallest value."""

    cycles: tuple[tuple[int, ...], ...]

    def __len__(self) -> int:
        return len(self.cycles)

    def lengths(self) -> tuple[int, ...]:
        return tuple(len(c) for c in self.cycles)


def validate(seq: Sequence[int], item: int | None = None) -> Permutation:
    """Check that ``seq`` is a bijection on {1..n} and wrap it.

    Raises :class:`InvalidPermutation` with reason ``empty``, ``out_of_range``
    or ``duplicate``; ``item`` tags the offending batch element if given.
    """
    elems = tuple(int(v) for v in seq)
    n = len(elems)
    if n == 0:
        raise InvalidPermutation("empty", item=item)
    seen = [False] * n
    for v in elems:
        if not 1 <= v <= n:
            raise InvalidPermutation("out_of_range", f"value {v} not in 1..{n}", item=item)
        if seen[v - 1]:
            raise InvalidPermutation("duplicate", f"value {v} repeated", item=item)
        seen[v - 1] = True
    return Permutation(elems)


def identity(n: int) -> Permutation:
    if n < 1:
        raise InvalidPermutation("empty")
    return Permutation(tuple(range(1, n + 1)))


def inverse(p: Permutation) -> Permutation:
    """The permutation q with q[p[i]] = i for all 1-indexed i."""
    q = [0] * p.n
    for i, v in enumerate(p.elems):
        q[v - 1] = i + 1
    return Permutation(tuple(q))


def compose(p: Permutation, q: Permutation) -> Permutation:
    """Functional composition r(i) = p(q(i))."""
    if p.n != q.n:
        raise LengthMismatch(p.n, q.n)
    return Permutation(tuple(p.elems[v - 1] for v in q.elems))


def cycles(p: Permutation) -> CycleDecomposition:
    """Disjoint cycles under the map i -> p(i), ordered by smallest element."""
    seen = [False] * p.n
    out: list[tuple[int, ...]] = []
    for start in range(1, p.n + 1):
        if seen[start - 1]:
            continue
        cyc = []
        v = start
        while not seen[v - 1]:
            seen[v - 1] = True
            cyc.append(v)
            v = p.elems[v - 1]
        out.append(tuple(cyc))
    return CycleDecomposition(tuple(out))


def is_cyclic(p: Permutation) -> bool:
    """True iff the cycle decomposition is a single n-cycle."""
    count = 0
    v = 1
    # follow the cycle through 1; cyclic iff it closes after exactly n steps
    while True:
        v = p.elems[v - 1]
        count += 1
        if v == 1:
            break
        if count > p.n:  # pragma: no cover - unreachable for valid perms
            raise AssertionError("cycle walk did not terminate")
    return count == p.n


def is_subpermutation(sub: Sequence[int], p: Permutation) -> bool:
    """True iff ``sub`` appears in ``p`` in order (not necessarily contiguous)."""
    vals = list(sub)
    if len(set(vals)) != len(vals):
        raise InvalidPermutation("duplicate", "sub-permutation values must be distinct")
    for v in vals:
        if not 1 <= v <= p.n:
            raise InvalidPermutation("out_of_range", f"value {v} not in 1..{p.n}")
    it = iter(p.elems)
    return all(v in it for v in vals)
