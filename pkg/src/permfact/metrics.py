"""Distances, ranking quality, and sample-population statistics."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .codecs import lehmer_encode
from .perms import (
    InvalidPermutation,
    LengthMismatch,
    Permutation,
    compose,
    inverse,
    is_cyclic,
    validate,
)

__all__ = [
    "kendall_tau",
    "weighted_kendall_tau",
    "lehmer_l1",
    "ndcg_at_k",
    "SampleStats",
    "sample_stats",
]


def _count_inversions(seq: list[int]) -> int:
    """Merge-sort inversion count, O(n log n)."""
    n = len(seq)
    if n < 2:
        return 0
    mid = n // 2
    left, right = seq[:mid], seq[mid:]
    count = _count_inversions(left) + _count_inversions(right)
    i = j = k = 0
    while i < len(left) and j < len(right):
        if left[i] <= right[j]:
            seq[k] = left[i]
            i += 1
        else:
            seq[k] = right[j]
            j += 1
            count += len(left) - i
        k += 1
    seq[k:] = left[i:] if i < len(left) else right[j:]
    return count


def kendall_tau(p: Permutation, q: Permutation) -> int:
    """Number of discordant pairs between two permutations.

    Computed as the inversion count of the relative permutation q^-1 . p, so
    kendall_tau(p, identity) is the inversion count of p itself.
    """
    if p.n != q.n:
        raise LengthMismatch(p.n, q.n)
    rel = compose(inverse(q), p)
    return _count_inversions(list(rel.elems))


def weighted_kendall_tau(p: Permutation, weights: Sequence[float]) -> float:
    """Sum of per-position weights times the right-Lehmer code of ``p``."""
    if len(weights) != p.n:
        raise LengthMismatch(p.n, len(weights))
    code = lehmer_encode(p, side="right")
    return float(sum(w * v for w, v in zip(weights, code.values)))


def lehmer_l1(p: Permutation, q: Permutation) -> int:
    """Manhattan distance between the right-Lehmer codes of p and q."""
    if p.n != q.n:
        raise LengthMismatch(p.n, q.n)
    cp = lehmer_encode(p, side="right").values
    cq = lehmer_encode(q, side="right").values
    return int(sum(abs(a - b) for a, b in zip(cp, cq)))


def ndcg_at_k(
    predicted_ranking: Sequence[int],
    relevance: Sequence[float],
    k: int,
    gain: str = "linear",
) -> float:
    """Normalized discounted cumulative gain over the top k ranked items.

    ``predicted_ranking`` lists item ids (1-indexed into ``relevance``) best
    first. Gain is the raw relevance by default (``gain="exp"`` uses
    2**rel - 1); the discount is 1/log2(1 + rank). The ideal ranking sorts by
    relevance descending with ties broken by item index, and scores exactly
    1.0. All-zero relevance also scores 1.0 (every ordering is ideal).
    """
    n = len(relevance)
    if not 1 <= k <= n:
        raise ValueError(f"k must be in 1..{n}, got {k}")
    if any(r < 0 for r in relevance):
        raise ValueError("relevance must be non-negative")
    if len(predicted_ranking) != n:
        raise LengthMismatch(n, len(predicted_ranking))

    def g(r: float) -> float:
        return float(2.0 ** r - 1.0) if gain == "exp" else float(r)

    def dcg(items: Sequence[int]) -> float:
        return sum(g(relevance[item - 1]) / np.log2(rank + 1)
                   for rank, item in enumerate(items[:k], start=1))

    ideal = sorted(range(1, n + 1), key=lambda item: (-relevance[item - 1], item))
    denom = dcg(ideal)
    if denom == 0.0:
        return 1.0
    return float(dcg(list(predicted_ranking)) / denom)


@dataclass(frozen=True)
class SampleStats:
    """Population statistics of generated sequences.

    The ``unique*`` fields follow the three benchmark panels: fraction of
    distinct outputs, of distinct valid permutations, and of distinct valid
    cyclic permutations, each relative to the total sample count. The plain
    ``valid_fraction``/``cyclic_fraction`` count every sample (duplicates
    included); ``train_fraction`` is the share of samples that fall in a
    supplied training set.
    """

    total: int
    unique_fraction: float
    unique_valid_fraction: float
    unique_valid_cyclic_fraction: float
    valid_fraction: float
    cyclic_fraction: float
    train_fraction: float | None = None

    def __post_init__(self):
        triple = (self.unique_valid_cyclic_fraction, self.unique_valid_fraction,
                  self.unique_fraction)
        if not (0.0 <= triple[0] <= triple[1] <= triple[2] <= 1.0):
            raise ValueError(f"fractions must be nested in [0,1]: {triple}")


def sample_stats(
    outputs: Sequence[Sequence[int]],
    train_set: set[tuple[int, ...]] | None = None,
) -> SampleStats:
    """Fractions of unique / valid / cyclic outputs in a sample population."""
    total = len(outputs)
    if total == 0:
        raise ValueError("sample_stats needs at least one output")
    seqs = [tuple(int(v) for v in out) for out in outputs]
    distinct = set(seqs)

    valid_cache: dict[tuple[int, ...], Permutation | None] = {}
    for s in distinct:
        try:
            valid_cache[s] = validate(s)
        except InvalidPermutation:
            valid_cache[s] = None
    distinct_valid = {s for s, p in valid_cache.items() if p is not None}
    distinct_cyclic = {s for s in distinct_valid if is_cyclic(valid_cache[s])}

    n_valid = sum(1 for s in seqs if s in distinct_valid)
    n_cyclic = sum(1 for s in seqs if s in distinct_cyclic)
    train_fraction = None
    if train_set is not None:
        train_fraction = sum(1 for s in seqs if s in train_set) / total

    return SampleStats(
        total=total,
        unique_fraction=len(distinct) / total,
        unique_valid_fraction=len(distinct_valid) / total,
        unique_valid_cyclic_fraction=len(distinct_cyclic) / total,
        valid_fraction=n_valid / total,
        cyclic_fraction=n_cyclic / total,
        train_fraction=train_fraction,
    )
