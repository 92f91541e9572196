"""Exact samplers and log-probabilities for classical permutation distributions.

Uniform sampling goes through Fisher-Yates draws, cyclic sampling through
Sattolo's restriction (all non-final draws positive), the Mallows model
through independent truncated-geometric right-Lehmer elements, Plackett-Luce
through sequential choice, and the repeated insertion model (RIM) through
per-step insertion-slot distributions.

All samplers are pure functions of (params, rng) and log-probabilities are
natural logs.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .codecs import (
    Code,
    RepresentationKind,
    RepresentationSpec,
    fy_decode,
    iv_decode_with_ref,
    iv_encode_with_ref,
    lehmer_decode,
    lehmer_encode,
)
from .perms import Permutation
from .rngs import as_generator

__all__ = [
    "fisher_yates_shuffle",
    "sattolo",
    "MallowsParams",
    "sample_mallows",
    "mallows_log_prob",
    "PlackettLuceParams",
    "sample_plackett_luce",
    "pl_log_prob",
    "RimParams",
    "uniform_rim",
    "sample_rim",
    "rim_log_prob",
]


def fisher_yates_shuffle(n: int, seed) -> Permutation:
    """Uniform permutation of {1..n}, via random Fisher-Yates draws."""
    if n < 1:
        raise ValueError("n must be >= 1")
    rng = as_generator(seed)
    draws = [int(rng.integers(0, n - i + 1)) for i in range(1, n)] + [0]
    return fy_decode(Code(RepresentationSpec(RepresentationKind.FISHER_YATES, n), tuple(draws)))


def sattolo(n: int, seed) -> Permutation:
    """Uniform cyclic permutation of {1..n}: Fisher-Yates with draws forced > 0."""
    if n < 2:
        raise ValueError("sattolo requires n >= 2")
    rng = as_generator(seed)
    draws = [int(rng.integers(1, n - i + 1)) for i in range(1, n)] + [0]
    return fy_decode(Code(RepresentationSpec(RepresentationKind.FISHER_YATES, n), tuple(draws)))


# ---------------------------------------------------------------------------
# Mallows, factorized over the right-Lehmer code
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class MallowsParams:
    """Per-position weights >= 0 and dispersion phi in (0, 1]."""

    weights: tuple[float, ...]
    phi: float

    def __post_init__(self):
        if not 0.0 < self.phi <= 1.0:
            raise ValueError(f"phi must be in (0, 1], got {self.phi}")
        if any(w < 0 for w in self.weights):
            raise ValueError("weights must be non-negative")

    @property
    def n(self) -> int:
        return len(self.weights)


def _mallows_position_logits(params: MallowsParams, position: int) -> np.ndarray:
    """Unnormalized log-weights over the right-Lehmer domain of ``position``."""
    size = params.n - position + 1
    ell = np.arange(size, dtype=float)
    return ell * params.weights[position - 1] * np.log(params.phi)


def sample_mallows(params: MallowsParams, seed) -> Permutation:
    """Draw each right-Lehmer element independently with weight phi**(w_j * l_j)."""
    rng = as_generator(seed)
    vals = []
    for pos in range(1, params.n + 1):
        logits = _mallows_position_logits(params, pos)
        probs = np.exp(logits - logits.max())
        probs /= probs.sum()
        vals.append(int(rng.choice(len(probs), p=probs)))
    code = Code(RepresentationSpec(RepresentationKind.LEHMER_RIGHT, params.n), tuple(vals))
    return lehmer_decode(code, side="right")


def mallows_log_prob(params: MallowsParams, p: Permutation) -> float:
    if p.n != params.n:
        raise ValueError(f"permutation length {p.n} != params length {params.n}")
    code = lehmer_encode(p, side="right")
    total = 0.0
    for pos, v in enumerate(code.values, start=1):
        logits = _mallows_position_logits(params, pos)
        total += logits[v] - _logsumexp(logits)
    return float(total)


def _logsumexp(x: np.ndarray) -> float:
    m = x.max()
    return float(m + np.log(np.exp(x - m).sum()))


# ---------------------------------------------------------------------------
# Plackett-Luce
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PlackettLuceParams:
    """Positive score per item; item i's score is scores[i-1]."""

    scores: tuple[float, ...]

    def __post_init__(self):
        if any(s <= 0 for s in self.scores):
            raise ValueError("Plackett-Luce scores must be positive")

    @property
    def n(self) -> int:
        return len(self.scores)


def sample_plackett_luce(params: PlackettLuceParams, seed) -> Permutation:
    """Sequential choice among remaining items, proportional to their scores."""
    rng = as_generator(seed)
    remaining = list(range(1, params.n + 1))
    out = []
    while remaining:
        s = np.array([params.scores[i - 1] for i in remaining])
        idx = int(rng.choice(len(remaining), p=s / s.sum()))
        out.append(remaining.pop(idx))
    return Permutation(tuple(out))


def pl_log_prob(params: PlackettLuceParams, p: Permutation) -> float:
    if p.n != params.n:
        raise ValueError(f"permutation length {p.n} != params length {params.n}")
    total = 0.0
    denom = float(sum(params.scores))
    for v in p.elems:
        s = params.scores[v - 1]
        total += np.log(s) - np.log(denom)
        denom -= s
    return float(total)


# ---------------------------------------------------------------------------
# Repeated insertion model
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class RimParams:
    """Reference ordering plus one insertion distribution per step.

    Step i inserts reference element i at a slot drawn from
    ``insertion_probs[i-1]``, a distribution over {0..i-1}.
    """

    reference: Permutation
    insertion_probs: tuple[tuple[float, ...], ...]

    def __post_init__(self):
        if len(self.insertion_probs) != self.reference.n:
            raise ValueError("need one insertion distribution per reference element")
        for i, dist in enumerate(self.insertion_probs, start=1):
            if len(dist) != i:
                raise ValueError(f"step {i} distribution must have {i} slots, got {len(dist)}")
            if any(q < 0 for q in dist):
                raise ValueError(f"step {i} has negative probabilities")
            if abs(sum(dist) - 1.0) > 1e-9:
                raise ValueError(f"step {i} distribution sums to {sum(dist)}, not 1")

    @property
    def n(self) -> int:
        return self.reference.n


def uniform_rim(reference: Permutation) -> RimParams:
    probs = tuple(tuple(1.0 / i for _ in range(i)) for i in range(1, reference.n + 1))
    return RimParams(reference, probs)


def sample_rim(params: RimParams, seed) -> Permutation:
    rng = as_generator(seed)
    vals = tuple(
        int(rng.choice(i, p=np.array(params.insertion_probs[i - 1])))
        for i in range(1, params.n + 1)
    )
    code = Code(RepresentationSpec(RepresentationKind.INSERTION_VECTOR, params.n), vals)
    return iv_decode_with_ref(code, params.reference)


def rim_log_prob(params: RimParams, p: Permutation) -> float:
    if p.n != params.n:
        raise ValueError(f"permutation length {p.n} != params length {params.n}")
    code = iv_encode_with_ref(p, params.reference)
    total = 0.0
    for i, v in enumerate(code.values, start=1):
        q = params.insertion_probs[i - 1][v]
        if q == 0.0:
            return float("-inf")
        total += np.log(q)
    return float(total)
