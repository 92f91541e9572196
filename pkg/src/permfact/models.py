"""Generative permutation models factorized over a partition schedule.

A :class:`FactorizedModel` combines a representation spec with a conditional
model. Sampling iterates over the blocks of a :class:`Schedule`, spending one
conditional evaluation per block and drawing the block's positions
independently, conditioned on everything already unmasked. Factorized
representations decode every in-domain code, so sampling always yields a
valid permutation; the inline representation may produce invalid sequences,
which are returned as tagged outcomes rather than raised.

Log-probabilities are natural logs; entropies and cross-entropies are
reported in bits.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .codecs import (
    Code,
    DomainViolation,
    RepresentationKind,
    RepresentationSpec,
    decode_rows,
    validate_rows,
)
from .learners import (
    MASKED,
    ConditionalModel,
    NeuralConditionalModel,
    TabularMarginalModel,
)
from .perms import Permutation
from .rngs import as_generator

__all__ = [
    "Schedule",
    "make_schedule",
    "ar_schedule",
    "MaskedState",
    "FactorizedModel",
    "SampleOutcome",
    "sample",
    "sample_rows",
    "sample_many",
    "log_prob",
    "log_prob_rows",
    "entropy_upper_bound",
    "cross_entropy",
    "save_model",
    "load_model",
]

MODEL_MAGIC = "permfact.model"
MODEL_VERSION = 1


@dataclass(frozen=True)
class Schedule:
    """Ordered partition of positions {1..n}; the number of blocks is the NFE
    count spent per sample."""

    blocks: tuple[tuple[int, ...], ...]

    def __post_init__(self):
        flat = [p for block in self.blocks for p in block]
        n = len(flat)
        if n == 0 or any(len(b) == 0 for b in self.blocks):
            raise ValueError("schedule blocks must be non-empty")
        if sorted(flat) != list(range(1, n + 1)):
            raise ValueError(f"blocks must partition 1..{n}, got {self.blocks}")

    @property
    def n(self) -> int:
        return sum(len(b) for b in self.blocks)

    @property
    def nfe(self) -> int:
        return len(self.blocks)


def make_schedule(n: int, nfe: int, contiguous: bool = True, seed=None) -> Schedule:
    """Contiguous left-to-right blocks of size round(n/nfe); the last block
    absorbs the remainder. ``contiguous=False`` shuffles position assignment
    while keeping block sizes (seeded)."""
    if not 1 <= nfe <= n:
        raise ValueError(f"nfe must be in 1..{n}, got {nfe}")
    if nfe == 1:
        sizes = [n]
    else:
        size = max(1, round(n / nfe))
        # keep every block non-empty when round() overshoots
        size = min(size, (n - 1) // (nfe - 1))
        sizes = [size] * (nfe - 1) + [n - size * (nfe - 1)]
    positions = list(range(1, n + 1))
    if not contiguous:
        rng = as_generator(seed)
        positions = [int(v) for v in rng.permutation(positions)]
    blocks = []
    start = 0
    for s in sizes:
        blocks.append(tuple(sorted(positions[start : start + s])))
        start += s
    return Schedule(tuple(blocks))


def ar_schedule(n: int) -> Schedule:
    return make_schedule(n, n)


@dataclass(frozen=True)
class MaskedState:
    """A partially unmasked code with optional conditioning tokens."""

    spec: RepresentationSpec
    values: tuple[int | None, ...]
    context: tuple[int, ...] | None = None

    def __post_init__(self):
        if len(self.values) != self.spec.n:
            raise ValueError(f"need {self.spec.n} values, got {len(self.values)}")
        for i, v in enumerate(self.values, start=1):
            if v is not None and not 0 <= v < self.spec.domain_size(i):
                raise DomainViolation(i, v, self.spec.domain_size(i))

    def as_row(self) -> np.ndarray:
        return np.array([MASKED if v is None else v for v in self.values], dtype=np.int64)


@dataclass(frozen=True)
class FactorizedModel:
    """Representation + conditional + the objective it was trained with."""

    spec: RepresentationSpec
    conditional: ConditionalModel
    objective: str = "MLM"

    def __post_init__(self):
        if self.objective not in ("MLM", "AR"):
            raise ValueError(f"objective must be MLM or AR, got {self.objective!r}")

    def check_schedule(self, schedule: Schedule) -> None:
        if schedule.n != self.spec.n:
            raise ValueError(f"schedule covers {schedule.n} positions, model has {self.spec.n}")
        if self.objective == "AR":
            expected = tuple((i,) for i in range(1, self.spec.n + 1))
            if schedule.blocks != expected:
                raise ValueError("AR models only support the full-NFE left-to-right schedule")


@dataclass(frozen=True)
class SampleOutcome:
    """One generated sample. ``permutation`` is None iff ``valid`` is False,
    which can only happen for the inline representation."""

    code: Code
    permutation: Permutation | None
    valid: bool
    raw: tuple[int, ...]


def _draw_categorical(rng, probs: np.ndarray) -> np.ndarray:
    """Vectorized inverse-CDF draw; probs (B, D) rows sum to 1."""
    cdf = np.cumsum(probs, axis=1)
    u = rng.random((probs.shape[0], 1))
    idx = (u > cdf).sum(axis=1)
    return np.minimum(idx, probs.shape[1] - 1)


def sample_rows(
    model: FactorizedModel,
    schedule: Schedule,
    contexts: np.ndarray | None,
    count: int,
    rng,
) -> np.ndarray:
    """Draw ``count`` code rows; one conditional evaluation per block."""
    model.check_schedule(schedule)
    rng = as_generator(rng)
    n = model.spec.n
    values = np.full((count, n), MASKED, dtype=np.int64)
    sizes = model.spec.domain_sizes()
    for block in schedule.blocks:
        probs = model.conditional.predict_rows(values, contexts)
        for pos in block:
            p = probs[:, pos - 1, : sizes[pos - 1]]
            values[:, pos - 1] = _draw_categorical(rng, p)
    return values


def _outcomes_from_rows(model: FactorizedModel, code_rows: np.ndarray) -> list[SampleOutcome]:
    spec = model.spec
    out = []
    if spec.kind is RepresentationKind.INLINE:
        raws = code_rows + 1
        valid = validate_rows(code_rows)
        for row, raw, ok in zip(code_rows, raws, valid):
            code = Code(spec, tuple(int(v) for v in row))
            perm = Permutation(tuple(int(v) for v in raw)) if ok else None
            out.append(SampleOutcome(code, perm, bool(ok), tuple(int(v) for v in raw)))
    else:
        perm_rows = decode_rows(code_rows, spec.kind) + 1
        for row, praw in zip(code_rows, perm_rows):
            code = Code(spec, tuple(int(v) for v in row))
            perm = Permutation(tuple(int(v) for v in praw))
            out.append(SampleOutcome(code, perm, True, perm.elems))
    return out


def sample(model: FactorizedModel, schedule: Schedule, context=None, seed=None) -> SampleOutcome:
    return sample_many(model, schedule, context, 1, seed)[0]


def sample_many(
    model: FactorizedModel, schedule: Schedule, context=None, count: int = 1, seed=None
) -> list[SampleOutcome]:
    contexts = None
    if context is not None:
        contexts = np.tile(np.asarray(context, dtype=np.int64), (count, 1))
    rows = sample_rows(model, schedule, contexts, count, as_generator(seed))
    return _outcomes_from_rows(model, rows)


def log_prob_rows(
    model: FactorizedModel,
    schedule: Schedule,
    code_rows: np.ndarray,
    contexts: np.ndarray | None = None,
) -> np.ndarray:
    """Natural-log probability of each row under the blockwise factorization."""
    model.check_schedule(schedule)
    code_rows = np.ascontiguousarray(code_rows, dtype=np.int64)
    B, n = code_rows.shape
    sizes = model.spec.domain_sizes()
    bad = (code_rows < 0) | (code_rows >= sizes[None, :])
    if bad.any():
        b, pos = np.argwhere(bad)[0]
        raise DomainViolation(int(pos) + 1, int(code_rows[b, pos]), int(sizes[pos]), item=int(b))

    values = np.full((B, n), MASKED, dtype=np.int64)
    total = np.zeros(B)
    with np.errstate(divide="ignore"):
        for block in schedule.blocks:
            probs = model.conditional.predict_rows(values, contexts)
            for pos in block:
                p = probs[np.arange(B), pos - 1, code_rows[:, pos - 1]]
                total += np.log(p)
                values[:, pos - 1] = code_rows[:, pos - 1]
    return total


def log_prob(model: FactorizedModel, schedule: Schedule, code: Code, context=None) -> float:
    contexts = None
    if context is not None:
        contexts = np.asarray(context, dtype=np.int64)[None, :]
    rows = np.asarray(code.values, dtype=np.int64)[None, :]
    return float(log_prob_rows(model, schedule, rows, contexts)[0])


def entropy_upper_bound(n: int, schedule: Schedule) -> float:
    """The inline-representation entropy ceiling for a schedule, in bits."""
    if schedule.n != n:
        raise ValueError(f"schedule covers {schedule.n} positions, expected {n}")
    covered = 0
    total = 0.0
    for block in schedule.blocks:
        covered += len(block)
        total += math.log2(n - covered + 1)
    return total


def cross_entropy(
    model: FactorizedModel,
    schedule: Schedule,
    code_rows: np.ndarray,
    contexts: np.ndarray | None = None,
) -> float:
    """Mean negative log-probability of the dataset, in bits per permutation."""
    lp = log_prob_rows(model, schedule, code_rows, contexts)
    return float(-(lp.mean()) / math.log(2))


# ---------------------------------------------------------------------------
# serialization
# ---------------------------------------------------------------------------

_CONDITIONAL_TYPES = {
    "tabular": TabularMarginalModel,
    "neural": NeuralConditionalModel,
}


def save_model(model: FactorizedModel, path: str | Path) -> None:
    for type_name, klass in _CONDITIONAL_TYPES.items():
        if isinstance(model.conditional, klass):
            break
    else:
        raise TypeError(f"cannot serialize conditional of type {type(model.conditional)}")
    doc = {
        "magic": MODEL_MAGIC,
        "version": MODEL_VERSION,
        "representation": model.spec.kind.value,
        "n": model.spec.n,
        "objective": model.objective,
        "conditional_type": type_name,
        "conditional": model.conditional.to_payload(),
    }
    Path(path).write_text(json.dumps(doc, sort_keys=True))


def load_model(path: str | Path) -> FactorizedModel:
    doc = json.loads(Path(path).read_text())
    if doc.get("magic") != MODEL_MAGIC:
        raise ValueError(f"{path}: not a permfact model file")
    if doc.get("version") != MODEL_VERSION:
        raise ValueError(f"{path}: unsupported model version {doc.get('version')}")
    spec = RepresentationSpec(RepresentationKind.from_name(doc["representation"]), doc["n"])
    klass = _CONDITIONAL_TYPES[doc["conditional_type"]]
    conditional = klass.from_payload(spec, doc["conditional"])
    return FactorizedModel(spec, conditional, doc["objective"])
