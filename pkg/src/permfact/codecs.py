"""Bijective codecs between inline permutations and factorized representations.

Three factorized representations are supported, plus the raw inline form:

* ``LEHMER_RIGHT``  -- per-position count of smaller elements to the right;
  position i (1-indexed) has domain {0..n-i}.
* ``LEHMER_LEFT``   -- per-position count of smaller elements to the left;
  position i has domain {0..i-1}.
* ``FISHER_YATES``  -- swap offsets that produce the permutation when the
  Fisher-Yates pass is run from the identity; position i has domain {0..n-i}.
* ``INSERTION_VECTOR`` -- slot at which the i-th reference element is inserted;
  position i has domain {0..i-1}. Encoding/decoding goes through the inverse
  permutation and the left-Lehmer codec, which makes the batched path a few
  vector ops per position.
* ``INLINE`` -- the identity "codec" (values shifted to 0-indexed); decoding
  can fail, which is exactly the failure mode the generative experiments
  measure. Inline is not part of the bijectivity guarantees below.

Scalar operations are deliberately written as plain loops over the defining
process; batched operations are vectorized over the batch and must agree
elementwise with the scalar path.
"""
from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Sequence

import numpy as np

from .perms import (
    InvalidPermutation,
    LengthMismatch,
    Permutation,
    compose,
    inverse,
    validate,
)

__all__ = [
    "RepresentationKind",
    "RepresentationSpec",
    "Code",
    "DomainViolation",
    "lehmer_encode",
    "lehmer_decode",
    "fy_encode",
    "fy_decode",
    "iv_encode",
    "iv_decode",
    "iv_decode_with_ref",
    "encode",
    "decode",
    "batch_encode",
    "batch_decode",
    "encode_rows",
    "decode_rows",
    "validate_rows",
]


class RepresentationKind(Enum):
    LEHMER_RIGHT = "lehmer-right"
    LEHMER_LEFT = "lehmer-left"
    FISHER_YATES = "fy"
    INSERTION_VECTOR = "iv"
    INLINE = "inline"

    @classmethod
    def from_name(cls, name: str) -> "RepresentationKind":
        for kind in cls:
            if kind.value == name:
                return kind
        raise ValueError(f"unknown representation {name!r}; expected one of "
                         f"{[k.value for k in cls]}")


FACTORIZED_KINDS = (
    RepresentationKind.LEHMER_RIGHT,
    RepresentationKind.LEHMER_LEFT,
    RepresentationKind.FISHER_YATES,
    RepresentationKind.INSERTION_VECTOR,
)


class DomainViolation(ValueError):
    """A code value outside its position's domain.

    ``position`` is 1-indexed, ``bound`` is the exclusive upper bound of the
    domain {0..bound-1}; ``item`` tags the batch element if applicable.
    """

    def __init__(self, position: int, value: int, bound: int, item: int | None = None):
        self.position = position
        self.value = value
        self.bound = bound
        self.item = item
        msg = f"code value {value} at position {position} outside domain [0, {bound})"
        if item is not None:
            msg += f" [batch item {item}]"
        super().__init__(msg)


@dataclass(frozen=True)
class RepresentationSpec:
    """Representation kind plus per-position domain sizes for length n."""

    kind: RepresentationKind
    n: int

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("representation length must be >= 1")

    def domain_size(self, position: int) -> int:
        """Size of the domain of 1-indexed ``position`` (values are {0..size-1})."""
        if not 1 <= position <= self.n:
            raise ValueError(f"position {position} out of range 1..{self.n}")
        k, n = self.kind, self.n
        if k in (RepresentationKind.LEHMER_RIGHT, RepresentationKind.FISHER_YATES):
            return n - position + 1
        if k in (RepresentationKind.LEHMER_LEFT, RepresentationKind.INSERTION_VECTOR):
            return position
        return n  # INLINE

    def domain_sizes(self) -> np.ndarray:
        return np.array([self.domain_size(i) for i in range(1, self.n + 1)], dtype=np.int64)

    @property
    def max_domain(self) -> int:
        return int(self.domain_sizes().max())

    def domain_mask(self) -> np.ndarray:
        """Boolean (n, max_domain) mask of admissible values per position."""
        sizes = self.domain_sizes()
        return np.arange(sizes.max())[None, :] < sizes[:, None]

    def code_count(self) -> int:
        """Number of in-domain codes; equals n! for every factorized kind."""
        out = 1
        for s in self.domain_sizes():
            out *= int(s)
        return out


@dataclass(frozen=True)
class Code:
    """A representation sequence together with its spec."""

    spec: RepresentationSpec
    values: tuple[int, ...]

    def __post_init__(self):
        if len(self.values) != self.spec.n:
            raise LengthMismatch(self.spec.n, len(self.values))

    def __len__(self) -> int:
        return len(self.values)

    def check(self, item: int | None = None) -> "Code":
        """Raise :class:`DomainViolation` unless every value is in-domain."""
        for i, v in enumerate(self.values, start=1):
            bound = self.spec.domain_size(i)
            if not 0 <= v < bound:
                raise DomainViolation(i, v, bound, item=item)
        return self


def _as_code(values: Sequence[int], kind: RepresentationKind) -> Code:
    vals = tuple(int(v) for v in values)
    return Code(RepresentationSpec(kind, len(vals)), vals).check()


# ---------------------------------------------------------------------------
# scalar codecs (plain loops over the defining processes)
# ---------------------------------------------------------------------------

def lehmer_encode(p: Permutation, side: str = "right") -> Code:
    """Count inversions per position: smaller-to-the-right (``right``) or
    smaller-to-the-left (``left``)."""
    e = p.elems
    n = p.n
    if side == "right":
        vals = tuple(sum(1 for j in range(i + 1, n) if e[j] < e[i]) for i in range(n))
        kind = RepresentationKind.LEHMER_RIGHT
    elif side == "left":
        vals = tuple(sum(1 for j in range(i) if e[j] < e[i]) for i in range(n))
        kind = RepresentationKind.LEHMER_LEFT
    else:
        raise ValueError(f"side must be 'left' or 'right', got {side!r}")
    return Code(RepresentationSpec(kind, n), vals)


def lehmer_decode(c: Code, side: str | None = None) -> Permutation:
    """Invert a Lehmer code by sampling-without-replacement from {1..n}.

    The right code picks pool[c_i] scanning positions left to right; the left
    code picks scanning right to left.
    """
    side = side or _side_of(c)
    c.check()
    n = c.spec.n
    pool = list(range(1, n + 1))
    out = [0] * n
    if side == "right":
        for i in range(n):
            out[i] = pool.pop(c.values[i])
    elif side == "left":
        for i in reversed(range(n)):
            out[i] = pool.pop(c.values[i])
    else:
        raise ValueError(f"side must be 'left' or 'right', got {side!r}")
    return Permutation(tuple(out))


def _side_of(c: Code) -> str:
    if c.spec.kind is RepresentationKind.LEHMER_RIGHT:
        return "right"
    if c.spec.kind is RepresentationKind.LEHMER_LEFT:
        return "left"
    raise ValueError(f"not a Lehmer code: {c.spec.kind}")


def fy_encode(p: Permutation) -> Code:
    """Deduce the Fisher-Yates draws that map the identity onto ``p``."""
    n = p.n
    arr = list(range(1, n + 1))
    draws = [0] * n
    for i in range(n):
        j = arr.index(p.elems[i], i)
        draws[i] = j - i
        arr[i], arr[j] = arr[j], arr[i]
    return Code(RepresentationSpec(RepresentationKind.FISHER_YATES, n), tuple(draws))


def fy_decode(c: Code) -> Permutation:
    """Run the Fisher-Yates pass from the identity, forcing the draws to ``c``."""
    c.check()
    n = c.spec.n
    arr = list(range(1, n + 1))
    for i, d in enumerate(c.values):
        j = i + d
        arr[i], arr[j] = arr[j], arr[i]
    return Permutation(tuple(arr))


def iv_encode(p: Permutation) -> Code:
    """Insertion vector of ``p``: the left-Lehmer code of the inverse."""
    left = lehmer_encode(inverse(p), side="left")
    return Code(RepresentationSpec(RepresentationKind.INSERTION_VECTOR, p.n), left.values)


def iv_decode(c: Code) -> Permutation:
    """Inverse of :func:`iv_encode`; equals sequential insertion with identity reference."""
    c.check()
    left = Code(RepresentationSpec(RepresentationKind.LEHMER_LEFT, c.spec.n), c.values)
    return inverse(lehmer_decode(left, side="left"))


def iv_decode_with_ref(c: Code, ref: Permutation) -> Permutation:
    """Insert ``ref``'s elements left to right at the slots given by ``c``.

    Equivalent to relabelling the identity-reference decode by ``ref``.
    """
    if ref.n != c.spec.n:
        raise LengthMismatch(c.spec.n, ref.n)
    return compose(ref, iv_decode(c))


def iv_encode_with_ref(p: Permutation, ref: Permutation) -> Code:
    """Insertion vector of ``p`` relative to reference ``ref``."""
    if ref.n != p.n:
        raise LengthMismatch(p.n, ref.n)
    return iv_encode(compose(inverse(ref), p))


def encode(p: Permutation, kind: RepresentationKind) -> Code:
    if kind is RepresentationKind.LEHMER_RIGHT:
        return lehmer_encode(p, "right")
    if kind is RepresentationKind.LEHMER_LEFT:
        return lehmer_encode(p, "left")
    if kind is RepresentationKind.FISHER_YATES:
        return fy_encode(p)
    if kind is RepresentationKind.INSERTION_VECTOR:
        return iv_encode(p)
    if kind is RepresentationKind.INLINE:
        return Code(RepresentationSpec(kind, p.n), tuple(v - 1 for v in p.elems))
    raise ValueError(f"unknown kind {kind}")


def decode(c: Code) -> Permutation:
    """Decode a code back to inline notation.

    Every factorized kind decodes any in-domain code. INLINE decoding raises
    :class:`~permfact.perms.InvalidPermutation` when the values do not form a
    permutation.
    """
    kind = c.spec.kind
    if kind in (RepresentationKind.LEHMER_RIGHT, RepresentationKind.LEHMER_LEFT):
        return lehmer_decode(c)
    if kind is RepresentationKind.FISHER_YATES:
        return fy_decode(c)
    if kind is RepresentationKind.INSERTION_VECTOR:
        return iv_decode(c)
    if kind is RepresentationKind.INLINE:
        c.check()
        return validate([v + 1 for v in c.values])
    raise ValueError(f"unknown kind {kind}")


# ---------------------------------------------------------------------------
# batched codecs: (B, n) int64 arrays, loop over positions, vectorized over
# the batch; results are independent of batch composition
# ---------------------------------------------------------------------------

def _lehmer_encode_rows(perms0: np.ndarray, left: bool) -> np.ndarray:
    code = perms0.copy()
    n = code.shape[1]
    if left:
        for i in reversed(range(1, n)):
            code[:, :i] -= code[:, i : i + 1] <= code[:, :i]
    else:
        for i in range(1, n):
            code[:, i:] -= code[:, i - 1 : i] < code[:, i:]
    return code


def _lehmer_decode_rows(codes: np.ndarray, left: bool) -> np.ndarray:
    perm = codes.copy()
    n = perm.shape[1]
    for i in range(1, n):
        if left:
            perm[:, :i] += perm[:, i : i + 1] <= perm[:, :i]
        else:
            j = n - i - 1
            perm[:, j + 1 :] += perm[:, j : j + 1] <= perm[:, j + 1 :]
    return perm


def _fy_encode_rows(perms0: np.ndarray) -> np.ndarray:
    B, n = perms0.shape
    base = np.tile(np.arange(n, dtype=perms0.dtype), (B, 1))
    # value -> current index in base, kept in sync with the swaps
    where = base.copy()
    draws = np.zeros_like(perms0)
    rows = np.arange(B)
    for i in range(n):
        j = where[rows, perms0[:, i]]
        draws[:, i] = j - i
        vi = base[:, i].copy()
        vj = base[rows, j].copy()
        base[:, i] = vj
        base[rows, j] = vi
        where[rows, vi] = j
        where[rows, vj] = i
    return draws


def _fy_decode_rows(codes: np.ndarray) -> np.ndarray:
    B, n = codes.shape
    perm = np.tile(np.arange(n, dtype=codes.dtype), (B, 1))
    rows = np.arange(B)
    for i in range(n):
        j = codes[:, i] + i
        vi = perm[:, i].copy()
        vj = perm[rows, j].copy()
        perm[:, i] = vj
        perm[rows, j] = vi
    return perm


def _invert_rows(perms0: np.ndarray) -> np.ndarray:
    return np.argsort(perms0, axis=1, kind="stable")


def validate_rows(rows: np.ndarray) -> np.ndarray:
    """Boolean per-row validity: each row a permutation of {0..n-1}."""
    n = rows.shape[1]
    in_range = ((rows >= 0) & (rows < n)).all(axis=1)
    ok = np.zeros(rows.shape[0], dtype=bool)
    if in_range.any():
        clipped = np.clip(rows, 0, n - 1)
        sorted_rows = np.sort(clipped, axis=1)
        ok = (sorted_rows == np.arange(n)).all(axis=1)
    return ok & in_range


def _check_rows_domains(codes: np.ndarray, spec: RepresentationSpec) -> None:
    bounds = spec.domain_sizes()[None, :]
    bad = (codes < 0) | (codes >= bounds)
    if bad.any():
        b, pos = np.argwhere(bad)[0]
        raise DomainViolation(int(pos) + 1, int(codes[b, pos]), int(bounds[0, pos]), item=int(b))


def encode_rows(perms0: np.ndarray, kind: RepresentationKind) -> np.ndarray:
    """Encode a (B, n) array of 0-indexed permutation rows."""
    perms0 = np.ascontiguousarray(perms0, dtype=np.int64)
    if kind is RepresentationKind.LEHMER_RIGHT:
        return _lehmer_encode_rows(perms0, left=False)
    if kind is RepresentationKind.LEHMER_LEFT:
        return _lehmer_encode_rows(perms0, left=True)
    if kind is RepresentationKind.FISHER_YATES:
        return _fy_encode_rows(perms0)
    if kind is RepresentationKind.INSERTION_VECTOR:
        return _lehmer_encode_rows(_invert_rows(perms0), left=True)
    if kind is RepresentationKind.INLINE:
        return perms0.copy()
    raise ValueError(f"unknown kind {kind}")


def decode_rows(codes: np.ndarray, kind: RepresentationKind) -> np.ndarray:
    """Decode a (B, n) array of codes to 0-indexed permutation rows.

    Domain violations are reported with the offending batch item. INLINE rows
    are returned as-is; validity is the caller's concern (see
    :func:`validate_rows`).
    """
    codes = np.ascontiguousarray(codes, dtype=np.int64)
    if codes.size:
        _check_rows_domains(codes, RepresentationSpec(kind, codes.shape[1]))
    if kind is RepresentationKind.LEHMER_RIGHT:
        return _lehmer_decode_rows(codes, left=False)
    if kind is RepresentationKind.LEHMER_LEFT:
        return _lehmer_decode_rows(codes, left=True)
    if kind is RepresentationKind.FISHER_YATES:
        return _fy_decode_rows(codes)
    if kind is RepresentationKind.INSERTION_VECTOR:
        return _invert_rows(_lehmer_decode_rows(codes, left=True))
    if kind is RepresentationKind.INLINE:
        return codes.copy()
    raise ValueError(f"unknown kind {kind}")


def perms_to_rows(ps: Sequence[Permutation]) -> np.ndarray:
    if not ps:
        return np.zeros((0, 0), dtype=np.int64)
    n = ps[0].n
    for i, p in enumerate(ps):
        if p.n != n:
            raise LengthMismatch(n, p.n)
    return np.array([p.elems for p in ps], dtype=np.int64) - 1


def rows_to_perms(rows: np.ndarray) -> list[Permutation]:
    valid = validate_rows(rows)
    if not valid.all():
        item = int(np.argwhere(~valid)[0, 0])
        raise InvalidPermutation("duplicate", "decoded row is not a permutation", item=item)
    return [Permutation(tuple(int(v) + 1 for v in row)) for row in rows]


def batch_encode(ps: Sequence[Permutation], kind: RepresentationKind) -> list[Code]:
    """Elementwise :func:`encode` over a homogeneous batch."""
    if not ps:
        return []
    rows = perms_to_rows(ps)
    codes = encode_rows(rows, kind)
    spec = RepresentationSpec(kind, rows.shape[1])
    return [Code(spec, tuple(int(v) for v in row)) for row in codes]


def batch_decode(cs: Sequence[Code], kind: RepresentationKind | None = None) -> list[Permutation]:
    """Elementwise :func:`decode` over a homogeneous batch."""
    if not cs:
        return []
    kind = kind or cs[0].spec.kind
    n = cs[0].spec.n
    for i, c in enumerate(cs):
        if c.spec.n != n:
            raise LengthMismatch(n, c.spec.n)
        if c.spec.kind is not kind:
            raise ValueError(f"batch item {i} has kind {c.spec.kind}, expected {kind}")
    rows = decode_rows(np.array([c.values for c in cs], dtype=np.int64), kind)
    if kind is RepresentationKind.INLINE:
        return [validate([int(v) + 1 for v in row], item=i) for i, row in enumerate(rows)]
    return rows_to_perms(rows)
