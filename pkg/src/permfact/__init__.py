"""Factorized representations of permutations and generative models over them.

Public surface:

* :mod:`permfact.perms`    -- inline permutations, inversion, composition, cycles
* :mod:`permfact.codecs`   -- Lehmer / Fisher-Yates / insertion-vector codecs,
  scalar and batched
* :mod:`permfact.samplers` -- uniform, Sattolo, Mallows, Plackett-Luce, RIM
* :mod:`permfact.models`   -- schedule-factorized generative models: sampling,
  exact likelihood, entropy diagnostics, serialization
* :mod:`permfact.learners` -- tabular and neural conditional models, training
* :mod:`permfact.metrics`  -- Kendall tau, Lehmer L1, NDCG, sample statistics
* :mod:`permfact.experiments` -- cyclic, unscramble, and movie re-ranking
  benchmark pipelines
"""
from .codecs import (
    Code,
    DomainViolation,
    RepresentationKind,
    RepresentationSpec,
    batch_decode,
    batch_encode,
    decode,
    encode,
    fy_decode,
    fy_encode,
    iv_decode,
    iv_decode_with_ref,
    iv_encode,
    iv_encode_with_ref,
    lehmer_decode,
    lehmer_encode,
)
from .perms import (
    CycleDecomposition,
    InvalidPermutation,
    LengthMismatch,
    Permutation,
    compose,
    cycles,
    identity,
    inverse,
    is_cyclic,
    is_subpermutation,
    validate,
)

__version__ = "0.1.0"
