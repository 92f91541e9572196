"""Cyclic-permutation benchmark: learn the uniform distribution over all
(n-1)! cyclic permutations and measure sample quality as a function of NFEs.

The pipeline generates every cyclic permutation (exhaustively for small n,
via de-duplicated Sattolo draws otherwise), takes a random fraction as the
training set, trains one model per (representation, objective), then samples
with block schedules of varying NFE counts and reports unique / valid /
cyclic fractions against the (n-1)!/n! chance baseline.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field, replace

import numpy as np

from ..codecs import RepresentationKind, RepresentationSpec, decode_rows, encode_rows
from ..learners import TabularMarginalModel, TrainConfig, fit_tabular, train
from ..metrics import sample_stats
from ..models import FactorizedModel, ar_schedule, make_schedule, sample_rows
from ..perms import Permutation, is_cyclic
from ..rngs import derive_rng
from ..samplers import sattolo

__all__ = ["CyclicTaskConfig", "all_cyclic_permutations", "run_cyclic_benchmark"]


def desk_train_config() -> TrainConfig:
    """Training knobs sized for the n=7 CPU run."""
    return TrainConfig(
        objective="MLM",
        optimizer="adam",
        learning_rate=1e-3,
        batch_size=512,
        steps=1500,
        dropout=0.0,
        d_model=64,
        n_heads=4,
        n_layers=4,
        seed=0,
    )


@dataclass(frozen=True)
class CyclicTaskConfig:
    n: int = 7
    train_fraction: float = 0.2
    representations: tuple[str, ...] = ("fy", "lehmer-right", "iv", "inline")
    objectives: tuple[str, ...] = ("MLM",)
    nfes: tuple[int, ...] = (1, 2, 4, 7)
    samples_per_point: int = 10_000
    seed: int = 0
    model: str = "neural"  # neural | tabular (untrained marginals of the train set)
    train: TrainConfig = field(default_factory=desk_train_config)
    sample_chunk: int = 2500

    def __post_init__(self):
        if self.n < 3:
            raise ValueError("cyclic task needs n >= 3")
        if not 0.0 < self.train_fraction <= 1.0:
            raise ValueError("train_fraction must be in (0, 1]")
        if any(not 1 <= f <= self.n for f in self.nfes):
            raise ValueError(f"nfes must lie in 1..{self.n}")
        if self.model not in ("neural", "tabular"):
            raise ValueError("model must be 'neural' or 'tabular'")


def all_cyclic_permutations(n: int, seed: int = 0) -> list[tuple[int, ...]]:
    """Every cyclic permutation of {1..n}. Exhaustive scan for n <= 8; for
    larger n, Sattolo draws are de-duplicated until all (n-1)! are found."""
    target = math.factorial(n - 1)
    if n <= 8:
        return [p for p in itertools.permutations(range(1, n + 1))
                if is_cyclic(Permutation(p))]
    found: set[tuple[int, ...]] = set()
    rng = derive_rng(seed, 0xC7C)
    attempts = 0
    while len(found) < target:
        found.add(sattolo(n, rng).elems)
        attempts += 1
        if attempts > 200 * target:
            raise RuntimeError(f"could not enumerate all cyclic permutations of size {n}")
    return sorted(found)


def _fit_model(config: CyclicTaskConfig, spec: RepresentationSpec, objective: str,
               train_rows: np.ndarray, rep_index: int) -> FactorizedModel:
    if config.model == "tabular":
        conditional = fit_tabular(train_rows, spec, alpha=config.train.alpha)
        return FactorizedModel(spec, conditional, "MLM")
    tc = replace(config.train, objective=objective,
                 seed=int(derive_rng(config.seed, 2, rep_index).integers(2**31)))
    conditional = train(tc, (None, train_rows), spec)
    return FactorizedModel(spec, conditional, objective)


def run_cyclic_benchmark(config: CyclicTaskConfig) -> list[dict]:
    n = config.n
    cyclic = all_cyclic_permutations(n, config.seed)
    order = derive_rng(config.seed, 1).permutation(len(cyclic))
    n_train = max(1, round(config.train_fraction * len(cyclic)))
    train_perms = [cyclic[i] for i in order[:n_train]]
    train_set = set(train_perms)
    perm_rows = np.array(train_perms, dtype=np.int64) - 1

    rows: list[dict] = []
    for rep_index, rep_name in enumerate(config.representations):
        kind = RepresentationKind.from_name(rep_name)
        spec = RepresentationSpec(kind, n)
        train_rows = encode_rows(perm_rows, kind)
        for objective in config.objectives:
            model = _fit_model(config, spec, objective, train_rows, rep_index)
            nfes = [n] if objective == "AR" else list(config.nfes)
            for nfe in nfes:
                schedule = ar_schedule(n) if nfe == n else make_schedule(n, nfe)
                outputs = _sample_outputs(config, model, schedule, rep_index, nfe)
                stats = sample_stats(outputs, train_set)
                rows.append({
                    "task": "cyclic",
                    "n": n,
                    "representation": rep_name,
                    "objective": objective,
                    "nfe": nfe,
                    "samples": stats.total,
                    "unique_fraction": stats.unique_fraction,
                    "unique_valid_fraction": stats.unique_valid_fraction,
                    "unique_valid_cyclic_fraction": stats.unique_valid_cyclic_fraction,
                    "valid_fraction": stats.valid_fraction,
                    "cyclic_fraction": stats.cyclic_fraction,
                    "train_fraction": stats.train_fraction,
                    "chance_baseline": 1.0 / n,
                    "train_size": n_train,
                    "population": len(cyclic),
                    "seed": config.seed,
                })
    return rows


def _sample_outputs(config: CyclicTaskConfig, model: FactorizedModel, schedule,
                    rep_index: int, nfe: int) -> list[tuple[int, ...]]:
    rng = derive_rng(config.seed, 3, rep_index, nfe)
    outputs: list[tuple[int, ...]] = []
    remaining = config.samples_per_point
    inline = model.spec.kind is RepresentationKind.INLINE
    while remaining > 0:
        count = min(remaining, config.sample_chunk)
        code_rows = sample_rows(model, schedule, None, count, rng)
        raw = code_rows + 1 if inline else decode_rows(code_rows, model.spec.kind) + 1
        outputs.extend(tuple(int(v) for v in r) for r in raw)
        remaining -= count
    return outputs
