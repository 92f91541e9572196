"""Trainable conditional models over (partially masked) code sequences.

A conditional model maps a batch of masked code rows plus an optional context
segment to per-position categorical distributions restricted to each
position's domain. Two implementations:

* :class:`TabularMarginalModel` -- per-position smoothed empirical marginals;
  ignores conditioning. Sufficient for fully-factorized (1 NFE) sampling and
  for expressing product-form distributions exactly.
* :class:`NeuralConditionalModel` -- the attention network from
  :mod:`permfact.nn`, trained with masked-LM or next-token cross-entropy.

Masked positions are marked with ``MASKED`` (-1) in value arrays.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Protocol, Sequence, runtime_checkable

import numpy as np

from .codecs import Code, RepresentationSpec
from .nn import Adam, AttentionNet, NetConfig, SgdMomentum, log_softmax, softmax
from .rngs import derive_rng

__all__ = [
    "MASKED",
    "ConditionalModel",
    "TabularMarginalModel",
    "NeuralConditionalModel",
    "TrainConfig",
    "TrainingDiverged",
    "fit_tabular",
    "train",
    "finite_difference_gradcheck",
]

MASKED = -1


@runtime_checkable
class ConditionalModel(Protocol):
    """Per-position categorical predictor over masked code rows."""

    spec: RepresentationSpec

    def predict_rows(self, values: np.ndarray, contexts: np.ndarray | None) -> np.ndarray:
        """(B, n) masked values (+ optional (B, m) contexts) -> (B, n, max_domain)
        probabilities, exactly zero outside each position's domain."""
        ...


class TrainingDiverged(RuntimeError):
    def __init__(self, step: int, loss: float):
        self.step = step
        self.loss = loss
        super().__init__(f"non-finite training loss {loss} at step {step}")


@dataclass(frozen=True)
class TrainConfig:
    """Knobs for :func:`train` and :func:`fit_tabular`.

    ``mask_rate`` is the masked-LM masking distribution: the masked fraction is
    drawn uniformly from (0, 1] per example ("uniform", the default) or held
    fixed at a float value.
    """

    objective: str = "MLM"          # MLM | AR
    learning_rate: float = 3e-4
    batch_size: int = 128
    steps: int = 1000
    seed: int = 0
    mask_rate: str | float = "uniform"
    alpha: float = 0.0              # tabular add-alpha smoothing
    d_model: int = 64
    n_heads: int = 4
    n_layers: int = 2
    d_ff: int = 0
    dropout: float = 0.05
    optimizer: str = "momentum"     # momentum | adam
    momentum: float = 0.9
    log_every: int = 0

    def __post_init__(self):
        if self.objective not in ("MLM", "AR"):
            raise ValueError(f"objective must be MLM or AR, got {self.objective!r}")
        if self.learning_rate <= 0 or self.batch_size <= 0 or self.steps < 0:
            raise ValueError("learning_rate/batch_size must be positive, steps >= 0")
        if self.alpha < 0 or not 0.0 <= self.dropout < 1.0:
            raise ValueError("alpha must be >= 0 and dropout in [0, 1)")
        if isinstance(self.mask_rate, (int, float)) and not 0.0 < float(self.mask_rate) <= 1.0:
            raise ValueError("fixed mask_rate must be in (0, 1]")
        if self.optimizer not in ("momentum", "adam"):
            raise ValueError(f"optimizer must be momentum or adam, got {self.optimizer!r}")


# ---------------------------------------------------------------------------
# tabular marginals
# ---------------------------------------------------------------------------

class TabularMarginalModel:
    """Independent per-position categoricals from (smoothed) count tables.

    ``tables[i]`` holds non-negative weights over position i+1's domain; they
    need not be normalized, so exact product-form distributions (e.g. the
    Mallows per-position weights) can be expressed directly.
    """

    def __init__(self, spec: RepresentationSpec, tables: Sequence[np.ndarray],
                 alpha: float = 0.0):
        if len(tables) != spec.n:
            raise ValueError(f"need {spec.n} tables, got {len(tables)}")
        self.spec = spec
        self.alpha = float(alpha)
        self.tables = []
        for i, t in enumerate(tables, start=1):
            t = np.asarray(t, dtype=np.float64)
            if t.shape != (spec.domain_size(i),):
                raise ValueError(f"table {i} must have shape ({spec.domain_size(i)},)")
            if (t < 0).any():
                raise ValueError(f"table {i} has negative counts")
            self.tables.append(t)
        self._probs = self._normalize()

    def _normalize(self) -> np.ndarray:
        probs = np.zeros((self.spec.n, self.spec.max_domain))
        for i, t in enumerate(self.tables):
            w = t + self.alpha
            total = w.sum()
            if total <= 0:
                raise ValueError(f"position {i + 1} has zero total weight; "
                                 "use alpha > 0 or provide counts")
            probs[i, : len(w)] = w / total
        return probs

    def predict_rows(self, values: np.ndarray, contexts: np.ndarray | None = None) -> np.ndarray:
        B = values.shape[0]
        return np.broadcast_to(self._probs, (B,) + self._probs.shape).copy()

    def to_payload(self) -> dict:
        return {"alpha": self.alpha, "tables": [t.tolist() for t in self.tables]}

    @classmethod
    def from_payload(cls, spec: RepresentationSpec, payload: dict) -> "TabularMarginalModel":
        return cls(spec, [np.asarray(t) for t in payload["tables"]], payload["alpha"])


def fit_tabular(dataset, spec: RepresentationSpec, alpha: float = 0.0) -> TabularMarginalModel:
    """Position-wise empirical marginals of a code dataset."""
    rows = _codes_to_rows(dataset, spec)
    if rows.shape[0] == 0:
        raise ValueError("cannot fit marginals on an empty dataset")
    tables = []
    for i in range(1, spec.n + 1):
        size = spec.domain_size(i)
        col = rows[:, i - 1]
        if ((col < 0) | (col >= size)).any():
            bad = col[(col < 0) | (col >= size)][0]
            raise ValueError(f"value {bad} at position {i} outside domain [0, {size})")
        tables.append(np.bincount(col, minlength=size).astype(np.float64))
    return TabularMarginalModel(spec, tables, alpha)


def _codes_to_rows(dataset, spec: RepresentationSpec) -> np.ndarray:
    if isinstance(dataset, np.ndarray):
        return np.ascontiguousarray(dataset, dtype=np.int64)
    rows = []
    for c in dataset:
        vals = c.values if isinstance(c, Code) else c
        if len(vals) != spec.n:
            raise ValueError(f"code of length {len(vals)}, expected {spec.n}")
        rows.append(vals)
    return np.asarray(rows, dtype=np.int64).reshape(len(rows), spec.n)


# ---------------------------------------------------------------------------
# neural conditional
# ---------------------------------------------------------------------------

class NeuralConditionalModel:
    """Attention network wrapped as a ConditionalModel.

    MLM nets see the masked row directly (masked positions get the MASK
    token). AR nets see the shifted row (BOS then previous values) under a
    causal mask, so position j's output conditions on values before j only;
    predictions at positions whose prefix is incomplete are meaningless and
    the sampling layer never requests them.
    """

    def __init__(self, spec: RepresentationSpec, net: AttentionNet, objective: str):
        self.spec = spec
        self.net = net
        self.objective = objective
        self._domain_mask = spec.domain_mask()  # (n, max_domain) bool

    def _code_inputs(self, values: np.ndarray) -> np.ndarray:
        cfg = self.net.config
        if self.objective == "AR":
            shifted = np.empty_like(values)
            shifted[:, 0] = cfg.bos_id
            shifted[:, 1:] = values[:, :-1]
            return np.where(shifted == MASKED, cfg.mask_id, shifted)
        return np.where(values == MASKED, cfg.mask_id, values)

    def logits_rows(self, values: np.ndarray, contexts: np.ndarray | None = None) -> np.ndarray:
        logits, _ = self.net.forward(self._code_inputs(values), contexts)
        return np.where(self._domain_mask[None], logits, -np.inf)

    def predict_rows(self, values: np.ndarray, contexts: np.ndarray | None = None) -> np.ndarray:
        probs = softmax(self.logits_rows(values, contexts), axis=-1)
        return np.where(self._domain_mask[None], probs, 0.0)

    def to_payload(self) -> dict:
        return {"objective": self.objective, "net": self.net.to_payload()}

    @classmethod
    def from_payload(cls, spec: RepresentationSpec, payload: dict) -> "NeuralConditionalModel":
        return cls(spec, AttentionNet.from_payload(payload["net"]), payload["objective"])


def _loss_and_dlogits(logits, targets, score_mask, domain_mask):
    """Mean masked cross-entropy (nats) and its gradient w.r.t. the logits."""
    logp = log_softmax(np.where(domain_mask[None], logits, -np.inf), axis=-1)
    B, n, D = logits.shape
    picked = np.take_along_axis(logp, targets[..., None], axis=-1)[..., 0]
    count = max(int(score_mask.sum()), 1)
    loss = -(picked * score_mask).sum() / count
    probs = np.exp(logp)
    onehot = np.zeros_like(probs)
    np.put_along_axis(onehot, targets[..., None], 1.0, axis=-1)
    dlogits = (probs - onehot) * score_mask[..., None] / count
    dlogits[~np.broadcast_to(domain_mask[None], dlogits.shape)] = 0.0
    return loss, dlogits


def _sample_mask_pattern(rng, B, n, mask_rate) -> np.ndarray:
    """Per-example random masked subsets; at least one position masked."""
    if mask_rate == "uniform":
        frac = rng.random(B)
    else:
        frac = np.full(B, float(mask_rate))
    k = np.maximum(1, np.rint(frac * n)).astype(np.int64)
    scores = rng.random((B, n))
    ranks = np.argsort(np.argsort(scores, axis=1), axis=1)
    return ranks < k[:, None]


def train(
    config: TrainConfig,
    dataset: tuple[np.ndarray | None, np.ndarray],
    spec: RepresentationSpec,
    ctx_vocab: int = 0,
) -> NeuralConditionalModel:
    """Train an attention net on (context, code) pairs.

    ``dataset`` is ``(contexts, codes)`` with contexts an (N, m) int array or
    None and codes an (N, n) int array of in-domain values. Deterministic
    given the config seed.
    """
    contexts, codes = dataset
    codes = np.ascontiguousarray(codes, dtype=np.int64)
    N, n = codes.shape
    if n != spec.n:
        raise ValueError(f"codes have length {n}, spec expects {spec.n}")
    if N == 0:
        raise ValueError("cannot train on an empty dataset")
    if contexts is not None:
        contexts = np.ascontiguousarray(contexts, dtype=np.int64)
        if contexts.shape[0] != N:
            raise ValueError("contexts and codes must have the same length")

    ctx_len = 0 if contexts is None else contexts.shape[1]
    net_cfg = NetConfig(
        n_code=n,
        max_domain=spec.max_domain,
        ctx_len=ctx_len,
        ctx_vocab=ctx_vocab if ctx_len else 0,
        d_model=config.d_model,
        n_heads=config.n_heads,
        n_layers=config.n_layers,
        d_ff=config.d_ff,
        dropout=config.dropout,
        causal=config.objective == "AR",
        init_seed=config.seed,
    )
    net = AttentionNet(net_cfg)
    model = NeuralConditionalModel(spec, net, config.objective)
    domain_mask = spec.domain_mask()

    if config.optimizer == "adam":
        opt = Adam(lr=config.learning_rate)
    else:
        opt = SgdMomentum(lr=config.learning_rate, momentum=config.momentum)

    batch_rng = derive_rng(config.seed, 1)
    drop_rng = derive_rng(config.seed, 2)

    for step in range(config.steps):
        idx = batch_rng.integers(0, N, size=config.batch_size)
        batch_codes = codes[idx]
        batch_ctx = contexts[idx] if contexts is not None else None

        if config.objective == "MLM":
            mask = _sample_mask_pattern(batch_rng, len(idx), n, config.mask_rate)
            values = np.where(mask, MASKED, batch_codes)
            score_mask = mask.astype(np.float64)
        else:
            values = batch_codes
            score_mask = np.ones(batch_codes.shape, dtype=np.float64)

        inputs = model._code_inputs(values)
        logits, cache = net.forward(inputs, batch_ctx, train=True, drop_rng=drop_rng)
        loss, dlogits = _loss_and_dlogits(logits, batch_codes, score_mask, domain_mask)
        if not np.isfinite(loss):
            raise TrainingDiverged(step, float(loss))
        grads = net.backward(cache, dlogits)
        opt.step(net.params, grads)
        if config.log_every and step % config.log_every == 0:
            print(f"step {step:6d}  loss {loss / np.log(2):.4f} bits")

    return model


def finite_difference_gradcheck(
    model: NeuralConditionalModel,
    example: tuple[np.ndarray | None, np.ndarray],
    epsilon: float = 1e-5,
    seed: int = 0,
    coords_per_tensor: int = 4,
) -> float:
    """Max relative error between analytic gradients and central differences.

    ``example`` is a (contexts, codes) pair; the loss is the full-mask MLM (or
    AR) cross-entropy of the model on it. Checks a random coordinate subset
    of every parameter tensor. Dropout is disabled.
    """
    contexts, codes = example
    codes = np.ascontiguousarray(codes, dtype=np.int64)
    net = model.net
    domain_mask = model.spec.domain_mask()
    values = np.full_like(codes, MASKED) if model.objective == "MLM" else codes
    inputs = model._code_inputs(values)
    score_mask = np.ones(codes.shape, dtype=np.float64)

    def loss_fn() -> float:
        logits, _ = net.forward(inputs, contexts)
        loss, _ = _loss_and_dlogits(logits, codes, score_mask, domain_mask)
        return float(loss)

    logits, cache = net.forward(inputs, contexts)
    _, dlogits = _loss_and_dlogits(logits, codes, score_mask, domain_mask)
    grads = net.backward(cache, dlogits)

    rng = np.random.default_rng(seed)
    worst = 0.0
    for name, arr in net.params.items():
        flat = arr.reshape(-1)
        k = min(coords_per_tensor, flat.size)
        for j in rng.choice(flat.size, size=k, replace=False):
            orig = flat[j]
            flat[j] = orig + epsilon
            up = loss_fn()
            flat[j] = orig - epsilon
            down = loss_fn()
            flat[j] = orig
            numeric = (up - down) / (2 * epsilon)
            analytic = grads[name].reshape(-1)[j]
            # the floor keeps difference noise on exactly-zero gradients from
            # registering as relative error
            denom = max(abs(numeric), abs(analytic), 1e-6)
            worst = max(worst, abs(numeric - analytic) / denom)
    return worst
