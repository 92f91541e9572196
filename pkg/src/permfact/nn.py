"""Minimal attention network with a hand-written backward pass.

The network embeds an optional context segment followed by a code segment,
mixes the sequence with pre-norm multi-head self-attention blocks, and emits
per-code-position logits over the maximal domain size via per-position output
heads. Everything is float64 numpy; gradients are exact and are verified
against central finite differences in the test suite.

Masking modes:
  * full  -- code positions attend the whole sequence (masked LM),
  * causal -- code position j attends context plus code positions <= j
    (next-token prediction). Context positions only attend the context.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = ["NetConfig", "AttentionNet", "SgdMomentum", "Adam", "softmax", "log_softmax"]


def silu(x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """x * sigmoid(x); returns (activation, sigmoid) so backward reuses it."""
    s = 1.0 / (1.0 + np.exp(-x))
    return x * s, s


def silu_grad(x: np.ndarray, s: np.ndarray) -> np.ndarray:
    return s * (1.0 + x * (1.0 - s))


def softmax(x: np.ndarray, axis: int = -1) -> np.ndarray:
    z = x - x.max(axis=axis, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=axis, keepdims=True)


def log_softmax(x: np.ndarray, axis: int = -1) -> np.ndarray:
    z = x - x.max(axis=axis, keepdims=True)
    return z - np.log(np.exp(z).sum(axis=axis, keepdims=True))


@dataclass(frozen=True)
class NetConfig:
    n_code: int
    max_domain: int
    ctx_len: int = 0
    ctx_vocab: int = 0
    d_model: int = 64
    n_heads: int = 4
    n_layers: int = 2
    d_ff: int = 0          # 0 -> 4 * d_model
    dropout: float = 0.0
    causal: bool = False
    init_seed: int = 0
    dtype: str = "float64"  # float32 roughly halves single-core step time

    def __post_init__(self):
        if self.d_model % self.n_heads:
            raise ValueError("d_model must be divisible by n_heads")
        if self.ctx_len and not self.ctx_vocab:
            raise ValueError("ctx_vocab required when ctx_len > 0")
        if self.dtype not in ("float64", "float32"):
            raise ValueError(f"dtype must be float64 or float32, got {self.dtype!r}")

    @property
    def np_dtype(self):
        return np.float64 if self.dtype == "float64" else np.float32

    @property
    def ff(self) -> int:
        return self.d_ff or 4 * self.d_model

    @property
    def seq_len(self) -> int:
        return self.ctx_len + self.n_code

    # code-segment token ids: values, then MASK, then BOS
    @property
    def mask_id(self) -> int:
        return self.max_domain

    @property
    def bos_id(self) -> int:
        return self.max_domain + 1

    @property
    def tok_vocab(self) -> int:
        return self.max_domain + 2


class AttentionNet:
    """Parameters plus forward/backward. Not a framework: one architecture."""

    def __init__(self, config: NetConfig, params: dict[str, np.ndarray] | None = None):
        self.config = config
        self.params = params if params is not None else self._init_params()
        self.allowed = self._attention_mask()

    def _init_params(self) -> dict[str, np.ndarray]:
        cfg = self.config
        rng = np.random.default_rng(cfg.init_seed)
        d, ff = cfg.d_model, cfg.ff
        dt = cfg.np_dtype

        def w(*shape):
            return rng.normal(0.0, 0.02, size=shape).astype(dt)

        p: dict[str, np.ndarray] = {
            "tok_emb": w(cfg.tok_vocab, d),
            "pos_emb": w(cfg.seq_len, d),
            "seg_emb": w(2, d),
        }
        if cfg.ctx_len:
            p["ctx_emb"] = w(cfg.ctx_vocab, d)
        for k in range(cfg.n_layers):
            p[f"l{k}.ln1.g"] = np.ones(d)
            p[f"l{k}.ln1.b"] = np.zeros(d)
            p[f"l{k}.attn.Wq"] = w(d, d)
            p[f"l{k}.attn.Wk"] = w(d, d)
            p[f"l{k}.attn.Wv"] = w(d, d)
            p[f"l{k}.attn.Wo"] = w(d, d)
            p[f"l{k}.attn.bq"] = np.zeros(d)
            p[f"l{k}.attn.bk"] = np.zeros(d)
            p[f"l{k}.attn.bv"] = np.zeros(d)
            p[f"l{k}.attn.bo"] = np.zeros(d)
            p[f"l{k}.ln2.g"] = np.ones(d)
            p[f"l{k}.ln2.b"] = np.zeros(d)
            p[f"l{k}.mlp.W1"] = w(d, ff)
            p[f"l{k}.mlp.b1"] = np.zeros(ff)
            p[f"l{k}.mlp.W2"] = w(ff, d)
            p[f"l{k}.mlp.b2"] = np.zeros(d)
        p["lnf.g"] = np.ones(d)
        p["lnf.b"] = np.zeros(d)
        # zero heads: an untrained net predicts uniformly over each domain
        p["head.W"] = np.zeros((cfg.n_code, d, cfg.max_domain))
        p["head.b"] = np.zeros((cfg.n_code, cfg.max_domain))
        return p

    def _attention_mask(self) -> np.ndarray:
        cfg = self.config
        m, t = cfg.ctx_len, cfg.seq_len
        allowed = np.zeros((t, t), dtype=bool)
        allowed[:m, :m] = True  # context attends context
        allowed[m:, :m] = True  # code attends context
        if cfg.causal:
            allowed[m:, m:] = np.tril(np.ones((t - m, t - m), dtype=bool))
        else:
            allowed[m:, m:] = True
        return allowed

    # -- forward ------------------------------------------------------------

    def forward(
        self,
        code_tokens: np.ndarray,
        ctx_tokens: np.ndarray | None = None,
        train: bool = False,
        drop_rng: np.random.Generator | None = None,
    ) -> tuple[np.ndarray, dict]:
        """Return (logits (B, n_code, max_domain), cache for backward)."""
        cfg = self.config
        p = self.params
        B = code_tokens.shape[0]
        m = cfg.ctx_len

        x = np.empty((B, cfg.seq_len, cfg.d_model))
        x[:, m:, :] = p["tok_emb"][code_tokens]
        if m:
            if ctx_tokens is None:
                raise ValueError("model expects a context segment")
            x[:, :m, :] = p["ctx_emb"][ctx_tokens]
        segs = np.concatenate([np.zeros(m, dtype=np.int64), np.ones(cfg.n_code, dtype=np.int64)])
        x = x + p["pos_emb"][None, :, :] + p["seg_emb"][segs][None, :, :]

        rate = cfg.dropout if train else 0.0
        if rate and drop_rng is None:
            raise ValueError("drop_rng required when training with dropout")

        cache: dict = {"code_tokens": code_tokens, "ctx_tokens": ctx_tokens, "segs": segs,
                       "layers": [], "rate": rate}
        for k in range(cfg.n_layers):
            x = self._block_forward(k, x, cache, rate, drop_rng)
        xn, lnf_cache = _layernorm_forward(x, p["lnf.g"], p["lnf.b"])
        cache["lnf"] = lnf_cache
        code_h = xn[:, m:, :]
        cache["code_h"] = code_h
        # per-position heads: (n, B, d) @ (n, d, k) -> (n, B, k)
        logits = (code_h.transpose(1, 0, 2) @ p["head.W"]).transpose(1, 0, 2)
        logits += p["head.b"][None]
        return logits, cache

    def _block_forward(self, k, x, cache, rate, drop_rng):
        p = self.params
        c: dict = {"x_in": x}
        h1, c["ln1"] = _layernorm_forward(x, p[f"l{k}.ln1.g"], p[f"l{k}.ln1.b"])
        attn, c["attn"] = self._attn_forward(k, h1)
        attn, c["drop1"] = _dropout(attn, rate, drop_rng)
        a = x + attn
        c["a_in"] = a
        h2, c["ln2"] = _layernorm_forward(a, p[f"l{k}.ln2.g"], p[f"l{k}.ln2.b"])
        pre = _linear(h2, p[f"l{k}.mlp.W1"], p[f"l{k}.mlp.b1"])
        act, sig = silu(pre)
        mlp = _linear(act, p[f"l{k}.mlp.W2"], p[f"l{k}.mlp.b2"])
        mlp, c["drop2"] = _dropout(mlp, rate, drop_rng)
        c["h2"], c["pre"], c["act"], c["sig"] = h2, pre, act, sig
        cache["layers"].append(c)
        return a + mlp

    def _attn_forward(self, k, x):
        cfg = self.config
        p = self.params
        B, T, D = x.shape
        H, Dh = cfg.n_heads, D // cfg.n_heads
        scale = 1.0 / np.sqrt(Dh)

        def split(z):
            return z.reshape(B, T, H, Dh).transpose(0, 2, 1, 3)

        q = split(_linear(x, p[f"l{k}.attn.Wq"], p[f"l{k}.attn.bq"]))
        kk = split(_linear(x, p[f"l{k}.attn.Wk"], p[f"l{k}.attn.bk"]))
        v = split(_linear(x, p[f"l{k}.attn.Wv"], p[f"l{k}.attn.bv"]))
        scores = (q @ kk.transpose(0, 1, 3, 2)) * scale
        scores = np.where(self.allowed[None, None], scores, -np.inf)
        att = softmax(scores, axis=-1)
        ctxv = att @ v
        merged = ctxv.transpose(0, 2, 1, 3).reshape(B, T, D)
        out = _linear(merged, p[f"l{k}.attn.Wo"], p[f"l{k}.attn.bo"])
        return out, {"x": x, "q": q, "k": kk, "v": v, "att": att, "merged": merged,
                     "scale": scale}

    # -- backward -----------------------------------------------------------

    def backward(self, cache: dict, dlogits: np.ndarray) -> dict[str, np.ndarray]:
        cfg = self.config
        p = self.params
        m = cfg.ctx_len
        grads = {name: np.zeros_like(arr) for name, arr in p.items()}

        grads["head.W"] += cache["code_h"].transpose(1, 2, 0) @ dlogits.transpose(1, 0, 2)
        grads["head.b"] += dlogits.sum(axis=0)
        dcode_h = (dlogits.transpose(1, 0, 2) @ p["head.W"].transpose(0, 2, 1)).transpose(1, 0, 2)

        B = dlogits.shape[0]
        dxn = np.zeros((B, cfg.seq_len, cfg.d_model))
        dxn[:, m:, :] = dcode_h
        dx, dg, db = _layernorm_backward(dxn, cache["lnf"])
        grads["lnf.g"] += dg
        grads["lnf.b"] += db

        for k in reversed(range(cfg.n_layers)):
            dx = self._block_backward(k, dx, cache["layers"][k], grads)

        segs = cache["segs"]
        grads["pos_emb"] += dx.sum(axis=0)
        np.add.at(grads["seg_emb"], segs, dx.sum(axis=0))
        np.add.at(grads["tok_emb"], cache["code_tokens"], dx[:, m:, :])
        if m:
            np.add.at(grads["ctx_emb"], cache["ctx_tokens"], dx[:, :m, :])
        return grads

    def _block_backward(self, k, dout, c, grads):
        p = self.params
        # mlp branch
        dmlp = dout * c["drop2"] if c["drop2"] is not None else dout
        grads[f"l{k}.mlp.b2"] += dmlp.sum(axis=(0, 1))
        grads[f"l{k}.mlp.W2"] += _outer_grad(c["act"], dmlp)
        dact = _linear(dmlp, p[f"l{k}.mlp.W2"].T)
        dpre = dact * silu_grad(c["pre"], c["sig"])
        grads[f"l{k}.mlp.b1"] += dpre.sum(axis=(0, 1))
        grads[f"l{k}.mlp.W1"] += _outer_grad(c["h2"], dpre)
        dh2 = _linear(dpre, p[f"l{k}.mlp.W1"].T)
        da, dg, db = _layernorm_backward(dh2, c["ln2"])
        grads[f"l{k}.ln2.g"] += dg
        grads[f"l{k}.ln2.b"] += db
        da = da + dout  # residual

        # attention branch
        dattn = da * c["drop1"] if c["drop1"] is not None else da
        dh1 = self._attn_backward(k, dattn, c["attn"], grads)
        dx, dg, db = _layernorm_backward(dh1, c["ln1"])
        grads[f"l{k}.ln1.g"] += dg
        grads[f"l{k}.ln1.b"] += db
        return dx + da  # residual

    def _attn_backward(self, k, dout, c, grads):
        cfg = self.config
        p = self.params
        B, T, D = c["x"].shape
        H, Dh = cfg.n_heads, D // cfg.n_heads

        grads[f"l{k}.attn.bo"] += dout.sum(axis=(0, 1))
        grads[f"l{k}.attn.Wo"] += _outer_grad(c["merged"], dout)
        dmerged = _linear(dout, p[f"l{k}.attn.Wo"].T)
        dctxv = dmerged.reshape(B, T, H, Dh).transpose(0, 2, 1, 3)

        datt = dctxv @ c["v"].transpose(0, 1, 3, 2)
        dv = c["att"].transpose(0, 1, 3, 2) @ dctxv
        att = c["att"]
        dscores = att * (datt - (att * datt).sum(axis=-1, keepdims=True))
        dscores *= c["scale"]
        dq = dscores @ c["k"]
        dk = dscores.transpose(0, 1, 3, 2) @ c["q"]

        def merge(z):
            return z.transpose(0, 2, 1, 3).reshape(B, T, D)

        dq, dk, dv = merge(dq), merge(dk), merge(dv)
        x = c["x"]
        grads[f"l{k}.attn.Wq"] += _outer_grad(x, dq)
        grads[f"l{k}.attn.Wk"] += _outer_grad(x, dk)
        grads[f"l{k}.attn.Wv"] += _outer_grad(x, dv)
        grads[f"l{k}.attn.bq"] += dq.sum(axis=(0, 1))
        grads[f"l{k}.attn.bk"] += dk.sum(axis=(0, 1))
        grads[f"l{k}.attn.bv"] += dv.sum(axis=(0, 1))
        return (_linear(dq, p[f"l{k}.attn.Wq"].T)
                + _linear(dk, p[f"l{k}.attn.Wk"].T)
                + _linear(dv, p[f"l{k}.attn.Wv"].T))

    # -- persistence ----------------------------------------------------------

    def param_count(self) -> int:
        return sum(a.size for a in self.params.values())

    def to_payload(self) -> dict:
        cfg = self.config
        return {
            "config": {
                "n_code": cfg.n_code, "max_domain": cfg.max_domain,
                "ctx_len": cfg.ctx_len, "ctx_vocab": cfg.ctx_vocab,
                "d_model": cfg.d_model, "n_heads": cfg.n_heads,
                "n_layers": cfg.n_layers, "d_ff": cfg.d_ff,
                "dropout": cfg.dropout, "causal": cfg.causal,
                "init_seed": cfg.init_seed,
            },
            "params": {name: arr.tolist() for name, arr in self.params.items()},
        }

    @classmethod
    def from_payload(cls, payload: dict) -> "AttentionNet":
        cfg = NetConfig(**payload["config"])
        params = {name: np.asarray(vals, dtype=np.float64)
                  for name, vals in payload["params"].items()}
        return cls(cfg, params)


def _linear(x: np.ndarray, W: np.ndarray, b: np.ndarray | None = None) -> np.ndarray:
    """(B, T, D) @ (D, E) as a single GEMM; much faster than broadcast matmul."""
    B, T, D = x.shape
    out = x.reshape(B * T, D) @ W
    if b is not None:
        out += b
    return out.reshape(B, T, -1)


def _outer_grad(x: np.ndarray, dy: np.ndarray) -> np.ndarray:
    """Weight gradient sum_bt x[b,t,:] (x) dy[b,t,:] as one GEMM."""
    D = x.shape[-1]
    E = dy.shape[-1]
    return x.reshape(-1, D).T @ dy.reshape(-1, E)


def _layernorm_forward(x, g, b, eps: float = 1e-5):
    mu = x.mean(axis=-1, keepdims=True)
    var = x.var(axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    xhat = (x - mu) * inv
    return xhat * g + b, {"xhat": xhat, "inv": inv, "g": g}


def _layernorm_backward(dy, c):
    xhat, inv, g = c["xhat"], c["inv"], c["g"]
    dg = (dy * xhat).sum(axis=(0, 1))
    db = dy.sum(axis=(0, 1))
    dxhat = dy * g
    dx = inv * (
        dxhat
        - dxhat.mean(axis=-1, keepdims=True)
        - xhat * (dxhat * xhat).mean(axis=-1, keepdims=True)
    )
    return dx, dg, db


def _dropout(x, rate, rng):
    if not rate:
        return x, None
    keep = (rng.random(x.shape) >= rate) / (1.0 - rate)
    return x * keep, keep


@dataclass
class SgdMomentum:
    """Plain SGD with momentum; the dependency-free baseline optimizer."""

    lr: float = 3e-4
    momentum: float = 0.9
    velocity: dict[str, np.ndarray] = field(default_factory=dict)

    def step(self, params: dict[str, np.ndarray], grads: dict[str, np.ndarray]) -> None:
        for name, g in grads.items():
            v = self.velocity.get(name)
            v = self.momentum * v + g if v is not None else g.copy()
            self.velocity[name] = v
            params[name] -= self.lr * v


@dataclass
class Adam:
    lr: float = 3e-4
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    t: int = 0
    m: dict[str, np.ndarray] = field(default_factory=dict)
    v: dict[str, np.ndarray] = field(default_factory=dict)

    def step(self, params: dict[str, np.ndarray], grads: dict[str, np.ndarray]) -> None:
        self.t += 1
        b1t = 1.0 - self.beta1 ** self.t
        b2t = 1.0 - self.beta2 ** self.t
        for name, g in grads.items():
            m = self.m.setdefault(name, np.zeros_like(g))
            v = self.v.setdefault(name, np.zeros_like(g))
            m += (1.0 - self.beta1) * (g - m)
            v += (1.0 - self.beta2) * (g * g - v)
            params[name] -= self.lr * (m / b1t) / (np.sqrt(v / b2t) + self.eps)
