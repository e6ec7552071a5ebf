"""Encoder, POS fusion block, and output softmax with exact gradients.

The forward pass mirrors the three-stage pipeline: a small from-scratch
transformer encoder produces hidden states H; predicted POS tag ids look
up columns of the embedding matrix W to form E; the concatenation
C = [H ; E] passes through a self-attention fusion block and a per-position
softmax over the 4 labels. All parameter groups train jointly:

    theta (enc.*)   encoder: token embedding + pre-norm attention layers
    W     (pos.W)   POS embedding, b x e, column j embeds tag j
    gamma (fuse.*)  fusion block layers at width d+b
    eta   (out.*)   output projection to 4 labels

Backpropagation is hand-written and exact for the traced computation;
a finite-difference check over every parameter is part of the test suite.

Ablation hooks: pos_source="none" drops E and the fusion block entirely
(the output layer reads H directly, width d); "random" keeps the full
architecture but noise-initializes W instead of importing the tagger's
softmax weights; "tagger" imports them. In every mode all present groups
receive gradients.

Dropout (train mode only) is inverted dropout on the residual branch
outputs, with masks drawn from a counter-based stream keyed by
(seed, step), so a traced forward pass is exactly reproducible.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, fields
from typing import Sequence

import numpy as np

from . import rng
from .errors import ConfigError, IdOutOfRange, LengthMismatch
from .postag import pos_embed
from .serialize import load_blocks, save_blocks

NUM_LABELS = 4
_LN_EPS = 1e-5

POS_SOURCES = ("none", "random", "tagger")
LOSS_MASKS = ("none", "position_mask")


@dataclass(frozen=True)
class ModelConfig:
    """Architecture hyperparameters; validation collects every problem."""

    vocab_size: int
    d: int = 64
    b: int = 32
    e: int = 20
    L: int = 256
    num_encoder_layers: int = 2
    encoder_heads: int = 4
    encoder_ffn_dim: int = 0          # 0 means 4*d
    num_fusion_layers: int = 1
    fusion_heads: int = 4
    fusion_ffn_dim: int = 0           # 0 means 4*(d+b)
    dropout: float = 0.1
    pos_source: str = "tagger"
    loss_mask: str = "none"
    num_labels: int = NUM_LABELS

    def __post_init__(self):
        if self.encoder_ffn_dim == 0:
            object.__setattr__(self, "encoder_ffn_dim", 4 * self.d)
        if self.fusion_ffn_dim == 0:
            object.__setattr__(self, "fusion_ffn_dim", 4 * (self.d + self.b))
        problems = []
        if self.vocab_size < 1:
            problems.append(f"vocab_size must be >= 1, got {self.vocab_size}")
        if self.d < 1 or self.d % 2:
            problems.append(f"d must be a positive even number, got {self.d}")
        if self.d % self.encoder_heads:
            problems.append(
                f"d={self.d} not divisible by encoder_heads={self.encoder_heads}"
            )
        if self.pos_source not in POS_SOURCES:
            problems.append(
                f"pos_source must be one of {POS_SOURCES}, got {self.pos_source!r}"
            )
        elif self.pos_source != "none":
            if self.b < 1:
                problems.append(f"b must be >= 1, got {self.b}")
            if self.e < 1:
                problems.append(f"e must be >= 1, got {self.e}")
            if (self.d + self.b) % self.fusion_heads:
                problems.append(
                    f"fusion width d+b={self.d + self.b} not divisible by "
                    f"fusion_heads={self.fusion_heads}"
                )
        if not 0.0 <= self.dropout < 1.0:
            problems.append(f"dropout must be in [0, 1), got {self.dropout}")
        if self.L < 2:
            problems.append(f"L must be >= 2, got {self.L}")
        if self.loss_mask not in LOSS_MASKS:
            problems.append(
                f"loss_mask must be one of {LOSS_MASKS}, got {self.loss_mask!r}"
            )
        if self.num_labels != NUM_LABELS:
            problems.append(f"num_labels is fixed at {NUM_LABELS}")
        if problems:
            raise ConfigError(problems)

    @property
    def fusion_width(self) -> int:
        return self.d + self.b if self.pos_source != "none" else self.d

    def to_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}

    @classmethod
    def from_dict(cls, d: dict) -> "ModelConfig":
        return cls(**d)


@dataclass
class ForwardTrace:
    """Activations of one traced forward pass, kept for backprop."""

    H: np.ndarray               # n x d encoder states
    E: np.ndarray | None        # n x b POS embeddings (None when no POS)
    C: np.ndarray               # n x fusion_width
    probs: np.ndarray           # n x 4, rows sum to 1
    token_ids: np.ndarray
    pos_ids: np.ndarray | None
    mode: str
    _cache: dict = field(repr=False, default_factory=dict)


def sinusoidal_positions(n: int, d: int, dtype=np.float32) -> np.ndarray:
    """Fixed sin/cos position table, added to token embeddings."""
    pos = np.arange(n, dtype=np.float64)[:, None]
    i = np.arange(d // 2, dtype=np.float64)[None, :]
    angles = pos / np.power(10000.0, 2.0 * i / d)
    pe = np.empty((n, d), dtype=np.float64)
    pe[:, 0::2] = np.sin(angles)
    pe[:, 1::2] = np.cos(angles)
    return pe.astype(dtype)


def _softmax_rows(x: np.ndarray) -> np.ndarray:
    z = x - x.max(axis=-1, keepdims=True)
    ez = np.exp(z)
    return ez / ez.sum(axis=-1, keepdims=True)


def _gelu(x: np.ndarray) -> tuple[np.ndarray, tuple]:
    c = math.sqrt(2.0 / math.pi)
    u = c * (x + 0.044715 * x ** 3)
    t = np.tanh(u)
    y = 0.5 * x * (1.0 + t)
    return y, (x, t, c)


def _gelu_bwd(dy: np.ndarray, cache: tuple) -> np.ndarray:
    x, t, c = cache
    du = c * (1.0 + 3 * 0.044715 * x ** 2)
    return dy * (0.5 * (1.0 + t) + 0.5 * x * (1.0 - t ** 2) * du)


def _ln_fwd(x, g, b):
    mu = x.mean(axis=-1, keepdims=True)
    var = x.var(axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt(var + _LN_EPS)
    xhat = (x - mu) * inv
    return xhat * g + b, (xhat, inv, g)


def _ln_bwd(dy, cache, grads, g_name, b_name):
    xhat, inv, g = cache
    grads[g_name] += (dy * xhat).sum(axis=0)
    grads[b_name] += dy.sum(axis=0)
    dxhat = dy * g
    m1 = dxhat.mean(axis=-1, keepdims=True)
    m2 = (dxhat * xhat).mean(axis=-1, keepdims=True)
    return inv * (dxhat - m1 - xhat * m2)


def _split_heads(x, heads):
    n, w = x.shape
    return x.reshape(n, heads, w // heads).transpose(1, 0, 2)


def _merge_heads(x):
    h, n, dk = x.shape
    return x.transpose(1, 0, 2).reshape(n, h * dk)


def _attn_fwd(x, p, pre, heads):
    q = x @ p[pre + ".wq"] + p[pre + ".bq"]
    k = x @ p[pre + ".wk"] + p[pre + ".bk"]
    v = x @ p[pre + ".wv"] + p[pre + ".bv"]
    q3, k3, v3 = _split_heads(q, heads), _split_heads(k, heads), _split_heads(v, heads)
    scale = 1.0 / math.sqrt(q3.shape[-1])
    att = _softmax_rows(np.einsum("hid,hjd->hij", q3, k3) * scale)
    ctx = _merge_heads(np.einsum("hij,hjd->hid", att, v3))
    out = ctx @ p[pre + ".wo"] + p[pre + ".bo"]
    return out, (x, q3, k3, v3, att, ctx, scale)


def _attn_bwd(dout, cache, p, grads, pre, heads):
    x, q3, k3, v3, att, ctx, scale = cache
    grads[pre + ".wo"] += ctx.T @ dout
    grads[pre + ".bo"] += dout.sum(axis=0)
    dctx = _split_heads(dout @ p[pre + ".wo"].T, heads)
    datt = np.einsum("hid,hjd->hij", dctx, v3)
    dv3 = np.einsum("hji,hjd->hid", att, dctx)
    ds = att * (datt - (datt * att).sum(axis=-1, keepdims=True))
    dq3 = np.einsum("hij,hjd->hid", ds, k3) * scale
    dk3 = np.einsum("hij,hid->hjd", ds, q3) * scale
    dx = np.zeros_like(x)
    for name, dmat in (("q", dq3), ("k", dk3), ("v", dv3)):
        d2 = _merge_heads(dmat)
        grads[pre + ".w" + name] += x.T @ d2
        grads[pre + ".b" + name] += d2.sum(axis=0)
        dx += d2 @ p[pre + ".w" + name].T
    return dx


def _ffn_fwd(x, p, pre):
    a = x @ p[pre + ".w1"] + p[pre + ".b1"]
    g, gc = _gelu(a)
    y = g @ p[pre + ".w2"] + p[pre + ".b2"]
    return y, (x, g, gc)


def _ffn_bwd(dy, cache, p, grads, pre):
    x, g, gc = cache
    grads[pre + ".w2"] += g.T @ dy
    grads[pre + ".b2"] += dy.sum(axis=0)
    da = _gelu_bwd(dy @ p[pre + ".w2"].T, gc)
    grads[pre + ".w1"] += x.T @ da
    grads[pre + ".b1"] += da.sum(axis=0)
    return da @ p[pre + ".w1"].T


def _dropout(x, prob, gen):
    """Inverted dropout; returns (output, mask) with mask folded scale."""
    if gen is None or prob <= 0.0:
        return x, None
    mask = (gen.random(x.shape) >= prob) / (1.0 - prob)
    mask = mask.astype(x.dtype)
    return x * mask, mask


def _block_fwd(x, p, pre, heads, drop_prob, gen):
    """One pre-norm transformer layer; dropout on residual branches only."""
    h1, c_ln1 = _ln_fwd(x, p[pre + ".ln1.g"], p[pre + ".ln1.b"])
    a, c_attn = _attn_fwd(h1, p, pre + ".attn", heads)
    a, m1 = _dropout(a, drop_prob, gen)
    x1 = x + a
    h2, c_ln2 = _ln_fwd(x1, p[pre + ".ln2.g"], p[pre + ".ln2.b"])
    f, c_ffn = _ffn_fwd(h2, p, pre + ".ffn")
    f, m2 = _dropout(f, drop_prob, gen)
    return x1 + f, (c_ln1, c_attn, m1, c_ln2, c_ffn, m2)


def _block_bwd(dy, cache, p, grads, pre, heads):
    c_ln1, c_attn, m1, c_ln2, c_ffn, m2 = cache
    df = dy if m2 is None else dy * m2
    dh2 = _ffn_bwd(df, c_ffn, p, grads, pre + ".ffn")
    dx1 = dy + _ln_bwd(dh2, c_ln2, grads, pre + ".ln2.g", pre + ".ln2.b")
    da = dx1 if m1 is None else dx1 * m1
    dh1 = _attn_bwd(da, c_attn, p, grads, pre + ".attn", heads)
    return dx1 + _ln_bwd(dh1, c_ln1, grads, pre + ".ln1.g", pre + ".ln1.b")


def _layer_param_shapes(width: int, heads: int, ffn: int) -> list[tuple[str, tuple]]:
    del heads  # head count shapes nothing; kept for call-site clarity
    return [
        ("ln1.g", (width,)), ("ln1.b", (width,)),
        ("attn.wq", (width, width)), ("attn.bq", (width,)),
        ("attn.wk", (width, width)), ("attn.bk", (width,)),
        ("attn.wv", (width, width)), ("attn.bv", (width,)),
        ("attn.wo", (width, width)), ("attn.bo", (width,)),
        ("ln2.g", (width,)), ("ln2.b", (width,)),
        ("ffn.w1", (width, ffn)), ("ffn.b1", (ffn,)),
        ("ffn.w2", (ffn, width)), ("ffn.b2", (width,)),
    ]


class FusionModel:
    """Parameter store plus forward/backward over one length-n window."""

    def __init__(self, config: ModelConfig, params: dict[str, np.ndarray]):
        self.config = config
        self.params = params
        self.dtype = next(iter(params.values())).dtype

    @classmethod
    def init(
        cls,
        config: ModelConfig,
        seed: int,
        tagger_W: np.ndarray | None = None,
        dtype=np.float32,
    ) -> "FusionModel":
        """Build parameters in canonical order from the init stream.

        pos_source="tagger" requires tagger_W of shape (b, e); "random"
        draws W from noise; "none" creates no W and no fusion block.
        """
        g = rng.stream(seed, rng.INIT, 0)
        params: dict[str, np.ndarray] = {}

        def norm(shape, scale):
            return (g.standard_normal(shape) * scale).astype(dtype)

        def add_layer_block(prefix, width, heads, ffn):
            for suffix, shape in _layer_param_shapes(width, heads, ffn):
                name = f"{prefix}.{suffix}"
                if suffix in ("ln1.g", "ln2.g"):
                    params[name] = np.ones(shape, dtype=dtype)
                elif suffix.startswith(("attn.b", "ffn.b", "ln")):
                    params[name] = np.zeros(shape, dtype=dtype)
                else:
                    params[name] = norm(shape, 1.0 / math.sqrt(shape[0]))

        params["enc.tok_emb"] = norm((config.vocab_size, config.d), 1.0)
        for i in range(config.num_encoder_layers):
            add_layer_block(f"enc.{i}", config.d, config.encoder_heads,
                            config.encoder_ffn_dim)
        if config.pos_source != "none":
            if config.pos_source == "tagger":
                if tagger_W is None:
                    raise ConfigError(
                        "pos_source='tagger' requires the tagger's W matrix"
                    )
                if tagger_W.shape != (config.b, config.e):
                    raise ConfigError(
                        f"tagger W shape {tagger_W.shape} does not match "
                        f"(b, e) = ({config.b}, {config.e})"
                    )
                params["pos.W"] = tagger_W.astype(dtype).copy()
            else:
                params["pos.W"] = norm((config.b, config.e),
                                       1.0 / math.sqrt(config.b))
            for j in range(config.num_fusion_layers):
                add_layer_block(f"fuse.{j}", config.fusion_width,
                                config.fusion_heads, config.fusion_ffn_dim)
        params["out.w"] = norm((config.fusion_width, NUM_LABELS),
                               1.0 / math.sqrt(config.fusion_width))
        params["out.b"] = np.zeros(NUM_LABELS, dtype=dtype)
        return cls(config, params)

    def parameter_group(self, name: str) -> str:
        """Map a parameter name onto theta / W / gamma / eta."""
        head = name.split(".", 1)[0]
        return {"enc": "theta", "pos": "W", "fuse": "gamma", "out": "eta"}[head]

    def _check_token_ids(self, token_ids):
        ids = np.asarray(token_ids)
        if ids.size and (ids.min() < 0 or ids.max() >= self.config.vocab_size):
            bad = int(ids[(ids < 0) | (ids >= self.config.vocab_size)][0])
            raise IdOutOfRange("token id", bad, self.config.vocab_size)

    def fuse_forward(
        self,
        token_ids: Sequence[int],
        pos_ids: Sequence[int] | None,
        mode: str = "eval",
        seed: int = 0,
        step: int = 0,
    ) -> ForwardTrace:
        """Full forward pass; train mode records everything for backprop."""
        if mode not in ("train", "eval"):
            raise ValueError(f"mode must be 'train' or 'eval', got {mode!r}")
        self._check_token_ids(token_ids)
        cfg = self.config
        if cfg.pos_source != "none":
            if pos_ids is None:
                raise ConfigError("pos_ids required unless pos_source='none'")
            if len(pos_ids) != len(token_ids):
                raise LengthMismatch("pos_ids", len(token_ids), len(pos_ids))
        p = self.params
        ids = np.asarray(token_ids, dtype=np.int64)
        n = ids.size
        gen = None
        if mode == "train" and cfg.dropout > 0.0:
            gen = rng.stream(seed, rng.DROPOUT, step)

        x = p["enc.tok_emb"][ids] + sinusoidal_positions(n, cfg.d, self.dtype)
        cache: dict = {"ids": ids, "enc": []}
        for i in range(cfg.num_encoder_layers):
            x, c = _block_fwd(x, p, f"enc.{i}", cfg.encoder_heads,
                              cfg.dropout, gen)
            cache["enc"].append(c)
        H = x

        E = None
        pids = None
        if cfg.pos_source != "none":
            pids = np.asarray(pos_ids, dtype=np.int64)
            E = pos_embed(p["pos.W"], pids)
            C = np.concatenate([H, E], axis=1)
            cache["fuse"] = []
            x = C
            for j in range(cfg.num_fusion_layers):
                x, c = _block_fwd(x, p, f"fuse.{j}", cfg.fusion_heads,
                                  cfg.dropout, gen)
                cache["fuse"].append(c)
        else:
            C = H
            x = H

        cache["final"] = x
        probs = _softmax_rows(x @ p["out.w"] + p["out.b"])
        return ForwardTrace(
            H=H, E=E, C=C, probs=probs,
            token_ids=ids, pos_ids=pids, mode=mode, _cache=cache,
        )

    def encode(
        self,
        token_ids: Sequence[int],
        mode: str = "eval",
        seed: int = 0,
        step: int = 0,
    ) -> np.ndarray:
        """Encoder states H only; the first pipeline stage in isolation."""
        self._check_token_ids(token_ids)
        cfg = self.config
        p = self.params
        ids = np.asarray(token_ids, dtype=np.int64)
        gen = None
        if mode == "train" and cfg.dropout > 0.0:
            gen = rng.stream(seed, rng.DROPOUT, step)
        x = p["enc.tok_emb"][ids] + sinusoidal_positions(
            ids.size, cfg.d, self.dtype)
        for i in range(cfg.num_encoder_layers):
            x, _ = _block_fwd(x, p, f"enc.{i}", cfg.encoder_heads,
                              cfg.dropout, gen)
        return x

    def zero_grads(self) -> dict[str, np.ndarray]:
        return {k: np.zeros_like(v) for k, v in self.params.items()}

    def loss_and_grads(
        self,
        trace: ForwardTrace,
        labels: Sequence[int],
        position_mask: Sequence[int] | None = None,
        grads: dict[str, np.ndarray] | None = None,
    ) -> tuple[float, dict[str, np.ndarray]]:
        """Cross-entropy loss and exact gradients for the traced pass.

        With loss_mask="none" the loss averages over all n positions;
        with "position_mask" only masked-in positions carry weight.
        Gradients accumulate into `grads` when given (batch summation in
        sample order), else into a fresh zeroed dict.
        """
        cfg = self.config
        p = self.params
        y = np.asarray(labels, dtype=np.int64)
        n = y.size
        probs = trace.probs
        if probs.shape[0] != n:
            raise ConfigError(f"labels length {n} != trace length {probs.shape[0]}")

        if cfg.loss_mask == "position_mask":
            if position_mask is None:
                raise ConfigError(
                    "loss_mask='position_mask' requires the position mask"
                )
            m = np.asarray(position_mask, dtype=np.float64)
            total = m.sum()
            weights = m / total if total > 0 else m
        else:
            weights = np.full(n, 1.0 / n)

        # float64 reduction keeps the loss stable for gradient checks.
        picked = probs[np.arange(n), y].astype(np.float64)
        loss = float(np.sum(-np.log(picked) * weights))

        if grads is None:
            grads = self.zero_grads()
        dlogits = probs.astype(self.dtype, copy=True)
        dlogits[np.arange(n), y] -= 1.0
        dlogits *= weights[:, None].astype(self.dtype)

        final = trace._cache["final"]
        grads["out.w"] += final.T @ dlogits
        grads["out.b"] += dlogits.sum(axis=0)
        dx = dlogits @ p["out.w"].T

        if cfg.pos_source != "none":
            for j in reversed(range(cfg.num_fusion_layers)):
                dx = _block_bwd(dx, trace._cache["fuse"][j], p, grads,
                                f"fuse.{j}", cfg.fusion_heads)
            dH = dx[:, : cfg.d]
            dE = dx[:, cfg.d:]
            dWt = np.zeros((cfg.e, cfg.b), dtype=self.dtype)
            np.add.at(dWt, trace.pos_ids, dE)
            grads["pos.W"] += dWt.T
            dx = np.ascontiguousarray(dH)

        for i in reversed(range(cfg.num_encoder_layers)):
            dx = _block_bwd(dx, trace._cache["enc"][i], p, grads,
                            f"enc.{i}", cfg.encoder_heads)
        np.add.at(grads["enc.tok_emb"], trace._cache["ids"], dx)
        return loss, grads

    def predict(self, token_ids, pos_ids) -> np.ndarray:
        """Argmax labels in eval mode."""
        trace = self.fuse_forward(token_ids, pos_ids, mode="eval")
        return trace.probs.argmax(axis=1).astype(np.int8)

    def clone_params(self) -> dict[str, np.ndarray]:
        return {k: v.copy() for k, v in self.params.items()}

    def with_dtype(self, dtype) -> "FusionModel":
        """Same parameters cast to another dtype (for gradient checks)."""
        return FusionModel(
            self.config, {k: v.astype(dtype) for k, v in self.params.items()}
        )


def permute_pos_indices(
    model: FusionModel, perm: Sequence[int]
) -> tuple[FusionModel, np.ndarray]:
    """Relabel POS ids by a permutation and shuffle W's columns to match.

    Returns the permuted model and the id remap; predictions are invariant
    under this joint transformation (the lookup is index-symmetric).
    """
    perm = np.asarray(perm, dtype=np.int64)
    params = model.clone_params()
    params["pos.W"] = params["pos.W"][:, perm]
    remap = np.empty_like(perm)
    remap[perm] = np.arange(perm.size)
    return FusionModel(model.config, params), remap


def save_model(
    path: str,
    model: FusionModel,
    vocab_pieces: Sequence[str],
    tagger_meta: dict | None = None,
    tagger_blocks: dict[str, np.ndarray] | None = None,
    extra_meta: dict | None = None,
) -> None:
    """Self-contained checkpoint: config, vocab, model, optional tagger.

    Embedding the vocab pieces and the tagger makes evaluate/restore
    single-file operations.
    """
    meta = {
        "kind": "fusion-model",
        "config": model.config.to_dict(),
        "vocab_pieces": list(vocab_pieces),
        "param_names": list(model.params.keys()),
        "tagger_meta": tagger_meta,
    }
    if extra_meta:
        meta.update(extra_meta)
    blocks = dict(model.params)
    if tagger_blocks:
        for k, v in tagger_blocks.items():
            blocks[f"tagger.{k}"] = v
    save_blocks(path, meta, blocks)


def load_model(path: str):
    """Load a checkpoint; returns (model, vocab_pieces, tagger or None, meta)."""
    from .postag import tagger_from_blocks
    from .subword import SubwordVocab

    meta, blocks = load_blocks(path)
    if meta.get("kind") != "fusion-model":
        raise ConfigError(f"{path}: not a model checkpoint")
    config = ModelConfig.from_dict(meta["config"])
    params = {name: blocks[name] for name in meta["param_names"]}
    model = FusionModel(config, params)
    vocab = SubwordVocab(tuple(meta["vocab_pieces"]))
    tagger = None
    if meta.get("tagger_meta"):
        tblocks = {
            k[len("tagger."):]: v
            for k, v in blocks.items()
            if k.startswith("tagger.")
        }
        tagger = tagger_from_blocks(meta["tagger_meta"], tblocks)
    return model, vocab, tagger, meta
