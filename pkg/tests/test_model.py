"""Fusion model: config validation, forward math, gradients, symmetry."""

import math

import numpy as np
import pytest

from repunct.errors import ConfigError, IndexOutOfRange, LengthMismatch
from repunct.model import (
    FusionModel,
    ModelConfig,
    load_model,
    permute_pos_indices,
    save_model,
    sinusoidal_positions,
)

VOCAB = 12


def small_config(**kw) -> ModelConfig:
    base = dict(vocab_size=VOCAB, d=8, b=4, e=6, L=16,
                num_encoder_layers=1, encoder_heads=2,
                num_fusion_layers=1, fusion_heads=2, dropout=0.0)
    base.update(kw)
    return ModelConfig(**base)


def small_model(seed=0, dtype=np.float32, **kw) -> FusionModel:
    cfg = small_config(**kw)
    W = np.random.default_rng(99).normal(0, 0.3, size=(cfg.b, cfg.e))
    return FusionModel.init(cfg, seed=seed, tagger_W=W, dtype=dtype)


def toy_batch(n=10, seed=0):
    rng = np.random.default_rng(seed)
    ids = rng.integers(0, VOCAB, size=n).astype(np.int32)
    pos = rng.integers(0, 6, size=n).astype(np.int16)
    labels = rng.integers(0, 4, size=n).astype(np.int8)
    return ids, pos, labels


class TestModelConfig:
    def test_head_divisibility_collected(self):
        with pytest.raises(ConfigError) as exc:
            small_config(encoder_heads=3)
        assert "heads" in str(exc.value)

    def test_fusion_width(self):
        assert small_config().fusion_width == 12
        assert small_config(pos_source="none").fusion_width == 8

    def test_multiple_problems_reported_together(self):
        with pytest.raises(ConfigError) as exc:
            small_config(d=7, dropout=1.5)
        msg = str(exc.value)
        assert "d" in msg and "dropout" in msg

    def test_dict_round_trip(self):
        cfg = small_config()
        assert ModelConfig.from_dict(cfg.to_dict()) == cfg

    def test_default_ffn_dims(self):
        cfg = small_config()
        assert cfg.encoder_ffn_dim == 0 or cfg.encoder_ffn_dim == 4 * cfg.d


class TestInit:
    def test_parameter_groups_cover_params(self):
        model = small_model()
        groups = {model.parameter_group(k) for k in model.params}
        assert groups == {"theta", "W", "gamma", "eta"}
        assert model.parameter_group("pos.W") == "W"
        assert model.parameter_group("enc.tok_emb") == "theta"
        assert model.parameter_group("fuse.0.attn.wq") == "gamma"
        assert model.parameter_group("out.b") == "eta"

    def test_tagger_w_copied(self):
        cfg = small_config()
        W = np.random.default_rng(1).normal(size=(cfg.b, cfg.e))
        model = FusionModel.init(cfg, seed=0, tagger_W=W)
        assert np.allclose(model.params["pos.W"], W.astype(np.float32))

    def test_tagger_w_shape_checked(self):
        cfg = small_config()
        with pytest.raises(Exception):
            FusionModel.init(cfg, seed=0,
                             tagger_W=np.zeros((cfg.b + 1, cfg.e)))

    def test_pos_none_has_no_fusion_params(self):
        cfg = small_config(pos_source="none")
        model = FusionModel.init(cfg, seed=0)
        assert "pos.W" not in model.params
        assert not any(k.startswith("fuse.") for k in model.params)
        assert model.params["out.w"].shape == (cfg.d, 4)

    def test_deterministic(self):
        a, b = small_model(seed=3), small_model(seed=3)
        for k in a.params:
            assert np.array_equal(a.params[k], b.params[k]), k


class TestForward:
    def test_prob_rows_sum_to_one(self):
        model = small_model()
        ids, pos, _ = toy_batch()
        trace = model.fuse_forward(ids, pos)
        assert trace.probs.shape == (len(ids), 4)
        assert np.allclose(trace.probs.sum(axis=1), 1.0, atol=1e-6)
        assert np.all(trace.probs >= 0)

    def test_shapes(self):
        model = small_model()
        ids, pos, _ = toy_batch(n=7)
        trace = model.fuse_forward(ids, pos)
        assert trace.H.shape == (7, 8)
        assert trace.E.shape == (7, 4)
        assert trace.C.shape == (7, 12)

    def test_c_is_concat_of_h_and_e(self):
        model = small_model()
        ids, pos, _ = toy_batch()
        trace = model.fuse_forward(ids, pos)
        assert np.array_equal(trace.C[:, :8], trace.H)
        assert np.array_equal(trace.C[:, 8:], trace.E)

    def test_e_rows_are_w_columns(self):
        model = small_model()
        ids, pos, _ = toy_batch()
        trace = model.fuse_forward(ids, pos)
        W = model.params["pos.W"]
        for i, t in enumerate(pos):
            assert np.array_equal(trace.E[i], W[:, int(t)])

    def test_eval_deterministic(self):
        model = small_model(dropout=0.3)
        ids, pos, _ = toy_batch()
        a = model.fuse_forward(ids, pos, mode="eval")
        b = model.fuse_forward(ids, pos, mode="eval")
        assert np.array_equal(a.probs, b.probs)

    def test_dropout_repeatable_by_step(self):
        model = small_model(dropout=0.4)
        ids, pos, _ = toy_batch()
        a = model.fuse_forward(ids, pos, mode="train", seed=1, step=7)
        b = model.fuse_forward(ids, pos, mode="train", seed=1, step=7)
        c = model.fuse_forward(ids, pos, mode="train", seed=1, step=8)
        assert np.array_equal(a.probs, b.probs)
        assert not np.array_equal(a.probs, c.probs)

    def test_token_id_out_of_range(self):
        model = small_model()
        ids, pos, _ = toy_batch()
        ids[0] = VOCAB
        with pytest.raises(IndexOutOfRange):
            model.fuse_forward(ids, pos)

    def test_pos_ids_required(self):
        model = small_model()
        ids, _, _ = toy_batch()
        with pytest.raises(Exception):
            model.fuse_forward(ids, None)

    def test_pos_length_checked(self):
        model = small_model()
        ids, pos, _ = toy_batch()
        with pytest.raises(LengthMismatch):
            model.fuse_forward(ids, pos[:-1])

    def test_bad_mode(self):
        model = small_model()
        ids, pos, _ = toy_batch()
        with pytest.raises(Exception):
            model.fuse_forward(ids, pos, mode="banana")


class TestResidualIdentity:
    def test_zeroed_branches_pass_embeddings_through(self):
        model = small_model(dtype=np.float64)
        for k, v in model.params.items():
            if ".attn." in k or ".ffn." in k:
                v[...] = 0.0
        ids, pos, _ = toy_batch()
        trace = model.fuse_forward(ids, pos)
        expect = (model.params["enc.tok_emb"][ids]
                  + sinusoidal_positions(len(ids), 8, np.float64))
        assert np.allclose(trace.H, expect, atol=1e-12)


def reference_forward(model: FusionModel, ids, pos_ids):
    """Independent loop-based forward for cross-checking the array math."""
    p = {k: np.asarray(v, dtype=np.float64) for k, v in model.params.items()}
    cfg = model.config

    def ln(x, g, b):
        out = np.empty_like(x)
        for i in range(x.shape[0]):
            mu = sum(x[i]) / len(x[i])
            var = sum((v - mu) ** 2 for v in x[i]) / len(x[i])
            inv = 1.0 / math.sqrt(var + 1e-5)
            for j in range(x.shape[1]):
                out[i, j] = (x[i, j] - mu) * inv * g[j] + b[j]
        return out

    def gelu(x):
        c = math.sqrt(2.0 / math.pi)
        return np.array([[0.5 * v * (1.0 + math.tanh(c * (v + 0.044715 * v ** 3)))
                          for v in row] for row in x])

    def softmax(row):
        m = max(row)
        ez = [math.exp(v - m) for v in row]
        s = sum(ez)
        return [v / s for v in ez]

    def attention(x, pre, heads):
        n, w = x.shape
        dk = w // heads
        q = x @ p[pre + ".wq"] + p[pre + ".bq"]
        k = x @ p[pre + ".wk"] + p[pre + ".bk"]
        v = x @ p[pre + ".wv"] + p[pre + ".bv"]
        ctx = np.zeros((n, w))
        for h in range(heads):
            sl = slice(h * dk, (h + 1) * dk)
            for i in range(n):
                scores = [float(q[i, sl] @ k[j, sl]) / math.sqrt(dk)
                          for j in range(n)]
                att = softmax(scores)
                for j in range(n):
                    ctx[i, sl] += att[j] * v[j, sl]
        return ctx @ p[pre + ".wo"] + p[pre + ".bo"]

    def block(x, pre, heads):
        x = x + attention(ln(x, p[pre + ".ln1.g"], p[pre + ".ln1.b"]), pre + ".attn", heads)
        h2 = ln(x, p[pre + ".ln2.g"], p[pre + ".ln2.b"])
        return x + gelu(h2 @ p[pre + ".ffn.w1"] + p[pre + ".ffn.b1"]) @ p[pre + ".ffn.w2"] + p[pre + ".ffn.b2"]

    n = len(ids)
    x = p["enc.tok_emb"][np.asarray(ids)] + sinusoidal_positions(n, cfg.d, np.float64)
    for i in range(cfg.num_encoder_layers):
        x = block(x, f"enc.{i}", cfg.encoder_heads)
    E = p["pos.W"].T[np.asarray(pos_ids)]
    c = np.concatenate([x, E], axis=1)
    for j in range(cfg.num_fusion_layers):
        c = block(c, f"fuse.{j}", cfg.fusion_heads)
    logits = c @ p["out.w"] + p["out.b"]
    return np.array([softmax(list(row)) for row in logits])


def test_forward_matches_scalar_reference():
    model = small_model(seed=4, dtype=np.float64)
    ids, pos, _ = toy_batch(n=6, seed=2)
    got = model.fuse_forward(ids, pos).probs
    want = reference_forward(model, ids, pos)
    assert np.allclose(got, want, atol=1e-12)


class TestLoss:
    def test_uniform_probs_give_ln4(self):
        model = small_model(dtype=np.float64)
        model.params["out.w"][...] = 0.0
        model.params["out.b"][...] = 0.0
        ids, pos, labels = toy_batch()
        trace = model.fuse_forward(ids, pos)
        loss, _ = model.loss_and_grads(trace, labels)
        assert loss == pytest.approx(math.log(4.0), rel=1e-12)

    def test_position_mask_excludes_positions(self):
        model = small_model(loss_mask="position_mask", dtype=np.float64)
        ids, pos, labels = toy_batch()
        mask = np.ones(len(ids), dtype=np.uint8)
        mask[: len(ids) // 2] = 0
        trace = model.fuse_forward(ids, pos)
        loss_a, _ = model.loss_and_grads(trace, labels, position_mask=mask)
        flipped = labels.copy()
        flipped[mask == 0] = (flipped[mask == 0] + 1) % 4
        trace_b = model.fuse_forward(ids, pos)
        loss_b, _ = model.loss_and_grads(trace_b, flipped, position_mask=mask)
        assert loss_a == pytest.approx(loss_b, rel=1e-12)

    def test_w_gradient_flows(self):
        model = small_model(dtype=np.float64)
        ids, pos, labels = toy_batch()
        trace = model.fuse_forward(ids, pos)
        _, grads = model.loss_and_grads(trace, labels)
        assert float(np.abs(grads["pos.W"]).sum()) > 0

    def test_all_groups_receive_gradients(self):
        model = small_model(dtype=np.float64)
        ids, pos, labels = toy_batch()
        trace = model.fuse_forward(ids, pos)
        _, grads = model.loss_and_grads(trace, labels)
        totals = {"theta": 0.0, "W": 0.0, "gamma": 0.0, "eta": 0.0}
        for k, g in grads.items():
            totals[model.parameter_group(k)] += float(np.abs(g).sum())
        for group, total in totals.items():
            assert total > 0, group

    def test_gradient_accumulation_adds(self):
        model = small_model(dtype=np.float64)
        ids, pos, labels = toy_batch()
        trace = model.fuse_forward(ids, pos)
        _, g1 = model.loss_and_grads(trace, labels)
        acc = model.zero_grads()
        model.loss_and_grads(model.fuse_forward(ids, pos), labels, grads=acc)
        model.loss_and_grads(model.fuse_forward(ids, pos), labels, grads=acc)
        for k in g1:
            assert np.allclose(acc[k], 2.0 * g1[k], atol=1e-12)


def finite_difference(model, name, idx, ids, pos, labels, h=1e-5):
    p = model.params[name]
    orig = p.flat[idx]
    p.flat[idx] = orig + h
    lp, _ = model.loss_and_grads(model.fuse_forward(ids, pos), labels)
    p.flat[idx] = orig - h
    lm, _ = model.loss_and_grads(model.fuse_forward(ids, pos), labels)
    p.flat[idx] = orig
    return (lp - lm) / (2 * h)


def test_gradient_spot_check():
    """Fast probe of one parameter per family; the full sweep runs in the
    acceptance suite."""
    model = small_model(seed=7, dtype=np.float64)
    ids, pos, labels = toy_batch(n=8, seed=5)
    trace = model.fuse_forward(ids, pos)
    _, grads = model.loss_and_grads(trace, labels)
    for name in ["enc.tok_emb", "enc.0.attn.wq", "enc.0.ffn.w1", "enc.0.ln1.g",
                 "pos.W", "fuse.0.attn.wv", "fuse.0.ffn.b2", "out.w", "out.b"]:
        idx = model.params[name].size // 2
        fd = finite_difference(model, name, idx, ids, pos, labels)
        an = grads[name].flat[idx]
        denom = max(abs(an), abs(fd), 1e-4)
        assert abs(an - fd) / denom < 1e-6, (name, an, fd)


class TestPermutationSymmetry:
    def test_tag_relabeling_preserves_probs(self):
        model = small_model(seed=2)
        ids, pos, _ = toy_batch()
        before = model.fuse_forward(ids, pos).probs
        perm = np.array([3, 0, 5, 1, 4, 2])
        permuted, remap = permute_pos_indices(model, perm)
        new_pos = remap[np.asarray(pos)].astype(np.int16)
        after = permuted.fuse_forward(ids, new_pos).probs
        assert np.array_equal(before, after)


class TestPosSourceNone:
    def test_forward_without_pos(self):
        cfg = small_config(pos_source="none")
        model = FusionModel.init(cfg, seed=0)
        ids, _, labels = toy_batch()
        trace = model.fuse_forward(ids, None)
        assert trace.E is None
        assert trace.C.shape == (len(ids), cfg.d)
        loss, grads = model.loss_and_grads(trace, labels)
        assert math.isfinite(loss)
        assert "pos.W" not in grads


class TestSaveLoad:
    def test_checkpoint_round_trip(self, tmp_path):
        model = small_model(seed=6)
        path = tmp_path / "m.rpt"
        pieces = ("<bos>", "<eos>", "<unk>") + tuple(
            f"p{i}" for i in range(VOCAB - 3))
        save_model(str(path), model, pieces)
        loaded, vocab, tagger, meta = load_model(str(path))
        assert vocab.pieces == pieces
        assert loaded.config == model.config
        for k in model.params:
            assert np.array_equal(loaded.params[k], model.params[k]), k
        ids, pos, _ = toy_batch()
        assert np.array_equal(model.predict(ids, pos), loaded.predict(ids, pos))
