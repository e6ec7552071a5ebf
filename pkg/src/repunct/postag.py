"""Word-level POS tagger whose softmax weights double as a POS embedding.

The tagger is deliberately small: five hashed feature templates per word
(identity, 3-char prefix, 3-char suffix, previous word, next word) index
a shared embedding table; the summed features pass through tanh into a
softmax of width e. The softmax weight matrix W (b rows, e columns) is
the exported POS embedding table: column j is the embedding of tag j.

Feature hashing uses crc32, which is stable across platforms and runs,
so a seed fully determines the trained tagger.
"""

from __future__ import annotations

import zlib
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import rng
from .errors import IndexOutOfRange, MalformedLine, UnknownTag
from .serialize import load_blocks, save_blocks
from .tagset import TAGSET_SIZE, build_tagset

N_TEMPLATES = 5
_EDGE_BEFORE = "<s>"
_EDGE_AFTER = "</s>"


@dataclass
class PosTagger:
    """Feature table, hidden bias, and the softmax layer (W, bias)."""

    tags: tuple[str, ...]
    n_buckets: int
    emb: np.ndarray          # (n_buckets, b)
    hidden_bias: np.ndarray  # (b,)
    W: np.ndarray            # (b, e); column j embeds tag j
    softmax_bias: np.ndarray  # (e,)

    @property
    def b(self) -> int:
        return self.W.shape[0]

    @property
    def e(self) -> int:
        return self.W.shape[1]


def _bucket(template: str, value: str, n_buckets: int) -> int:
    return zlib.crc32(f"{template}|{value}".encode("utf-8")) % n_buckets


def _feature_matrix(words: Sequence[str], n_buckets: int) -> np.ndarray:
    """Hashed feature ids, shape (len(words), N_TEMPLATES)."""
    n = len(words)
    idx = np.empty((n, N_TEMPLATES), dtype=np.int64)
    for i, w in enumerate(words):
        prev = words[i - 1] if i > 0 else _EDGE_BEFORE
        nxt = words[i + 1] if i + 1 < n else _EDGE_AFTER
        idx[i, 0] = _bucket("w", w, n_buckets)
        idx[i, 1] = _bucket("p3", w[:3], n_buckets)
        idx[i, 2] = _bucket("s3", w[-3:], n_buckets)
        idx[i, 3] = _bucket("prev", prev, n_buckets)
        idx[i, 4] = _bucket("next", nxt, n_buckets)
    return idx


def _forward(tagger: PosTagger, idx: np.ndarray
             ) -> tuple[np.ndarray, np.ndarray]:
    """Hidden activations and softmax probabilities for feature rows."""
    h = np.tanh(tagger.emb[idx].sum(axis=1) + tagger.hidden_bias)
    logits = h @ tagger.W + tagger.softmax_bias
    logits -= logits.max(axis=1, keepdims=True)
    p = np.exp(logits)
    p /= p.sum(axis=1, keepdims=True)
    return h, p


def train_tagger(
    pos_corpus: Sequence[tuple[Sequence[str], Sequence[str]]],
    b: int = 512,
    e: int = TAGSET_SIZE,
    epochs: int = 20,
    seed: int = 0,
    learning_rate: float = 0.5,
) -> PosTagger:
    """Train by SGD on per-sentence mean cross-entropy.

    Deterministic given the seed: initialization and the per-epoch
    sentence shuffle both come from counter-based streams.
    """
    tags = build_tagset(e)
    tag_to_id = {t: i for i, t in enumerate(tags)}
    n_buckets = 4096

    sent_feats: list[np.ndarray] = []
    sent_tags: list[np.ndarray] = []
    for words, tag_names in pos_corpus:
        ids = np.empty(len(tag_names), dtype=np.int64)
        for i, t in enumerate(tag_names):
            if t not in tag_to_id:
                raise UnknownTag(t)
            ids[i] = tag_to_id[t]
        sent_feats.append(_feature_matrix(list(words), n_buckets))
        sent_tags.append(ids)

    g = rng.stream(seed, rng.INIT, 0)
    tagger = PosTagger(
        tags=tags,
        n_buckets=n_buckets,
        emb=(g.standard_normal((n_buckets, b)) / np.sqrt(N_TEMPLATES)
             ).astype(np.float32) * 0.1,
        hidden_bias=np.zeros(b, dtype=np.float32),
        W=(g.standard_normal((b, e)) / np.sqrt(b)).astype(np.float32),
        softmax_bias=np.zeros(e, dtype=np.float32),
    )

    n_sents = len(sent_feats)
    for epoch in range(epochs):
        order = rng.stream(seed, rng.SHUFFLE, epoch).permutation(n_sents)
        for si in order:
            idx = sent_feats[si]
            gold = sent_tags[si]
            n = len(gold)
            h, p = _forward(tagger, idx)
            dlogits = p.astype(np.float64)
            dlogits[np.arange(n), gold] -= 1.0
            dlogits /= n
            dW = h.T.astype(np.float64) @ dlogits
            dh = (dlogits @ tagger.W.T.astype(np.float64)) * (1.0 - h ** 2)
            lr = learning_rate
            tagger.W -= (lr * dW).astype(np.float32)
            tagger.softmax_bias -= (lr * dlogits.sum(axis=0)).astype(np.float32)
            tagger.hidden_bias -= (lr * dh.sum(axis=0)).astype(np.float32)
            upd = np.repeat((lr * dh).astype(np.float32), N_TEMPLATES, axis=0)
            np.subtract.at(tagger.emb, idx.ravel(), upd)
    return tagger


def predict_tags(tagger: PosTagger, words: Sequence[str]) -> np.ndarray:
    """Predicted tag ids, one per word; empty input gives empty output."""
    if len(words) == 0:
        return np.empty(0, dtype=np.int16)
    idx = _feature_matrix(list(words), tagger.n_buckets)
    _, p = _forward(tagger, idx)
    return p.argmax(axis=1).astype(np.int16)


def tag_accuracy(
    tagger: PosTagger,
    pos_corpus: Sequence[tuple[Sequence[str], Sequence[str]]],
) -> float:
    """Fraction of words tagged correctly over a corpus."""
    tag_to_id = {t: i for i, t in enumerate(tagger.tags)}
    correct = 0
    total = 0
    for words, tag_names in pos_corpus:
        pred = predict_tags(tagger, words)
        for p, t in zip(pred, tag_names):
            if t not in tag_to_id:
                raise UnknownTag(t)
            correct += int(p) == tag_to_id[t]
            total += 1
    return correct / total if total else 0.0


def pos_embed(W: np.ndarray, tag_ids: Sequence[int]) -> np.ndarray:
    """Row i of the result is column tag_ids[i] of W."""
    ids = np.asarray(tag_ids, dtype=np.int64)
    e = W.shape[1]
    if ids.size and (ids.min() < 0 or ids.max() >= e):
        bad = int(ids[(ids < 0) | (ids >= e)][0])
        raise IndexOutOfRange("pos tag id", bad, e)
    return W.T[ids]


def save_tagger(tagger: PosTagger, path: str) -> None:
    meta = {
        "kind": "pos-tagger",
        "tags": list(tagger.tags),
        "n_buckets": tagger.n_buckets,
        "b": tagger.b,
        "e": tagger.e,
    }
    save_blocks(path, meta, tagger_blocks(tagger))


def tagger_blocks(tagger: PosTagger) -> dict[str, np.ndarray]:
    """Parameter blocks in declaration order, for checkpoints."""
    return {
        "emb": tagger.emb,
        "hidden_bias": tagger.hidden_bias,
        "W": tagger.W,
        "softmax_bias": tagger.softmax_bias,
    }


def tagger_from_blocks(meta: dict, blocks: dict[str, np.ndarray]) -> PosTagger:
    return PosTagger(
        tags=tuple(meta["tags"]),
        n_buckets=int(meta["n_buckets"]),
        emb=blocks["emb"],
        hidden_bias=blocks["hidden_bias"],
        W=blocks["W"],
        softmax_bias=blocks["softmax_bias"],
    )


def load_tagger(path: str) -> PosTagger:
    meta, blocks = load_blocks(path)
    if meta.get("kind") != "pos-tagger":
        raise MalformedLine(1, f"{path}: not a tagger checkpoint")
    return tagger_from_blocks(meta, blocks)


def parse_pos_tsv(source: bytes) -> list[tuple[list[str], list[str]]]:
    """Parse `word<TAB>UPOS` lines; blank lines separate sentences."""
    text = source.decode("utf-8")
    sentences: list[tuple[list[str], list[str]]] = []
    words: list[str] = []
    tags: list[str] = []
    for line_number, line in enumerate(text.split("\n"), start=1):
        if line.endswith("\r"):
            line = line[:-1]
        if not line:
            if words:
                sentences.append((words, tags))
                words, tags = [], []
            continue
        fields = line.split("\t")
        if len(fields) != 2:
            raise MalformedLine(
                line_number, f"expected 2 tab-separated fields, got {len(fields)}"
            )
        words.append(fields[0])
        tags.append(fields[1])
    if words:
        sentences.append((words, tags))
    return sentences


def load_pos_corpus(path: str) -> list[tuple[list[str], list[str]]]:
    with open(path, "rb") as fh:
        return parse_pos_tsv(fh.read())
