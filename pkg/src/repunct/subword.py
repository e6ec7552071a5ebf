"""Subword vocabulary training, tokenization, and label alignment.

The vocabulary is trained by byte-pair merging over word types with the
"##" continuation convention: the first piece of a word is bare, every
later piece carries the "##" prefix. Stripping prefixes and concatenating
pieces reproduces the word, which is what makes label alignment and the
restore command lossless.

Alignment places each word's punctuation label on its tail piece only;
non-tail pieces get O. The position mask marks tail pieces, and only
masked-in positions are scored at evaluation time. POS ids are copied to
every piece of the word by default (nontail_pos="copy"); the alternative
"x" marks non-tail pieces with the X tag instead.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np

from . import _backend
from .corpus import LabeledCorpus, PunctLabel
from .errors import LengthMismatch, MalformedLine, VocabTooSmall
from .tagset import X_ID

BOS_PIECE = "<bos>"
EOS_PIECE = "<eos>"
UNK_PIECE = "<unk>"
_SPECIALS = (BOS_PIECE, EOS_PIECE, UNK_PIECE)

CONTINUATION_PREFIX = "##"

BOS_ID, EOS_ID, UNK_ID = 0, 1, 2


@dataclass(frozen=True)
class SubwordVocab:
    """Frozen piece inventory; ids are positions in `pieces`."""

    pieces: tuple[str, ...]
    continuation_prefix: str = CONTINUATION_PREFIX
    piece_to_id: dict[str, int] = field(
        init=False, repr=False, compare=False, default_factory=dict
    )
    # Match table excludes specials so greedy lookup can never emit them.
    _match_table: dict[str, int] = field(
        init=False, repr=False, compare=False, default_factory=dict
    )
    _max_raw_len: int = field(init=False, repr=False, compare=False, default=0)

    def __post_init__(self):
        if self.pieces[:3] != _SPECIALS:
            raise ValueError(f"pieces must start with {_SPECIALS}")
        mapping = {p: i for i, p in enumerate(self.pieces)}
        if len(mapping) != len(self.pieces):
            raise ValueError("duplicate pieces")
        object.__setattr__(self, "piece_to_id", mapping)
        match = {p: i for p, i in mapping.items() if p not in _SPECIALS}
        object.__setattr__(self, "_match_table", match)
        max_raw = 0
        for p in match:
            raw = len(p) - len(self.continuation_prefix) if p.startswith(
                self.continuation_prefix
            ) else len(p)
            max_raw = max(max_raw, raw)
        object.__setattr__(self, "_max_raw_len", max_raw)

    def __len__(self) -> int:
        return len(self.pieces)

    @property
    def bos_id(self) -> int:
        return BOS_ID

    @property
    def eos_id(self) -> int:
        return EOS_ID

    @property
    def unk_id(self) -> int:
        return UNK_ID


def _initial_symbols(word: str) -> list[str]:
    """Positional character forms: bare first char, ##-prefixed rest."""
    return [word[0]] + [CONTINUATION_PREFIX + ch for ch in word[1:]]


def train_vocab(corpus: LabeledCorpus, vocab_size: int) -> SubwordVocab:
    """Byte-pair merge training to the requested vocabulary size.

    Deterministic: the most frequent adjacent pair merges first, ties
    broken by lexicographic order of the pair's piece strings. Merging
    stops early when no pair occurs at least twice, so the returned vocab
    may be smaller than vocab_size on tiny corpora.
    """
    word_counts = Counter(corpus.words())
    sym_strings: list[str] = []
    sym_ids: dict[str, int] = {}

    def intern(s: str) -> int:
        sid = sym_ids.get(s)
        if sid is None:
            sid = len(sym_strings)
            sym_ids[s] = sid
            sym_strings.append(s)
        return sid

    words = sorted(word_counts)
    flat_list: list[int] = []
    offsets = np.zeros(len(words) + 1, dtype=np.int64)
    for w_idx, word in enumerate(words):
        flat_list.extend(intern(s) for s in _initial_symbols(word))
        offsets[w_idx + 1] = len(flat_list)
    flat = np.asarray(flat_list, dtype=np.int32)
    counts = np.asarray([word_counts[w] for w in words], dtype=np.int64)

    alphabet = sorted(sym_strings)
    minimum = len(_SPECIALS) + len(alphabet)
    if vocab_size < minimum:
        raise VocabTooSmall(vocab_size, minimum)

    budget = vocab_size - minimum
    merges: list[str] = []
    piece_set = set(_SPECIALS) | set(alphabet)
    while budget > 0:
        keys, sums = _backend.count_pairs(flat, offsets, counts)
        if len(keys) == 0:
            break
        best = int(sums.max())
        if best < 2:
            break
        tied = keys[sums == best].tolist()
        a_id, b_id = min(
            ((int(k >> 32), int(k & 0xFFFFFFFF)) for k in tied),
            key=lambda ab: (sym_strings[ab[0]], sym_strings[ab[1]]),
        )
        b_str = sym_strings[b_id]
        merged = sym_strings[a_id] + (
            b_str[len(CONTINUATION_PREFIX):]
            if b_str.startswith(CONTINUATION_PREFIX)
            else b_str
        )
        new_id = intern(merged)
        flat, offsets = _backend.apply_merge(flat, offsets, a_id, b_id, new_id)
        if merged not in piece_set:
            piece_set.add(merged)
            merges.append(merged)
            budget -= 1

    return SubwordVocab(tuple(_SPECIALS) + tuple(alphabet) + tuple(merges))


def encode_word(vocab: SubwordVocab, word: str) -> list[int]:
    """Segment one word into piece ids, greedy longest-match-first."""
    return _backend.greedy_piece_ids(
        word,
        vocab._match_table,
        vocab.continuation_prefix,
        UNK_ID,
        vocab._max_raw_len,
    )


def tokenize_word(vocab: SubwordVocab, word: str) -> list[str]:
    """Segment one word into piece strings."""
    return [vocab.pieces[i] for i in encode_word(vocab, word)]


class AlignedStream(NamedTuple):
    """Parallel per-piece sequences; one record per subword position."""

    token_ids: np.ndarray
    labels: np.ndarray
    pos_ids: np.ndarray
    position_mask: np.ndarray

    @property
    def stream_len(self) -> int:
        return int(self.token_ids.size)


def align(
    vocab: SubwordVocab,
    words: Sequence[str],
    word_labels: Sequence[PunctLabel],
    word_pos_ids: Sequence[int],
    nontail_pos: str = "copy",
) -> AlignedStream:
    """Tokenize words and align labels, POS ids, and the position mask.

    A word split into k pieces contributes O labels and mask 0 on pieces
    1..k-1 and its own label with mask 1 on piece k. BOS/EOS wrap the
    whole sequence with label O, POS X, mask 0.
    """
    if len(word_labels) != len(words):
        raise LengthMismatch("word_labels", len(words), len(word_labels))
    if len(word_pos_ids) != len(words):
        raise LengthMismatch("word_pos_ids", len(words), len(word_pos_ids))
    if nontail_pos not in ("copy", "x"):
        raise ValueError(f"nontail_pos must be 'copy' or 'x', got {nontail_pos!r}")

    tok: list[int] = [BOS_ID]
    lab: list[int] = [int(PunctLabel.O)]
    pos: list[int] = [X_ID]
    mask: list[int] = [0]
    for word, label, pid in zip(words, word_labels, word_pos_ids):
        ids = encode_word(vocab, word)
        k = len(ids)
        tok.extend(ids)
        lab.extend([int(PunctLabel.O)] * (k - 1))
        lab.append(int(label))
        if nontail_pos == "copy":
            pos.extend([int(pid)] * k)
        else:
            pos.extend([X_ID] * (k - 1))
            pos.append(int(pid))
        mask.extend([0] * (k - 1))
        mask.append(1)
    tok.append(EOS_ID)
    lab.append(int(PunctLabel.O))
    pos.append(X_ID)
    mask.append(0)

    return AlignedStream(
        token_ids=np.asarray(tok, dtype=np.int32),
        labels=np.asarray(lab, dtype=np.int8),
        pos_ids=np.asarray(pos, dtype=np.int16),
        position_mask=np.asarray(mask, dtype=np.uint8),
    )


def save_vocab(vocab: SubwordVocab, path: str) -> None:
    """Write the vocab file: header line, then one piece per line in id order."""
    header = (
        f"repunct-vocab\tv1\tcont={vocab.continuation_prefix}"
        f"\tbos={BOS_ID}\teos={EOS_ID}\tunk={UNK_ID}\n"
    )
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(header)
        for piece in vocab.pieces:
            fh.write(piece + "\n")


def load_vocab(path: str) -> SubwordVocab:
    """Read a vocab file written by save_vocab."""
    with open(path, "r", encoding="utf-8") as fh:
        lines = fh.read().split("\n")
    if not lines or not lines[0].startswith("repunct-vocab\tv1"):
        raise MalformedLine(1, "not a vocab file (bad header)")
    pieces = [ln for ln in lines[1:] if ln]
    return SubwordVocab(tuple(pieces))


def corpus_stream(
    vocab: SubwordVocab,
    corpus: LabeledCorpus,
    word_pos_ids: Sequence[int],
    nontail_pos: str = "copy",
) -> AlignedStream:
    """Align a whole corpus into one continuous stream (single BOS/EOS pair)."""
    return align(vocab, corpus.words(), corpus.labels(), word_pos_ids, nontail_pos)
