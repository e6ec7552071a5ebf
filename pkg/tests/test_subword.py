"""Subword vocabulary training, greedy segmentation, and label alignment."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from repunct.corpus import LabeledCorpus, PunctLabel
from repunct.errors import LengthMismatch, VocabTooSmall
from repunct.subword import (
    BOS_PIECE,
    CONTINUATION_PREFIX,
    EOS_PIECE,
    UNK_PIECE,
    SubwordVocab,
    align,
    encode_word,
    load_vocab,
    save_vocab,
    tokenize_word,
    train_vocab,
)
from repunct.tagset import X_ID, tag_id


def corpus_of(words: list[str]) -> LabeledCorpus:
    return LabeledCorpus(tuple((w, PunctLabel.O) for w in words))


def make_vocab(pieces: list[str]) -> SubwordVocab:
    return SubwordVocab(tuple([BOS_PIECE, EOS_PIECE, UNK_PIECE] + pieces),
                        CONTINUATION_PREFIX)


class TestTrainVocab:
    def test_specials_first(self, repeat_vocab):
        assert repeat_vocab.pieces[:3] == (BOS_PIECE, EOS_PIECE, UNK_PIECE)

    def test_repeated_word_merges_to_whole(self):
        vocab = train_vocab(corpus_of(["aa"] * 100), vocab_size=10)
        assert "aa" in vocab.pieces

    def test_no_merge_below_count_two(self):
        # each word occurs once, so no pair reaches the count-2 threshold
        vocab = train_vocab(corpus_of(["ab", "cd"]), vocab_size=50)
        assert set(vocab.pieces) == {BOS_PIECE, EOS_PIECE, UNK_PIECE,
                                     "a", "c", "##b", "##d"}

    def test_alphabet_sorted(self):
        vocab = train_vocab(corpus_of(["ba", "dc"]), vocab_size=50)
        assert list(vocab.pieces[3:]) == sorted(vocab.pieces[3:])

    def test_too_small(self):
        with pytest.raises(VocabTooSmall):
            train_vocab(corpus_of(["abcdefgh"]), vocab_size=5)

    def test_deterministic(self, repeat_corpus):
        a = train_vocab(repeat_corpus, vocab_size=60)
        b = train_vocab(repeat_corpus, vocab_size=60)
        assert a.pieces == b.pieces

    def test_budget_respected(self, repeat_vocab):
        assert len(repeat_vocab) <= 60


class TestGreedySegmentation:
    def test_longest_match_first(self):
        vocab = make_vocab(["t", "to", "today", "##o", "##day"])
        assert tokenize_word(vocab, "today") == ["today"]
        assert tokenize_word(vocab, "to") == ["to"]

    def test_continuation_pieces(self):
        vocab = make_vocab(["ko", "##hler"])
        assert tokenize_word(vocab, "kohler") == ["ko", "##hler"]

    def test_unknown_char_emits_unk(self):
        vocab = make_vocab(["a", "##a"])
        assert encode_word(vocab, "aqa") == [
            vocab.piece_to_id["a"], vocab.unk_id, vocab.piece_to_id["##a"]]

    def test_initial_vs_continuation_distinct(self):
        # "a" matches only word-initially; "##a" only afterwards
        vocab = make_vocab(["a"])
        assert encode_word(vocab, "aa") == [vocab.piece_to_id["a"], vocab.unk_id]

    def test_round_trip_when_no_unk(self, repeat_vocab):
        for word in ["hello", "world", "held", "hold"]:
            pieces = tokenize_word(repeat_vocab, word)
            rebuilt = pieces[0] + "".join(
                p[len(CONTINUATION_PREFIX):] for p in pieces[1:])
            assert rebuilt == word


@given(st.lists(st.text(alphabet="abcdef", min_size=1, max_size=8),
                min_size=1, max_size=30))
@settings(max_examples=40)
def test_segmentation_round_trip_property(words):
    vocab = train_vocab(corpus_of(words * 2), vocab_size=200)
    for word in set(words):
        pieces = tokenize_word(vocab, word)
        rebuilt = pieces[0] + "".join(
            p[len(CONTINUATION_PREFIX):] for p in pieces[1:])
        assert rebuilt == word
        assert UNK_PIECE not in pieces


class TestAlign:
    def test_single_split_word(self):
        vocab = make_vocab(["ko", "##hler"])
        stream = align(vocab, ["kohler"], [PunctLabel.COMMA], [tag_id("PROPN")])
        assert stream.token_ids.tolist() == [
            vocab.bos_id, vocab.piece_to_id["ko"],
            vocab.piece_to_id["##hler"], vocab.eos_id]
        assert stream.labels.tolist() == [0, 0, int(PunctLabel.COMMA), 0]
        assert stream.position_mask.tolist() == [0, 0, 1, 0]
        assert stream.pos_ids.tolist() == [
            X_ID, tag_id("PROPN"), tag_id("PROPN"), X_ID]

    def test_nontail_pos_x(self):
        vocab = make_vocab(["ko", "##hler"])
        stream = align(vocab, ["kohler"], [PunctLabel.O], [tag_id("PROPN")],
                       nontail_pos="x")
        assert stream.pos_ids.tolist() == [X_ID, X_ID, tag_id("PROPN"), X_ID]

    def test_full_sentence_alignment(self):
        """Thirteen words, two of them splitting, checked cell by cell."""
        vocab = make_vocab([
            "adrian", "ko", "##hler", "well", "we", "'", "##re", "here",
            "today", "to", "talk", "about", "the", "puppet", "horse"])
        words = ["adrian", "kohler", "well", "we", "'re", "here", "today",
                 "to", "talk", "about", "the", "puppet", "horse"]
        labels = [PunctLabel.O, PunctLabel.COMMA, PunctLabel.COMMA,
                  PunctLabel.O, PunctLabel.O, PunctLabel.O, PunctLabel.O,
                  PunctLabel.O, PunctLabel.O, PunctLabel.O, PunctLabel.O,
                  PunctLabel.O, PunctLabel.PERIOD]
        pos = [tag_id(t) for t in
               ["PROPN", "PROPN", "INTJ", "PRON", "VERB", "ADV", "NOUN",
                "PART", "VERB", "ADP", "DET", "NOUN", "NOUN"]]
        stream = align(vocab, words, labels, pos, nontail_pos="x")

        pieces = [vocab.pieces[i] for i in stream.token_ids]
        assert pieces == [
            BOS_PIECE, "adrian", "ko", "##hler", "well", "we", "'", "##re",
            "here", "today", "to", "talk", "about", "the", "puppet", "horse",
            EOS_PIECE]
        O, C, P = 0, int(PunctLabel.COMMA), int(PunctLabel.PERIOD)
        assert stream.labels.tolist() == [
            O, O, O, C, C, O, O, O, O, O, O, O, O, O, O, P, O]
        assert stream.position_mask.tolist() == [
            0, 1, 0, 1, 1, 1, 0, 1, 1, 1, 1, 1, 1, 1, 1, 1, 0]
        names = ["X", "PROPN", "X", "PROPN", "INTJ", "PRON", "X", "VERB",
                 "ADV", "NOUN", "PART", "VERB", "ADP", "DET", "NOUN",
                 "NOUN", "X"]
        assert stream.pos_ids.tolist() == [tag_id(t) for t in names]

    def test_mask_count_equals_word_count(self, repeat_vocab):
        words = ["hello", "world", "held"] * 5
        labels = [PunctLabel.O] * len(words)
        stream = align(repeat_vocab, words, labels, [0] * len(words))
        assert int(stream.position_mask.sum()) == len(words)

    def test_length_mismatch(self, repeat_vocab):
        with pytest.raises(LengthMismatch):
            align(repeat_vocab, ["hello"], [PunctLabel.O, PunctLabel.O], [0])
        with pytest.raises(LengthMismatch):
            align(repeat_vocab, ["hello"], [PunctLabel.O], [0, 0])

    def test_dtypes(self, repeat_vocab):
        stream = align(repeat_vocab, ["hello"], [PunctLabel.O], [0])
        assert stream.token_ids.dtype == np.int32
        assert stream.labels.dtype == np.int8
        assert stream.pos_ids.dtype == np.int16
        assert stream.position_mask.dtype == np.uint8


words_and_labels = st.lists(
    st.tuples(st.text(alphabet="abcdefgxyz", min_size=1, max_size=9),
              st.sampled_from(list(PunctLabel))),
    min_size=1, max_size=25)


@given(words_and_labels)
@settings(max_examples=40)
def test_align_label_multiset_property(pairs):
    """Mask-projected labels recover the word labels exactly, in order."""
    words = [w for w, _ in pairs]
    labels = [lbl for _, lbl in pairs]
    vocab = train_vocab(corpus_of(words), vocab_size=150)
    stream = align(vocab, words, labels, [0] * len(words))
    mask = stream.position_mask.astype(bool)
    assert stream.labels[mask].tolist() == [int(lbl) for lbl in labels]
    # non-O labels never sit at masked-out positions
    assert not np.any(stream.labels[~mask])


class TestSaveLoad:
    def test_round_trip(self, repeat_vocab, tmp_path):
        p = tmp_path / "v.vocab"
        save_vocab(repeat_vocab, str(p))
        again = load_vocab(str(p))
        assert again.pieces == repeat_vocab.pieces

    def test_header_line(self, repeat_vocab, tmp_path):
        p = tmp_path / "v.vocab"
        save_vocab(repeat_vocab, str(p))
        first = p.read_text(encoding="utf-8").splitlines()[0]
        assert first.startswith("repunct-vocab\t")

    def test_line_number_is_id(self, repeat_vocab, tmp_path):
        p = tmp_path / "v.vocab"
        save_vocab(repeat_vocab, str(p))
        lines = p.read_text(encoding="utf-8").splitlines()
        assert tuple(lines[1:]) == repeat_vocab.pieces

    def test_byte_identical_rewrites(self, repeat_vocab, tmp_path):
        a, b = tmp_path / "a", tmp_path / "b"
        save_vocab(repeat_vocab, str(a))
        save_vocab(repeat_vocab, str(b))
        assert a.read_bytes() == b.read_bytes()
