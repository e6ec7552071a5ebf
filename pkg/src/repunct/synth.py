"""Synthetic corpora for tests, smoke runs, and the README walkthrough.

Two families:

* Toy punctuation corpus: the label is a pure function of word identity
  (disjoint comma / period / question / filler pools), so a model that
  memorizes word-to-label mappings can reach perfect scores regardless
  of how sampling slices the stream.

* POS-flow corpus: every word's tag is determined by the PREVIOUS word
  (tag_i = next_tag[w_{i-1}]) and the label is a fixed function of the
  tag, while surface forms are drawn independently of their own tag.
  A context-window tagger learns the tag rule from its previous-word
  feature almost perfectly, and the tag hands the label to the fusion
  path directly; a token-only model must discover the relation from
  punctuation supervision alone.
"""

from __future__ import annotations

import numpy as np

from .corpus import LabeledCorpus, PunctLabel, serialize_tsv

COMMA_WORDS = ("bento", "karu", "silda", "moren")
PERIOD_WORDS = ("tasko", "virel", "domu")
QUESTION_WORDS = ("zefi", "quon")
FILLER_WORDS = (
    "ansel", "borik", "celat", "dinor", "elmas", "fotur",
    "gilen", "haspe", "irton", "julep", "kimor", "lanet",
)

WORD_LABEL: dict[str, PunctLabel] = (
    {w: PunctLabel.COMMA for w in COMMA_WORDS}
    | {w: PunctLabel.PERIOD for w in PERIOD_WORDS}
    | {w: PunctLabel.QUESTION for w in QUESTION_WORDS}
    | {w: PunctLabel.O for w in FILLER_WORDS}
)

# Pool-based tags for the toy domain's tagger runs.
WORD_TAG: dict[str, str] = (
    {w: "ADJ" for w in COMMA_WORDS}
    | {w: "VERB" for w in PERIOD_WORDS}
    | {w: "PRON" for w in QUESTION_WORDS}
    | {w: "NOUN" for w in FILLER_WORDS}
)


def toy_sentences(n_sentences: int = 50, seed: int = 0) -> list[list[str]]:
    """Sentences of 4-9 body words plus one sentence-ending word."""
    g = np.random.default_rng(seed)
    body_pool = FILLER_WORDS + COMMA_WORDS
    sentences = []
    for _ in range(n_sentences):
        length = int(g.integers(4, 10))
        sent = [body_pool[int(g.integers(len(body_pool)))] for _ in range(length)]
        enders = QUESTION_WORDS if g.random() < 0.25 else PERIOD_WORDS
        sent.append(enders[int(g.integers(len(enders)))])
        sentences.append(sent)
    return sentences


def toy_corpus(n_sentences: int = 50, seed: int = 0) -> LabeledCorpus:
    """Continuous labeled stream over the toy sentences."""
    entries = [
        (w, WORD_LABEL[w])
        for sent in toy_sentences(n_sentences, seed)
        for w in sent
    ]
    return LabeledCorpus(tuple(entries))


def toy_pos_sentences(n_sentences: int = 50, seed: int = 0
                      ) -> list[tuple[list[str], list[str]]]:
    """(words, tags) pairs for training the toy domain's tagger."""
    return [
        (sent, [WORD_TAG[w] for w in sent])
        for sent in toy_sentences(n_sentences, seed)
    ]


POS_FLOW_TAGS = ("DET", "NOUN", "VERB", "ADJ")
TAG_LABEL: dict[str, PunctLabel] = {
    "DET": PunctLabel.O,
    "NOUN": PunctLabel.COMMA,
    "VERB": PunctLabel.PERIOD,
    "ADJ": PunctLabel.QUESTION,
}


def pos_flow_surfaces(n_surfaces: int) -> list[str]:
    """Short two-letter surfaces so the vocab keeps them whole."""
    consonants = "bcdfghjklmnpqrstvz"
    vowels = "aeiou"
    pool = [c + v for c in consonants for v in vowels]
    if n_surfaces > len(pool):
        raise ValueError(f"at most {len(pool)} surfaces available")
    return pool[:n_surfaces]


def pos_flow_data(
    n_words: int = 4000, n_surfaces: int = 40, seed: int = 0
) -> tuple[LabeledCorpus, list[tuple[list[str], list[str]]], dict[str, str]]:
    """Corpus where tag_i = next_tag[w_{i-1}] and label_i = TAG_LABEL[tag_i].

    Words are drawn uniformly, independent of their own tag, so every
    surface occurs under every tag. Returns the labeled corpus, the
    gold-tag data as one long sentence (full context for the tagger), and
    the word-to-next-tag rule for oracle checks.
    """
    g = np.random.default_rng(seed)
    surfaces = pos_flow_surfaces(n_surfaces)
    next_tag = {
        w: POS_FLOW_TAGS[int(g.integers(len(POS_FLOW_TAGS)))] for w in surfaces
    }
    words = [surfaces[int(g.integers(len(surfaces)))] for _ in range(n_words)]
    tags = ["DET"]
    for i in range(1, n_words):
        tags.append(next_tag[words[i - 1]])
    entries = tuple((w, TAG_LABEL[t]) for w, t in zip(words, tags))
    return LabeledCorpus(entries), [(words, tags)], next_tag


def write_corpus(path: str, corpus: LabeledCorpus) -> None:
    with open(path, "wb") as fh:
        fh.write(serialize_tsv(corpus))


def write_pos_corpus(
    path: str, sentences: list[tuple[list[str], list[str]]]
) -> None:
    """word<TAB>TAG lines, blank line between sentences."""
    with open(path, "w", encoding="utf-8") as fh:
        for words, tags in sentences:
            for w, t in zip(words, tags):
                fh.write(f"{w}\t{t}\n")
            fh.write("\n")


def write_raw_text(path: str, corpus: LabeledCorpus) -> None:
    """Unpunctuated whitespace-separated words, for the restore command."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(" ".join(corpus.words()) + "\n")
