"""Universal POS tagset shared by the tagger, tokenizer, and model.

The inventory is the 17 universal tags (X included) padded with reserved
slots up to a fixed embedding width of 20, so tag id doubles as a column
index into the POS embedding matrix.
"""

from __future__ import annotations

from .errors import UnknownTag

UPOS_TAGS: tuple[str, ...] = (
    "ADJ", "ADP", "ADV", "AUX", "CCONJ", "DET", "INTJ", "NOUN", "NUM",
    "PART", "PRON", "PROPN", "PUNCT", "SCONJ", "SYM", "VERB", "X",
)

def build_tagset(e: int) -> tuple[str, ...]:
    """The 17 universal tags padded with reserved slots up to width e.

    Reserved slots are never present in data, but their embedding columns
    exist and stay trainable.
    """
    if e < len(UPOS_TAGS) + 1:
        raise ValueError(f"tagset width must be >= {len(UPOS_TAGS) + 1}, got {e}")
    reserved = tuple(f"<res{i}>" for i in range(1, e - len(UPOS_TAGS) + 1))
    return UPOS_TAGS + reserved


ALL_TAGS: tuple[str, ...] = build_tagset(20)

TAG_TO_ID: dict[str, int] = {t: i for i, t in enumerate(ALL_TAGS)}

X_ID: int = TAG_TO_ID["X"]
TAGSET_SIZE: int = len(ALL_TAGS)


def tag_id(tag: str) -> int:
    """Look up a tag name, raising UnknownTag for anything off-inventory."""
    try:
        return TAG_TO_ID[tag]
    except KeyError:
        raise UnknownTag(tag) from None
