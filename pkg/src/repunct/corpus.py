"""Labeled-corpus parsing and the 4-class punctuation label scheme.

A corpus is one continuous word stream: each line is `word<TAB>LABEL` and
there are no sentence boundaries (recovering them is the model's job).
The label scheme folds raw punctuation marks into four classes: COMMA for
commas, colons, and dashes; PERIOD for full stops, exclamation marks, and
semicolons; QUESTION for question marks; O for no punctuation.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import BinaryIO

from .errors import MalformedLine, UnknownMark


class PunctLabel(enum.IntEnum):
    """Punctuation class attached to the word it follows."""

    O = 0
    COMMA = 1
    PERIOD = 2
    QUESTION = 3


LABEL_NAMES: tuple[str, ...] = tuple(lbl.name for lbl in PunctLabel)
NUM_LABELS = len(PunctLabel)

# Raw mark → class, per the label scheme above. None means "no mark".
_MARK_TO_LABEL: dict[str | None, PunctLabel] = {
    ",": PunctLabel.COMMA,
    ":": PunctLabel.COMMA,
    "-": PunctLabel.COMMA,
    ".": PunctLabel.PERIOD,
    "!": PunctLabel.PERIOD,
    ";": PunctLabel.PERIOD,
    "?": PunctLabel.QUESTION,
    None: PunctLabel.O,
}

# Mark emitted when restoring text from predicted labels. The many-to-one
# folding above is not invertible, so each class gets its canonical mark.
RESTORE_MARK: dict[PunctLabel, str] = {
    PunctLabel.COMMA: ",",
    PunctLabel.PERIOD: ".",
    PunctLabel.QUESTION: "?",
}


def map_punctuation(mark: str | None) -> PunctLabel:
    """Map a raw punctuation mark (or None for no mark) to its class."""
    try:
        return _MARK_TO_LABEL[mark]
    except KeyError:
        raise UnknownMark(str(mark)) from None


@dataclass(frozen=True)
class LabeledCorpus:
    """Ordered (word, label) stream in exact file order."""

    entries: tuple[tuple[str, PunctLabel], ...] = field(default=())

    def __len__(self) -> int:
        return len(self.entries)

    def words(self) -> list[str]:
        return [w for w, _ in self.entries]

    def labels(self) -> list[PunctLabel]:
        return [lbl for _, lbl in self.entries]


def parse_tsv(source: bytes | BinaryIO) -> LabeledCorpus:
    """Parse `word<TAB>LABEL` lines into a LabeledCorpus.

    Blank lines are skipped. Any line with the wrong field count, an empty
    or whitespace-bearing word, or an unknown label name raises
    MalformedLine carrying its 1-based line number.
    """
    data = source if isinstance(source, bytes) else source.read()
    text = data.decode("utf-8")
    entries: list[tuple[str, PunctLabel]] = []
    for line_number, line in enumerate(text.split("\n"), start=1):
        if line.endswith("\r"):
            line = line[:-1]
        if not line:
            continue
        fields = line.split("\t")
        if len(fields) != 2:
            raise MalformedLine(
                line_number, f"expected 2 tab-separated fields, got {len(fields)}"
            )
        word, label_name = fields
        if not word or any(ch.isspace() for ch in word):
            raise MalformedLine(line_number, f"bad word field {word!r}")
        if label_name not in PunctLabel.__members__:
            raise MalformedLine(line_number, f"unknown label {label_name!r}")
        entries.append((word, PunctLabel[label_name]))
    return LabeledCorpus(tuple(entries))


def serialize_tsv(corpus: LabeledCorpus) -> bytes:
    """Inverse of parse_tsv modulo blank lines."""
    lines = [f"{word}\t{label.name}\n" for word, label in corpus.entries]
    return "".join(lines).encode("utf-8")


def load_corpus(path: str) -> LabeledCorpus:
    """Read a corpus file from disk."""
    with open(path, "rb") as fh:
        return parse_tsv(fh)
