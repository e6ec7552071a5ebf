"""Exception hierarchy shared by every module in the package.

All errors derive from RepunctError so callers can catch one base class.
The CLI maps subtrees of this hierarchy onto process exit codes.
"""

from __future__ import annotations


class RepunctError(Exception):
    """Base class for all package errors."""


class ConfigError(RepunctError):
    """Invalid configuration.

    Collects every problem found in one pass so the user sees the full
    list instead of fixing keys one at a time.
    """

    def __init__(self, problems: list[str] | str):
        if isinstance(problems, str):
            problems = [problems]
        self.problems = list(problems)
        super().__init__("; ".join(self.problems))


class DataError(RepunctError):
    """Base class for malformed or unusable input data."""


class MalformedLine(DataError):
    """A corpus line does not have exactly two tab-separated fields."""

    def __init__(self, line_number: int, reason: str):
        self.line_number = line_number
        self.reason = reason
        super().__init__(f"line {line_number}: {reason}")


class UnknownMark(DataError):
    """A punctuation mark is outside the 4-class label mapping."""

    def __init__(self, mark: str):
        self.mark = mark
        super().__init__(f"unknown punctuation mark {mark!r}")


class VocabTooSmall(ConfigError):
    """Requested vocabulary size cannot hold specials plus the alphabet."""

    def __init__(self, requested: int, minimum: int):
        self.requested = requested
        self.minimum = minimum
        super().__init__(
            f"vocab_size={requested} is below the minimum {minimum} "
            f"(specials plus every character seen in training)"
        )


class LengthMismatch(DataError):
    """Parallel per-word sequences passed to alignment differ in length."""

    def __init__(self, what: str, expected: int, got: int):
        self.what = what
        super().__init__(f"{what}: expected length {expected}, got {got}")


class StreamTooShort(DataError):
    """Token stream is shorter than one sampling window."""

    def __init__(self, stream_len: int, seq_len: int):
        self.stream_len = stream_len
        self.seq_len = seq_len
        super().__init__(
            f"stream of {stream_len} tokens is shorter than seq_len={seq_len}"
        )


class UnknownTag(DataError):
    """A POS tag string is not in the tagset."""

    def __init__(self, tag: str):
        self.tag = tag
        super().__init__(f"unknown POS tag {tag!r}")


class IndexOutOfRange(DataError):
    """An integer id falls outside the table it indexes."""

    def __init__(self, what: str, index: int, size: int):
        self.what = what
        self.index = index
        self.size = size
        super().__init__(f"{what}: id {index} out of range for size {size}")


# The model layer raises the same condition under a second name; keep one
# class so except-clauses never have to list both.
IdOutOfRange = IndexOutOfRange


class NumericFailure(RepunctError):
    """Base class for numeric breakdowns during training."""


class NonFiniteGradient(NumericFailure):
    """A gradient contained NaN or infinity."""

    def __init__(self, name: str):
        self.name = name
        super().__init__(f"non-finite gradient in parameter {name!r}")


class DimensionMismatch(RepunctError):
    """Two components disagree about a shared dimension."""

    def __init__(self, what: str, expected: int, got: int):
        self.what = what
        super().__init__(f"{what}: expected {expected}, got {got}")
