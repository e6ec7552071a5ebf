"""Pure numpy implementations of the tokenizer hot loops.

These are the reference kernels. A compiled twin lives in _ctokenize.pyx;
_backend picks one at import time. Both must be bit-identical in output:
the equivalence is enforced by tests, so any change here must land in the
compiled version too.

Data layout shared by both backends: the per-word symbol sequences are
flattened into one int32 array `flat` with an int64 `offsets` array of
length n_words+1 (word w spans flat[offsets[w]:offsets[w+1]]), plus an
int64 `counts` array of word-type frequencies. Symbol pairs are packed
into one int64 as (a << 32) | b; ids stay below 2**31 so this is lossless.
"""

from __future__ import annotations

import numpy as np


def count_pairs(
    flat: np.ndarray, offsets: np.ndarray, counts: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """Count adjacent symbol pairs, weighted by word frequency.

    Returns (keys, sums): packed pair keys sorted ascending and their
    total counts. Pairs never straddle a word boundary.
    """
    n = len(flat)
    if n < 2:
        return np.empty(0, dtype=np.int64), np.empty(0, dtype=np.int64)
    lengths = np.diff(offsets)
    word_of = np.repeat(np.arange(len(counts), dtype=np.int64), lengths)
    inside = word_of[:-1] == word_of[1:]
    left = flat[:-1][inside].astype(np.int64)
    right = flat[1:][inside].astype(np.int64)
    packed = (left << 32) | right
    weights = counts[word_of[:-1][inside]]
    keys, inverse = np.unique(packed, return_inverse=True)
    sums = np.zeros(len(keys), dtype=np.int64)
    np.add.at(sums, inverse, weights)
    return keys, sums


def apply_merge(
    flat: np.ndarray,
    offsets: np.ndarray,
    a: int,
    b: int,
    new_id: int,
) -> tuple[np.ndarray, np.ndarray]:
    """Replace left-to-right non-overlapping (a, b) occurrences by new_id.

    Returns new (flat, offsets). Left-to-right matters when a == b: the
    run [a, a, a] merges its first two symbols only.
    """
    n = len(flat)
    lengths = np.diff(offsets)
    word_of = np.repeat(np.arange(len(lengths), dtype=np.int64), lengths)
    hits = np.flatnonzero(
        (flat[:-1] == a) & (flat[1:] == b) & (word_of[:-1] == word_of[1:])
    )
    # Drop overlapping hits: a position is kept only if the previous
    # position was not itself kept.
    kept: list[int] = []
    prev = -2
    for p in hits.tolist():
        if p - 1 != prev:
            kept.append(p)
            prev = p
    if not kept:
        return flat.copy(), offsets.copy()
    kept_arr = np.asarray(kept, dtype=np.int64)
    out = flat.copy()
    out[kept_arr] = new_id
    out = np.delete(out, kept_arr + 1)
    merged_per_word = np.bincount(word_of[kept_arr], minlength=len(lengths))
    new_offsets = np.zeros_like(offsets)
    np.cumsum(lengths - merged_per_word, out=new_offsets[1:])
    return out, new_offsets


def greedy_piece_ids(
    word: str,
    table: dict[str, int],
    cont_prefix: str,
    unk_id: int,
    max_raw_len: int,
) -> list[int]:
    """Greedy longest-match-first subword segmentation.

    At each position try the longest substring first, prefixing
    cont_prefix for non-initial positions; on no match emit unk_id and
    advance one character.
    """
    n = len(word)
    out: list[int] = []
    i = 0
    while i < n:
        prefix = cont_prefix if i > 0 else ""
        pid = -1
        j = min(n, i + max_raw_len)
        while j > i:
            pid = table.get(prefix + word[i:j], -1)
            if pid >= 0:
                break
            j -= 1
        if pid < 0:
            out.append(unk_id)
            i += 1
        else:
            out.append(pid)
            i = j
    return out
