"""Window sampling over the continuous token stream.

Training uses sequence boundary sampling: each draw picks a start offset
j uniformly from [0, |S|-L] (inclusive, so the final token is reachable)
and takes the contiguous length-L slice. An epoch is floor(|S|/L) draws,
independent and with replacement, each one a pure function of
(seed, epoch_index, draw_index).

Validation and test use deterministic non-overlapping windows at stride
L plus one left-aligned remainder window whose duplicated prefix is
masked out of evaluation, so every position is scored exactly once.

The ablation baseline `fixed_split` pre-chunks the stream at stride L
(same per-epoch window count as SBS) and shuffles the order each epoch.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator, NamedTuple

import numpy as np

from . import rng
from .errors import IndexOutOfRange, StreamTooShort
from .subword import AlignedStream


class TokenizedSample(NamedTuple):
    """Fixed-length window of aligned records.

    start is the window's offset in the source stream. fresh_from marks
    the first position not already evaluated by an earlier window; it is
    0 everywhere except the remainder eval window.
    """

    token_ids: np.ndarray
    labels: np.ndarray
    pos_ids: np.ndarray
    position_mask: np.ndarray
    start: int = 0
    fresh_from: int = 0

    def eval_mask(self) -> np.ndarray:
        """Position mask with already-evaluated prefix positions zeroed."""
        if self.fresh_from == 0:
            return self.position_mask
        out = self.position_mask.copy()
        out[: self.fresh_from] = 0
        return out


@dataclass(frozen=True)
class SamplerConfig:
    L: int
    seed: int
    epoch_index: int = 0

    def __post_init__(self):
        if self.L < 2:
            raise ValueError(f"window length must be >= 2, got {self.L}")


def epoch_sample_count(stream_len: int, L: int) -> int:
    """Number of SBS draws per epoch: floor(|S|/L)."""
    if stream_len < L:
        raise StreamTooShort(stream_len, L)
    return stream_len // L


def _slice(stream: AlignedStream, start: int, L: int, fresh_from: int = 0
           ) -> TokenizedSample:
    end = start + L
    return TokenizedSample(
        token_ids=stream.token_ids[start:end],
        labels=stream.labels[start:end],
        pos_ids=stream.pos_ids[start:end],
        position_mask=stream.position_mask[start:end],
        start=start,
        fresh_from=fresh_from,
    )


def sample_window(
    stream: AlignedStream, cfg: SamplerConfig, draw_index: int
) -> TokenizedSample:
    """One SBS draw, deterministic in (seed, epoch_index, draw_index)."""
    n = stream.token_ids.size
    count = epoch_sample_count(n, cfg.L)
    if not 0 <= draw_index < count:
        raise IndexOutOfRange("draw_index", draw_index, count)
    g = rng.stream(cfg.seed, rng.SAMPLE, cfg.epoch_index, draw_index)
    j = int(g.integers(0, n - cfg.L + 1))
    return _slice(stream, j, cfg.L)


def eval_windows(stream: AlignedStream, L: int) -> list[TokenizedSample]:
    """Deterministic full coverage: stride-L windows plus a remainder.

    The remainder window is left-aligned at |S|-L, overlapping the
    previous window; its fresh_from offset excludes the overlap from
    evaluation so each stream position is scored exactly once.
    """
    n = stream.token_ids.size
    if n < L:
        raise StreamTooShort(n, L)
    full = n // L
    windows = [_slice(stream, k * L, L) for k in range(full)]
    rem = n - full * L
    if rem:
        windows.append(_slice(stream, n - L, L, fresh_from=L - rem))
    return windows


def fixed_split_windows(
    stream: AlignedStream, cfg: SamplerConfig
) -> list[TokenizedSample]:
    """Pre-chunked stride-L full windows, shuffled per epoch."""
    n = stream.token_ids.size
    full = epoch_sample_count(n, cfg.L)
    g = rng.stream(cfg.seed, rng.SHUFFLE, cfg.epoch_index)
    order = g.permutation(full)
    return [_slice(stream, int(k) * cfg.L, cfg.L) for k in order]


def epoch_samples(
    stream: AlignedStream, cfg: SamplerConfig, sampler: str
) -> Iterator[TokenizedSample]:
    """Yield one epoch's training windows under the chosen scheme."""
    if sampler == "sbs":
        count = epoch_sample_count(stream.token_ids.size, cfg.L)
        for i in range(count):
            yield sample_window(stream, cfg, i)
    elif sampler == "fixed_split":
        yield from fixed_split_windows(stream, cfg)
    else:
        raise ValueError(f"unknown sampler {sampler!r}")
