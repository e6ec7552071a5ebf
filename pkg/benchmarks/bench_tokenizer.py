"""Benchmark the compiled tokenizer kernels against the pure numpy fallback.

Times the three hot kernels (pair counting, merge application, greedy
segmentation) on identical synthetic inputs and cross-checks that both
backends produce the same outputs. Run from the repository root:

    python3 benchmarks/bench_tokenizer.py [--words 20000] [--merges 200]
"""

import argparse
import string
import time

import numpy as np

from repunct import _pure_kernels
from repunct.rng import SAMPLE, stream
from repunct.subword import SubwordVocab, _initial_symbols, train_vocab
from repunct.corpus import LabeledCorpus, PunctLabel

try:
    from repunct import _ctokenize
except ImportError:
    _ctokenize = None


def synthetic_words(n_words: int, seed: int) -> list[str]:
    """Zipf-distributed words over a small synthetic lexicon."""
    rng = stream(seed, SAMPLE)
    n_types = max(50, n_words // 20)
    letters = np.array(list(string.ascii_lowercase))
    lexicon = []
    for _ in range(n_types):
        length = int(rng.integers(2, 11))
        lexicon.append("".join(rng.choice(letters, size=length)))
    ranks = np.arange(1, n_types + 1, dtype=np.float64)
    weights = 1.0 / ranks
    weights /= weights.sum()
    picks = rng.choice(n_types, size=n_words, p=weights)
    return [lexicon[i] for i in picks]


def symbol_arrays(words: list[str]) -> tuple[np.ndarray, np.ndarray, np.ndarray, list[str]]:
    """Build (flat, offsets, counts) over word types, like train_vocab does."""
    from collections import Counter

    freq = Counter(words)
    types = sorted(freq)
    symbols: dict[str, int] = {}

    def intern(s: str) -> int:
        if s not in symbols:
            symbols[s] = len(symbols)
        return symbols[s]

    seqs = [[intern(s) for s in _initial_symbols(w)] for w in types]
    flat = np.array([i for seq in seqs for i in seq], dtype=np.int32)
    offsets = np.zeros(len(seqs) + 1, dtype=np.int64)
    np.cumsum([len(s) for s in seqs], out=offsets[1:])
    counts = np.array([freq[w] for w in types], dtype=np.int64)
    names = [None] * len(symbols)
    for s, i in symbols.items():
        names[i] = s
    return flat, offsets, counts, names


def run_merge_loop(kernels, flat, offsets, counts, n_merges: int):
    """Repeatedly count pairs and merge the most frequent one."""
    next_id = int(flat.max()) + 1
    t0 = time.perf_counter()
    count_time = 0.0
    merge_time = 0.0
    for _ in range(n_merges):
        t1 = time.perf_counter()
        keys, sums = kernels.count_pairs(flat, offsets, counts)
        count_time += time.perf_counter() - t1
        if len(keys) == 0 or sums.max() < 2:
            break
        best = int(keys[int(sums.argmax())])
        a, b = best >> 32, best & 0xFFFFFFFF
        t1 = time.perf_counter()
        flat, offsets = kernels.apply_merge(flat, offsets, a, b, next_id)
        merge_time += time.perf_counter() - t1
        next_id += 1
    total = time.perf_counter() - t0
    return flat, offsets, count_time, merge_time, total


def bench_greedy(kernels, vocab: SubwordVocab, words: list[str]) -> tuple[float, list[int]]:
    table = vocab._match_table
    t0 = time.perf_counter()
    out: list[int] = []
    for w in words:
        out.extend(kernels.greedy_piece_ids(w, table, vocab.continuation_prefix,
                                            vocab.unk_id, vocab._max_raw_len))
    return time.perf_counter() - t0, out


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--words", type=int, default=20000)
    ap.add_argument("--merges", type=int, default=200)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    if _ctokenize is None:
        print("compiled backend unavailable; rebuild with Cython to compare")
        return

    words = synthetic_words(args.words, args.seed)
    flat, offsets, counts, _ = symbol_arrays(words)
    print(f"{args.words} words, {len(counts)} types, {len(flat)} initial symbols")

    results = {}
    for name, mod in [("pure", _pure_kernels), ("compiled", _ctokenize)]:
        f, o, ct, mt, total = run_merge_loop(mod, flat.copy(), offsets.copy(),
                                             counts, args.merges)
        results[name] = (f, o)
        print(f"{name:>9}: merge loop {total:7.3f}s "
              f"(count_pairs {ct:6.3f}s, apply_merge {mt:6.3f}s)")
    pf, po = results["pure"]
    cf, co = results["compiled"]
    assert np.array_equal(pf, cf) and np.array_equal(po, co), "backends diverged"

    entries = tuple((w, PunctLabel.O) for w in words)
    vocab = train_vocab(LabeledCorpus(entries), vocab_size=min(800, 3 + 26 + args.merges))
    greedy = {}
    for name, mod in [("pure", _pure_kernels), ("compiled", _ctokenize)]:
        dt, ids = bench_greedy(mod, vocab, words)
        greedy[name] = ids
        print(f"{name:>9}: greedy segmentation of {len(words)} words {dt:7.3f}s")
    assert greedy["pure"] == greedy["compiled"], "greedy outputs diverged"
    print("outputs identical across backends")


if __name__ == "__main__":
    main()
