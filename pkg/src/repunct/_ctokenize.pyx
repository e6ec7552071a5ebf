# cython: language_level=3, boundscheck=False, wraparound=False
"""Compiled twin of _pure_kernels. Same contracts, bit-identical output."""

import numpy as np

cimport numpy as cnp
from libc.stdlib cimport calloc, free, malloc

cnp.import_array()


ctypedef struct PairW:
    long long key
    long long wt


cdef void _radix_pass(PairW* src, PairW* dst, Py_ssize_t m,
                      long long* cnt, Py_ssize_t n_vals, int shift) noexcept nogil:
    """Stable counting sort of src into dst on (key >> shift) & 0xFFFFFFFF."""
    cdef Py_ssize_t i
    cdef long long v, total = 0, c
    cdef long long mask = 0xFFFFFFFF
    for i in range(n_vals):
        cnt[i] = 0
    for i in range(m):
        cnt[(src[i].key >> shift) & mask] += 1
    for i in range(n_vals):
        c = cnt[i]
        cnt[i] = total
        total += c
    for i in range(m):
        v = (src[i].key >> shift) & mask
        dst[cnt[v]] = src[i]
        cnt[v] += 1


def count_pairs(cnp.int32_t[::1] flat, cnp.int64_t[::1] offsets,
                cnp.int64_t[::1] counts):
    """Count adjacent symbol pairs, weighted by word frequency."""
    cdef Py_ssize_t n = flat.shape[0]
    cdef Py_ssize_t n_words = offsets.shape[0] - 1
    if n < 2:
        return np.empty(0, dtype=np.int64), np.empty(0, dtype=np.int64)
    cdef PairW* pairs = <PairW*> malloc((n - 1) * sizeof(PairW))
    cdef PairW* tmp = <PairW*> malloc((n - 1) * sizeof(PairW))
    cdef long long* cnt = NULL
    cdef Py_ssize_t w, i, start, end
    cdef Py_ssize_t m = 0
    cdef Py_ssize_t k
    cdef long long c, max_id = 0
    cdef cnp.int64_t[::1] out_keys, out_sums
    if pairs == NULL or tmp == NULL:
        free(pairs)
        free(tmp)
        raise MemoryError()
    try:
        for w in range(n_words):
            start = offsets[w]
            end = offsets[w + 1]
            c = counts[w]
            for i in range(start, end - 1):
                pairs[m].key = ((<long long> flat[i]) << 32) | (<long long> flat[i + 1])
                pairs[m].wt = c
                if flat[i] > max_id:
                    max_id = flat[i]
                if flat[i + 1] > max_id:
                    max_id = flat[i + 1]
                m += 1
        if m == 0:
            return np.empty(0, dtype=np.int64), np.empty(0, dtype=np.int64)
        cnt = <long long*> calloc(max_id + 1, sizeof(long long))
        if cnt == NULL:
            raise MemoryError()
        # two-pass radix: low field first, high field second (stable)
        _radix_pass(pairs, tmp, m, cnt, max_id + 1, 0)
        _radix_pass(tmp, pairs, m, cnt, max_id + 1, 32)
        out_keys_arr = np.empty(m, dtype=np.int64)
        out_sums_arr = np.empty(m, dtype=np.int64)
        out_keys = out_keys_arr
        out_sums = out_sums_arr
        k = _rle(pairs, m, out_keys, out_sums)
        return (np.ascontiguousarray(out_keys_arr[:k]),
                np.ascontiguousarray(out_sums_arr[:k]))
    finally:
        free(pairs)
        free(tmp)
        free(cnt)


cdef Py_ssize_t _rle(PairW* pairs, Py_ssize_t m, cnp.int64_t[::1] out_keys,
                     cnp.int64_t[::1] out_sums) noexcept nogil:
    """Run-length encode sorted pairs; returns the number of unique keys."""
    cdef Py_ssize_t i, k = -1
    cdef long long prev = 0
    for i in range(m):
        if k < 0 or pairs[i].key != prev:
            k += 1
            out_keys[k] = pairs[i].key
            out_sums[k] = pairs[i].wt
            prev = pairs[i].key
        else:
            out_sums[k] += pairs[i].wt
    return k + 1


def apply_merge(cnp.int32_t[::1] flat, cnp.int64_t[::1] offsets,
                int a, int b, int new_id):
    """Replace left-to-right non-overlapping (a, b) occurrences by new_id."""
    cdef Py_ssize_t n = flat.shape[0]
    cdef Py_ssize_t n_words = offsets.shape[0] - 1
    out = np.empty(n, dtype=np.int32)
    new_offsets = np.zeros(offsets.shape[0], dtype=np.int64)
    cdef cnp.int32_t[::1] out_v = out
    cdef cnp.int64_t[::1] no_v = new_offsets
    cdef Py_ssize_t w, i, end
    cdef Py_ssize_t pos = 0
    for w in range(n_words):
        i = offsets[w]
        end = offsets[w + 1]
        while i < end:
            if i + 1 < end and flat[i] == a and flat[i + 1] == b:
                out_v[pos] = new_id
                i += 2
            else:
                out_v[pos] = flat[i]
                i += 1
            pos += 1
        no_v[w + 1] = pos
    return np.ascontiguousarray(out[:pos]), new_offsets


def greedy_piece_ids(str word, dict table, str cont_prefix, int unk_id,
                     int max_raw_len):
    """Greedy longest-match-first subword segmentation."""
    cdef Py_ssize_t n = len(word)
    cdef Py_ssize_t i = 0
    cdef Py_ssize_t j
    cdef list out = []
    cdef object pid
    cdef str prefix
    while i < n:
        prefix = cont_prefix if i > 0 else ""
        j = n if n < i + max_raw_len else i + max_raw_len
        pid = None
        while j > i:
            pid = table.get(prefix + word[i:j])
            if pid is not None:
                break
            j -= 1
        if pid is None:
            out.append(unk_id)
            i += 1
        else:
            out.append(pid)
            i = j
    return out
