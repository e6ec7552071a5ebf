"""Kernel backend selection.

Prefers the compiled extension, falls back to the pure numpy kernels when
the extension is absent or REPUNCT_PURE=1 is set. Both backends satisfy
the same contracts bit-exactly, so the choice never affects results, only
speed.
"""

from __future__ import annotations

import os

from . import _pure_kernels

BACKEND = "pure"
_impl = _pure_kernels

if os.environ.get("REPUNCT_PURE", "") not in ("1", "true", "yes"):
    try:
        from . import _ctokenize as _compiled

        _impl = _compiled
        BACKEND = "compiled"
    except ImportError:
        pass

count_pairs = _impl.count_pairs
apply_merge = _impl.apply_merge
greedy_piece_ids = _impl.greedy_piece_ids
