"""Punctuation restoration as sequence tagging.

A small trainable transformer encoder predicts a punctuation class for
each subword position; an external POS tagger's softmax weight matrix is
reused as a POS embedding fused with the encoder states through a
self-attention block. Training batches come from sequence boundary
sampling: fixed-length windows drawn at uniform random offsets from the
continuous token stream.
"""

__version__ = "0.1.0"
