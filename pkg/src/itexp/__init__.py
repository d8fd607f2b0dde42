"""Iterative-expansion language modeling.

Dependency-tree-driven, non-autoregressive text generation: every decoding
iteration expands one level of the dependency tree of the sentence.
"""

__version__ = "0.1.0"
