"""Unsupervised phrase-based MT toolkit.

Monolingual phrase embeddings, self-learning cross-lingual mapping,
unsupervised phrase-table induction, stack decoding with MERT tuning,
iterative back-translation, and synthetic-corpus repair heuristics,
all runnable end to end at desk scale.
"""

__version__ = "0.1.0"
