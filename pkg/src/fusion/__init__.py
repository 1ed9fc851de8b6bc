"""Embedding fusion into the expanded 2d space"""

from src.fusion.fusion import (
    FusedEmbedding, FusionMode, fuse, fuse_matrices, fuse_store, fused_cosine, plain_concat,
    write_provenance,
)
