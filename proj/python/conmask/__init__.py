"""Open-world knowledge graph completion with relationship-dependent content masking."""

from ._conmask import (
    DataError,
    Error,
    NumericError,
    ShapeError,
    UsageError,
    apply_mask,
    evaluate,
    git_blob_sha1,
    inspect_mask,
    is_stop_word,
    make_synthetic,
    mcrw_weights,
    mwrw_weights,
    preprocess,
    split,
    tokenize,
    train,
)

__all__ = [
    "DataError",
    "Error",
    "NumericError",
    "ShapeError",
    "UsageError",
    "apply_mask",
    "evaluate",
    "git_blob_sha1",
    "inspect_mask",
    "is_stop_word",
    "make_synthetic",
    "mcrw_weights",
    "mwrw_weights",
    "preprocess",
    "split",
    "tokenize",
    "train",
]
