"""Zero-shot visual classifiers trained on text only.

Thin wrapper over the C++ core. Embedding matrices are numpy arrays, one row
per item; labels are plain lists of class ids.
"""

from ._core import (
    Classifier,
    TapError,
    cosine_similarity,
    evaluate,
    normalize,
    read_bundle,
    refine,
    render_prompts,
    render_report,
    run_cli,
    softmax,
    synthetic_bundle,
    train,
    write_bundle,
    zero_shot,
)

__all__ = [
    "Classifier",
    "TapError",
    "cosine_similarity",
    "evaluate",
    "normalize",
    "read_bundle",
    "refine",
    "render_prompts",
    "render_report",
    "run_cli",
    "softmax",
    "synthetic_bundle",
    "train",
    "write_bundle",
    "zero_shot",
]
