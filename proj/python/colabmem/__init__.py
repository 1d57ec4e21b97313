"""Collaborative code-model training and verbatim-memorization audit."""

from ._core import (
    Model,
    ToolkitError,
    compression_entropy,
    detect_clones,
    extract_functions,
    jaccard,
    normalize_lines,
    pass_at_k,
    run_stage,
    sample_size,
    write_fixture,
)

__all__ = [
    "Model",
    "ToolkitError",
    "compression_entropy",
    "detect_clones",
    "extract_functions",
    "jaccard",
    "normalize_lines",
    "pass_at_k",
    "run_stage",
    "sample_size",
    "write_fixture",
]
