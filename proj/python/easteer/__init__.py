"""Embedding-arithmetic steering: attribute vectors, composition, probes and metrics."""

from ._core import (
    DEFAULT_TEMPLATE,
    EasteerError,
    LookupTable,
    build_table_from_mock,
    ccs_condition,
    ccs_image,
    ccs_validation,
    cosine_similarity,
    derive_attribute_vector,
    image_seed,
    normalize,
    render_prompt,
    report_json,
    run_cli,
    sample_attributes,
    sampling_seed,
    shannon_entropy,
)

__all__ = [
    "DEFAULT_TEMPLATE",
    "EasteerError",
    "LookupTable",
    "build_table_from_mock",
    "ccs_condition",
    "ccs_image",
    "ccs_validation",
    "cosine_similarity",
    "derive_attribute_vector",
    "image_seed",
    "normalize",
    "render_prompt",
    "report_json",
    "run_cli",
    "sample_attributes",
    "sampling_seed",
    "shannon_entropy",
]
