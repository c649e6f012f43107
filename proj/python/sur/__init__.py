"""Few-shot feature selection over multi-domain feature banks."""

from ._core import (
    Episode,
    FeatureBank,
    SamplerConfig,
    SelectorConfig,
    SurError,
    accuracy,
    aggregate_ci,
    class_probabilities,
    cosine_similarity,
    decode_surb,
    encode_surb,
    load_bank,
    make_synthetic_banks,
    nll_gradient,
    normalize_block,
    optimize_selection,
    predict_queries,
    run_method,
    sample_episode,
    save_bank,
    support_nll,
)

__all__ = [
    "Episode",
    "FeatureBank",
    "SamplerConfig",
    "SelectorConfig",
    "SurError",
    "accuracy",
    "aggregate_ci",
    "class_probabilities",
    "cosine_similarity",
    "decode_surb",
    "encode_surb",
    "load_bank",
    "make_synthetic_banks",
    "nll_gradient",
    "normalize_block",
    "optimize_selection",
    "predict_queries",
    "run_method",
    "sample_episode",
    "save_bank",
    "support_nll",
]
