"""Character-sequence price regression for auctioned vehicle plates.

The heavy lifting lives in the compiled extension; this package re-exports
its surface.
"""

from plateprice._core import (  # noqa: F401
    Model,
    evaluate_metrics,
    extract_features,
    gen_data,
    hedonic_fit,
    plate_score,
    detokenize,
    tokenize,
    train,
    wilcoxon,
)

__all__ = [
    "Model",
    "evaluate_metrics",
    "extract_features",
    "gen_data",
    "hedonic_fit",
    "plate_score",
    "detokenize",
    "tokenize",
    "train",
    "wilcoxon",
]
