"""Link prediction with anchor-distance features and edge-aware message passing."""

from ._core import (
    ConfigError,
    DataError,
    GdnnError,
    Graph,
    NumericError,
    bfs_distances,
    encode,
    encode_features,
    evaluate,
    gradcheck,
    hits_at_k,
    import_dataset,
    predict,
    select_targets,
    train,
)

__all__ = [
    "ConfigError",
    "DataError",
    "GdnnError",
    "Graph",
    "NumericError",
    "bfs_distances",
    "encode",
    "encode_features",
    "evaluate",
    "gradcheck",
    "hits_at_k",
    "import_dataset",
    "predict",
    "select_targets",
    "train",
]
