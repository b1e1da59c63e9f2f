from .didactic import (
    DidacticConfig,
    DidacticParams,
    Dataset,
    default_dataset,
    forward_kmpv,
    init_params,
    ive_curve,
    kmpv_matrix,
    loss_and_grads,
    train_didactic,
)

__all__ = [
    "DidacticConfig",
    "DidacticParams",
    "Dataset",
    "default_dataset",
    "forward_kmpv",
    "init_params",
    "ive_curve",
    "kmpv_matrix",
    "loss_and_grads",
    "train_didactic",
]
