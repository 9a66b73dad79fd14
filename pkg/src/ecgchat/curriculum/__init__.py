from .contrastive import (
    ContrastiveModel,
    ContrastiveResult,
    TextTower,
    contrastive_pretrain,
    info_nce,
    retrieval_recall_at_1,
)
from .stages import (
    DEFAULT_LR,
    STAGE_BATCH,
    STAGE_EPOCHS,
    STAGE_TASKS,
    STAGE_TRAINABLE,
    RunResult,
    StageSpec,
    TrainItem,
    evaluate_loss,
    mix_batches,
    parameter_hashes,
    run_stage,
    sample_to_item,
)

__all__ = [
    "ContrastiveModel",
    "ContrastiveResult",
    "TextTower",
    "contrastive_pretrain",
    "info_nce",
    "retrieval_recall_at_1",
    "DEFAULT_LR",
    "STAGE_BATCH",
    "STAGE_EPOCHS",
    "STAGE_TASKS",
    "STAGE_TRAINABLE",
    "RunResult",
    "StageSpec",
    "TrainItem",
    "evaluate_loss",
    "mix_batches",
    "parameter_hashes",
    "run_stage",
    "sample_to_item",
]
