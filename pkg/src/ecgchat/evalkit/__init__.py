from .judge import JUDGE_PROMPT, JudgeVerdict, build_judge_prompt, judge_score
from .metrics import (
    AucReport,
    TextEmbedder,
    exact_match,
    hashing_embedder,
    macro_auc,
    report_to_scores,
    temporal_iou,
)
from .protocols import (
    MASK_MODES,
    EvalReport,
    EvalRow,
    eval_exact_match,
    eval_judge,
    eval_localization,
    eval_report_auc,
    masking_sweep,
    write_report,
)

__all__ = [
    "JUDGE_PROMPT",
    "JudgeVerdict",
    "build_judge_prompt",
    "judge_score",
    "AucReport",
    "TextEmbedder",
    "exact_match",
    "hashing_embedder",
    "macro_auc",
    "report_to_scores",
    "temporal_iou",
    "MASK_MODES",
    "EvalReport",
    "EvalRow",
    "eval_exact_match",
    "eval_judge",
    "eval_localization",
    "eval_report_auc",
    "masking_sweep",
    "write_report",
]
