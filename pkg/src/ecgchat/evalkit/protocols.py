"""Evaluation loops: run the model over a sample list and aggregate metrics.

Every protocol produces an EvalReport with per-sample rows and an aggregate
block, written out as a human-readable text document plus line-oriented
JSON for downstream tooling.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

from ..curriculum.stages import TrainItem, sample_to_item
from ..datagen.samples import QaSample
from ..fusion.model import EcgChatModel
from ..records import CanonicalRecord, mask_leads
from ..spans import parse_spans
from .judge import JudgeVerdict, judge_score
from .metrics import TextEmbedder, exact_match, macro_auc, report_to_scores, temporal_iou

MASK_MODES = ("none", "first", "second", "random")


@dataclass(frozen=True)
class EvalRow:
    sample_id: str
    question: str
    prediction: str
    truth: str
    value: float


@dataclass
class EvalReport:
    protocol: str
    rows: list[EvalRow] = field(default_factory=list)
    aggregates: dict[str, float] = field(default_factory=dict)


def _sample_id(sample: QaSample) -> str:
    return "+".join(r.record_id for r in sample.ecg_refs)


def _answer(model: EcgChatModel, item: TrainItem, max_new: int,
            records: Sequence[CanonicalRecord] | None = None) -> str:
    recs = list(records) if records is not None else list(item.records)
    return model.generate([item.messages[0]], recs or None, max_new=max_new)


def eval_localization(model: EcgChatModel, samples: Sequence[QaSample],
                      store: Mapping[str, CanonicalRecord],
                      max_new: int = 16) -> EvalReport:
    """Generate, parse through the span grammar, and average temporal IoU."""
    report = EvalReport(protocol="localization")
    failures = 0
    for sample in samples:
        item = sample_to_item(sample, store)
        prediction = _answer(model, item, max_new)
        spans = parse_spans(prediction)
        if spans is None:
            failures += 1
        iou = temporal_iou(spans, parse_spans(sample.answer))
        report.rows.append(EvalRow(_sample_id(sample), sample.question,
                                   prediction, sample.answer, iou))
    values = [r.value for r in report.rows]
    report.aggregates = {
        "mean_iou": sum(values) / len(values) if values else 0.0,
        "n": float(len(values)),
        "parse_failures": float(failures),
    }
    return report


def _apply_mask(rec: CanonicalRecord, mode: str, rng: random.Random) -> CanonicalRecord:
    if mode == "none":
        return rec
    present = rec.present_leads
    if len(present) < 2:
        raise ValueError("masking sweep needs records with at least 2 leads")
    if mode == "first":
        dropped = present[0]
    elif mode == "second":
        dropped = present[1]
    else:
        dropped = rng.choice(present)
    return mask_leads(rec, set(present) - {dropped})


def masking_sweep(model: EcgChatModel, samples: Sequence[QaSample],
                  store: Mapping[str, CanonicalRecord],
                  modes: Sequence[str] = MASK_MODES, seed: int = 0,
                  max_new: int = 16) -> dict[str, EvalReport]:
    """Per-mode localization IoU with one lead hidden from the model."""
    unknown = set(modes) - set(MASK_MODES)
    if unknown:
        raise ValueError(f"unknown masking modes: {sorted(unknown)}")
    out: dict[str, EvalReport] = {}
    for mode in modes:
        rng = random.Random(seed)
        report = EvalReport(protocol=f"localization-mask-{mode}")
        failures = 0
        for sample in samples:
            item = sample_to_item(sample, store)
            masked = [_apply_mask(rec, mode, rng) for rec in item.records]
            prediction = _answer(model, item, max_new, records=masked)
            spans = parse_spans(prediction)
            if spans is None:
                failures += 1
            iou = temporal_iou(spans, parse_spans(sample.answer))
            report.rows.append(EvalRow(_sample_id(sample), sample.question,
                                       prediction, sample.answer, iou))
        values = [r.value for r in report.rows]
        report.aggregates = {
            "mean_iou": sum(values) / len(values) if values else 0.0,
            "n": float(len(values)),
            "parse_failures": float(failures),
        }
        out[mode] = report
    return out


def eval_exact_match(model: EcgChatModel, samples: Sequence[QaSample],
                     store: Mapping[str, CanonicalRecord],
                     max_new: int = 16) -> EvalReport:
    report = EvalReport(protocol="exact-match")
    for sample in samples:
        item = sample_to_item(sample, store)
        prediction = _answer(model, item, max_new)
        hit = exact_match(prediction, sample.answer)
        report.rows.append(EvalRow(_sample_id(sample), sample.question,
                                   prediction, sample.answer, float(hit)))
    values = [r.value for r in report.rows]
    report.aggregates = {
        "accuracy": sum(values) / len(values) if values else 0.0,
        "n": float(len(values)),
    }
    return report


def eval_report_auc(model: EcgChatModel, samples: Sequence[QaSample],
                    store: Mapping[str, CanonicalRecord],
                    class_names: Sequence[str],
                    labels_per_sample: Sequence[set[str]],
                    embedder: TextEmbedder | None = None,
                    max_new: int = 32) -> EvalReport:
    """Generate a report per ECG, score each class by embedding cosine, and
    compute macro-AUC against the per-sample label sets."""
    if len(labels_per_sample) != len(samples):
        raise ValueError("one label set per sample required")
    report = EvalReport(protocol="report-auc")
    score_rows, truth_rows = [], []
    for sample, labels in zip(samples, labels_per_sample):
        item = sample_to_item(sample, store)
        prediction = _answer(model, item, max_new)
        scores = report_to_scores(prediction, class_names, embedder)
        score_rows.append(scores)
        truth_rows.append([1 if name in labels else 0 for name in class_names])
        report.rows.append(EvalRow(_sample_id(sample), sample.question, prediction,
                                   ",".join(sorted(labels)), float(scores.max())))
    auc = macro_auc(score_rows, truth_rows)
    report.aggregates = {
        "macro_auc": auc.macro,
        "n": float(len(samples)),
        "classes_skipped": float(len(auc.skipped)),
    }
    return report


def eval_judge(entries: Sequence[tuple[str, list[str], str]],
               client, model_tag: str = "judge") -> tuple[EvalReport, list[JudgeVerdict]]:
    """Judge-score (question, reports, prediction) triples; invalid verdicts
    are excluded from the mean but counted."""
    report = EvalReport(protocol="judge")
    verdicts: list[JudgeVerdict] = []
    for i, (question, reports, prediction) in enumerate(entries):
        verdict = judge_score(question, reports, prediction, client, model=model_tag)
        verdicts.append(verdict)
        report.rows.append(EvalRow(str(i), question, prediction, "",
                                   -1.0 if verdict.score is None else float(verdict.score)))
    valid = [v.score for v in verdicts if v.score is not None]
    report.aggregates = {
        "mean_score": sum(valid) / len(valid) if valid else 0.0,
        "n": float(len(entries)),
        "invalid": float(len(verdicts) - len(valid)),
    }
    return report, verdicts


def write_report(report: EvalReport, prefix: str | Path) -> tuple[Path, Path]:
    """Write `{prefix}.txt` (human-readable) and `{prefix}.jsonl` (one JSON
    row per sample, then one aggregate object)."""
    prefix = Path(prefix)
    prefix.parent.mkdir(parents=True, exist_ok=True)
    text_path = prefix.with_suffix(".txt")
    jsonl_path = prefix.with_suffix(".jsonl")

    lines = [f"protocol: {report.protocol}", ""]
    lines.append("aggregates:")
    for key in sorted(report.aggregates):
        lines.append(f"  {key}: {report.aggregates[key]:.6g}")
    lines.append("")
    lines.append("rows:")
    for row in report.rows:
        lines.append(f"  [{row.sample_id}] value={row.value:.4f} "
                     f"q={row.question!r} pred={row.prediction!r} truth={row.truth!r}")
    text_path.write_text("\n".join(lines) + "\n", encoding="utf-8")

    with open(jsonl_path, "w", encoding="utf-8") as fh:
        for row in report.rows:
            fh.write(json.dumps({
                "sample_id": row.sample_id, "question": row.question,
                "prediction": row.prediction, "truth": row.truth,
                "value": row.value,
            }, sort_keys=True) + "\n")
        fh.write(json.dumps({"aggregates": report.aggregates,
                             "protocol": report.protocol}, sort_keys=True) + "\n")
    return text_path, jsonl_path
