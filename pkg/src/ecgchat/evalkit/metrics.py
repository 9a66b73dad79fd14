"""Evaluation metrics: temporal IoU, macro-AUC, exact match, report scoring.

All metric functions are pure.  Span answers are compared after merging
each side into disjoint intervals, so the IoU of multi-span sets is the
length of the pairwise intersection over the length of the pooled union.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from ..spans import SpanSet

TextEmbedder = Callable[[Sequence[str]], np.ndarray]


def _intersection_length(a: SpanSet, b: SpanSet) -> float:
    total = 0.0
    i = j = 0
    sa, sb = a.spans, b.spans
    while i < len(sa) and j < len(sb):
        lo = max(sa[i][0], sb[j][0])
        hi = min(sa[i][1], sb[j][1])
        if hi > lo:
            total += hi - lo
        if sa[i][1] <= sb[j][1]:
            i += 1
        else:
            j += 1
    return total


def temporal_iou(pred: SpanSet | None, truth: SpanSet) -> float:
    """Length-of-intersection over length-of-union of two span sets.

    A ``None`` prediction marks an answer that did not follow the span
    grammar and scores 0.  Two empty sets (both answered "Not Found")
    agree perfectly; an empty set against a non-empty one scores 0.
    """
    if pred is None:
        return 0.0
    if pred.is_empty() and truth.is_empty():
        return 1.0
    if pred.is_empty() or truth.is_empty():
        return 0.0
    inter = _intersection_length(pred, truth)
    union = pred.total_length() + truth.total_length() - inter
    if union <= 0.0:
        return 0.0
    return min(inter / union, 1.0)


def _midranks(values: np.ndarray) -> np.ndarray:
    order = np.argsort(values, kind="mergesort")
    ranks = np.empty(len(values), dtype=np.float64)
    i = 0
    while i < len(values):
        j = i
        while j + 1 < len(values) and values[order[j + 1]] == values[order[i]]:
            j += 1
        # tied scores share the average of the ranks they span
        ranks[order[i:j + 1]] = (i + j) / 2.0 + 1.0
        i = j + 1
    return ranks


def _binary_auc(scores: np.ndarray, truth: np.ndarray) -> float:
    pos = int(truth.sum())
    neg = len(truth) - pos
    ranks = _midranks(scores)
    return (float(ranks[truth == 1].sum()) - pos * (pos + 1) / 2.0) / (pos * neg)


@dataclass(frozen=True)
class AucReport:
    """Macro average over the classes with at least one positive and one
    negative; the rest are listed in ``skipped``."""

    macro: float
    per_class: dict[int, float] = field(default_factory=dict)
    skipped: tuple[int, ...] = ()

    def __float__(self) -> float:
        return self.macro


def macro_auc(scores: np.ndarray, truth: np.ndarray) -> AucReport:
    scores = np.asarray(scores, dtype=np.float64)
    truth = np.asarray(truth)
    if scores.shape != truth.shape or scores.ndim != 2:
        raise ValueError(f"score matrix {scores.shape} does not match "
                         f"truth matrix {truth.shape}")
    if not np.isin(truth, (0, 1)).all():
        raise ValueError("truth matrix must be binary")
    per_class: dict[int, float] = {}
    skipped: list[int] = []
    for c in range(scores.shape[1]):
        col_truth = truth[:, c]
        if col_truth.sum() == 0 or col_truth.sum() == len(col_truth):
            skipped.append(c)
            continue
        per_class[c] = _binary_auc(scores[:, c], col_truth)
    if not per_class:
        raise ValueError("no class has both a positive and a negative sample")
    macro = float(np.mean(list(per_class.values())))
    return AucReport(macro=macro, per_class=per_class, skipped=tuple(skipped))


def _normalize_text(text: str) -> str:
    return " ".join(text.split()).lower()


def exact_match(pred: str, truth: str) -> bool:
    """Case/whitespace-insensitive equality; comma-separated multi-tag
    answers compare as unordered sets."""
    p = _normalize_text(pred)
    t = _normalize_text(truth)
    p_parts = {part.strip() for part in p.split(",")}
    t_parts = {part.strip() for part in t.split(",")}
    return p_parts == t_parts


def hashing_embedder(dim: int = 256) -> TextEmbedder:
    """Deterministic local stand-in for a sentence encoder: hashed
    bag-of-words counts.  Identical texts map to identical vectors."""
    if dim < 1:
        raise ValueError("embedding dimension must be positive")

    def embed(texts: Sequence[str]) -> np.ndarray:
        out = np.zeros((len(texts), dim), dtype=np.float64)
        for row, text in enumerate(texts):
            for word in _normalize_text(text).split():
                digest = hashlib.sha256(word.encode()).digest()
                out[row, int.from_bytes(digest[:4], "little") % dim] += 1.0
        return out

    return embed


def _cosine_rows(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    na = np.linalg.norm(a, axis=-1, keepdims=True)
    nb = np.linalg.norm(b, axis=-1, keepdims=True)
    na[na == 0] = 1.0
    nb[nb == 0] = 1.0
    return (a / na) @ (b / nb).T


def report_to_scores(report: str, labels: Sequence[str],
                     embedder: TextEmbedder | None = None) -> np.ndarray:
    """Cosine similarity of the report embedding against each label name."""
    if not labels:
        raise ValueError("at least one label required")
    embedder = embedder or hashing_embedder()
    vectors = np.asarray(embedder([report, *labels]), dtype=np.float64)
    return _cosine_rows(vectors[:1], vectors[1:])[0]
