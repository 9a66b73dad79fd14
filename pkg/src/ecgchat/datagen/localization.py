"""Abnormality localization builder.

For every annotated abnormal region the builder cuts several clip windows
around it, each shifted by a random amount that keeps the region midpoint
inside the window and the window inside the recording.  Answers render the
class's intervals inside the window; optional negatives pair a class-free
window with the Not-Found literal.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass, field

from ..records import LABEL_ALIASES, CanonicalRecord, class_name
from ..spans import NOT_FOUND_TEXT, SpanSet, render_spans
from .samples import EcgRef, QaSample
from .templates import LOCALIZATION_QUESTIONS

SHORT_RESAMPLES = 10
LONG_RESAMPLES = 5
MIN_WINDOW = 10.0
MAX_WINDOW = 60.0
MIN_CLIPPED_SPAN = 0.05
DEFAULT_NEGATIVE_RATIO = 0.25


@dataclass
class LocalizationStats:
    positives: dict[str, int] = field(default_factory=dict)
    negatives: dict[str, int] = field(default_factory=dict)
    skipped: dict[str, int] = field(default_factory=dict)

    def skip(self, reason: str):
        self.skipped[reason] = self.skipped.get(reason, 0) + 1


def merge_class_regions(rec: CanonicalRecord, cls: str) -> list[tuple[float, float]]:
    """Contiguous regions of one class: overlapping or touching marks fused."""
    intervals = sorted((a.onset, a.offset) for a in rec.annotations
                       if class_name(a.label) == cls)
    regions: list[tuple[float, float]] = []
    for lo, hi in intervals:
        if regions and lo <= regions[-1][1] + 1e-9:
            regions[-1] = (regions[-1][0], max(regions[-1][1], hi))
        else:
            regions.append((lo, hi))
    return regions


def _window_spans(regions: list[tuple[float, float]], start: float,
                  end: float) -> SpanSet:
    kept = []
    for lo, hi in regions:
        a, b = max(lo, start), min(hi, end)
        if b <= a:
            continue
        if (a, b) != (lo, hi) and b - a < MIN_CLIPPED_SPAN:
            continue
        kept.append((a - start, b - start))
    return SpanSet.from_intervals(kept).quantize()


def _grid_uniform(rng: random.Random, lo: float, hi: float) -> float | None:
    """Uniform draw on the 0.01 s sample grid restricted to [lo, hi]."""
    g_lo = math.ceil(lo * 100 - 1e-9)
    g_hi = math.floor(hi * 100 + 1e-9)
    if g_hi < g_lo:
        return None
    return rng.randint(g_lo, g_hi) / 100.0


def _draw_duration(rng: random.Random, mode: str, rec_duration: float) -> float | None:
    if rec_duration < MIN_WINDOW - 1e-9:
        return None
    if mode == "short":
        return MIN_WINDOW
    hi = min(MAX_WINDOW, math.floor(rec_duration * 10) / 10)
    return round(rng.uniform(MIN_WINDOW, hi), 1)


def build_localization(records: list[CanonicalRecord], clip_mode: str = "short",
                       n_resample: int | None = None, negatives: bool = True,
                       negative_ratio: float = DEFAULT_NEGATIVE_RATIO,
                       classes: set[str] | None = None, seed: int = 0,
                       ) -> tuple[list[QaSample], LocalizationStats]:
    if clip_mode not in ("short", "long"):
        raise ValueError(f"unknown clip mode {clip_mode!r}")
    if n_resample is None:
        n_resample = SHORT_RESAMPLES if clip_mode == "short" else LONG_RESAMPLES
    queryable = set(LABEL_ALIASES.values()) if classes is None else set(classes)
    subset = "localization" if clip_mode == "short" else "localization-long"

    rng = random.Random(seed)
    stats = LocalizationStats()
    samples: list[QaSample] = []
    ordered = sorted(records, key=lambda r: r.record_id)

    for rec in ordered:
        present = sorted({class_name(a.label) for a in rec.annotations} & queryable)
        if not present:
            continue
        if rec.duration < MIN_WINDOW - 1e-9:
            stats.skip("record-under-10s")
            continue
        for cls in present:
            regions = merge_class_regions(rec, cls)
            for region in regions:
                mid = (region[0] + region[1]) / 2
                for _ in range(n_resample):
                    win = _draw_duration(rng, clip_mode, rec.duration)
                    if win is None:
                        stats.skip("record-under-10s")
                        continue
                    start = _grid_uniform(rng, max(0.0, mid - win),
                                          min(mid, rec.duration - win))
                    if start is None:
                        stats.skip("no-valid-shift")
                        continue
                    spans = _window_spans(regions, start, start + win)
                    if spans.is_empty():
                        stats.skip("degenerate-span")
                        continue
                    question = rng.choice(LOCALIZATION_QUESTIONS).format(abnormal=cls)
                    samples.append(QaSample(
                        question=question,
                        answer=render_spans(spans),
                        ecg_refs=(EcgRef(rec.record_id, start, round(start + win, 2)),),
                        subset=subset,
                    ))
                    stats.positives[cls] = stats.positives.get(cls, 0) + 1

    if negatives:
        usable = [r for r in ordered if r.duration >= MIN_WINDOW - 1e-9]
        for cls in sorted(stats.positives):
            want = round(stats.positives[cls] * negative_ratio)
            made, attempts = 0, 0
            while made < want and attempts < 50 * max(want, 1) and usable:
                attempts += 1
                rec = rng.choice(usable)
                win = _draw_duration(rng, clip_mode, rec.duration)
                if win is None:
                    continue
                start = _grid_uniform(rng, 0.0, rec.duration - win)
                if start is None:
                    continue
                end = start + win
                touched = any(class_name(a.label) == cls
                              and a.onset < end and a.offset > start
                              for a in rec.annotations)
                if touched:
                    continue
                question = rng.choice(LOCALIZATION_QUESTIONS).format(abnormal=cls)
                samples.append(QaSample(
                    question=question,
                    answer=NOT_FOUND_TEXT,
                    ecg_refs=(EcgRef(rec.record_id, start, round(end, 2)),),
                    subset=subset,
                ))
                stats.negatives[cls] = stats.negatives.get(cls, 0) + 1
                made += 1
    return samples, stats
