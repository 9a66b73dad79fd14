"""Canonical preprocessing: resample to 100 Hz, normalize, pad to 12 slots."""

from __future__ import annotations

import numpy as np

from .model import (
    CANONICAL_FS,
    CANONICAL_LEADS,
    Annotation,
    CanonicalRecord,
    EcgRecord,
    canonical_lead_name,
)

# Clipped annotation intervals shorter than this are dropped to avoid
# zero-length localization targets.
MIN_CLIPPED_ANNOTATION = 0.05

_FALLBACK_SLOTS = (0, 1)  # unknown auxiliary leads land on I, II in file order


def _resample_linear(signal: np.ndarray, fs: float) -> np.ndarray:
    """Linear-interpolation resample of (leads, samples) to the canonical rate."""
    n_in = signal.shape[1]
    n_out = max(int(round(n_in * CANONICAL_FS / fs)), 1)
    if fs == CANONICAL_FS and n_out == n_in:
        return signal.astype(np.float32)
    t_in = np.arange(n_in, dtype=np.float64) / fs
    t_out = np.arange(n_out, dtype=np.float64) / CANONICAL_FS
    out = np.empty((signal.shape[0], n_out), dtype=np.float32)
    for i in range(signal.shape[0]):
        out[i] = np.interp(t_out, t_in, signal[i].astype(np.float64))
    return out


def _normalize_lead(x: np.ndarray) -> np.ndarray:
    """Min-max map to [-1, 1]; a constant lead maps to all zeros.

    The extremes land on -1.0 and 1.0 exactly, and a lead already spanning
    [-1, 1] passes through untouched, which makes canonicalize idempotent
    bit-for-bit.
    """
    lo = float(x.min())
    hi = float(x.max())
    if hi == lo:
        return np.zeros_like(x)
    if lo == -1.0 and hi == 1.0:
        return x.astype(np.float32)
    return (2.0 * (x - lo) / (hi - lo) - 1.0).astype(np.float32)


def _assign_slots(lead_names: list[str]) -> list[int]:
    if len(lead_names) > len(CANONICAL_LEADS):
        raise ValueError(f"at most 12 leads supported, got {len(lead_names)}")
    slots: list[int] = []
    used: set[int] = set()
    for name in lead_names:
        canonical = canonical_lead_name(name)
        slot = CANONICAL_LEADS.index(canonical) if canonical is not None else None
        if slot is None or slot in used:
            slot = next((s for s in _FALLBACK_SLOTS if s not in used), None)
        if slot is None or slot in used:
            slot = next(s for s in range(len(CANONICAL_LEADS)) if s not in used)
        used.add(slot)
        slots.append(slot)
    return slots


def canonicalize(rec: EcgRecord | CanonicalRecord) -> CanonicalRecord:
    """Resample to 100 Hz, min-max normalize per lead, place into 12 slots.

    Idempotent: canonicalizing a canonical record returns it bit-for-bit.
    """
    if isinstance(rec, CanonicalRecord):
        signal = _resample_linear(rec.signal, rec.fs)
        normalized = np.stack([_normalize_lead(row) for row in signal])
        normalized[~rec.lead_mask] = 0.0
        return CanonicalRecord(
            signal=normalized,
            lead_mask=rec.lead_mask.copy(),
            annotations=list(rec.annotations),
            acquired_at=rec.acquired_at,
            record_id=rec.record_id,
        )

    resampled = _resample_linear(rec.signal, rec.fs)
    n_out = resampled.shape[1]
    duration = n_out / CANONICAL_FS

    signal = np.zeros((len(CANONICAL_LEADS), n_out), dtype=np.float32)
    mask = np.zeros(len(CANONICAL_LEADS), dtype=bool)
    for row, slot in zip(resampled, _assign_slots(rec.lead_names)):
        signal[slot] = _normalize_lead(row)
        mask[slot] = True

    annotations = [
        Annotation(min(a.onset, duration), min(a.offset, duration), a.label)
        for a in rec.annotations
    ]
    return CanonicalRecord(
        signal=signal,
        lead_mask=mask,
        annotations=annotations,
        acquired_at=rec.acquired_at,
        record_id=rec.record_id,
    )


def slice_record(rec: CanonicalRecord, start: float, end: float) -> CanonicalRecord:
    """Extract [start, end) seconds, clipping annotations into the window.

    Times are snapped to the 100 Hz sample grid.  Annotations crossing a
    boundary are clipped; an interval that clipping shrinks below
    MIN_CLIPPED_ANNOTATION is dropped.
    """
    if not (0.0 <= start < end <= rec.duration + 1e-9):
        raise ValueError(f"slice window [{start}, {end}] out of range for {rec.duration:.2f}s record")
    i0 = int(round(start * rec.fs))
    i1 = int(round(end * rec.fs))
    if i1 <= i0 or i1 > rec.n_samples:
        raise ValueError(f"slice window [{start}, {end}] snaps to empty or overlong [{i0}, {i1})")
    start_s = i0 / rec.fs
    end_s = i1 / rec.fs

    clipped: list[Annotation] = []
    for ann in rec.annotations:
        lo = max(ann.onset, start_s)
        hi = min(ann.offset, end_s)
        if hi < lo:
            continue
        was_clipped = lo > ann.onset or hi < ann.offset
        if was_clipped and hi - lo < MIN_CLIPPED_ANNOTATION:
            continue
        clipped.append(Annotation(lo - start_s, hi - start_s, ann.label))

    return CanonicalRecord(
        signal=rec.signal[:, i0:i1].copy(),
        lead_mask=rec.lead_mask.copy(),
        annotations=clipped,
        acquired_at=rec.acquired_at,
        record_id=rec.record_id,
    )


def mask_leads(rec: CanonicalRecord, keep: set[str]) -> CanonicalRecord:
    """Zero every lead not in `keep` and update the mask."""
    present = set(rec.present_leads)
    if not keep:
        raise ValueError("at least one lead must be kept")
    unknown = set(keep) - present
    if unknown:
        raise ValueError(f"cannot keep absent leads: {sorted(unknown)}")

    signal = rec.signal.copy()
    mask = rec.lead_mask.copy()
    for slot, name in enumerate(CANONICAL_LEADS):
        if mask[slot] and name not in keep:
            signal[slot] = 0.0
            mask[slot] = False
    return CanonicalRecord(
        signal=signal,
        lead_mask=mask,
        annotations=list(rec.annotations),
        acquired_at=rec.acquired_at,
        record_id=rec.record_id,
    )
