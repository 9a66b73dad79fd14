"""ECG record model: lead registry, raw and canonical records, label aliases."""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from datetime import datetime

import numpy as np

# Standard 12-lead order; canonical slot index == position in this tuple.
CANONICAL_LEADS = ("I", "II", "III", "aVR", "aVL", "aVF",
                   "V1", "V2", "V3", "V4", "V5", "V6")

CANONICAL_FS = 100.0
CLIP_SECONDS = 10.0
CLIP_SAMPLES = int(CLIP_SECONDS * CANONICAL_FS)

# Ambulatory lead names seen in 2-lead home recordings.  Unknown auxiliary
# names fall back to slots I and II in file order (editable via
# `register_lead_alias`).
_LEAD_ALIASES: dict[str, str] = {
    "MLI": "I",
    "MLII": "II",
    "MLIII": "III",
    "ML1": "I",
    "ML2": "II",
    "ML3": "III",
    "V2-V3": "V2",
    "MV1": "V1",
    "MV2": "V2",
    "MV3": "V3",
    "MV4": "V4",
    "MV5": "V5",
    "MV6": "V6",
    "ECG1": "I",
    "ECG2": "II",
    "D3": "III",
}

# Annotation label codes -> query class display names.  Ships with the three
# bundle-branch/ectopy classes; unknown codes pass through verbatim.
LABEL_ALIASES: dict[str, str] = {
    "V": "Premature ventricular contraction",
    "PVC": "Premature ventricular contraction",
    "L": "Left bundle branch block beat",
    "LBBB": "Left bundle branch block beat",
    "R": "Right bundle branch block beat",
    "RBBB": "Right bundle branch block beat",
}


def register_lead_alias(name: str, canonical: str) -> None:
    if canonical not in CANONICAL_LEADS:
        raise ValueError(f"unknown canonical lead {canonical!r}")
    _LEAD_ALIASES[name] = canonical


def canonical_lead_name(name: str) -> str | None:
    """Map a lead name to its canonical 12-lead identity, or None if unknown."""
    if name in CANONICAL_LEADS:
        return name
    upper = name.upper()
    for lead in CANONICAL_LEADS:
        if lead.upper() == upper:
            return lead
    return _LEAD_ALIASES.get(name) or _LEAD_ALIASES.get(upper)


def class_name(label_code: str) -> str:
    """Display name for an annotation label code (pass-through for unknowns)."""
    return LABEL_ALIASES.get(label_code, label_code)


@dataclass(frozen=True)
class Annotation:
    """A labelled interval on the recording timeline, in seconds."""

    onset: float
    offset: float
    label: str

    def __post_init__(self) -> None:
        if not (0.0 <= self.onset <= self.offset):
            raise ValueError(f"bad annotation interval [{self.onset}, {self.offset}]")


@dataclass
class EcgRecord:
    """Multi-lead 1-D signal with metadata; immutable after construction."""

    signal: np.ndarray          # (leads, samples) float
    lead_names: list[str]
    fs: float
    annotations: list[Annotation] = field(default_factory=list)
    acquired_at: datetime | None = None
    record_id: str = ""

    def __post_init__(self) -> None:
        self.signal = np.asarray(self.signal, dtype=np.float32)
        if self.signal.ndim != 2:
            raise ValueError(f"signal must be 2-D (leads, samples), got {self.signal.shape}")
        n_leads, n_samples = self.signal.shape
        if n_leads < 1 or n_samples < 1:
            raise ValueError(f"need at least 1 lead and 1 sample, got {self.signal.shape}")
        if self.fs <= 0:
            raise ValueError(f"sampling rate must be positive, got {self.fs}")
        if len(self.lead_names) != n_leads:
            raise ValueError(f"{n_leads} leads but {len(self.lead_names)} lead names")
        if len(set(self.lead_names)) != len(self.lead_names):
            raise ValueError(f"duplicate lead names: {self.lead_names}")
        duration = n_samples / self.fs
        for ann in self.annotations:
            if ann.offset > duration + 1e-9:
                raise ValueError(
                    f"annotation [{ann.onset}, {ann.offset}] extends past record end {duration:.4f}s")

    @property
    def n_leads(self) -> int:
        return self.signal.shape[0]

    @property
    def n_samples(self) -> int:
        return self.signal.shape[1]

    @property
    def duration(self) -> float:
        return self.n_samples / self.fs


@dataclass
class CanonicalRecord:
    """12-slot, 100 Hz, [-1, 1] record; absent leads are zero rows."""

    signal: np.ndarray               # (12, samples) float32
    lead_mask: np.ndarray            # (12,) bool, True = lead present
    annotations: list[Annotation] = field(default_factory=list)
    acquired_at: datetime | None = None
    record_id: str = ""

    fs: float = CANONICAL_FS
    lead_names: tuple[str, ...] = CANONICAL_LEADS

    def __post_init__(self) -> None:
        self.signal = np.asarray(self.signal, dtype=np.float32)
        self.lead_mask = np.asarray(self.lead_mask, dtype=bool)
        if self.signal.shape[0] != len(CANONICAL_LEADS):
            raise ValueError(f"canonical record needs 12 lead slots, got {self.signal.shape[0]}")
        if self.lead_mask.shape != (len(CANONICAL_LEADS),):
            raise ValueError(f"lead_mask must have shape (12,), got {self.lead_mask.shape}")
        if self.fs != CANONICAL_FS:
            raise ValueError(f"canonical sampling rate is {CANONICAL_FS}, got {self.fs}")
        if np.any(np.abs(self.signal) > 1.0 + 1e-6):
            raise ValueError("canonical amplitudes must lie in [-1, 1]")
        absent = ~self.lead_mask
        if np.any(self.signal[absent] != 0.0):
            raise ValueError("absent lead slots must be all-zero")

    @property
    def n_samples(self) -> int:
        return self.signal.shape[1]

    @property
    def duration(self) -> float:
        return self.n_samples / self.fs

    @property
    def present_leads(self) -> list[str]:
        return [name for name, keep in zip(CANONICAL_LEADS, self.lead_mask) if keep]

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, CanonicalRecord):
            return NotImplemented
        return (np.array_equal(self.signal, other.signal)
                and np.array_equal(self.lead_mask, other.lead_mask)
                and self.annotations == other.annotations
                and self.record_id == other.record_id)

    def with_signal(self, signal: np.ndarray, lead_mask: np.ndarray) -> "CanonicalRecord":
        return replace(self, signal=signal, lead_mask=lead_mask)
