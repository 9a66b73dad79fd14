"""Canonical ECG record model, ingestion, and preprocessing."""

from .io import (
    FORMATS,
    FormatError,
    beats_to_intervals,
    ingest_record,
    sniff_format,
    write_columnar_text,
    write_interchange,
    write_waveform_db,
)
from .model import (
    CANONICAL_FS,
    CANONICAL_LEADS,
    CLIP_SAMPLES,
    CLIP_SECONDS,
    LABEL_ALIASES,
    Annotation,
    CanonicalRecord,
    EcgRecord,
    canonical_lead_name,
    class_name,
    register_lead_alias,
)
from .preprocess import canonicalize, mask_leads, slice_record

__all__ = [
    "Annotation",
    "CANONICAL_FS",
    "CANONICAL_LEADS",
    "CLIP_SAMPLES",
    "CLIP_SECONDS",
    "CanonicalRecord",
    "EcgRecord",
    "FORMATS",
    "FormatError",
    "LABEL_ALIASES",
    "beats_to_intervals",
    "canonical_lead_name",
    "canonicalize",
    "class_name",
    "ingest_record",
    "mask_leads",
    "register_lead_alias",
    "slice_record",
    "sniff_format",
    "write_columnar_text",
    "write_interchange",
    "write_waveform_db",
]
