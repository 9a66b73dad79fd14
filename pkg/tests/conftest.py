"""Shared synthetic ECG fixtures.

Records are built directly in canonical form (100 Hz, 12 slots, [-1, 1])
with sine-wave background and square bursts marking annotated regions, so
localization targets are visible in the signal itself.
"""

import numpy as np

from ecgchat.records import Annotation, CanonicalRecord

CLASS_CODES = ("PVC", "LBBB", "RBBB")


def synthetic_record(record_id, seconds, regions, n_leads=2, seed=0):
    """regions: list of (onset, offset, label code)."""
    rng = np.random.default_rng(seed)
    n = int(round(seconds * 100))
    t = np.arange(n) / 100.0
    sig = np.zeros((12, n), dtype=np.float32)
    for lead in range(n_leads):
        base = 0.4 * np.sin(2 * np.pi * (1.0 + 0.1 * lead) * t)
        base += 0.05 * rng.standard_normal(n)
        sig[lead] = base
    for onset, offset, label in regions:
        i0, i1 = int(onset * 100), int(offset * 100)
        bump = 0.5 if label == "PVC" else (-0.5 if label == "LBBB" else 0.35)
        sig[:n_leads, i0:i1] += bump
    sig = np.clip(sig, -1.0, 1.0).astype(np.float32)
    mask = np.zeros(12, dtype=bool)
    mask[:n_leads] = True
    anns = [Annotation(o, f, lbl) for o, f, lbl in regions]
    return CanonicalRecord(signal=sig, lead_mask=mask, annotations=anns,
                           acquired_at=None, record_id=record_id)


def make_corpus(n=20, seed=0):
    """n recordings, 10-70 s, each with 1-3 single-class regions."""
    rng = np.random.default_rng(seed)
    records = []
    for i in range(n):
        seconds = float(rng.choice([10, 15, 20, 30, 45, 60, 70]))
        n_regions = int(rng.integers(1, 4))
        regions = []
        cursor = 1.0
        for _ in range(n_regions):
            gap = float(rng.uniform(1.0, seconds / 4))
            onset = round(cursor + gap, 2)
            width = float(rng.uniform(0.6, 2.0))
            offset = round(min(onset + width, seconds - 0.5), 2)
            if offset - onset < 0.2 or offset >= seconds:
                break
            label = CLASS_CODES[int(rng.integers(len(CLASS_CODES)))]
            regions.append((onset, offset, label))
            cursor = offset + 1.0
        if not regions:
            regions = [(2.0, 3.5, "PVC")]
        records.append(synthetic_record(f"rec{i:03d}", seconds, regions,
                                        n_leads=2, seed=seed * 1000 + i))
    return records
