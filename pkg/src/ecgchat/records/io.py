"""Record ingestion for the three supported on-disk formats.

Layouts (also described in ``docs/formats.md``):

waveform-db
    ``<stem>.hea``   text header: first line ``record_id n_leads fs n_samples``,
                     then one ``lead_name gain`` line per lead (amplitude =
                     raw / gain); ``#``-prefixed lines are comments, and a
                     comment ``# acquired_at: <iso>`` carries the timestamp.
    ``<stem>.dat``   16-bit little-endian integers, sample-major interleaved.
    ``<stem>.ann``   optional sidecar, one ``sample_index label`` line per
                     beat event, sample indices ascending.

columnar-text
    ``<stem>`` (any extension): ``# key: value`` metadata lines (record_id,
    fs, optional acquired_at), a comma-separated lead-name row, then one
    comma-separated row of amplitudes per sample.  Same ``.ann`` sidecar
    convention as waveform-db.

interchange-binary
    magic ``ECGB`` + u16 version + u32 header length + JSON header
    (record_id, lead_names, fs, annotations as [onset, offset, label],
    acquired_at) + float32 little-endian samples, lead-major.
"""

from __future__ import annotations

import json
import struct
from datetime import datetime
from pathlib import Path

import numpy as np

from .model import Annotation, EcgRecord, canonical_lead_name

_MAGIC = b"ECGB"
_BINARY_VERSION = 1

# Half-width used when a record carries a single beat event and no RR
# interval can be estimated.
_LONE_BEAT_HALF_WIDTH = 0.4

FORMATS = ("waveform-db", "columnar-text", "interchange-binary")


class FormatError(ValueError):
    """Raised when a record file does not parse under its declared format."""


def beats_to_intervals(times: list[float], labels: list[str], duration: float) -> list[Annotation]:
    """Expand point beat events into per-beat intervals.

    Each beat owns the window from the midpoint to its previous neighbour to
    the midpoint to its next one (neighbours taken over all labels), clamped
    to the recording; boundary beats extend symmetrically.  Runs of same-label
    beats therefore tile a contiguous region.
    """
    if not times:
        return []
    order = np.argsort(times, kind="stable")
    times_sorted = [times[i] for i in order]
    labels_sorted = [labels[i] for i in order]
    n = len(times_sorted)
    out: list[Annotation] = []
    for i, (t, label) in enumerate(zip(times_sorted, labels_sorted)):
        if n == 1:
            lo, hi = t - _LONE_BEAT_HALF_WIDTH, t + _LONE_BEAT_HALF_WIDTH
        else:
            lo = (times_sorted[i - 1] + t) / 2 if i > 0 else t - (times_sorted[1] - t) / 2
            hi = (t + times_sorted[i + 1]) / 2 if i < n - 1 else t + (t - times_sorted[-2]) / 2
        lo = max(0.0, lo)
        hi = min(duration, hi)
        if hi > lo:
            out.append(Annotation(lo, hi, label))
    return out


def _read_sidecar(path: Path, n_samples: int, fs: float) -> list[Annotation]:
    times: list[float] = []
    labels: list[str] = []
    for lineno, line in enumerate(path.read_text().splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        if len(parts) != 2:
            raise FormatError(f"{path.name}:{lineno}: expected 'sample_index label'")
        try:
            idx = int(parts[0])
        except ValueError as exc:
            raise FormatError(f"{path.name}:{lineno}: bad sample index {parts[0]!r}") from exc
        if not (0 <= idx < n_samples):
            raise FormatError(
                f"{path.name}:{lineno}: sample index {idx} outside signal of length {n_samples}")
        times.append(idx / fs)
        labels.append(parts[1])
    return beats_to_intervals(times, labels, n_samples / fs)


def _parse_acquired(value: str | None) -> datetime | None:
    if not value:
        return None
    try:
        return datetime.fromisoformat(value)
    except ValueError as exc:
        raise FormatError(f"bad acquired_at timestamp {value!r}") from exc


def _check_lead_names(names: list[str], strict: bool) -> None:
    if any(not n for n in names):
        raise FormatError("empty lead name in header")
    if len(set(names)) != len(names):
        raise FormatError(f"duplicate lead names: {names}")
    if strict:
        unknown = [n for n in names if canonical_lead_name(n) is None]
        if unknown:
            raise FormatError(f"unknown lead names: {unknown}")


def _read_waveform_db(stem: Path, strict_leads: bool) -> EcgRecord:
    header_path = stem.with_suffix(".hea")
    data_path = stem.with_suffix(".dat")
    if not header_path.exists():
        raise FormatError(f"missing header file {header_path}")
    if not data_path.exists():
        raise FormatError(f"missing data file {data_path}")

    acquired: str | None = None
    lines = []
    for raw in header_path.read_text().splitlines():
        stripped = raw.strip()
        if stripped.startswith("#"):
            body = stripped.lstrip("#").strip()
            if body.lower().startswith("acquired_at:"):
                acquired = body.split(":", 1)[1].strip()
            continue
        if stripped:
            lines.append(stripped)
    if not lines:
        raise FormatError(f"{header_path.name}: empty header")
    head = lines[0].split()
    if len(head) != 4:
        raise FormatError(f"{header_path.name}: first line must be 'record_id n_leads fs n_samples'")
    record_id = head[0]
    try:
        n_leads = int(head[1])
        fs = float(head[2])
        n_samples = int(head[3])
    except ValueError as exc:
        raise FormatError(f"{header_path.name}: malformed header numbers") from exc
    if n_leads < 1 or n_samples < 1 or fs <= 0:
        raise FormatError(f"{header_path.name}: non-positive dimensions")
    if len(lines) - 1 != n_leads:
        raise FormatError(f"{header_path.name}: header declares {n_leads} leads "
                          f"but lists {len(lines) - 1}")
    lead_names: list[str] = []
    gains: list[float] = []
    for line in lines[1:]:
        parts = line.split()
        if len(parts) != 2:
            raise FormatError(f"{header_path.name}: lead line must be 'name gain', got {line!r}")
        lead_names.append(parts[0])
        try:
            gain = float(parts[1])
        except ValueError as exc:
            raise FormatError(f"{header_path.name}: bad gain {parts[1]!r}") from exc
        if gain <= 0:
            raise FormatError(f"{header_path.name}: gain must be positive")
        gains.append(gain)
    _check_lead_names(lead_names, strict_leads)

    raw = np.fromfile(data_path, dtype="<i2")
    if raw.size != n_leads * n_samples:
        raise FormatError(f"{data_path.name}: expected {n_leads * n_samples} samples, "
                          f"found {raw.size}")
    signal = raw.reshape(n_samples, n_leads).T.astype(np.float32)
    signal /= np.asarray(gains, dtype=np.float32)[:, None]

    ann_path = stem.with_suffix(".ann")
    annotations = _read_sidecar(ann_path, n_samples, fs) if ann_path.exists() else []
    return EcgRecord(signal=signal, lead_names=lead_names, fs=fs,
                     annotations=annotations, acquired_at=_parse_acquired(acquired),
                     record_id=record_id)


def _read_columnar_text(path: Path, strict_leads: bool) -> EcgRecord:
    meta: dict[str, str] = {}
    lead_names: list[str] | None = None
    rows: list[list[float]] = []
    for lineno, raw in enumerate(path.read_text().splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            body = line.lstrip("#").strip()
            if ":" in body:
                key, value = body.split(":", 1)
                meta[key.strip().lower()] = value.strip()
            continue
        if lead_names is None:
            lead_names = [part.strip() for part in line.split(",")]
            continue
        parts = line.split(",")
        if len(parts) != len(lead_names):
            raise FormatError(f"{path.name}:{lineno}: expected {len(lead_names)} columns, "
                              f"got {len(parts)}")
        try:
            rows.append([float(p) for p in parts])
        except ValueError as exc:
            raise FormatError(f"{path.name}:{lineno}: non-numeric sample") from exc
    if lead_names is None or not rows:
        raise FormatError(f"{path.name}: no lead header or no samples")
    if "fs" not in meta:
        raise FormatError(f"{path.name}: missing '# fs:' metadata line")
    try:
        fs = float(meta["fs"])
    except ValueError as exc:
        raise FormatError(f"{path.name}: bad fs {meta['fs']!r}") from exc
    _check_lead_names(lead_names, strict_leads)

    signal = np.asarray(rows, dtype=np.float32).T
    ann_path = path.with_suffix(".ann")
    annotations = _read_sidecar(ann_path, signal.shape[1], fs) if ann_path.exists() else []
    return EcgRecord(signal=signal, lead_names=lead_names, fs=fs,
                     annotations=annotations,
                     acquired_at=_parse_acquired(meta.get("acquired_at")),
                     record_id=meta.get("record_id", path.stem))


def _read_interchange(path: Path, strict_leads: bool) -> EcgRecord:
    blob = path.read_bytes()
    if len(blob) < 10 or blob[:4] != _MAGIC:
        raise FormatError(f"{path.name}: not an interchange-binary file")
    version, header_len = struct.unpack_from("<HI", blob, 4)
    if version != _BINARY_VERSION:
        raise FormatError(f"{path.name}: unsupported version {version}")
    header_end = 10 + header_len
    if len(blob) < header_end:
        raise FormatError(f"{path.name}: truncated header")
    try:
        header = json.loads(blob[10:header_end].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise FormatError(f"{path.name}: malformed header JSON") from exc
    for key in ("record_id", "lead_names", "fs", "n_samples"):
        if key not in header:
            raise FormatError(f"{path.name}: header missing {key!r}")
    lead_names = list(header["lead_names"])
    fs = float(header["fs"])
    n_samples = int(header["n_samples"])
    _check_lead_names(lead_names, strict_leads)

    samples = np.frombuffer(blob[header_end:], dtype="<f4")
    expected = len(lead_names) * n_samples
    if samples.size != expected:
        raise FormatError(f"{path.name}: expected {expected} samples, found {samples.size}")
    signal = samples.reshape(len(lead_names), n_samples).copy()

    annotations = []
    for entry in header.get("annotations", []):
        if not (isinstance(entry, (list, tuple)) and len(entry) == 3):
            raise FormatError(f"{path.name}: bad annotation entry {entry!r}")
        annotations.append(Annotation(float(entry[0]), float(entry[1]), str(entry[2])))
    return EcgRecord(signal=signal, lead_names=lead_names, fs=fs,
                     annotations=annotations,
                     acquired_at=_parse_acquired(header.get("acquired_at")),
                     record_id=str(header["record_id"]))


def ingest_record(path: str | Path, format: str, strict_leads: bool = False) -> EcgRecord:
    """Read one record file (plus sidecars) in the named format."""
    path = Path(path)
    if format == "waveform-db":
        stem = path.with_suffix("") if path.suffix in {".hea", ".dat", ".ann"} else path
        return _read_waveform_db(stem, strict_leads)
    if format == "columnar-text":
        return _read_columnar_text(path, strict_leads)
    if format == "interchange-binary":
        return _read_interchange(path, strict_leads)
    raise ValueError(f"unknown format {format!r}; expected one of {FORMATS}")


def sniff_format(path: str | Path) -> str:
    """Guess the format of an uploaded record file from its leading bytes."""
    path = Path(path)
    if path.suffix in {".hea", ".dat"}:
        return "waveform-db"
    head = path.read_bytes()[:4]
    return "interchange-binary" if head == _MAGIC else "columnar-text"


def write_waveform_db(rec: EcgRecord, stem: str | Path,
                      beat_events: list[tuple[int, str]] | None = None) -> None:
    """Write header + data (and optionally a beat sidecar) for fixtures/tests."""
    stem = Path(stem)
    peak = np.abs(rec.signal).max(axis=1)
    gains = np.where(peak > 0, 32000.0 / np.maximum(peak, 1e-12), 1.0)
    lines = [f"{rec.record_id or stem.name} {rec.n_leads} {rec.fs:g} {rec.n_samples}"]
    lines += [f"{name} {gain:.6g}" for name, gain in zip(rec.lead_names, gains)]
    if rec.acquired_at is not None:
        lines.append(f"# acquired_at: {rec.acquired_at.isoformat()}")
    stem.with_suffix(".hea").write_text("\n".join(lines) + "\n")
    raw = np.clip(rec.signal * gains[:, None], -32767, 32767).astype("<i2")
    raw.T.tofile(stem.with_suffix(".dat"))
    if beat_events is not None:
        body = "\n".join(f"{idx} {label}" for idx, label in beat_events)
        stem.with_suffix(".ann").write_text(body + "\n")


def write_columnar_text(rec: EcgRecord, path: str | Path) -> None:
    path = Path(path)
    lines = [f"# record_id: {rec.record_id or path.stem}", f"# fs: {rec.fs:g}"]
    if rec.acquired_at is not None:
        lines.append(f"# acquired_at: {rec.acquired_at.isoformat()}")
    lines.append(",".join(rec.lead_names))
    for row in rec.signal.T:
        lines.append(",".join(f"{v:.6g}" for v in row))
    path.write_text("\n".join(lines) + "\n")


def write_interchange(rec: EcgRecord, path: str | Path) -> None:
    path = Path(path)
    header = {
        "record_id": rec.record_id or path.stem,
        "lead_names": list(rec.lead_names),
        "fs": rec.fs,
        "n_samples": rec.n_samples,
        "annotations": [[a.onset, a.offset, a.label] for a in rec.annotations],
        "acquired_at": rec.acquired_at.isoformat() if rec.acquired_at else None,
    }
    header_bytes = json.dumps(header).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack("<HI", _BINARY_VERSION, len(header_bytes)))
        fh.write(header_bytes)
        fh.write(rec.signal.astype("<f4").tobytes())
