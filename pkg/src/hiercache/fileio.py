"""On-disk formats: feature streams, class banks, and run reports.

Stream container (little-endian throughout):
    header  magic "PCFS" | version u16 | dim u32 | patch_count u32 |
            class_count u32 | sample_count u64 | flags u32
    record  sample_id u64 | true_label i32 (-1 = unknown) |
            global feature dim*f32 | patch features patch_count*dim*f32
Flags: bit 0 = stream carries labels, bit 1 = stream carries patches.

Bank container:
    header  magic "PCBK" | version u16 | class_count u32 | dim u32 | tau f32
    then    class_count length-prefixed (u32) UTF-8 names
    then    class_count*dim f32 embedding rows

Features are stored as f32; all in-memory math runs in f64. Both containers
round-trip bit-exactly. Reports are written as one CSV row per processed
sample plus a JSON summary of run-level metrics.
"""

import csv
import json
import struct
import warnings

import numpy as np

from .cache import AdmissionStatus
from .encoding import ClassBank, EncodedSample
from .errors import FormatError, ShapeError
from .pipeline import RunReport, WARMUP_DISCARD

STREAM_MAGIC = b"PCFS"
BANK_MAGIC = b"PCBK"
FORMAT_VERSION = 1
FLAG_HAS_LABELS = 1
FLAG_HAS_PATCHES = 2

_STREAM_HEADER = struct.Struct("<4sHIIIQI")
_RECORD_PREFIX = struct.Struct("<Qi")
_BANK_HEADER = struct.Struct("<4sHIIf")
_U32 = struct.Struct("<I")

CSV_COLUMNS = ["sample_id", "true_label", "pred_zs", "pred_final",
               "h_zs", "h_top5_final", "admission", "cumulative_accuracy"]


def save_stream(path, samples, class_count: int = 0) -> None:
    """Write EncodedSample records to a stream container."""
    samples = list(samples)
    if not samples:
        raise ShapeError("cannot write a stream with no samples")
    dim = int(np.asarray(samples[0].global_feature).shape[0])
    patch_count = int(np.asarray(samples[0].patch_features).shape[0])
    has_labels = any(s.true_label is not None for s in samples)
    flags = (FLAG_HAS_LABELS if has_labels else 0) | (FLAG_HAS_PATCHES if patch_count else 0)
    with open(path, "wb") as fh:
        fh.write(_STREAM_HEADER.pack(STREAM_MAGIC, FORMAT_VERSION, dim,
                                     patch_count, class_count, len(samples), flags))
        for s in samples:
            g = np.ascontiguousarray(s.global_feature, dtype=np.float32)
            p = np.ascontiguousarray(s.patch_features, dtype=np.float32)
            if g.shape != (dim,) or p.shape != (patch_count, dim):
                raise ShapeError(
                    f"sample {s.sample_id} has shape {g.shape}/{p.shape}, "
                    f"expected ({dim},)/({patch_count}, {dim})")
            label = -1 if s.true_label is None else int(s.true_label)
            fh.write(_RECORD_PREFIX.pack(int(s.sample_id), label))
            fh.write(g.tobytes())
            fh.write(p.tobytes())


class StreamReader:
    """Lazy record-at-a-time reader over a stream container."""

    def __init__(self, path):
        self._path = path
        self._fh = open(path, "rb")
        header = self._fh.read(_STREAM_HEADER.size)
        if len(header) < _STREAM_HEADER.size:
            self._fh.close()
            raise FormatError("stream header truncated", byte_offset=len(header))
        magic, version, dim, patch_count, class_count, count, flags = \
            _STREAM_HEADER.unpack(header)
        if magic != STREAM_MAGIC:
            self._fh.close()
            raise FormatError(f"bad stream magic {magic!r}", byte_offset=0)
        if version != FORMAT_VERSION:
            self._fh.close()
            raise FormatError(f"unsupported stream version {version}", byte_offset=4)
        self.dim = dim
        self.patch_count = patch_count
        self.class_count = class_count
        self.sample_count = count
        self.has_labels = bool(flags & FLAG_HAS_LABELS)
        self.has_patches = bool(flags & FLAG_HAS_PATCHES)
        self._record_bytes = (_RECORD_PREFIX.size
                              + 4 * dim + 4 * patch_count * dim)
        self._next_index = 0

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()

    def close(self):
        self._fh.close()

    def __iter__(self):
        while self._next_index < self.sample_count:
            yield self._read_record()
        tail = self._fh.read(1)
        if tail:
            raise FormatError("trailing bytes after final record",
                              byte_offset=self._fh.tell() - 1,
                              record_index=self.sample_count)

    def _read_record(self) -> EncodedSample:
        index = self._next_index
        offset = self._fh.tell()
        blob = self._fh.read(self._record_bytes)
        if len(blob) < self._record_bytes:
            raise FormatError("stream record truncated",
                              byte_offset=offset, record_index=index)
        sample_id, label = _RECORD_PREFIX.unpack_from(blob, 0)
        floats = np.frombuffer(blob, dtype="<f4", offset=_RECORD_PREFIX.size)
        if not np.all(np.isfinite(floats)):
            raise FormatError("non-finite feature values",
                              byte_offset=offset, record_index=index)
        g = floats[:self.dim].copy()
        p = floats[self.dim:].reshape(self.patch_count, self.dim).copy()
        self._next_index += 1
        return EncodedSample(global_feature=g, patch_features=p,
                             sample_id=int(sample_id),
                             true_label=None if label < 0 else int(label))


def load_stream(path) -> StreamReader:
    return StreamReader(path)


def save_bank(path, bank: ClassBank) -> None:
    with open(path, "wb") as fh:
        fh.write(_BANK_HEADER.pack(BANK_MAGIC, FORMAT_VERSION,
                                   bank.num_classes, bank.dim, bank.tau))
        for name in bank.class_names:
            raw = name.encode("utf-8")
            fh.write(_U32.pack(len(raw)))
            fh.write(raw)
        fh.write(np.ascontiguousarray(bank.embeddings, dtype="<f4").tobytes())


def load_bank(path) -> ClassBank:
    """Read a bank container, renormalizing rows that drifted off unit norm."""
    with open(path, "rb") as fh:
        header = fh.read(_BANK_HEADER.size)
        if len(header) < _BANK_HEADER.size:
            raise FormatError("bank header truncated", byte_offset=len(header))
        magic, version, class_count, dim, tau = _BANK_HEADER.unpack(header)
        if magic != BANK_MAGIC:
            raise FormatError(f"bad bank magic {magic!r}", byte_offset=0)
        if version != FORMAT_VERSION:
            raise FormatError(f"unsupported bank version {version}", byte_offset=4)
        names = []
        for i in range(class_count):
            offset = fh.tell()
            raw_len = fh.read(_U32.size)
            if len(raw_len) < _U32.size:
                raise FormatError("bank name table truncated",
                                  byte_offset=offset, record_index=i)
            (n,) = _U32.unpack(raw_len)
            raw = fh.read(n)
            if len(raw) < n:
                raise FormatError("bank name truncated",
                                  byte_offset=offset, record_index=i)
            names.append(raw.decode("utf-8"))
        offset = fh.tell()
        blob = fh.read(4 * class_count * dim)
        if len(blob) < 4 * class_count * dim:
            raise FormatError("bank embedding rows truncated", byte_offset=offset)
        if fh.read(1):
            raise FormatError("trailing bytes after bank rows", byte_offset=fh.tell() - 1)
    rows = np.frombuffer(blob, dtype="<f4").reshape(class_count, dim).copy()
    if not np.all(np.isfinite(rows)):
        raise FormatError("non-finite bank embeddings", byte_offset=offset)
    norms = np.linalg.norm(rows.astype(np.float64), axis=1)
    drift = np.abs(norms - 1.0)
    if np.any(drift > 1e-4):
        warnings.warn(f"bank rows deviate from unit norm by up to {drift.max():.2e}; "
                      "renormalizing", stacklevel=2)
    off_norm = drift > 1e-5
    if np.any(off_norm):
        if np.any(norms[off_norm] == 0.0):
            raise FormatError("zero-norm bank row")
        rows[off_norm] = (rows[off_norm].astype(np.float64)
                          / norms[off_norm, None]).astype(np.float32)
    return ClassBank(embeddings=rows, class_names=tuple(names), tau=float(tau))


def _fmt(value: float) -> str:
    return repr(float(value))


def write_report_csv(report: RunReport, path) -> None:
    """One CSV row per processed sample; no wall-time columns."""
    correct = 0
    labeled = 0
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(CSV_COLUMNS)
        for rec in report.records:
            if rec.true_label is not None:
                labeled += 1
                if rec.predicted == rec.true_label:
                    correct += 1
            writer.writerow([
                rec.sample_id,
                -1 if rec.true_label is None else rec.true_label,
                rec.zs_predicted,
                rec.predicted,
                _fmt(rec.zs_entropy),
                _fmt(rec.top5_entropy),
                rec.admission.status.value if rec.admission else "skipped",
                _fmt(correct / labeled) if labeled else "",
            ])


def write_report_summary(report: RunReport, path, config_echo: dict | None = None) -> None:
    payload = {
        "mode": report.mode.value,
        "sample_count": report.sample_count,
        "final_accuracy": report.final_accuracy,
        "mean_top5_entropy": report.mean_top5_entropy,
        "mean_zs_entropy": report.mean_zs_entropy,
        "mean_zs_top5_entropy": report.mean_zs_top5_entropy,
        "throughput_samples_per_sec": report.throughput,
        "accuracy_series_start": WARMUP_DISCARD + 1,
        "accuracy_series_len": len(report.accuracy_series),
    }
    if config_echo:
        payload["config"] = config_echo
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def read_report_rows(path) -> list[dict]:
    """Parse a report CSV back into typed per-sample rows."""
    rows = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != CSV_COLUMNS:
            raise FormatError(f"unexpected report columns {reader.fieldnames}")
        for raw in reader:
            rows.append({
                "sample_id": int(raw["sample_id"]),
                "true_label": int(raw["true_label"]),
                "pred_zs": int(raw["pred_zs"]),
                "pred_final": int(raw["pred_final"]),
                "h_zs": float(raw["h_zs"]),
                "h_top5_final": float(raw["h_top5_final"]),
                "admission": raw["admission"],
                "cumulative_accuracy": (float(raw["cumulative_accuracy"])
                                        if raw["cumulative_accuracy"] else None),
            })
    return rows


def summarize_rows(rows: list[dict]) -> dict:
    """Recompute run-level metrics from raw CSV rows (the report verb path)."""
    if not rows:
        raise FormatError("report has no rows")
    labeled = [r for r in rows if r["true_label"] >= 0]
    correct = sum(1 for r in labeled if r["pred_final"] == r["true_label"])
    accuracy_series = []
    seen_correct = 0
    seen_labeled = 0
    for i, r in enumerate(rows):
        if r["true_label"] >= 0:
            seen_labeled += 1
            if r["pred_final"] == r["true_label"]:
                seen_correct += 1
        if i + 1 > WARMUP_DISCARD:
            accuracy_series.append(seen_correct / seen_labeled
                                   if seen_labeled else float("nan"))
    entropy_series = []
    running = 0.0
    for i, r in enumerate(rows):
        running += r["h_top5_final"]
        entropy_series.append(running / (i + 1))
    return {
        "sample_count": len(rows),
        "final_accuracy": (correct / len(labeled)) if labeled else float("nan"),
        "mean_top5_entropy": float(np.mean([r["h_top5_final"] for r in rows])),
        "mean_zs_entropy": float(np.mean([r["h_zs"] for r in rows])),
        "accuracy_series": accuracy_series,
        "entropy_series": entropy_series,
        "admissions": {status.value: sum(1 for r in rows if r["admission"] == status.value)
                       for status in AdmissionStatus},
    }
