"""A-OKVQA ingest: columnar records to unified samples, plus sidecar joins.

The columnar container format is confined to :func:`iter_aokvqa_records`;
everything downstream sees plain :class:`AokvqaRecord` values. Image bytes
pass through undecoded; feature extraction happens upstream and arrives
here as a JSON sidecar.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator

from .errors import ChoiceIndexOutOfRange, EmptyChoices
from .io_utils import iter_json_array, load_json
from .report import IngestReport
from .schema import UnifiedSample

VISION_FEATURE_DIM = 1024

# Container filename stems per split, following the upstream distribution.
_SPLIT_GLOBS = {
    "train": "train-*.parquet",
    "val": "validation-*.parquet",
    "test": "test-*.parquet",
}


@dataclass
class AokvqaRecord:
    question_id: str
    image_id: str
    question: str
    choices: list[str]
    correct_choice_idx: int
    rationales: list[str] = field(default_factory=list)
    image_bytes: bytes = b""
    # Provenance of the row inside the columnar container.
    source_file: str = ""
    row: int = -1


@dataclass(frozen=True)
class VisionFeature:
    sample_id: str
    vector: tuple[float, ...]


@dataclass
class CaptionMap:
    entries: dict[str, str]


@dataclass
class SidecarReport:
    matched: list[str] = field(default_factory=list)
    caption_missing: list[str] = field(default_factory=list)
    feature_missing: list[str] = field(default_factory=list)
    duplicate_keys: list[str] = field(default_factory=list)


def convert_aokvqa(
    records: Iterable[AokvqaRecord],
    split: str,
    report: IngestReport | None = None,
) -> list[UnifiedSample]:
    """One unified sample per record; the answer is the indexed choice.

    Invalid records raise, unless a report is supplied; then they are
    recorded as skips so a long conversion survives isolated bad rows, and the
    cardinality law |output| + |skipped| == |input| holds either way.
    """
    samples = []
    for rec in records:
        try:
            samples.append(_convert_one(rec, split))
        except (ChoiceIndexOutOfRange, EmptyChoices) as exc:
            if report is None:
                raise
            report.skip(f"{rec.source_file}#row={rec.row}: {exc}")
    return samples


def _convert_one(rec: AokvqaRecord, split: str) -> UnifiedSample:
    if not rec.choices:
        raise EmptyChoices(f"question {rec.question_id}: empty choices list")
    if not 0 <= rec.correct_choice_idx < len(rec.choices):
        raise ChoiceIndexOutOfRange(
            f"question {rec.question_id}: index {rec.correct_choice_idx} "
            f"outside 0..{len(rec.choices) - 1}"
        )
    return UnifiedSample(
        sample_id=rec.question_id,
        dataset="aokvqa",
        split=split,
        question=rec.question,
        answer=rec.choices[rec.correct_choice_idx],
        choices=list(rec.choices),
        rationales=list(rec.rationales),
        image_ref=f"{rec.source_file}#row={rec.row}",
    )


def attach_sidecars(
    samples: list[UnifiedSample],
    captions: CaptionMap,
    features: Iterable[VisionFeature],
) -> tuple[list[UnifiedSample], SidecarReport]:
    """Fill captions and account for every sample; nothing is dropped.

    Duplicate feature ids resolve first-wins and are reported.
    """
    report = SidecarReport()
    feature_ids: set[str] = set()
    for feat in features:
        if feat.sample_id in feature_ids:
            report.duplicate_keys.append(feat.sample_id)
            continue
        feature_ids.add(feat.sample_id)

    enriched = []
    for sample in samples:
        caption = captions.entries.get(sample.sample_id, "")
        enriched.append(sample.with_caption(caption) if caption else sample)
        missing = False
        if not caption:
            report.caption_missing.append(sample.sample_id)
            missing = True
        if sample.sample_id not in feature_ids:
            report.feature_missing.append(sample.sample_id)
            missing = True
        if not missing:
            report.matched.append(sample.sample_id)
    return enriched, report


def load_caption_map(path: str | Path) -> CaptionMap:
    """Caption sidecar: a JSON object mapping question_id -> caption."""
    doc = load_json(path)
    if not isinstance(doc, dict):
        raise ValueError(f"{path}: caption sidecar must be a JSON object")
    entries = {}
    for qid, caption in doc.items():
        text = str(caption).strip()
        if not text:
            raise ValueError(f"{path}: caption for {qid!r} is empty")
        entries[str(qid)] = text
    return CaptionMap(entries=entries)


def iter_vision_features(path: str | Path) -> Iterator[VisionFeature]:
    """Stream {sample_id, vector} objects from a JSON array sidecar.

    Files can hold one 1024-wide vector per sample for a full split, so the
    array is decoded incrementally rather than loaded whole.
    """
    for i, obj in enumerate(iter_json_array(path)):
        if not isinstance(obj, dict) or "sample_id" not in obj or "vector" not in obj:
            raise ValueError(f"{path}[{i}]: expected an object with sample_id and vector")
        vector = obj["vector"]
        if len(vector) != VISION_FEATURE_DIM:
            raise ValueError(
                f"{path}[{i}]: vector has dimension {len(vector)}, "
                f"expected {VISION_FEATURE_DIM}"
            )
        values = tuple(float(v) for v in vector)
        if not all(math.isfinite(v) for v in values):
            raise ValueError(f"{path}[{i}]: vector contains non-finite entries")
        yield VisionFeature(sample_id=str(obj["sample_id"]), vector=values)


def iter_aokvqa_records(data_dir: str | Path, split: str) -> Iterator[AokvqaRecord]:
    """Adapter over the columnar container; the only code that reads parquet.

    Scans ``train-*.parquet`` / ``validation-*.parquet`` under ``data_dir``
    in sorted order. The nested image struct's bytes ride along undecoded.
    """
    import polars as pl

    pattern = _SPLIT_GLOBS.get(split)
    if pattern is None:
        raise ValueError(f"unknown split {split!r}")
    paths = sorted(Path(data_dir).glob(pattern))
    if not paths:
        raise FileNotFoundError(f"no {pattern} files under {data_dir}")
    for path in paths:
        frame = pl.read_parquet(path)
        for row_idx, row in enumerate(frame.iter_rows(named=True)):
            image = row.get("image") or {}
            image_bytes = image.get("bytes") if isinstance(image, dict) else None
            yield AokvqaRecord(
                question_id=str(row["question_id"]),
                image_id=str(row.get("image_id", "")),
                question=str(row["question"]),
                choices=[str(c) for c in (row.get("choices") or [])],
                correct_choice_idx=int(row["correct_choice_idx"]),
                rationales=[str(r) for r in (row.get("rationales") or [])],
                image_bytes=bytes(image_bytes) if image_bytes else b"",
                source_file=path.name,
                row=row_idx,
            )
