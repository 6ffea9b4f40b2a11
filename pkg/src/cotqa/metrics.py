"""Answer scoring and report aggregation.

Four metric families: exact match and token F1 over normalized text,
consensus against annotator answer lists, tolerance-based numeric accuracy,
and cosine similarity over externally supplied embeddings. A column that a
sample cannot define (no annotator list, non-numeric gold, no embeddings)
stays undefined; it is never coerced to 0.
"""

from __future__ import annotations

import hashlib
import json
import math
from collections import Counter
from dataclasses import dataclass

from .errors import (
    DimensionMismatch,
    EmptyAnswerList,
    EmptyReport,
    NoNumberFound,
    ZeroVector,
)
from .extraction import (
    ANCHOR_PHRASES,
    PredictionRecord,
    canonical_number_text,
    extract_numeric,
)
from .io_utils import read_jsonl
from .schema import UnifiedSample, normalize

SCHEMA_VERSION = 1

CONSENSUS_FULL = 3  # annotator matches at or above this earn the cap
NUMERIC_MODES = ("absolute", "relative")


def exact_match(pred: str, gt: str) -> int:
    return int(normalize(pred).text == normalize(gt).text)


def token_f1(pred: str, gt: str) -> float:
    """Multiset token overlap F1 over normalized tokens."""
    p = Counter(normalize(pred).tokens)
    g = Counter(normalize(gt).tokens)
    if not p and not g:
        return 1.0
    if not p or not g:
        return 0.0
    overlap = sum((p & g).values())
    if overlap == 0:
        return 0.0
    precision = overlap / sum(p.values())
    recall = overlap / sum(g.values())
    return 2 * precision * recall / (precision + recall)


def consensus_score(pred: str, human_answers: list[str], cap: float = 1.0) -> float:
    """Piecewise annotator-agreement score: cap / 0.6 / 0.3 / 0.0 for
    3+ / 2 / 1 / 0 matching annotators."""
    if not human_answers:
        raise EmptyAnswerList("consensus needs at least one human answer")
    if not cap > 0.6:
        raise ValueError("cap must exceed the 2-match score 0.6")
    target = normalize(pred).text
    matches = sum(1 for a in human_answers if normalize(a).text == target)
    if matches >= CONSENSUS_FULL:
        return cap
    if matches == 2:
        return 0.6
    if matches == 1:
        return 0.3
    return 0.0


def numeric_accuracy(
    pred: float, gt: float, mode: str = "absolute", epsilon: float = 0.02
) -> int:
    if mode not in NUMERIC_MODES:
        raise ValueError(f"mode must be one of {NUMERIC_MODES}")
    if not epsilon > 0:
        raise ValueError("epsilon must be positive")
    if mode == "relative" and gt != 0:
        return int(abs(pred - gt) < epsilon * abs(gt))
    return int(abs(pred - gt) < epsilon)


def cosine_similarity(pred_vec, gt_vec) -> float:
    if len(pred_vec) != len(gt_vec):
        raise DimensionMismatch(f"{len(pred_vec)} vs {len(gt_vec)}")
    dot = sum(a * b for a, b in zip(pred_vec, gt_vec))
    norm_p = math.sqrt(sum(a * a for a in pred_vec))
    norm_g = math.sqrt(sum(b * b for b in gt_vec))
    if norm_p == 0 or norm_g == 0:
        raise ZeroVector("cosine undefined for a zero vector")
    return max(-1.0, min(1.0, dot / (norm_p * norm_g)))


@dataclass(frozen=True)
class MetricConfig:
    epsilon: float = 0.02
    numeric_mode: str = "absolute"
    consensus_cap: float = 1.0
    anchors: tuple[str, ...] = ANCHOR_PHRASES

    def digest(self) -> str:
        payload = json.dumps(
            {
                "epsilon": self.epsilon,
                "numeric_mode": self.numeric_mode,
                "consensus_cap": self.consensus_cap,
                "anchors": list(self.anchors),
            },
            sort_keys=True,
        )
        return hashlib.sha256(payload.encode("utf-8")).hexdigest()[:12]


@dataclass(frozen=True)
class SampleScore:
    sample_id: str
    em: int
    f1: float
    consensus: float | None
    num_acc: int | None
    similarity: float | None


@dataclass
class MetricReport:
    per_sample: list[SampleScore]
    aggregate: dict[str, float | None]
    n_scored: int
    config_digest: str


def parse_numeric_answer(text: str) -> float | None:
    """Gold-answer numeric parse: the entire string must be a single number
    (number words mapped, thousands separators and $/% handled)."""
    cell = canonical_number_text(text).strip()
    if cell.startswith("$"):
        cell = cell[1:].strip()
    percent = cell.endswith("%")
    if percent:
        cell = cell[:-1].strip()
    try:
        value = float(cell)
    except ValueError:
        return None
    if not math.isfinite(value):
        return None
    return value / 100.0 if percent else value


def score_sample(
    sample: UnifiedSample,
    record: PredictionRecord,
    config: MetricConfig,
    embeddings: dict[str, tuple[float, ...]] | None = None,
) -> SampleScore:
    """One row of the report; undefined columns come back as None."""
    pred_text = record.extracted if record.extracted is not None else ""
    em = exact_match(pred_text, sample.answer) if pred_text else 0
    f1 = token_f1(pred_text, sample.answer) if pred_text else 0.0

    consensus = None
    if sample.raw_answers:
        consensus = consensus_score(pred_text, sample.raw_answers, config.consensus_cap)

    num_acc = None
    gt_num = parse_numeric_answer(sample.answer)
    if gt_num is not None:
        try:
            pred_num = extract_numeric(record.raw_output)
        except NoNumberFound:
            num_acc = 0
        else:
            num_acc = numeric_accuracy(
                pred_num, gt_num, config.numeric_mode, config.epsilon
            )

    similarity = None
    if embeddings is not None:
        pred_vec = embeddings.get(f"{sample.sample_id}#pred")
        gt_vec = embeddings.get(f"{sample.sample_id}#gt")
        if pred_vec is not None and gt_vec is not None:
            similarity = cosine_similarity(pred_vec, gt_vec)

    return SampleScore(sample.sample_id, em, f1, consensus, num_acc, similarity)


_COLUMNS = ("em", "f1", "consensus", "num_acc", "similarity")


def _mean_defined(values: list[float | None]) -> float | None:
    defined = [v for v in values if v is not None]
    return sum(defined) / len(defined) if defined else None


def aggregate(rows: list[SampleScore], config: MetricConfig) -> MetricReport:
    """Means over defined values only; an all-undefined column stays None."""
    if not rows:
        raise EmptyReport("no scored samples")
    means = {
        col: _mean_defined([getattr(r, col) for r in rows]) for col in _COLUMNS
    }
    return MetricReport(
        per_sample=list(rows),
        aggregate=means,
        n_scored=len(rows),
        config_digest=config.digest(),
    )


def report_to_dict(report: MetricReport) -> dict:
    return {
        "schema_version": SCHEMA_VERSION,
        "config_digest": report.config_digest,
        "n_scored": report.n_scored,
        "aggregate": report.aggregate,
        "per_sample": [
            {
                "sample_id": r.sample_id,
                "em": r.em,
                "f1": r.f1,
                "consensus": r.consensus,
                "num_acc": r.num_acc,
                "similarity": r.similarity,
            }
            for r in report.per_sample
        ],
    }


def _cell(value: float | None, as_percent: bool) -> str:
    if value is None:
        return "-"
    return f"{value * 100:.2f}" if as_percent else f"{value:.4f}"


def format_table(
    report: MetricReport, groups: dict[str, tuple[str, str]]
) -> str:
    """Aligned text table, one row per dataset/split, accuracy columns as
    percentages at 2 decimals and similarity as a raw cosine."""
    by_group: dict[tuple[str, str], list[SampleScore]] = {}
    for row in report.per_sample:
        key = groups.get(row.sample_id, ("unknown", "unknown"))
        by_group.setdefault(key, []).append(row)

    header = ["dataset", "split", "n", "em", "f1", "consensus", "num_acc", "similarity"]
    lines = [header]
    for key in sorted(by_group):
        rows = by_group[key]
        cells = [key[0], key[1], str(len(rows))]
        for col in _COLUMNS:
            mean = _mean_defined([getattr(r, col) for r in rows])
            cells.append(_cell(mean, as_percent=col != "similarity"))
        lines.append(cells)

    widths = [max(len(line[i]) for line in lines) for i in range(len(header))]
    rendered = []
    for line in lines:
        rendered.append("  ".join(cell.ljust(w) for cell, w in zip(line, widths)).rstrip())
    return "\n".join(rendered)


def read_embedding_sidecar(path) -> dict[str, tuple[float, ...]]:
    """JSONL {id, vector} sidecar; ids use the "<sample_id>#pred" and
    "<sample_id>#gt" convention."""
    vectors: dict[str, tuple[float, ...]] = {}
    for i, obj in enumerate(read_jsonl(path), start=1):
        if not isinstance(obj, dict) or "id" not in obj or "vector" not in obj:
            raise ValueError(f"{path}: record {i}: need id and vector fields")
        vec = obj["vector"]
        if not isinstance(vec, list) or not vec:
            raise ValueError(f"{path}: record {i}: vector must be a non-empty array")
        values = tuple(float(x) for x in vec)
        if not all(math.isfinite(x) for x in values):
            raise ValueError(f"{path}: record {i}: non-finite vector entry")
        vectors[str(obj["id"])] = values
    return vectors
