"""Unified sample schema and answer normalization.

Every dataset loader emits :class:`UnifiedSample`; every scorer compares
strings through :func:`normalize`. The JSON field order is fixed so that
re-serializing a parsed document is byte-identical.
"""

from __future__ import annotations

import json
import string
from dataclasses import dataclass, field, replace
from typing import Any, Iterable

DATASETS = ("okvqa", "aokvqa", "chartqa")
SPLITS = ("train", "val", "test")

# Canonical field order of the unified JSON objects. "image" is the wire
# name of UnifiedSample.image_ref. raw_answers rides last: consensus scoring
# needs the per-annotator lists, and additive fields sit after the core ones.
FIELD_ORDER = (
    "question",
    "choices",
    "answer",
    "image",
    "hint",
    "lecture",
    "solution",
    "caption",
    "rationales",
    "dataset",
    "split",
    "sample_id",
    "raw_answers",
)

# ASCII punctuation only; non-ASCII punctuation passes through untouched.
_PUNCT_TABLE = str.maketrans("", "", string.punctuation)


@dataclass(frozen=True)
class NormalizedAnswer:
    text: str
    tokens: tuple[str, ...]


def normalize(answer: str) -> NormalizedAnswer:
    """Lowercase, strip, drop ASCII punctuation, collapse whitespace runs.

    Total and idempotent: normalize(normalize(a).text).text == normalize(a).text.
    """
    text = answer.lower().translate(_PUNCT_TABLE)
    tokens = tuple(text.split())
    return NormalizedAnswer(text=" ".join(tokens), tokens=tokens)


@dataclass
class UnifiedSample:
    """One QA instance in the harmonized schema shared by all datasets.

    ``choices`` is empty iff the sample is open-ended. ``hint``, ``lecture``
    and ``solution`` are always present (possibly empty) so downstream
    consumers never hit a missing field.
    """

    sample_id: str
    dataset: str
    split: str
    question: str
    answer: str
    choices: list[str] = field(default_factory=list)
    raw_answers: list[str] = field(default_factory=list)
    image_ref: str = ""
    caption: str = ""
    rationales: list[str] = field(default_factory=list)
    hint: str = ""
    lecture: str = ""
    solution: str = ""

    def with_caption(self, caption: str) -> "UnifiedSample":
        return replace(self, caption=caption)


def resolve_answer_text(sample: UnifiedSample) -> str:
    """Answer as text; a bare zero-based index is resolved against choices."""
    if sample.choices and sample.answer not in sample.choices:
        if sample.answer.isdigit() and int(sample.answer) < len(sample.choices):
            return sample.choices[int(sample.answer)]
    return sample.answer


def validate_sample(sample: UnifiedSample) -> list[str]:
    """Return a description of every broken invariant; [] means valid."""
    violations = []
    if not sample.sample_id:
        violations.append("sample_id: must be a non-empty string")
    if sample.dataset not in DATASETS:
        violations.append(f"dataset: {sample.dataset!r} not one of {DATASETS}")
    if sample.split not in SPLITS:
        violations.append(f"split: {sample.split!r} not one of {SPLITS}")
    if not sample.question:
        violations.append("question: must be non-empty")
    if sample.choices:
        in_choices = sample.answer in sample.choices
        is_index = sample.answer.isdigit() and int(sample.answer) < len(sample.choices)
        if not (in_choices or is_index):
            violations.append(
                "answer: must equal one of choices or be a resolvable zero-based index"
            )
    for name in ("hint", "lecture", "solution"):
        if not isinstance(getattr(sample, name), str):
            violations.append(f"{name}: must always be present as a string")
    if not isinstance(sample.raw_answers, list) or any(
        not isinstance(a, str) for a in sample.raw_answers
    ):
        violations.append("raw_answers: must be a list of strings")
    if not isinstance(sample.rationales, list) or any(
        not isinstance(r, str) for r in sample.rationales
    ):
        violations.append("rationales: must be a list of strings")
    return violations


def validate_collection(samples: Iterable[UnifiedSample]) -> list[str]:
    """Per-sample violations plus duplicate sample_id checks per (dataset, split)."""
    violations = []
    seen: set[tuple[str, str, str]] = set()
    for sample in samples:
        for v in validate_sample(sample):
            violations.append(f"{sample.sample_id}: {v}")
        key = (sample.dataset, sample.split, sample.sample_id)
        if key in seen:
            violations.append(
                f"{sample.sample_id}: duplicate sample_id within ({sample.dataset}, {sample.split})"
            )
        seen.add(key)
    return violations


def sample_to_dict(sample: UnifiedSample) -> dict[str, Any]:
    """Serialize with the canonical field order; every field always written."""
    return {
        "question": sample.question,
        "choices": list(sample.choices),
        "answer": sample.answer,
        "image": sample.image_ref,
        "hint": sample.hint,
        "lecture": sample.lecture,
        "solution": sample.solution,
        "caption": sample.caption,
        "rationales": list(sample.rationales),
        "dataset": sample.dataset,
        "split": sample.split,
        "sample_id": sample.sample_id,
        "raw_answers": list(sample.raw_answers),
    }


def sample_from_dict(doc: dict[str, Any]) -> UnifiedSample:
    """Parse one unified-schema object; missing optionals become "" or []."""
    return UnifiedSample(
        sample_id=str(doc["sample_id"]),
        dataset=str(doc["dataset"]),
        split=str(doc["split"]),
        question=str(doc.get("question", "")),
        answer=str(doc.get("answer", "")),
        choices=[str(c) for c in doc.get("choices", []) or []],
        raw_answers=[str(a) for a in doc.get("raw_answers", []) or []],
        image_ref=str(doc.get("image", "")),
        caption=str(doc.get("caption", "") or ""),
        rationales=[str(r) for r in doc.get("rationales", []) or []],
        hint=str(doc.get("hint", "") or ""),
        lecture=str(doc.get("lecture", "") or ""),
        solution=str(doc.get("solution", "") or ""),
    )


def dumps_samples(samples: Iterable[UnifiedSample]) -> str:
    """Canonical unified-schema document: a JSON array, 2-space indent, UTF-8."""
    return json.dumps(
        [sample_to_dict(s) for s in samples], ensure_ascii=False, indent=2
    )


def loads_samples(text: str) -> list[UnifiedSample]:
    doc = json.loads(text)
    if not isinstance(doc, list):
        raise ValueError("unified-schema document must be a JSON array of samples")
    return [sample_from_dict(item) for item in doc]
