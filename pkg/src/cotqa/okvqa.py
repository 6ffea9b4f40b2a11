"""OK-VQA ingest: question/annotation JSON to unified samples.

Answers come from multiple annotators per question; the canonical answer is
the most frequent normalized form, ties broken by the lexicographically
smallest normalized answer so repeated runs agree byte-for-byte.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass
from typing import Any

from .errors import EmptyAnswerList, MalformedRecord, QuestionAnnotationMismatch
from .report import IngestReport
from .schema import UnifiedSample, normalize

# Mean annotator answers per question in the full dataset, per split. Loads
# that deviate by more than the tolerance only warn, so truncated fixtures
# still load.
EXPECTED_AVG_ANSWERS = {"train": 8.7, "val": 8.6, "test": 8.5}
AVG_ANSWERS_TOLERANCE = 0.20


@dataclass
class AnnotatedAnswerSet:
    question_id: str
    answers: list[str]
    canonical: str
    counts: dict[str, int]


def majority_vote(answers: list[str], question_id: str = "") -> AnnotatedAnswerSet:
    """Pick the highest-frequency normalized answer; originals are preserved."""
    if not answers:
        raise EmptyAnswerList(f"question {question_id or '<unknown>'}: no answers")
    counts = Counter(normalize(a).text for a in answers)
    best = max(counts.values())
    canonical = min(text for text, n in counts.items() if n == best)
    return AnnotatedAnswerSet(
        question_id=question_id,
        answers=list(answers),
        canonical=canonical,
        counts=dict(counts),
    )


def coco_image_ref(split: str, image_id: int) -> str:
    """COCO-style filename, zero-padded to 12 digits, keyed by split."""
    return f"COCO_{split}2014_{int(image_id):012d}.jpg"


def _question_records(questions_doc: dict[str, Any]) -> list[dict[str, Any]]:
    records = questions_doc.get("questions")
    if not isinstance(records, list):
        raise MalformedRecord("questions document: missing 'questions' array")
    for i, rec in enumerate(records):
        for key in ("question_id", "image_id", "question"):
            if not isinstance(rec, dict) or key not in rec:
                raise MalformedRecord(f"questions[{i}]: missing {key!r}")
    return records


def _annotation_answers(annotations_doc: dict[str, Any]) -> dict[str, list[str]]:
    records = annotations_doc.get("annotations")
    if not isinstance(records, list):
        raise MalformedRecord("annotations document: missing 'annotations' array")
    by_qid: dict[str, list[str]] = {}
    for i, rec in enumerate(records):
        if not isinstance(rec, dict) or "question_id" not in rec:
            raise MalformedRecord(f"annotations[{i}]: missing 'question_id'")
        raw = rec.get("answers")
        if not isinstance(raw, list) or not raw:
            raise MalformedRecord(f"annotations[{i}]: missing non-empty 'answers'")
        answers = []
        for j, entry in enumerate(raw):
            if not isinstance(entry, dict) or "answer" not in entry:
                raise MalformedRecord(f"annotations[{i}].answers[{j}]: missing 'answer'")
            answers.append(str(entry["answer"]))
        by_qid[str(rec["question_id"])] = answers
    return by_qid


def load_okvqa(
    questions_doc: dict[str, Any],
    annotations_doc: dict[str, Any],
    split: str,
    report: IngestReport | None = None,
) -> list[UnifiedSample]:
    """Join questions to annotations by question_id; one open-ended sample each.

    Single pass over each document plus one hash join, so O(n) in record count.
    """
    questions = _question_records(questions_doc)
    answers_by_qid = _annotation_answers(annotations_doc)

    samples = []
    seen_qids = set()
    for rec in questions:
        qid = str(rec["question_id"])
        seen_qids.add(qid)
        if qid not in answers_by_qid:
            raise QuestionAnnotationMismatch(f"question {qid} has no annotation")
        voted = majority_vote(answers_by_qid[qid], question_id=qid)
        samples.append(
            UnifiedSample(
                sample_id=qid,
                dataset="okvqa",
                split=split,
                question=str(rec["question"]),
                answer=voted.canonical,
                choices=[],
                raw_answers=voted.answers,
                image_ref=coco_image_ref(split, rec["image_id"]),
            )
        )
    orphans = set(answers_by_qid) - seen_qids
    if orphans:
        qid = sorted(orphans)[0]
        raise QuestionAnnotationMismatch(f"annotation {qid} has no question")

    if report is not None and samples:
        mean = sum(len(s.raw_answers) for s in samples) / len(samples)
        expected = EXPECTED_AVG_ANSWERS.get(split)
        if expected and abs(mean - expected) / expected > AVG_ANSWERS_TOLERANCE:
            report.warn(
                f"average answers per question is {mean:.2f}, expected about "
                f"{expected} for the full {split} split"
            )
    return samples
