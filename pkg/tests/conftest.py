"""Shared fixture builders for the test suite.

Everything is generated into tmp_path so tests never depend on checked-in
binary files; the parquet fixtures go through polars, the same library the
adapter reads with.
"""

from __future__ import annotations

import json
from pathlib import Path

import pytest

from cotqa.schema import UnifiedSample, dumps_samples

VEC_DIM = 1024


def unit_vector(hot: int, dim: int = VEC_DIM) -> list[float]:
    vec = [0.0] * dim
    vec[hot % dim] = 1.0
    return vec


def okvqa_questions_doc() -> dict:
    return {
        "questions": [
            {"question_id": 101, "image_id": 12, "question": "What animal is this?"},
            {"question_id": 102, "image_id": 34, "question": "What color is the bus?"},
            {"question_id": 103, "image_id": 56, "question": "What sport is shown?"},
        ]
    }


def okvqa_annotations_doc() -> dict:
    def ans(*texts):
        return [{"answer": t} for t in texts]

    return {
        "annotations": [
            # clear majority: dog
            {"question_id": 101, "answers": ans(
                "dog", "dog", "Dog", "puppy", "dog", "canine", "dog", "dog",
                "puppy", "dog")},
            # tie between blue and red; lexicographic pick is blue
            {"question_id": 102, "answers": ans(
                "blue", "red", "Blue", "Red", "green", "blue", "red", "yellow",
                "blue", "red")},
            {"question_id": 103, "answers": ans(
                "tennis", "tennis", "tennis", "badminton", "tennis", "tennis",
                "tennis", "racquetball", "tennis", "tennis")},
        ]
    }


@pytest.fixture
def okvqa_files(tmp_path):
    questions = tmp_path / "okvqa_questions.json"
    annotations = tmp_path / "okvqa_annotations.json"
    questions.write_text(json.dumps(okvqa_questions_doc()), encoding="utf-8")
    annotations.write_text(json.dumps(okvqa_annotations_doc()), encoding="utf-8")
    return questions, annotations


AOKVQA_ROWS = [
    {
        "question_id": "aok-1",
        "image_id": "img-1",
        "question": "What is the man holding?",
        "choices": ["umbrella", "bat", "kite"],
        "correct_choice_idx": 1,
        "rationales": ["He is at a baseball plate.", "A bat is in his hands."],
        "image": {"bytes": b"\x89PNG-fake-1", "path": "img-1.jpg"},
    },
    {
        "question_id": "aok-2",
        "image_id": "img-2",
        "question": "Why is the street wet?",
        "choices": ["rain", "paint", "flood", "cleaning"],
        "correct_choice_idx": 0,
        "rationales": ["Clouds and umbrellas suggest rain."],
        "image": {"bytes": b"\x89PNG-fake-2", "path": "img-2.jpg"},
    },
    {
        "question_id": "aok-3",
        "image_id": "img-3",
        "question": "What meal is shown?",
        "choices": ["breakfast", "dinner"],
        "correct_choice_idx": 0,
        "rationales": [],
        "image": {"bytes": b"\x89PNG-fake-3", "path": "img-3.jpg"},
    },
]


def write_aokvqa_parquet(data_dir: Path, split: str = "val", rows=None) -> Path:
    import polars as pl

    rows = AOKVQA_ROWS if rows is None else rows
    stem = {"train": "train", "val": "validation", "test": "test"}[split]
    data_dir.mkdir(parents=True, exist_ok=True)
    path = data_dir / f"{stem}-00000-of-00001.parquet"
    pl.DataFrame(rows).write_parquet(path)
    return path


@pytest.fixture
def aokvqa_dir(tmp_path):
    data_dir = tmp_path / "aokvqa"
    write_aokvqa_parquet(data_dir, "val")
    return data_dir


@pytest.fixture
def caption_file(tmp_path):
    path = tmp_path / "captions.json"
    path.write_text(
        json.dumps({"aok-1": "a batter mid-swing", "aok-2": "a rainy street"}),
        encoding="utf-8",
    )
    return path


@pytest.fixture
def features_file(tmp_path):
    path = tmp_path / "features.json"
    rows = [
        {"sample_id": "aok-1", "vector": unit_vector(0)},
        {"sample_id": "aok-2", "vector": unit_vector(1)},
        {"sample_id": "aok-3", "vector": unit_vector(2)},
    ]
    path.write_text(json.dumps(rows), encoding="utf-8")
    return path


YEARS_CSV = "year,revenue\n2019,3\n2020,7\n2021,5\n"

SALES_CSV = (
    "region,units,growth,note\n"
    "north,\"1,200\",4.5%,steady\n"
    "south,800,,volatile\n"
    "east,950,2.0%,flat\n"
)

TEXT_ONLY_CSV = "name,owner\nalpha,ann\nbeta,bob\n"


def write_chart_corpus(tables_dir: Path) -> Path:
    tables_dir.mkdir(parents=True, exist_ok=True)
    (tables_dir / "years.csv").write_text(YEARS_CSV, encoding="utf-8")
    (tables_dir / "sales.csv").write_text(SALES_CSV, encoding="utf-8")
    (tables_dir / "broken.csv").write_text(TEXT_ONLY_CSV, encoding="utf-8")
    return tables_dir


@pytest.fixture
def chart_corpus(tmp_path):
    return write_chart_corpus(tmp_path / "tables")


def make_unified_samples() -> list[UnifiedSample]:
    """A small mixed-dataset collection for prompt and scoring tests."""
    return [
        UnifiedSample(
            sample_id="ok-1", dataset="okvqa", split="val",
            question="What animal is this?", answer="dog", choices=[],
            raw_answers=["dog", "dog", "Dog", "puppy", "dog", "canine",
                         "dog", "dog", "puppy", "dog"],
            image_ref="COCO_val2014_000000000012.jpg",
        ),
        UnifiedSample(
            sample_id="aok-1", dataset="aokvqa", split="val",
            question="What is the man holding?", answer="bat",
            choices=["umbrella", "bat", "kite"],
            rationales=["He is at a baseball plate."],
            caption="a batter mid-swing", image_ref="validation-0.parquet#row=0",
        ),
        UnifiedSample(
            sample_id="chart-1", dataset="chartqa", split="train",
            question="In which year was revenue highest?", answer="2020",
            choices=[], image_ref="years.png",
        ),
        UnifiedSample(
            sample_id="chart-2", dataset="chartqa", split="train",
            question="What was the highest value of revenue?", answer="7",
            choices=[], image_ref="years.png",
        ),
    ]


@pytest.fixture
def unified_file(tmp_path):
    path = tmp_path / "unified.json"
    path.write_text(dumps_samples(make_unified_samples()), encoding="utf-8")
    return path


PREDICTION_ROWS = [
    {"sample_id": "ok-1", "output": "It looks friendly. The answer is dog."},
    {"sample_id": "aok-1", "output": "He swings at a pitch. The answer is (B)"},
    {"sample_id": "chart-1", "output": "Revenue peaked then. The final answer is 2020"},
    {"sample_id": "chart-2", "output": "The bars rise to 7. The final answer is 7"},
]


@pytest.fixture
def predictions_file(tmp_path):
    path = tmp_path / "predictions.jsonl"
    lines = [json.dumps(row) for row in PREDICTION_ROWS]
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


@pytest.fixture
def embeddings_file(tmp_path):
    path = tmp_path / "embeddings.jsonl"
    rows = [
        {"id": "ok-1#pred", "vector": [1.0, 0.0]},
        {"id": "ok-1#gt", "vector": [1.0, 0.0]},
        {"id": "aok-1#pred", "vector": [0.6, 0.8]},
        {"id": "aok-1#gt", "vector": [0.0, 1.0]},
    ]
    path.write_text("\n".join(json.dumps(r) for r in rows) + "\n", encoding="utf-8")
    return path
