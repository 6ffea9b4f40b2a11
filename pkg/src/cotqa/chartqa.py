"""ChartQA ingest: CSV tables to synthesized QA pairs, plus native annotations.

Synthesis is rule-based and fully deterministic: extrema use first-occurrence
tie-breaks, the ratio template draws rows from a generator seeded per table,
and the answer of every emitted pair can be recomputed from its provenance
cells. Malformed tables are skipped, never fatal.
"""

from __future__ import annotations

import hashlib
import math
import random
import re
from dataclasses import dataclass
from decimal import ROUND_HALF_UP, Decimal
from pathlib import Path
from typing import Iterable

import pandas as pd

from .errors import MalformedTable, NoUsableTemplate
from .io_utils import load_json
from .report import IngestReport
from .schema import UnifiedSample

TEMPLATE_ORDER = ("argmax_label", "argmin_label", "max_value", "min_value", "ratio")

_NA_MARKERS = {"", "na", "n/a", "nan", "null", "none", "-", "--"}
_THOUSANDS_RE = re.compile(r"(?<=\d),(?=\d)")


@dataclass
class ValueColumn:
    name: str
    values: list[float | None]

    def finite_rows(self) -> list[int]:
        return [i for i, v in enumerate(self.values) if v is not None]


@dataclass
class ChartTable:
    source_path: str
    category_name: str
    categories: list[str]
    value_columns: list[ValueColumn]
    row_count: int


@dataclass(frozen=True)
class Provenance:
    source_path: str
    column: str
    rows: tuple[int, ...]


@dataclass(frozen=True)
class SynthesizedQA:
    template_id: str
    question: str
    answer: str
    provenance: Provenance


def parse_cell(text: str) -> float | None:
    """Numeric value of one CSV cell, or None for missing/unparseable.

    Strips thousands separators, a leading currency sign, and a trailing
    percent sign (the printed number is kept, not divided by 100).
    """
    cell = text.strip()
    if cell.lower() in _NA_MARKERS:
        return None
    cell = _THOUSANDS_RE.sub("", cell)
    if cell.startswith("$"):
        cell = cell[1:].strip()
    if cell.endswith("%"):
        cell = cell[:-1].strip()
    try:
        value = float(cell)
    except ValueError:
        return None
    return value if math.isfinite(value) else None


def render_number(value: float) -> str:
    """Integers bare; otherwise 2 decimals rounded half-away-from-zero,
    trailing zeros trimmed."""
    if float(value).is_integer():
        return str(int(value))
    quantized = Decimal(repr(float(value))).quantize(Decimal("0.01"), ROUND_HALF_UP)
    text = format(quantized, "f").rstrip("0").rstrip(".")
    return "0" if text in ("-0", "") else text


def render_ratio(value: float) -> str:
    """Ratios always carry 2 decimals, rounded half-away-from-zero."""
    quantized = Decimal(repr(float(value))).quantize(Decimal("0.01"), ROUND_HALF_UP)
    text = format(quantized, "f")
    return "0.00" if text == "-0.00" else text


def parse_chart_csv(path: str | Path) -> ChartTable:
    """First column is categories; numeric-parseable columns become series.

    Cells failing numeric parse become missing; rows missing in every value
    column are dropped. Raises MalformedTable when fewer than two usable rows
    or no value column with two finite cells remain.
    """
    path = Path(path)
    try:
        frame = pd.read_csv(path, dtype=str, keep_default_na=False, skipinitialspace=True)
    except Exception as exc:
        raise MalformedTable(f"{path}: unreadable CSV ({exc})") from exc
    if frame.shape[1] < 2 or frame.shape[0] == 0:
        raise MalformedTable(f"{path}: need a category column plus data")

    category_name = str(frame.columns[0])
    categories = [str(c).strip() for c in frame.iloc[:, 0]]

    columns = []
    for name in frame.columns[1:]:
        parsed = [parse_cell(str(cell)) for cell in frame[name]]
        if any(v is not None for v in parsed):
            columns.append(ValueColumn(name=str(name), values=parsed))
    if not columns:
        raise MalformedTable(f"{path}: no numeric column")

    keep = [
        i
        for i in range(len(categories))
        if any(col.values[i] is not None for col in columns)
    ]
    categories = [categories[i] for i in keep]
    for col in columns:
        col.values = [col.values[i] for i in keep]

    table = ChartTable(
        source_path=str(path),
        category_name=category_name,
        categories=categories,
        value_columns=columns,
        row_count=len(keep),
    )
    if table.row_count < 2:
        raise MalformedTable(f"{path}: fewer than 2 usable rows")
    if not any(len(col.finite_rows()) >= 2 for col in columns):
        raise MalformedTable(f"{path}: no column with 2 finite values")
    return table


def _extremum_row(col: ValueColumn, largest: bool) -> int | None:
    """Row index of the extremum over finite cells; first occurrence wins ties."""
    rows = col.finite_rows()
    if not rows:
        return None
    best = rows[0]
    for i in rows[1:]:
        if (col.values[i] > col.values[best]) if largest else (col.values[i] < col.values[best]):
            best = i
    return best


def _draw_ratio_rows(col: ValueColumn, rng: random.Random) -> tuple[int, int] | None:
    """Two distinct finite rows with a non-zero denominator, or None."""
    rows = col.finite_rows()
    nonzero = [i for i in rows if col.values[i] != 0]
    if len(rows) < 2 or not nonzero:
        return None
    j = rng.choice(nonzero)
    i = rng.choice([r for r in rows if r != j])
    return i, j


def synthesize_qa(
    table: ChartTable, templates: Iterable[str], rng_seed: int
) -> list[SynthesizedQA]:
    """Apply the requested templates to every value column of one table.

    Output order is fixed (template order, then column order) and the ratio
    generator is seeded, so identical inputs give identical output. Raises
    NoUsableTemplate when the whole request yields nothing.
    """
    requested = set(templates)
    unknown = requested - set(TEMPLATE_ORDER)
    if unknown:
        raise NoUsableTemplate(f"unknown template ids: {sorted(unknown)}")
    rng = random.Random(rng_seed)
    out: list[SynthesizedQA] = []
    for template in TEMPLATE_ORDER:
        if template not in requested:
            continue
        for col in table.value_columns:
            qa = _apply_template(table, col, template, rng)
            if qa is not None:
                out.append(qa)
    if not out:
        raise NoUsableTemplate(
            f"{table.source_path}: no template in {sorted(requested)} applies"
        )
    return out


def _apply_template(
    table: ChartTable, col: ValueColumn, template: str, rng: random.Random
) -> SynthesizedQA | None:
    def prov(rows: tuple[int, ...]) -> Provenance:
        return Provenance(table.source_path, col.name, rows)
    if template == "argmax_label" or template == "argmin_label":
        largest = template == "argmax_label"
        row = _extremum_row(col, largest=largest)
        if row is None:
            return None
        word = "highest" if largest else "lowest"
        return SynthesizedQA(
            template_id=template,
            question=f"In which {table.category_name} was {col.name} {word}?",
            answer=table.categories[row],
            provenance=prov((row,)),
        )
    if template == "max_value" or template == "min_value":
        row = _extremum_row(col, largest=template == "max_value")
        if row is None:
            return None
        word = "highest" if template == "max_value" else "lowest"
        return SynthesizedQA(
            template_id=template,
            question=f"What was the {word} value of {col.name}?",
            answer=render_number(col.values[row]),
            provenance=prov((row,)),
        )
    if template == "ratio":
        drawn = _draw_ratio_rows(col, rng)
        if drawn is None:
            return None
        i, j = drawn
        return SynthesizedQA(
            template_id=template,
            question=(
                f"What is the ratio of {col.name} in {table.categories[i]} "
                f"to that in {table.categories[j]}?"
            ),
            answer=render_ratio(col.values[i] / col.values[j]),
            provenance=prov((i, j)),
        )
    return None


def recompute_answer(table: ChartTable, qa: SynthesizedQA) -> str:
    """Re-derive the answer from the provenance cells by the template's rule."""
    col = next(c for c in table.value_columns if c.name == qa.provenance.column)
    rows = qa.provenance.rows
    if qa.template_id in ("argmax_label", "argmin_label"):
        return table.categories[rows[0]]
    if qa.template_id in ("max_value", "min_value"):
        return render_number(col.values[rows[0]])
    if qa.template_id == "ratio":
        return render_ratio(col.values[rows[0]] / col.values[rows[1]])
    raise ValueError(f"unknown template {qa.template_id!r}")


def derive_table_seed(seed: int, table_key: str) -> int:
    """Stable per-table seed so files can be processed in any order or in parallel."""
    digest = hashlib.sha256(f"{seed}:{table_key}".encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big")


def _qa_to_sample(qa: SynthesizedQA, table_key: str, split: str) -> UnifiedSample:
    rows = "-".join(str(r) for r in qa.provenance.rows)
    stem = table_key.rsplit(".", 1)[0]
    return UnifiedSample(
        sample_id=f"{stem}|{qa.template_id}|{qa.provenance.column}|r{rows}",
        dataset="chartqa",
        split=split,
        question=qa.question,
        answer=qa.answer,
        choices=[],
        image_ref=f"{stem}.png",
    )


def synthesize_corpus(
    tables_dir: str | Path,
    templates: Iterable[str],
    seed: int,
    split: str = "train",
    report: IngestReport | None = None,
) -> list[UnifiedSample]:
    """Walk a CSV directory in sorted order and synthesize unified samples.

    Malformed or template-less tables are skipped with a report line.
    """
    tables_dir = Path(tables_dir)
    templates = list(templates)
    samples = []
    for path in sorted(tables_dir.rglob("*.csv")):
        key = path.relative_to(tables_dir).as_posix()
        try:
            table = parse_chart_csv(path)
            qas = synthesize_qa(table, templates, derive_table_seed(seed, key))
        except (MalformedTable, NoUsableTemplate) as exc:
            if report is not None:
                report.skip(str(exc))
            continue
        samples.extend(_qa_to_sample(qa, key, split) for qa in qas)
    return samples


def load_chartqa_native(
    annotations: list[dict],
    image_dir: str | Path,
    split: str = "train",
    report: IngestReport | None = None,
) -> list[UnifiedSample]:
    """Native annotation entries (image filename, question, answer) to samples.

    Entries whose image file is absent are skipped with a report line.
    Rationale-style fields missing from the source get "N/A" placeholders.
    """
    image_dir = Path(image_dir)
    samples = []
    for i, entry in enumerate(annotations):
        image_name = _first_key(entry, "imgname", "image_id", "image")
        question = _first_key(entry, "query", "question")
        answer = _first_key(entry, "label", "answer")
        if image_name is None or question is None or answer is None:
            if report is not None:
                report.skip(f"entry {i}: missing image/question/answer field")
            continue
        if not (image_dir / str(image_name)).is_file():
            if report is not None:
                report.skip(f"entry {i}: missing image file {image_name}")
            continue
        samples.append(
            UnifiedSample(
                sample_id=f"chartqa-{split}-{i:06d}",
                dataset="chartqa",
                split=split,
                question=str(question),
                answer=str(answer),
                choices=[],
                image_ref=str(image_name),
                rationales=["N/A"],
                lecture="N/A",
                solution="N/A",
            )
        )
    return samples


def load_native_annotations(path: str | Path) -> list[dict]:
    doc = load_json(path)
    if not isinstance(doc, list):
        raise ValueError(f"{path}: native annotations must be a JSON array")
    return doc


def _first_key(entry: dict, *keys: str):
    for key in keys:
        if key in entry:
            return entry[key]
    return None
