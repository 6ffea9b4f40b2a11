"""Answer recovery from free-form model output.

Three extractors: MCQ letters, anchored open-ended spans, and numeric tokens.
The anchor phrase list is this package's own convention (the patterns are
configuration, not scripture); when an anchored candidate and a positional
fallback both exist, the anchored one wins.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

from .errors import EmptyExtraction, NoLetterFound, NoNumberFound, TooManyChoices
from .io_utils import read_jsonl
from .schema import UnifiedSample, normalize

ANCHOR_PHRASES = ("the answer is", "final answer:", "final answer is", "answer:")

RULE_MCQ = "mcq_letter"
RULE_ANCHORED = "anchored_open"
RULE_LAST_NUMERIC = "last_numeric"
RULE_WHOLE = "whole_output"

_MCQ_ANCHOR = "the answer is"
_SENTENCE_END_RE = re.compile(r"[.!?]")
_NUMBER_RE = re.compile(r"(?<![\d.])[-+]?(?:\d+\.\d+|\d+|\.\d+)")
_THOUSANDS_RE = re.compile(r"(?<=\d),(?=\d)")

_UNITS = (
    "zero one two three four five six seven eight nine ten eleven twelve "
    "thirteen fourteen fifteen sixteen seventeen eighteen nineteen twenty"
).split()
_TENS = {"thirty": 30, "forty": 40, "fifty": 50, "sixty": 60,
         "seventy": 70, "eighty": 80, "ninety": 90}
NUMBER_WORDS = {w: i for i, w in enumerate(_UNITS)} | _TENS
# longest alternatives first so "seventeen" is not eaten by "seven"
_NUMBER_WORD_RE = re.compile(
    r"\b(" + "|".join(sorted(NUMBER_WORDS, key=len, reverse=True)) + r")\b",
    re.IGNORECASE,
)


@dataclass(frozen=True)
class PredictionRecord:
    sample_id: str
    raw_output: str
    extracted: str | None = None
    extraction_rule: str | None = None

    def __post_init__(self):
        if (self.extracted is None) != (self.extraction_rule is None):
            raise ValueError("extracted and extraction_rule must be set together")


def _last_anchor_end(text: str, anchors=ANCHOR_PHRASES) -> int | None:
    """End offset of the rightmost-ending anchor occurrence, or None."""
    lowered = text.lower()
    best = None
    for anchor in anchors:
        at = lowered.rfind(anchor)
        if at >= 0:
            end = at + len(anchor)
            if best is None or end > best:
                best = end
    return best


def extract_mcq(raw: str, n_choices: int) -> int:
    """Index of the first standalone choice letter, scanning after the last
    "The answer is" if present, else the whole output."""
    if n_choices < 2:
        raise ValueError("n_choices must be at least 2")
    if n_choices > 26:
        raise TooManyChoices(f"{n_choices} choices exceed A-Z")
    anchor_end = _last_anchor_end(raw, anchors=(_MCQ_ANCHOR,))
    span = raw[anchor_end:] if anchor_end is not None else raw
    last = chr(ord("A") + n_choices - 1)
    pattern = re.compile(
        rf"(?<![A-Za-z0-9])\(?([A-{last}a-{last.lower()}])\)?(?![A-Za-z0-9])"
    )
    match = pattern.search(span)
    if match is None:
        raise NoLetterFound(f"no letter A-{last} in output")
    return ord(match.group(1).upper()) - ord("A")


def _open_span(raw: str) -> tuple[str, str]:
    """Candidate answer span and the rule that produced it."""
    anchor_end = _last_anchor_end(raw)
    if anchor_end is not None:
        span = raw[anchor_end:]
        stop = _SENTENCE_END_RE.search(span)
        if stop is not None:
            span = span[: stop.start()]
        return span, RULE_ANCHORED
    return raw.splitlines()[0] if raw else "", RULE_WHOLE


def extract_open_with_rule(raw: str) -> tuple[str, str]:
    span, rule = _open_span(raw)
    text = normalize(span).text
    if not text:
        raise EmptyExtraction("extracted span normalizes to empty")
    return text, rule


def extract_open(raw: str) -> str:
    return extract_open_with_rule(raw)[0]


def _scan_numbers(text: str) -> list[tuple[float, int]]:
    """(value, end offset) for every numeric token; percent divides by 100."""
    out = []
    for match in _NUMBER_RE.finditer(text):
        value = float(match.group(0))
        end = match.end()
        trailer = text[end : end + 2]
        if trailer[:1] == "%" or trailer == " %":
            value /= 100.0
        out.append((value, end))
    return out


def canonical_number_text(raw: str) -> str:
    """Number words mapped to digits, thousands separators stripped."""
    text = _NUMBER_WORD_RE.sub(lambda m: str(NUMBER_WORDS[m.group(1).lower()]), raw)
    return _THOUSANDS_RE.sub("", text)


def extract_numeric_with_rule(raw: str) -> tuple[float, str]:
    text = canonical_number_text(raw)
    anchor_end = _last_anchor_end(text)
    if anchor_end is not None:
        after = _scan_numbers(text[anchor_end:])
        if after:
            return after[0][0], RULE_ANCHORED
    tokens = _scan_numbers(text)
    if not tokens:
        raise NoNumberFound("no numeric token in output")
    return tokens[-1][0], RULE_LAST_NUMERIC


def extract_numeric(raw: str) -> float:
    return extract_numeric_with_rule(raw)[0]


def format_number(value: float) -> str:
    """Canonical text for an extracted number: integers bare, else repr."""
    return str(int(value)) if float(value).is_integer() else repr(float(value))


def extract_for_sample(sample: UnifiedSample, raw_output: str) -> PredictionRecord:
    """Extract with the rule family the sample's shape calls for.

    MCQ when choices exist, numeric for chart questions, anchored open
    otherwise. Failures yield a record with no extraction rather than raising.
    """
    try:
        if sample.choices:
            idx = extract_mcq(raw_output, len(sample.choices))
            return PredictionRecord(sample.sample_id, raw_output,
                                    sample.choices[idx], RULE_MCQ)
        if sample.dataset == "chartqa":
            value, rule = extract_numeric_with_rule(raw_output)
            return PredictionRecord(sample.sample_id, raw_output,
                                    format_number(value), rule)
        text, rule = extract_open_with_rule(raw_output)
        return PredictionRecord(sample.sample_id, raw_output, text, rule)
    except (NoLetterFound, EmptyExtraction, NoNumberFound):
        return PredictionRecord(sample.sample_id, raw_output)


def read_predictions(path) -> dict[str, str]:
    """JSONL prediction intake: one {sample_id, output} object per line.

    Unknown fields are ignored; a repeated sample_id keeps the last line.
    """
    outputs: dict[str, str] = {}
    for i, obj in enumerate(read_jsonl(path), start=1):
        if not isinstance(obj, dict) or "sample_id" not in obj or "output" not in obj:
            raise ValueError(f"{path}: record {i}: need sample_id and output fields")
        outputs[str(obj["sample_id"])] = str(obj["output"])
    return outputs
