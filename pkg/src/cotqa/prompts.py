"""Two-stage prompt construction.

Stage 1 asks for a rationale; stage 2 repeats the sample head, inserts the
rationale, and ends with the extraction anchor "The answer is". Prompts are
byte-exact: single "\\n" separators, no trailing newline, caption line omitted
(not blank) when the sample has no caption.
"""

from __future__ import annotations

from dataclasses import dataclass

from .errors import TooManyChoices
from .schema import UnifiedSample

STAGE1_TERMINATOR = "Generate the rationale:"
STAGE2_TERMINATOR = "The answer is"
NUMERIC_INSTRUCTION = (
    "Explain your reasoning step-by-step and then provide the final answer."
)
IMAGE_MARKER = "<image>"
RATIONALE_SLOT = "{rationale}"

_ALPHABET = "ABCDEFGHIJKLMNOPQRSTUVWXYZ"


@dataclass(frozen=True)
class PromptPair:
    sample_id: str
    stage1_input: str
    stage2_input_template: str


def choice_letter(index: int) -> str:
    if not 0 <= index < len(_ALPHABET):
        raise TooManyChoices(f"choice index {index} beyond letters A-Z")
    return _ALPHABET[index]


def parse_letter(letter: str) -> int:
    index = _ALPHABET.find(letter.upper())
    if index < 0:
        raise ValueError(f"not a choice letter: {letter!r}")
    return index


def _head_lines(sample: UnifiedSample) -> list[str]:
    """Lines shared by both stages, before any stage-specific tail."""
    if sample.dataset == "chartqa":
        return [f"Question: {sample.question}", f"Image: {IMAGE_MARKER}"]
    lines = [f"Question: {sample.question}"]
    if sample.caption:
        lines.append(f"Caption: {sample.caption}")
    if sample.choices:
        if len(sample.choices) > len(_ALPHABET):
            raise TooManyChoices(
                f"{sample.sample_id}: {len(sample.choices)} choices exceed A-Z"
            )
        lines.append("Options:")
        lines.extend(
            f"({choice_letter(i)}) {choice}" for i, choice in enumerate(sample.choices)
        )
    return lines


def build_stage1_prompt(sample: UnifiedSample) -> str:
    lines = _head_lines(sample)
    if sample.dataset == "chartqa":
        # blank line between the head and the instruction
        lines.extend(["", NUMERIC_INSTRUCTION])
    else:
        lines.append(STAGE1_TERMINATOR)
    return "\n".join(lines)


def build_stage2_prompt(sample: UnifiedSample, rationale: str) -> str:
    lines = _head_lines(sample)
    lines.append(f"Rationale: {rationale}")
    lines.append(STAGE2_TERMINATOR)
    return "\n".join(lines)


def build_prompt_pair(sample: UnifiedSample) -> PromptPair:
    """Stage-1 prompt plus a stage-2 template with a literal rationale slot."""
    return PromptPair(
        sample_id=sample.sample_id,
        stage1_input=build_stage1_prompt(sample),
        stage2_input_template=build_stage2_prompt(sample, RATIONALE_SLOT),
    )


def fill_rationale(template: str, rationale: str) -> str:
    """Substitute the slot; never alters any other byte of the template."""
    # last occurrence: sample text earlier in the prompt could contain the
    # marker, but nothing after the real slot can
    idx = template.rfind(RATIONALE_SLOT)
    if idx < 0:
        raise ValueError("template has no rationale slot")
    return template[:idx] + rationale + template[idx + len(RATIONALE_SLOT) :]
