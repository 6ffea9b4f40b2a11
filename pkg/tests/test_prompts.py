import pytest

from cotqa.errors import TooManyChoices
from cotqa.prompts import (
    RATIONALE_SLOT,
    build_prompt_pair,
    build_stage1_prompt,
    build_stage2_prompt,
    choice_letter,
    fill_rationale,
    parse_letter,
)
from cotqa.schema import UnifiedSample


def mcq_sample(**overrides) -> UnifiedSample:
    base = dict(
        sample_id="m1", dataset="aokvqa", split="val",
        question="What is the man holding?", answer="bat",
        choices=["umbrella", "bat"], caption="a batter mid-swing",
    )
    base.update(overrides)
    return UnifiedSample(**base)


def open_sample(**overrides) -> UnifiedSample:
    base = dict(
        sample_id="o1", dataset="okvqa", split="val",
        question="What animal is this?", answer="dog", choices=[],
    )
    base.update(overrides)
    return UnifiedSample(**base)


def chart_sample(**overrides) -> UnifiedSample:
    base = dict(
        sample_id="c1", dataset="chartqa", split="train",
        question="In which year was revenue highest?", answer="2020", choices=[],
    )
    base.update(overrides)
    return UnifiedSample(**base)


def test_stage1_mcq_exact_bytes():
    assert build_stage1_prompt(mcq_sample()) == (
        "Question: What is the man holding?\n"
        "Caption: a batter mid-swing\n"
        "Options:\n"
        "(A) umbrella\n"
        "(B) bat\n"
        "Generate the rationale:"
    )


def test_stage2_mcq_exact_bytes():
    assert build_stage2_prompt(mcq_sample(), "He is at the plate.") == (
        "Question: What is the man holding?\n"
        "Caption: a batter mid-swing\n"
        "Options:\n"
        "(A) umbrella\n"
        "(B) bat\n"
        "Rationale: He is at the plate.\n"
        "The answer is"
    )


def test_open_sample_has_no_options_block():
    prompt = build_stage1_prompt(open_sample())
    assert "Options:" not in prompt
    assert prompt.endswith("Generate the rationale:")


def test_caption_line_omitted_when_absent():
    prompt = build_stage1_prompt(open_sample())
    assert "Caption:" not in prompt
    with_caption = build_stage1_prompt(open_sample(caption="a dog"))
    assert "Caption: a dog\n" in with_caption


def test_chart_stage1_exact_bytes():
    assert build_stage1_prompt(chart_sample()) == (
        "Question: In which year was revenue highest?\n"
        "Image: <image>\n"
        "\n"
        "Explain your reasoning step-by-step and then provide the final answer."
    )


def test_chart_stage2_keeps_answer_anchor():
    prompt = build_stage2_prompt(chart_sample(), "The 2020 bar is tallest.")
    assert prompt.endswith("The answer is")
    assert "Rationale: The 2020 bar is tallest.\n" in prompt
    assert "step-by-step" not in prompt


def test_no_trailing_newline():
    for sample in (mcq_sample(), open_sample(), chart_sample()):
        assert not build_stage1_prompt(sample).endswith("\n")
        assert not build_stage2_prompt(sample, "r").endswith("\n")


def test_empty_rationale_keeps_line():
    prompt = build_stage2_prompt(mcq_sample(), "")
    assert "\nRationale: \n" in prompt


def test_stage2_byte_length_is_template_plus_rationale():
    for sample in (mcq_sample(), open_sample(), chart_sample()):
        empty = build_stage2_prompt(sample, "")
        for rationale in ("because", "a b c", "x" * 100):
            filled = build_stage2_prompt(sample, rationale)
            assert len(filled.encode()) == len(empty.encode()) + len(rationale.encode())


def test_substituting_rationale_changes_no_other_bytes():
    sample = mcq_sample()
    a = build_stage2_prompt(sample, "AAAA")
    b = build_stage2_prompt(sample, "BBBB")
    diff = [i for i, (x, y) in enumerate(zip(a, b)) if x != y]
    assert len(diff) == 4  # only the rationale span differs


def test_question_swap_changes_only_question_span():
    a = build_stage1_prompt(mcq_sample(question="What is shown?"))
    b = build_stage1_prompt(mcq_sample(question="What is held?"))
    assert a.splitlines()[1:] == b.splitlines()[1:]
    assert a.splitlines()[0] != b.splitlines()[0]


def test_prompt_pair_template_fills():
    pair = build_prompt_pair(mcq_sample())
    assert RATIONALE_SLOT in pair.stage2_input_template
    filled = fill_rationale(pair.stage2_input_template, "some reason")
    assert filled == build_stage2_prompt(mcq_sample(), "some reason")


def test_fill_rationale_ignores_marker_in_question():
    tricky = mcq_sample(question="Why does {rationale} appear?")
    pair = build_prompt_pair(tricky)
    filled = fill_rationale(pair.stage2_input_template, "it is literal text")
    assert "Why does {rationale} appear?" in filled
    assert "Rationale: it is literal text\n" in filled


def test_letter_mapping_is_bijective():
    for i in range(26):
        assert parse_letter(choice_letter(i)) == i
    assert parse_letter("b") == 1


def test_choice_letter_overflow():
    with pytest.raises(TooManyChoices):
        choice_letter(26)
    sample = mcq_sample(choices=[f"c{i}" for i in range(27)], answer="c0")
    with pytest.raises(TooManyChoices):
        build_stage1_prompt(sample)
