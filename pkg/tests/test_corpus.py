from __future__ import annotations

import json
import random
import string

import pytest

from oracles import oracle_extract
from ttslab.corpus import (
    Answer,
    AnswerKind,
    CorpusError,
    DatasetName,
    Problem,
    PromptTemplate,
    extract_answer,
    load_dataset,
    render_prompt,
)

INT = AnswerKind.INTEGER
CHO = AnswerKind.CHOICE


def integer(v):
    return Answer.integer(v)


def choice(letter):
    return Answer.choice(letter)


# 50 synthetic completions: (text, kind it is aimed at, expected answer).
EXTRACTION_CORPUS = [
    ("The answer is \\boxed{42}.", INT, integer(42)),
    ("so \\boxed{042}.", INT, integer(42)),
    ("\\boxed{0}", INT, integer(0)),
    ("\\boxed{999}", INT, integer(999)),
    ("\\boxed{1000}", INT, None),
    ("\\boxed{1,000}", INT, None),
    ("\\boxed{25,6}", INT, integer(256)),
    ("\\boxed{$42$}", INT, integer(42)),
    ("\\boxed{ 7 }", INT, integer(7)),
    ("\\boxed{-5}", INT, None),
    ("\\boxed{4.5}", INT, None),
    ("\\boxed{\\frac{1}{2}}", INT, None),
    ("\\boxed{12} then \\boxed{34}", INT, integer(34)),
    ("\\boxed{12} then \\boxed{bogus}", INT, integer(12)),
    ("the answer is 42", INT, None),
    ("\\boxed{}", INT, None),
    ("\\boxed {55}", INT, integer(55)),
    ("\\boxed{1 2}", INT, None),
    ("\\boxed{007}", INT, integer(7)),
    ("nested \\boxed{{42}}", INT, None),
    ("\\boxed{0042 , }", INT, None),
    ("unbalanced \\boxed{42", INT, None),
    ("unbalanced \\boxed{4{2}", INT, None),
    ("\\boxed{96} trailing } brace", INT, integer(96)),
    ("pre { brace \\boxed{33}", INT, integer(33)),
    ("\\boxed{\\text{42}}", INT, None),
    ("\\boxed{100}\n\\boxed{200}\n\\boxed{300}", INT, integer(300)),
    ("\\boxed\n{77}", INT, None),
    ("$\\boxed{256}$", INT, integer(256)),
    ("answer \\boxed{ 0 }", INT, integer(0)),
    ("final: \\boxed{73}{past}", INT, integer(73)),
    ("\\boxed{\\boxed{8}}", INT, None),
    ("x \\boxedX{9}", INT, None),
    ("\\boxed{A1}", INT, None),
    ("\\boxed{  \t12\t}", INT, integer(12)),
    ("\\boxed{A}", CHO, choice("A")),
    ("\\boxed{a}", CHO, choice("A")),
    ("\\boxed{(b)}", CHO, choice("B")),
    ("\\boxed{C.}", CHO, choice("C")),
    ("\\boxed{E}", CHO, None),
    ("\\boxed{ d }", CHO, choice("D")),
    ("\\boxed{A} ... re-check: \\boxed{B}", CHO, choice("B")),
    ("\\boxed{B} and \\boxed{7}", CHO, choice("B")),
    ("\\boxed{42}", CHO, None),
    ("\\boxed{answer: D}", CHO, choice("A")),  # first-alphabetic rule, literally
    ("\\boxed{\\textbf{C}}", CHO, None),
    ("choose boxed{A} style, no backslash", CHO, None),
    ("\\boxed{D} \\boxed{}", CHO, choice("D")),
    ("<think>maybe C?</think> final \\boxed{B}", CHO, choice("B")),
    ("\\boxed{ $ 123 $ }", INT, integer(123)),
]


def test_corpus_has_50_cases():
    assert len(EXTRACTION_CORPUS) == 50


@pytest.mark.parametrize("text,kind,expected", EXTRACTION_CORPUS)
def test_extraction_against_frozen_expectations(text, kind, expected):
    assert extract_answer(text, kind) == expected


def test_extraction_agrees_with_oracle_parser_on_all_50_cases():
    disagreements = []
    for text, _, _ in EXTRACTION_CORPUS:
        for kind in (INT, CHO):
            if extract_answer(text, kind) != oracle_extract(text, kind):
                disagreements.append((text, kind))
    assert not disagreements


def test_extraction_total_deterministic_and_matches_oracle_on_fuzz(rng: random.Random):
    alphabet = list(string.ascii_letters + string.digits + "{}\\$,. ") + ["\\boxed{", "}"]
    for _ in range(300):
        text = "".join(rng.choice(alphabet) for _ in range(rng.randint(0, 60)))
        for kind in (INT, CHO):
            first = extract_answer(text, kind)
            assert first == extract_answer(text, kind)
            assert first == oracle_extract(text, kind)
            if first is not None:
                assert first.kind is kind


@pytest.mark.parametrize("value", list(range(0, 1000)))
def test_integer_round_trip(value):
    rendered = f"thus \\boxed{{{Answer.integer(value).canonical}}}"
    assert extract_answer(rendered, INT) == Answer.integer(value)


@pytest.mark.parametrize("letter", list("ABCD"))
def test_choice_round_trip(letter):
    rendered = f"thus \\boxed{{{letter}}}"
    assert extract_answer(rendered, CHO) == Answer.choice(letter)


# dataset loading -------------------------------------------------------------


def _write_jsonl(path, records):
    path.write_text("\n".join(json.dumps(r) for r in records) + "\n", encoding="utf-8")


def test_load_30_problem_file(tmp_path):
    records = [
        {"id": f"q{i}", "statement": f"Compute thing {i}.", "gold": str((7 * i) % 1000)}
        for i in range(1, 31)
    ]
    path = tmp_path / "aime.jsonl"
    _write_jsonl(path, records)
    problems = load_dataset(path, INT, DatasetName.AIME24)
    assert len(problems) == 30
    assert len({p.id for p in problems}) == 30
    assert all(p.dataset is DatasetName.AIME24 for p in problems)


def test_gold_canonicalization(tmp_path):
    path = tmp_path / "d.jsonl"
    _write_jsonl(path, [{"id": "a1", "statement": "...", "gold": "042"}])
    (problem,) = load_dataset(path, INT)
    assert problem.gold == Answer.integer(42)


def test_gold_out_of_range_letter(tmp_path):
    path = tmp_path / "d.jsonl"
    _write_jsonl(path, [{"id": "a1", "statement": "...", "gold": "E"}])
    with pytest.raises(CorpusError, match=":1:"):
        load_dataset(path, CHO)


def test_duplicate_ids_rejected(tmp_path):
    path = tmp_path / "d.jsonl"
    _write_jsonl(
        path,
        [
            {"id": "a1", "statement": "x", "gold": "1"},
            {"id": "a1", "statement": "y", "gold": "2"},
        ],
    )
    with pytest.raises(CorpusError, match="duplicate problem id"):
        load_dataset(path, INT)


def test_malformed_json_reports_line(tmp_path):
    path = tmp_path / "d.jsonl"
    path.write_text('{"id": "a1", "statement": "x", "gold": "1"}\n{oops\n', encoding="utf-8")
    with pytest.raises(CorpusError, match=":2:"):
        load_dataset(path, INT)


def test_missing_field_reports_line(tmp_path):
    path = tmp_path / "d.jsonl"
    _write_jsonl(path, [{"id": "a1", "statement": "x"}])
    with pytest.raises(CorpusError, match="gold"):
        load_dataset(path, INT)


def test_options_must_be_four(tmp_path):
    path = tmp_path / "d.jsonl"
    _write_jsonl(
        path,
        [{"id": "g1", "statement": "pick", "gold": "A", "options": ["only", "three", "given"]}],
    )
    with pytest.raises(CorpusError, match="4 options"):
        load_dataset(path, CHO)


def test_blank_lines_skipped(tmp_path):
    path = tmp_path / "d.jsonl"
    path.write_text('\n{"id": "a1", "statement": "x", "gold": "7"}\n\n', encoding="utf-8")
    assert len(load_dataset(path, INT)) == 1


# prompt rendering -------------------------------------------------------------


def _mcq_problem():
    return Problem(
        id="g1",
        dataset=DatasetName.GPQA_DIAMOND,
        statement="Which particle carries charge?",
        answer_kind=CHO,
        gold=Answer.choice("B"),
        options=("neutron", "electron", "photon", "neutrino"),
    )


def test_render_prompt_is_deterministic_and_instructed():
    problem = Problem(
        id="a1",
        dataset=DatasetName.AIME24,
        statement="What is 1+1?",
        answer_kind=INT,
        gold=Answer.integer(2),
    )
    template = PromptTemplate()
    first = render_prompt(template, problem)
    assert first == render_prompt(template, problem)
    assert "What is 1+1?" in first
    assert first.endswith("within \\boxed{}.")


def test_mcq_prompt_golden():
    rendered = render_prompt(PromptTemplate(), _mcq_problem())
    assert rendered == (
        "Which particle carries charge?\n"
        "\n"
        "A) neutron\n"
        "B) electron\n"
        "C) photon\n"
        "D) neutrino\n"
        "\n"
        "Please reason step by step, and put your final answer within \\boxed{}."
    )


def test_template_validation():
    with pytest.raises(CorpusError, match="exactly one"):
        PromptTemplate("no placeholder \\boxed{}")
    with pytest.raises(CorpusError, match="exactly one"):
        PromptTemplate("{statement} {statement} \\boxed{}")
    with pytest.raises(CorpusError, match="boxed"):
        PromptTemplate("{statement} answer plainly")


def test_template_from_file(tmp_path):
    path = tmp_path / "prompt.txt"
    path.write_text("Solve:\n{statement}\nEnd with \\boxed{}.", encoding="utf-8")
    template = PromptTemplate.from_file(path)
    problem = Problem(
        id="a1",
        dataset=DatasetName.CUSTOM,
        statement="S",
        answer_kind=INT,
        gold=Answer.integer(1),
    )
    assert render_prompt(template, problem) == "Solve:\nS\nEnd with \\boxed{}."


def test_answer_validation():
    with pytest.raises(ValueError):
        Answer.integer(1000)
    with pytest.raises(ValueError):
        Answer.integer(-1)
    with pytest.raises(ValueError):
        Answer.choice("E")
    assert Answer.parse("042", INT) == Answer.integer(42)
    assert Answer.parse("(c)", CHO) == Answer.choice("C")
    with pytest.raises(ValueError):
        Answer.parse("12.5", INT)
