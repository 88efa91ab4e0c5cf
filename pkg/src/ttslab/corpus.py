"""Benchmark problems, prompt rendering, and boxed-answer extraction.

Datasets are line-delimited JSON, one problem per line, with fields
``id``, ``statement``, ``gold`` and (for multiple choice) ``options``.
Generated text is scored by scanning for ``\\boxed{...}`` markers with
balanced-brace matching; the last parseable occurrence is the model's
commitment.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from enum import Enum
from pathlib import Path

CHOICE_LETTERS = "ABCD"
INTEGER_MIN = 0
INTEGER_MAX = 999

STATEMENT_PLACEHOLDER = "{statement}"
DEFAULT_BOXED_INSTRUCTION = (
    "Please reason step by step, and put your final answer within \\boxed{}."
)

_BOX_MARKER = "\\boxed"


class CorpusError(ValueError):
    """Malformed dataset record or template."""


class DatasetName(str, Enum):
    AIME24 = "AIME24"
    AIME25_I = "AIME25_I"
    AIME25_II = "AIME25_II"
    GPQA_DIAMOND = "GPQA_DIAMOND"
    CUSTOM = "CUSTOM"

    @property
    def display(self) -> str:
        return _DATASET_DISPLAY[self]


_DATASET_DISPLAY = {
    DatasetName.AIME24: "AIME24",
    DatasetName.AIME25_I: "AIME25-I",
    DatasetName.AIME25_II: "AIME25-II",
    DatasetName.GPQA_DIAMOND: "GPQA",
    DatasetName.CUSTOM: "CUSTOM",
}


class AnswerKind(str, Enum):
    INTEGER = "integer"  # integer in [0, 999]
    CHOICE = "choice"  # single letter A-D


@dataclass(frozen=True)
class Answer:
    """A canonical final answer: an integer in [0, 999] or a letter A-D."""

    kind: AnswerKind
    value: int | str

    def __post_init__(self) -> None:
        if self.kind is AnswerKind.INTEGER:
            if not isinstance(self.value, int) or isinstance(self.value, bool):
                raise ValueError(f"integer answer requires an int, got {self.value!r}")
            if not INTEGER_MIN <= self.value <= INTEGER_MAX:
                raise ValueError(f"integer answer out of [0, 999]: {self.value}")
        else:
            if self.value not in CHOICE_LETTERS:
                raise ValueError(f"choice answer must be one of A-D, got {self.value!r}")

    @classmethod
    def integer(cls, value: int) -> "Answer":
        return cls(AnswerKind.INTEGER, value)

    @classmethod
    def choice(cls, letter: str) -> "Answer":
        return cls(AnswerKind.CHOICE, letter)

    @classmethod
    def parse(cls, raw: str, kind: AnswerKind) -> "Answer":
        """Canonicalize a stored gold value; raises on anything out of range."""
        if kind is AnswerKind.INTEGER:
            value = _normalize_integer(raw)
            if value is None:
                raise ValueError(f"not an integer in [0, 999]: {raw!r}")
            return cls.integer(value)
        letter = _normalize_choice(raw)
        if letter is None:
            raise ValueError(f"not a choice letter A-D: {raw!r}")
        return cls.choice(letter)

    @property
    def canonical(self) -> str:
        return str(self.value)


@dataclass(frozen=True)
class Problem:
    id: str
    dataset: DatasetName
    statement: str
    answer_kind: AnswerKind
    gold: Answer
    options: tuple[str, ...] | None = None

    def __post_init__(self) -> None:
        if not self.id:
            raise ValueError("problem id must be nonempty")
        if self.gold.kind is not self.answer_kind:
            raise ValueError(f"gold answer kind mismatch for problem {self.id!r}")
        if self.options is not None:
            if self.answer_kind is not AnswerKind.CHOICE:
                raise ValueError(f"options given for non-choice problem {self.id!r}")
            if len(self.options) != len(CHOICE_LETTERS):
                raise ValueError(f"problem {self.id!r} needs exactly 4 options")


@dataclass(frozen=True)
class PromptTemplate:
    """Prompt text with one ``{statement}`` placeholder and a boxed-answer instruction.

    The exact instruction wording is configurable; the default is the common
    step-by-step phrasing used by math benchmark harnesses.
    """

    text: str = STATEMENT_PLACEHOLDER + "\n\n" + DEFAULT_BOXED_INSTRUCTION

    def __post_init__(self) -> None:
        count = self.text.count(STATEMENT_PLACEHOLDER)
        if count != 1:
            raise CorpusError(
                f"template must contain exactly one {STATEMENT_PLACEHOLDER}, found {count}"
            )
        if _BOX_MARKER not in self.text:
            raise CorpusError("template is missing the boxed-answer instruction")

    @classmethod
    def from_file(cls, path: str | Path) -> "PromptTemplate":
        return cls(Path(path).read_text(encoding="utf-8"))


def render_prompt(template: PromptTemplate, problem: Problem) -> str:
    """Substitute the statement (plus an A-D option block for MCQ) into the template."""
    block = problem.statement
    if problem.options is not None:
        lines = [f"{letter}) {option}" for letter, option in zip(CHOICE_LETTERS, problem.options)]
        block = block + "\n\n" + "\n".join(lines)
    return template.text.replace(STATEMENT_PLACEHOLDER, block)


def load_dataset(
    path: str | Path,
    kind: AnswerKind,
    dataset: DatasetName = DatasetName.CUSTOM,
) -> list[Problem]:
    """Load and validate a line-delimited JSON problem file.

    Rejects duplicate ids and gold values that do not fit `kind`; errors carry
    the offending line number.
    """
    path = Path(path)
    problems: list[Problem] = []
    seen: set[str] = set()
    with path.open(encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise CorpusError(f"{path}:{lineno}: invalid JSON ({exc.msg})") from exc
            if not isinstance(record, dict):
                raise CorpusError(f"{path}:{lineno}: record must be a JSON object")
            try:
                problem = _problem_from_record(record, kind, dataset)
            except ValueError as exc:
                raise CorpusError(f"{path}:{lineno}: {exc}") from exc
            if problem.id in seen:
                raise CorpusError(f"{path}:{lineno}: duplicate problem id {problem.id!r}")
            seen.add(problem.id)
            problems.append(problem)
    return problems


def _problem_from_record(record: dict, kind: AnswerKind, dataset: DatasetName) -> Problem:
    for field in ("id", "statement", "gold"):
        if field not in record:
            raise ValueError(f"missing field {field!r}")
    options = record.get("options")
    if options is not None:
        if not isinstance(options, list) or not all(isinstance(o, str) for o in options):
            raise ValueError("options must be a list of strings")
        options = tuple(options)
    return Problem(
        id=str(record["id"]),
        dataset=dataset,
        statement=str(record["statement"]),
        answer_kind=kind,
        gold=Answer.parse(str(record["gold"]), kind),
        options=options,
    )


def extract_answer(text: str, kind: AnswerKind) -> Answer | None:
    """Pull the final answer out of generated text, or None when no box parses.

    Scans every balanced ``\\boxed{...}`` occurrence; the last one whose body
    normalizes for `kind` wins. Total and deterministic over arbitrary input.
    """
    for body in reversed(_boxed_contents(text)):
        if kind is AnswerKind.INTEGER:
            value = _normalize_integer(body)
            if value is not None:
                return Answer.integer(value)
        else:
            letter = _normalize_choice(body)
            if letter is not None:
                return Answer.choice(letter)
    return None


def _boxed_contents(text: str) -> list[str]:
    """Bodies of all balanced \\boxed{...} spans, in order of appearance."""
    bodies: list[str] = []
    pos = 0
    size = len(text)
    while True:
        hit = text.find(_BOX_MARKER, pos)
        if hit == -1:
            break
        brace = hit + len(_BOX_MARKER)
        while brace < size and text[brace] in " \t":
            brace += 1
        if brace >= size or text[brace] != "{":
            pos = hit + len(_BOX_MARKER)
            continue
        depth = 0
        end = -1
        for idx in range(brace, size):
            char = text[idx]
            if char == "{":
                depth += 1
            elif char == "}":
                depth -= 1
                if depth == 0:
                    end = idx
                    break
        if end == -1:
            # Unbalanced to end of text; an inner \boxed may still close.
            pos = hit + len(_BOX_MARKER)
            continue
        bodies.append(text[brace + 1 : end])
        pos = end + 1
    return bodies


def _normalize_integer(raw: str) -> int | None:
    """Strip whitespace, commas, surrounding $ and leading zeros; None if non-numeric."""
    stripped = raw.strip().strip("$").strip().replace(",", "")
    if not stripped or any(ch not in "0123456789" for ch in stripped):
        return None
    value = int(stripped)
    if not INTEGER_MIN <= value <= INTEGER_MAX:
        return None
    return value


def _normalize_choice(raw: str) -> str | None:
    """First alphabetic character, uppercased; None unless it lands in A-D."""
    for ch in raw:
        if ch.isalpha():
            upper = ch.upper()
            return upper if upper in CHOICE_LETTERS else None
    return None
