"""Beam search over a step-wise generation backend.

The decoder only talks to the backend contract below. Commercial inference
APIs expose no step-wise beam control, so the supported target is the
deterministic scripted backend (a JSON tree of prefix -> scored
continuations); live endpoints are out of scope for beam decoding.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, replace
from enum import Enum
from pathlib import Path
from typing import Mapping, Protocol, Sequence

from .traces import TokenStats


class BackendError(RuntimeError):
    """The generation backend failed mid-decode."""


DEFAULT_WIDTH = 8
DEFAULT_ANSWER_RESERVE = 3000


@dataclass(frozen=True)
class Hypothesis:
    tokens: tuple[str, ...]
    score: float  # cumulative log-probability, <= 0 and nonincreasing
    complete: bool = False


@dataclass(frozen=True)
class BeamConfig:
    width: int = DEFAULT_WIDTH
    max_steps: int = 64
    # budget for the forced answer segment appended after the beam phase
    answer_reserve: int = DEFAULT_ANSWER_RESERVE

    def __post_init__(self) -> None:
        if self.width < 1:
            raise ValueError("beam width must be >= 1")
        if self.max_steps < 1:
            raise ValueError("max_steps must be >= 1")
        if self.answer_reserve < 0:
            raise ValueError("answer_reserve must be >= 0")


class GenerationBackend(Protocol):
    def expand(self, prefix: tuple[str, ...], width: int) -> list[tuple[str, float]]:
        """Up to `width` scored continuations (token, log-probability) of `prefix`."""

    def is_complete(self, prefix: tuple[str, ...]) -> bool:
        """Whether `prefix` is a finished generation."""

    def finish_answer(self, prefix: tuple[str, ...], max_tokens: int) -> list[str]:
        """Forced answer segment appended to a winning hypothesis, <= max_tokens long."""


class BeamStatus(str, Enum):
    COMPLETE = "complete"
    PARTIAL = "partial"  # budget exhausted before any hypothesis completed
    FAILED = "failed"  # backend raised mid-decode; best-effort result attached


@dataclass(frozen=True)
class BeamResult:
    hypothesis: Hypothesis
    stats: TokenStats
    status: BeamStatus


def beam_search(backend: GenerationBackend, config: BeamConfig) -> BeamResult:
    """Keep the `width` best partials per step; completed hypotheses retire.

    Returns the best-scoring completed hypothesis, or the best partial when
    max_steps runs out. Score ties break by generation order (hypothesis
    order, then token order within an expansion), so decoding is
    deterministic on a deterministic backend. Total tokens count every
    candidate token returned by the backend; sequential tokens count decode
    steps plus the consumed answer reserve.
    """
    root = Hypothesis(tokens=(), score=0.0)
    finished: list[Hypothesis] = []
    beam: list[Hypothesis] = []
    if backend.is_complete(root.tokens):
        finished.append(replace(root, complete=True))
    else:
        beam.append(root)

    generated = 0
    steps = 0
    failed = False
    while beam and steps < config.max_steps:
        candidates: list[Hypothesis] = []
        try:
            for hyp in beam:
                for token, logprob in backend.expand(hyp.tokens, config.width):
                    candidates.append(
                        Hypothesis(hyp.tokens + (token,), hyp.score + logprob)
                    )
                    generated += 1
        except Exception:
            failed = True
            break
        if not candidates:
            break  # every surviving prefix dead-ended without completing
        steps += 1
        candidates.sort(key=lambda h: -h.score)  # stable: ties keep generation order
        beam = []
        for cand in candidates[: config.width]:
            if backend.is_complete(cand.tokens):
                finished.append(replace(cand, complete=True))
            else:
                beam.append(cand)

    if finished:
        winner = max(finished, key=lambda h: h.score)
        status = BeamStatus.COMPLETE
    elif beam:
        winner = beam[0]
        status = BeamStatus.PARTIAL
    else:
        winner = root
        status = BeamStatus.PARTIAL
    if failed:
        status = BeamStatus.FAILED

    reserve_used = 0
    if config.answer_reserve > 0 and status is not BeamStatus.FAILED:
        try:
            answer = list(backend.finish_answer(winner.tokens, config.answer_reserve))
        except Exception as exc:
            raise BackendError("answer elicitation failed") from exc
        answer = answer[: config.answer_reserve]
        if answer:
            winner = replace(winner, tokens=winner.tokens + tuple(answer))
            reserve_used = len(answer)
            generated += reserve_used

    stats = TokenStats(total_tokens=generated, sequential_tokens=steps + reserve_used)
    return BeamResult(hypothesis=winner, stats=stats, status=status)


class ScriptedBackend:
    """Deterministic backend over a prefix -> [(token, log-score)] table.

    A prefix with no table entry is complete. Expansion returns the best
    `width` continuations by score (ties keep script order). File form is
    either the bare table or {"tree": table, "answers": {prefix: [tokens]}}.
    """

    def __init__(
        self,
        tree: Mapping[str, Sequence[Sequence[object]]],
        answers: Mapping[str, Sequence[str]] | None = None,
    ) -> None:
        self._tree: dict[str, list[tuple[str, float]]] = {}
        for key, continuations in tree.items():
            parsed: list[tuple[str, float]] = []
            for item in continuations:
                if len(item) != 2 or not isinstance(item[0], str):
                    raise ValueError(f"continuation for {key!r} must be [token, log_score]")
                token, score = item[0], float(item[1])
                if not math.isfinite(score) or score > 0.0:
                    raise ValueError(f"log score for {key!r}/{token!r} must be finite and <= 0")
                parsed.append((token, score))
            self._tree[str(key)] = parsed
        self._answers = {
            str(key): [str(t) for t in tokens] for key, tokens in (answers or {}).items()
        }

    @classmethod
    def from_file(cls, path: str | Path) -> "ScriptedBackend":
        data = json.loads(Path(path).read_text(encoding="utf-8"))
        if not isinstance(data, dict):
            raise ValueError("scripted backend file must hold a JSON object")
        if set(data) <= {"tree", "answers"} and isinstance(data.get("tree"), dict):
            return cls(data["tree"], data.get("answers"))
        return cls(data)

    @staticmethod
    def _key(prefix: tuple[str, ...]) -> str:
        return " ".join(prefix)

    def expand(self, prefix: tuple[str, ...], width: int) -> list[tuple[str, float]]:
        continuations = self._tree.get(self._key(prefix), [])
        ranked = sorted(continuations, key=lambda c: -c[1])  # stable on ties
        return ranked[:width]

    def is_complete(self, prefix: tuple[str, ...]) -> bool:
        return not self._tree.get(self._key(prefix))

    def finish_answer(self, prefix: tuple[str, ...], max_tokens: int) -> list[str]:
        return list(self._answers.get(self._key(prefix), []))[:max_tokens]
