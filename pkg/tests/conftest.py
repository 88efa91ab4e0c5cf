from __future__ import annotations

import random
import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))  # tests import oracles/helpers directly

from ttslab.corpus import Answer
from ttslab.traces import StopRule, Trace, TraceSet, TraceStatus

FIXTURES = Path(__file__).parent / "fixtures"


def make_trace(
    index: int,
    tokens: int,
    status: TraceStatus = TraceStatus.COMPLETE,
    answer: Answer | None = None,
    rank: int | None = None,
    problem_id: str = "p0",
    model_id: str = "m0",
    text: str = "",
) -> Trace:
    return Trace(
        problem_id=problem_id,
        model_id=model_id,
        sample_index=index,
        text=text,
        token_count=tokens,
        status=status,
        extracted=answer,
        completion_rank=rank,
    )


def make_set(
    lengths,
    answers=None,
    statuses=None,
    stop_rule: StopRule = StopRule(),
    live: bool = False,
    problem_id: str = "p0",
    model_id: str = "m0",
) -> TraceSet:
    """Build a trace set; completion ranks follow lockstep order (length, index)."""
    n = len(lengths)
    answers = answers if answers is not None else [None] * n
    statuses = statuses if statuses is not None else [TraceStatus.COMPLETE] * n
    complete = [i for i in range(n) if statuses[i] is TraceStatus.COMPLETE]
    order = sorted(complete, key=lambda i: (lengths[i], i))
    ranks = {i: pos + 1 for pos, i in enumerate(order)}
    traces = tuple(
        make_trace(
            i,
            lengths[i],
            statuses[i],
            answers[i],
            ranks.get(i),
            problem_id=problem_id,
            model_id=model_id,
        )
        for i in range(n)
    )
    return TraceSet(
        problem_id=problem_id,
        model_id=model_id,
        traces=traces,
        stop_rule=stop_rule,
        live=live,
    )


def random_traceset(
    rng: random.Random,
    n_max: int = 8,
    alphabet: int = 4,
    all_complete: bool = False,
    max_len: int = 50,
) -> TraceSet:
    """Random set with integer answers from a small alphabet; >= 1 complete trace."""
    n = rng.randint(1, n_max)
    lengths = [rng.randint(1, max_len) for _ in range(n)]
    statuses = []
    for i in range(n):
        if not all_complete and i > 0 and rng.random() < 0.15:
            statuses.append(TraceStatus.TRUNCATED_AT_CAP)
        else:
            statuses.append(TraceStatus.COMPLETE)
    answers = [
        None if rng.random() < 0.1 else Answer.integer(rng.randrange(alphabet))
        for _ in range(n)
    ]
    return make_set(lengths, answers, statuses)


@pytest.fixture
def rng() -> random.Random:
    return random.Random(0xC0FFEE)
