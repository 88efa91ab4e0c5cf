"""Sampled generation traces and token-cost accounting.

Two cost views exist. The lockstep view assumes every parallel stream emits
tokens at the same rate, so finish order equals length order and an early-stop
run cuts the remaining streams at the k-th shortest length. The billed view
(live runs only) is whatever the backend actually generated, which can exceed
the lockstep estimate by the cancellation latency.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

from .corpus import Answer


class TraceStatus(str, Enum):
    COMPLETE = "complete"
    TRUNCATED_AT_CAP = "truncated_at_cap"
    CANCELLED_EARLY = "cancelled_early"
    FAILED = "failed"


@dataclass(frozen=True)
class StopRule:
    """All samples run to completion when k is None, else stop at the k-th finish."""

    k: int | None = None

    def __post_init__(self) -> None:
        if self.k is not None and self.k < 1:
            raise ValueError(f"first-k stop rule requires k >= 1, got {self.k}")

    @property
    def is_first_k(self) -> bool:
        return self.k is not None

    def __str__(self) -> str:
        return "all_complete" if self.k is None else f"first_k:{self.k}"

    @classmethod
    def parse(cls, text: str) -> "StopRule":
        if text == "all_complete":
            return cls()
        if text.startswith("first_k:"):
            return cls(k=int(text.split(":", 1)[1]))
        raise ValueError(f"unknown stop rule {text!r}")


ALL_COMPLETE = StopRule()


@dataclass(frozen=True)
class Trace:
    """One sampled generation for a problem."""

    problem_id: str
    model_id: str
    sample_index: int
    text: str
    token_count: int
    status: TraceStatus
    extracted: Answer | None = None
    completion_rank: int | None = None

    def __post_init__(self) -> None:
        if self.sample_index < 0:
            raise ValueError("sample_index must be >= 0")
        if self.token_count < 0:
            raise ValueError("token_count must be >= 0")
        if self.status is TraceStatus.COMPLETE:
            if self.completion_rank is None or self.completion_rank < 1:
                raise ValueError("complete traces need a completion_rank >= 1")
        elif self.completion_rank is not None:
            raise ValueError("completion_rank is only valid on complete traces")


@dataclass(frozen=True)
class TraceSet:
    """N sibling traces for one (problem, model), ordered by sample_index."""

    problem_id: str
    model_id: str
    traces: tuple[Trace, ...]
    stop_rule: StopRule = ALL_COMPLETE
    live: bool = False

    def __post_init__(self) -> None:
        if not self.traces:
            raise ValueError("a trace set needs at least one trace")
        for trace in self.traces:
            if trace.problem_id != self.problem_id or trace.model_id != self.model_id:
                raise ValueError("all traces must share the set's problem and model ids")
        n = len(self.traces)
        if {t.sample_index for t in self.traces} != set(range(n)):
            raise ValueError(f"sample_index values must be exactly 0..{n - 1}")
        object.__setattr__(
            self, "traces", tuple(sorted(self.traces, key=lambda t: t.sample_index))
        )
        ranks = sorted(t.completion_rank for t in self.traces if t.completion_rank is not None)
        n_complete = sum(1 for t in self.traces if t.status is TraceStatus.COMPLETE)
        if ranks != list(range(1, n_complete + 1)):
            raise ValueError("completion ranks must be a permutation of 1..#complete")
        if self.stop_rule.is_first_k:
            if self.stop_rule.k > n:
                raise ValueError("first-k stop rule requires k <= N")
            if n_complete > self.stop_rule.k:
                raise ValueError(
                    f"first-k({self.stop_rule.k}) set has {n_complete} complete traces"
                )

    def __len__(self) -> int:
        return len(self.traces)

    def complete_traces(self) -> list[Trace]:
        return [t for t in self.traces if t.status is TraceStatus.COMPLETE]

    def truncated_traces(self) -> list[Trace]:
        return [t for t in self.traces if t.status is TraceStatus.TRUNCATED_AT_CAP]


@dataclass(frozen=True)
class TokenStats:
    total_tokens: int
    sequential_tokens: int
    billed_tokens: int | None = None

    def __post_init__(self) -> None:
        if self.total_tokens < 0 or self.sequential_tokens < 0:
            raise ValueError("token counts must be >= 0")
        if self.sequential_tokens > self.total_tokens:
            raise ValueError("sequential tokens cannot exceed total tokens")
        if self.billed_tokens is not None and self.billed_tokens < 0:
            raise ValueError("billed tokens must be >= 0")


class CostModel(Enum):
    """How a strategy turns a trace set into total/sequential token counts."""

    ALL_COMPLETE = "all_complete"  # every trace runs to its end (MV, LFS)
    FIRST_K = "first_k"  # remaining streams cut at the k-th finish (FFS)
    SINGLE = "single"  # one trace (SD)


def token_stats(
    trace_set: TraceSet, selected: list[Trace], cost_model: CostModel
) -> TokenStats:
    """Lockstep token accounting for `selected` under `cost_model`.

    `selected` must be the stop-rule selection (for FIRST_K its longest member
    defines the cut length). Billed tokens are attached for live sets: the sum
    of every sibling's recorded count, partial streams included.
    """
    if not selected:
        raise ValueError("token accounting requires a nonempty selection")
    indices = {t.sample_index for t in trace_set.traces}
    if any(t.sample_index not in indices for t in selected):
        raise ValueError("selected traces must belong to the trace set")
    billed = sum(t.token_count for t in trace_set.traces) if trace_set.live else None

    if cost_model is CostModel.SINGLE:
        if len(trace_set) != 1 or len(selected) != 1:
            raise ValueError("single-trace accounting requires N = 1")
        count = selected[0].token_count
        return TokenStats(count, count, billed)

    if cost_model is CostModel.ALL_COMPLETE:
        counts = [t.token_count for t in trace_set.traces]
        return TokenStats(sum(counts), max(counts), billed)

    # FIRST_K: the k-th finisher's length is both the cut point and the latency.
    cut = max(t.token_count for t in selected)
    remaining = len(trace_set) - len(selected)
    total = sum(t.token_count for t in selected) + remaining * cut
    return TokenStats(total, cut, billed)
