"""Pure, replay-capable strategy evaluation: FFS, LFS, MV, and SD.

FFS-k@N votes among the k shortest completed traces of N parallel samples;
LFS-k@N among the k longest; MV@N among all N; SD is a single greedy trace.
All selection and voting is deterministic, so stored trace sets replay to
identical outcomes.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from enum import Enum
from typing import Sequence

from .corpus import Answer
from .traces import CostModel, Trace, TraceSet, TraceStatus, TokenStats, token_stats


class StrategyKind(str, Enum):
    FFS = "ffs"
    LFS = "lfs"
    MV = "mv"
    SD = "sd"
    BEAM = "beam"


# Column order used by report tables: BS, MV, LFS, FFS, then SD.
_TABLE_RANK = {
    StrategyKind.BEAM: 0,
    StrategyKind.MV: 1,
    StrategyKind.LFS: 2,
    StrategyKind.FFS: 3,
    StrategyKind.SD: 4,
}

_SPEC_PATTERN = re.compile(r"^(?P<kind>[a-z]+)(?::(?P<params>[a-z0-9=,]+))?$")


@dataclass(frozen=True)
class StrategySpec:
    """A parsed strategy, e.g. ffs:k=1,n=8 or mv:n=8 or sd or beam:w=8."""

    kind: StrategyKind
    k: int | None = None
    n: int | None = None
    width: int | None = None

    def __post_init__(self) -> None:
        kind = self.kind
        if kind in (StrategyKind.FFS, StrategyKind.LFS):
            if self.k is None or self.n is None or self.width is not None:
                raise ValueError(f"{kind.value} requires exactly k and n")
            if not 1 <= self.k <= self.n:
                raise ValueError(f"{kind.value} requires 1 <= k <= n, got k={self.k} n={self.n}")
        elif kind is StrategyKind.MV:
            if self.n is None or self.k is not None or self.width is not None:
                raise ValueError("mv requires exactly n")
            if self.n < 1:
                raise ValueError(f"mv requires n >= 1, got {self.n}")
        elif kind is StrategyKind.SD:
            if (self.k, self.n, self.width) != (None, None, None):
                raise ValueError("sd takes no parameters")
        else:
            if self.width is None or self.k is not None or self.n is not None:
                raise ValueError("beam requires exactly w")
            if self.width < 1:
                raise ValueError(f"beam requires w >= 1, got {self.width}")

    @classmethod
    def parse(cls, text: str) -> "StrategySpec":
        match = _SPEC_PATTERN.match(text.strip().lower())
        if not match:
            raise ValueError(f"unparseable strategy {text!r}")
        kind_str, params_str = match.group("kind"), match.group("params")
        try:
            kind = StrategyKind(kind_str)
        except ValueError:
            raise ValueError(f"unknown strategy kind {kind_str!r}") from None
        params: dict[str, int] = {}
        if params_str:
            for item in params_str.split(","):
                name, _, value = item.partition("=")
                if not value or name not in ("k", "n", "w"):
                    raise ValueError(f"bad strategy parameter {item!r} in {text!r}")
                if name in params:
                    raise ValueError(f"duplicate parameter {name!r} in {text!r}")
                params[name] = int(value)
        return cls(
            kind=kind, k=params.get("k"), n=params.get("n"), width=params.get("w")
        )

    def __str__(self) -> str:
        if self.kind in (StrategyKind.FFS, StrategyKind.LFS):
            return f"{self.kind.value}:k={self.k},n={self.n}"
        if self.kind is StrategyKind.MV:
            return f"mv:n={self.n}"
        if self.kind is StrategyKind.BEAM:
            return f"beam:w={self.width}"
        return "sd"

    @property
    def display_label(self) -> str:
        if self.kind in (StrategyKind.FFS, StrategyKind.LFS):
            return f"{self.kind.value.upper()}-{self.k}@{self.n}"
        if self.kind is StrategyKind.MV:
            return f"MV@{self.n}"
        if self.kind is StrategyKind.BEAM:
            return f"BS-{self.width}"
        return "SD"

    @property
    def table_rank(self) -> tuple[int, int, int]:
        return (_TABLE_RANK[self.kind], self.n or self.width or 0, self.k or 0)


@dataclass(frozen=True)
class StrategyOutcome:
    """Chosen answer (None = abstain), correctness, cost, and audit fields."""

    chosen: Answer | None
    correct: bool | None
    stats: TokenStats
    used_trace_indices: tuple[int, ...]
    degraded: bool = False
    tie_broken: bool = False


def select_ffs(trace_set: TraceSet, k: int) -> list[Trace]:
    """The k shortest completed traces (length ties by sample_index).

    In replay this equals the first k by completion rank under the lockstep
    assumption. When fewer than k traces completed, truncated traces fill the
    remainder in length order (degraded path); with none available, raises.
    """
    return _select_by_length(trace_set, k, reverse=False)


def select_lfs(trace_set: TraceSet, k: int) -> list[Trace]:
    """The k longest completed traces; requires an all-complete stop rule."""
    if trace_set.stop_rule.is_first_k:
        raise ValueError("lfs selection requires a trace set sampled to completion")
    return _select_by_length(trace_set, k, reverse=True)


def _select_by_length(trace_set: TraceSet, k: int, reverse: bool) -> list[Trace]:
    if not 1 <= k <= len(trace_set):
        raise ValueError(f"selection size k={k} out of range for N={len(trace_set)}")

    def order(traces: list[Trace]) -> list[Trace]:
        if reverse:
            return sorted(traces, key=lambda t: (-t.token_count, t.sample_index))
        return sorted(traces, key=lambda t: (t.token_count, t.sample_index))

    complete = order(trace_set.complete_traces())
    if len(complete) >= k:
        return complete[:k]
    truncated = order(trace_set.truncated_traces())
    if not truncated:
        raise ValueError(
            f"only {len(complete)} completed traces for k={k} and no truncated fallback"
        )
    return (complete + truncated)[:k]


def majority_vote(
    answers: Sequence[Answer | None], lengths: Sequence[int]
) -> tuple[Answer | None, bool]:
    """Modal answer over the parseable entries; (None, False) when all abstain.

    Ties go to the answer whose shortest supporting trace is shortest, then to
    the lexicographically smallest canonical form.
    """
    if len(answers) != len(lengths):
        raise ValueError("answers and lengths must be parallel lists")
    counts: dict[Answer, int] = {}
    shortest: dict[Answer, int] = {}
    for answer, length in zip(answers, lengths):
        if answer is None:
            continue
        counts[answer] = counts.get(answer, 0) + 1
        if answer not in shortest or length < shortest[answer]:
            shortest[answer] = length
    if not counts:
        return None, False
    top = max(counts.values())
    leaders = [a for a, c in counts.items() if c == top]
    if len(leaders) == 1:
        return leaders[0], False
    winner = min(leaders, key=lambda a: (shortest[a], a.canonical))
    return winner, True


def run_strategy(
    spec: StrategySpec, trace_set: TraceSet, gold: Answer | None = None
) -> StrategyOutcome:
    """Select, vote, and price one strategy over a trace set.

    Rejects beam specs (beam decoding is not trace-set evaluation) and any
    spec whose sample count disagrees with the set size.
    """
    n = len(trace_set)
    degraded = False
    if spec.kind is StrategyKind.BEAM:
        raise ValueError("beam specs decode against a generation backend, not a trace set")
    if spec.kind is StrategyKind.SD:
        if n != 1:
            raise ValueError(f"sd expects a single trace, got N={n}")
        trace = trace_set.traces[0]
        voters = [] if trace.status is TraceStatus.FAILED else [trace]
        stats = token_stats(trace_set, [trace], CostModel.SINGLE)
    elif spec.kind is StrategyKind.MV:
        if spec.n != n:
            raise ValueError(f"mv:n={spec.n} does not match set size N={n}")
        voters = [t for t in trace_set.traces if t.status is not TraceStatus.FAILED]
        stats = token_stats(trace_set, list(trace_set.traces), CostModel.ALL_COMPLETE)
    else:
        if spec.n != n:
            raise ValueError(f"{spec} does not match set size N={n}")
        if spec.kind is StrategyKind.FFS:
            voters = select_ffs(trace_set, spec.k)
            cost_model = CostModel.FIRST_K
        else:
            voters = select_lfs(trace_set, spec.k)
            cost_model = CostModel.ALL_COMPLETE
        degraded = len(trace_set.complete_traces()) < spec.k
        stats = token_stats(trace_set, voters, cost_model)

    chosen, tie_broken = majority_vote(
        [t.extracted for t in voters], [t.token_count for t in voters]
    )
    correct: bool | None = None
    if gold is not None:
        correct = chosen == gold
    return StrategyOutcome(
        chosen=chosen,
        correct=correct,
        stats=stats,
        used_trace_indices=tuple(t.sample_index for t in voters),
        degraded=degraded,
        tie_broken=tie_broken,
    )
