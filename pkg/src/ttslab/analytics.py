"""Accuracy and token analytics.

Problem difficulty is the mean correctness of every model's traces on that
problem, split Easy/Hard at the median. The accuracy grid crosses that split
with a short/long trace split at the model's own median length; because
difficulty confounds with length, only tasks contributing both short and long
traces count, and short/long accuracies are computed per dataset first and
then averaged across datasets so dataset size cannot dominate.
"""

from __future__ import annotations

import statistics
from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Mapping, Sequence

from .corpus import DatasetName, Problem
from .strategies import StrategySpec
from .traces import Trace, TraceStatus

# Dataset row order used by report tables.
DATASET_ORDER = (
    DatasetName.GPQA_DIAMOND,
    DatasetName.AIME24,
    DatasetName.AIME25_I,
    DatasetName.AIME25_II,
    DatasetName.CUSTOM,
)


class DifficultyLabel(str, Enum):
    EASY = "easy"
    HARD = "hard"


class ModelCategory(str, Enum):
    SHORT_HORIZON = "short_horizon"
    LONG_HORIZON = "long_horizon"
    NON_REASONING = "non_reasoning"


class UnclassifiableError(ValueError):
    """The grid lacks the cells needed to classify a reasoning model."""


@dataclass(frozen=True)
class ScoredTrace:
    """One trace reduced to what analytics needs."""

    problem_id: str
    model_id: str
    dataset: DatasetName
    token_count: int
    correct: bool


def score_traces(traces: Iterable[Trace], problems: Sequence[Problem]) -> list[ScoredTrace]:
    """Join traces with gold answers; only finished generations carry a verdict.

    Cancelled and failed streams never committed to an answer, so they are
    dropped here. Requires globally unique problem ids across the pool.
    """
    by_id: dict[str, Problem] = {}
    for problem in problems:
        if problem.id in by_id:
            raise ValueError(f"analytics needs globally unique problem ids: {problem.id!r}")
        by_id[problem.id] = problem
    scored = []
    for trace in traces:
        if trace.status not in (TraceStatus.COMPLETE, TraceStatus.TRUNCATED_AT_CAP):
            continue
        problem = by_id.get(trace.problem_id)
        if problem is None:
            raise ValueError(f"trace references unknown problem {trace.problem_id!r}")
        scored.append(
            ScoredTrace(
                problem_id=trace.problem_id,
                model_id=trace.model_id,
                dataset=problem.dataset,
                token_count=trace.token_count,
                correct=trace.extracted == problem.gold,
            )
        )
    return scored


@dataclass(frozen=True)
class DifficultyEstimate:
    problem_id: str
    dataset: DatasetName
    mean_accuracy: float
    mean_tokens: float
    label: DifficultyLabel


def estimate_difficulty(
    scored: Sequence[ScoredTrace], *, split: str = "pooled"
) -> list[DifficultyEstimate]:
    """Per-problem mean accuracy and tokens over all models' traces.

    Easy means at-or-above the median mean accuracy. The median is taken over
    the pooled task set by default, or within each dataset with
    split="per_dataset".
    """
    if split not in ("pooled", "per_dataset"):
        raise ValueError(f"unknown split {split!r}")
    if not scored:
        raise ValueError("cannot estimate difficulty for an empty pool")
    groups: dict[str, list[ScoredTrace]] = {}
    for item in scored:
        groups.setdefault(item.problem_id, []).append(item)

    means = {
        pid: (
            sum(t.correct for t in items) / len(items),
            sum(t.token_count for t in items) / len(items),
            items[0].dataset,
        )
        for pid, items in groups.items()
    }
    if split == "pooled":
        pooled_median = statistics.median(acc for acc, _, _ in means.values())
        cutoff = {dataset: pooled_median for _, _, dataset in means.values()}
    else:
        by_dataset: dict[DatasetName, list[float]] = {}
        for acc, _, dataset in means.values():
            by_dataset.setdefault(dataset, []).append(acc)
        cutoff = {ds: statistics.median(accs) for ds, accs in by_dataset.items()}

    estimates = [
        DifficultyEstimate(
            problem_id=pid,
            dataset=dataset,
            mean_accuracy=acc,
            mean_tokens=tokens,
            label=(
                DifficultyLabel.EASY if acc >= cutoff[dataset] else DifficultyLabel.HARD
            ),
        )
        for pid, (acc, tokens, dataset) in means.items()
    ]
    estimates.sort(key=lambda e: (e.dataset.value, e.problem_id))
    return estimates


@dataclass(frozen=True)
class AccuracyGrid:
    """Accuracy by (difficulty x trace-length bucket) for one model."""

    model_id: str
    easy_short: float | None
    easy_long: float | None
    hard_short: float | None
    hard_long: float | None
    median_trace_length: float

    def cells(self) -> tuple[float | None, float | None, float | None, float | None]:
        return (self.easy_short, self.easy_long, self.hard_short, self.hard_long)


def accuracy_grid(
    scored: Sequence[ScoredTrace],
    model_id: str,
    difficulties: Sequence[DifficultyEstimate] | Mapping[str, DifficultyLabel],
) -> AccuracyGrid:
    """The 2x2 difficulty/length grid for one model's traces.

    Lengths at or below the model's median (over its entire task set) are
    short. Only tasks with both short and long traces contribute; each
    dataset yields one accuracy per cell and datasets average unweighted.
    Cells with no qualifying task anywhere are None.
    """
    if isinstance(difficulties, Mapping):
        label_of = dict(difficulties)
    else:
        label_of = {e.problem_id: e.label for e in difficulties}
    mine = [s for s in scored if s.model_id == model_id]
    if not mine:
        raise ValueError(f"no scored traces for model {model_id!r}")
    median_length = statistics.median(s.token_count for s in mine)

    def is_short(item: ScoredTrace) -> bool:
        return item.token_count <= median_length

    by_task: dict[str, list[ScoredTrace]] = {}
    for item in mine:
        if item.problem_id not in label_of:
            raise ValueError(f"no difficulty label for problem {item.problem_id!r}")
        by_task.setdefault(item.problem_id, []).append(item)
    qualifying = {
        pid
        for pid, items in by_task.items()
        if any(is_short(t) for t in items) and any(not is_short(t) for t in items)
    }

    def cell(label: DifficultyLabel, short: bool) -> float | None:
        per_dataset: dict[DatasetName, list[ScoredTrace]] = {}
        for pid in qualifying:
            if label_of[pid] is not label:
                continue
            for item in by_task[pid]:
                if is_short(item) == short:
                    per_dataset.setdefault(item.dataset, []).append(item)
        if not per_dataset:
            return None
        dataset_values = [
            sum(t.correct for t in items) / len(items) for items in per_dataset.values()
        ]
        return sum(dataset_values) / len(dataset_values)

    return AccuracyGrid(
        model_id=model_id,
        easy_short=cell(DifficultyLabel.EASY, True),
        easy_long=cell(DifficultyLabel.EASY, False),
        hard_short=cell(DifficultyLabel.HARD, True),
        hard_long=cell(DifficultyLabel.HARD, False),
        median_trace_length=float(median_length),
    )


def classify_horizon(grid: AccuracyGrid, is_reasoning: bool) -> ModelCategory:
    """Long horizon iff long traces strictly beat short ones on hard problems.

    Non-reasoning models are declared metadata, never inferred from traces.
    """
    if not is_reasoning:
        return ModelCategory.NON_REASONING
    if grid.hard_short is None or grid.hard_long is None:
        raise UnclassifiableError(
            f"model {grid.model_id!r} lacks hard-problem cells; cannot classify"
        )
    if grid.hard_long > grid.hard_short:
        return ModelCategory.LONG_HORIZON
    return ModelCategory.SHORT_HORIZON


@dataclass(frozen=True)
class ModelProfile:
    model_id: str
    is_reasoning: bool
    category: ModelCategory
    median_trace_length: float

    def __post_init__(self) -> None:
        if (self.category is ModelCategory.NON_REASONING) != (not self.is_reasoning):
            raise ValueError("category must be non_reasoning exactly when is_reasoning is false")


@dataclass(frozen=True)
class OutcomeRow:
    """One recorded strategy outcome, reduced for table building."""

    spec: StrategySpec
    dataset: DatasetName
    correct: bool | None
    total_tokens: int
    sequential_tokens: int


@dataclass(frozen=True)
class TableRow:
    metric: str
    display: str
    values: Mapping[str, float]  # keyed by str(spec); absent = no data
    best: tuple[str, ...]  # all tied best spec keys


@dataclass(frozen=True)
class StrategyTable:
    model_id: str
    columns: tuple[StrategySpec, ...]
    rows: tuple[TableRow, ...]


SEQ_TOKENS_METRIC = "seq_tokens"
TOTAL_TOKENS_METRIC = "total_tokens"


def strategy_table(rows: Sequence[OutcomeRow], model_id: str) -> StrategyTable:
    """Per-strategy table: dataset-averaged token rows, per-dataset accuracy rows.

    Token cells average each dataset's mean per-problem cost, then average
    across datasets (lower is best). Accuracy cells are percent correct per
    dataset (higher is best); ties mark every tied cell.
    """
    if not rows:
        raise ValueError("no outcomes to tabulate")
    columns = sorted({r.spec for r in rows}, key=lambda s: s.table_rank)
    datasets = sorted({r.dataset for r in rows}, key=_dataset_rank)

    def grouped(spec: StrategySpec) -> dict[DatasetName, list[OutcomeRow]]:
        per: dict[DatasetName, list[OutcomeRow]] = {}
        for row in rows:
            if row.spec == spec:
                per.setdefault(row.dataset, []).append(row)
        return per

    seq_values: dict[str, float] = {}
    total_values: dict[str, float] = {}
    accuracy_values: dict[DatasetName, dict[str, float]] = {ds: {} for ds in datasets}
    for spec in columns:
        per = grouped(spec)
        seq_means = [
            sum(r.sequential_tokens for r in items) / len(items) for items in per.values()
        ]
        total_means = [
            sum(r.total_tokens for r in items) / len(items) for items in per.values()
        ]
        seq_values[str(spec)] = sum(seq_means) / len(seq_means)
        total_values[str(spec)] = sum(total_means) / len(total_means)
        for dataset, items in per.items():
            judged = [r for r in items if r.correct is not None]
            if judged:
                accuracy_values[dataset][str(spec)] = 100.0 * sum(
                    r.correct for r in judged
                ) / len(judged)

    table_rows = [
        TableRow(SEQ_TOKENS_METRIC, "Seq. tokens", seq_values, _best(seq_values, min)),
        TableRow(TOTAL_TOKENS_METRIC, "Total tokens", total_values, _best(total_values, min)),
    ]
    for dataset in datasets:
        values = accuracy_values[dataset]
        table_rows.append(
            TableRow(dataset.value, dataset.display, values, _best(values, max))
        )
    return StrategyTable(model_id=model_id, columns=tuple(columns), rows=tuple(table_rows))


@dataclass(frozen=True)
class PlotPoint:
    """One accuracy-vs-tokens scatter point, aggregated over a strategy's outcomes."""

    spec: StrategySpec
    total_tokens: float
    sequential_tokens: float
    accuracy: float | None


def plot_points(rows: Sequence[OutcomeRow]) -> list[PlotPoint]:
    points = []
    for spec in sorted({r.spec for r in rows}, key=lambda s: s.table_rank):
        mine = [r for r in rows if r.spec == spec]
        judged = [r for r in mine if r.correct is not None]
        points.append(
            PlotPoint(
                spec=spec,
                total_tokens=sum(r.total_tokens for r in mine) / len(mine),
                sequential_tokens=sum(r.sequential_tokens for r in mine) / len(mine),
                accuracy=(sum(r.correct for r in judged) / len(judged)) if judged else None,
            )
        )
    return points


def _dataset_rank(dataset: DatasetName) -> tuple[int, str]:
    try:
        return (DATASET_ORDER.index(dataset), dataset.value)
    except ValueError:
        return (len(DATASET_ORDER), dataset.value)


def _best(values: Mapping[str, float], pick) -> tuple[str, ...]:
    if not values:
        return ()
    target = pick(values.values())
    return tuple(key for key in values if values[key] == target)
