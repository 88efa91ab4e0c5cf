"""Append-only JSONL stores for traces and strategy outcomes.

One directory holds two files: traces.jsonl (one line per sampled trace) and
runs.jsonl (one line per evaluated outcome). Appends are flushed and fsynced;
a crash can only damage the final line, which is dropped with a warning on
reload. Single writer per store, any number of readers.
"""

from __future__ import annotations

import json
import logging
import os
import threading
import uuid
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Iterator

from .corpus import Answer, AnswerKind, DatasetName
from .strategies import StrategyOutcome, StrategySpec
from .traces import StopRule, TokenStats, Trace, TraceSet, TraceStatus

log = logging.getLogger(__name__)

TRACES_FILE = "traces.jsonl"
RUNS_FILE = "runs.jsonl"


class StoreError(RuntimeError):
    """Corrupt store contents or an unsatisfiable load request."""


def new_run_id() -> str:
    return uuid.uuid4().hex[:12]


def _now() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


@dataclass(frozen=True)
class RunRecord:
    """One strategy outcome plus the configuration snapshot that produced it."""

    run_id: str
    model_id: str
    dataset: DatasetName
    spec: StrategySpec
    problem_id: str
    outcome: StrategyOutcome
    config: dict[str, Any] = field(default_factory=dict)
    recorded_at: str = field(default_factory=_now)


class RunStore:
    def __init__(self, root: str | Path) -> None:
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)
        self.traces_path = self.root / TRACES_FILE
        self.runs_path = self.root / RUNS_FILE
        self._write_lock = threading.Lock()

    # writing ---------------------------------------------------------------

    def append_traces(self, run_id: str, trace_set: TraceSet, include_text: bool = True) -> None:
        records = [
            _trace_to_json(run_id, trace_set, trace, include_text) for trace in trace_set.traces
        ]
        self._append(self.traces_path, records)

    def append_run(self, record: RunRecord) -> None:
        self._append(self.runs_path, [_run_to_json(record)])

    def _append(self, path: Path, records: list[dict]) -> None:
        with self._write_lock:
            with path.open("a", encoding="utf-8") as fh:
                for record in records:
                    fh.write(json.dumps(record, sort_keys=True, ensure_ascii=False) + "\n")
                fh.flush()
                os.fsync(fh.fileno())

    # reading ---------------------------------------------------------------

    def iter_trace_records(self) -> Iterator[dict]:
        yield from _read_json_lines(self.traces_path)

    def iter_runs(self) -> list[RunRecord]:
        return [_run_from_json(obj, self.runs_path) for obj in _read_json_lines(self.runs_path)]

    def load_traces(self, run_id: str | None = None) -> list[Trace]:
        traces = []
        for obj in self.iter_trace_records():
            if run_id is None or obj.get("run_id") == run_id:
                traces.append(_trace_from_json(obj, self.traces_path))
        return traces

    def trace_groups(self, run_id: str | None = None) -> list[tuple[str, str, str]]:
        """Distinct (run_id, problem_id, model_id) keys, in first-seen order."""
        seen: dict[tuple[str, str, str], None] = {}
        for obj in self.iter_trace_records():
            key = (obj.get("run_id", ""), obj.get("problem_id", ""), obj.get("model_id", ""))
            if run_id is None or key[0] == run_id:
                seen.setdefault(key, None)
        return list(seen)

    def load_traceset(self, problem_id: str, model_id: str, run_id: str) -> TraceSet:
        """Rebuild a TraceSet for replay; validates completeness and invariants."""
        rows = [
            obj
            for obj in self.iter_trace_records()
            if obj.get("run_id") == run_id
            and obj.get("problem_id") == problem_id
            and obj.get("model_id") == model_id
        ]
        if not rows:
            raise StoreError(
                f"no traces for run={run_id!r} problem={problem_id!r} model={model_id!r}"
            )
        return self._build_traceset(problem_id, model_id, run_id, rows)

    def load_tracesets(self, run_id: str) -> list[tuple[str, str, TraceSet]]:
        """Every (problem_id, model_id, TraceSet) of one run, in first-seen order."""
        grouped: dict[tuple[str, str, str], list[dict]] = {}
        for obj in self.iter_trace_records():
            key = (obj.get("run_id", ""), obj.get("problem_id", ""), obj.get("model_id", ""))
            if key[0] == run_id:
                grouped.setdefault(key, []).append(obj)
        return [
            (problem_id, model_id, self._build_traceset(problem_id, model_id, rid, rows))
            for (rid, problem_id, model_id), rows in grouped.items()
        ]

    def _build_traceset(
        self, problem_id: str, model_id: str, run_id: str, rows: list[dict]
    ) -> TraceSet:
        traces = [_trace_from_json(obj, self.traces_path) for obj in rows]
        indices = sorted(t.sample_index for t in traces)
        if indices != list(range(len(traces))):
            raise StoreError(
                f"trace set run={run_id!r} problem={problem_id!r} has sample indices "
                f"{indices}; expected 0..{len(traces) - 1}"
            )
        stop_rules = {obj.get("stop_rule", "all_complete") for obj in rows}
        if len(stop_rules) != 1:
            raise StoreError(f"conflicting stop rules in stored set: {sorted(stop_rules)}")
        try:
            return TraceSet(
                problem_id=problem_id,
                model_id=model_id,
                traces=tuple(traces),
                stop_rule=StopRule.parse(stop_rules.pop()),
                live=bool(rows[0].get("live", False)),
            )
        except ValueError as exc:
            raise StoreError(f"stored trace set is invalid: {exc}") from exc


def _read_json_lines(path: Path) -> list[dict]:
    """Parse a JSONL file, dropping a partially written final line with a warning."""
    if not path.exists():
        return []
    raw = path.read_text(encoding="utf-8")
    if not raw:
        return []
    complete_tail = raw.endswith("\n")
    lines = raw.splitlines()
    records: list[dict] = []
    for lineno, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        final = lineno == len(lines)
        try:
            records.append(json.loads(line))
        except json.JSONDecodeError as exc:
            if final and not complete_tail:
                log.warning("%s:%d: dropping partially written final line", path, lineno)
                continue
            raise StoreError(f"{path}:{lineno}: corrupt record ({exc.msg})") from exc
    return records


# serialization -------------------------------------------------------------


def _answer_to_json(answer: Answer | None) -> dict | None:
    if answer is None:
        return None
    return {"kind": answer.kind.value, "value": answer.value}


def _answer_from_json(obj: dict | None) -> Answer | None:
    if obj is None:
        return None
    kind = AnswerKind(obj["kind"])
    if kind is AnswerKind.INTEGER:
        return Answer.integer(int(obj["value"]))
    return Answer.choice(str(obj["value"]))


def _trace_to_json(run_id: str, trace_set: TraceSet, trace: Trace, include_text: bool) -> dict:
    return {
        "run_id": run_id,
        "problem_id": trace.problem_id,
        "model_id": trace.model_id,
        "sample_index": trace.sample_index,
        "token_count": trace.token_count,
        "status": trace.status.value,
        "completion_rank": trace.completion_rank,
        "extracted": _answer_to_json(trace.extracted),
        "text": trace.text if include_text else None,
        "stop_rule": str(trace_set.stop_rule),
        "live": trace_set.live,
        "recorded_at": _now(),
    }


def _trace_from_json(obj: dict, path: Path) -> Trace:
    try:
        return Trace(
            problem_id=str(obj["problem_id"]),
            model_id=str(obj["model_id"]),
            sample_index=int(obj["sample_index"]),
            text=str(obj.get("text") or ""),
            token_count=int(obj["token_count"]),
            status=TraceStatus(obj["status"]),
            extracted=_answer_from_json(obj.get("extracted")),
            completion_rank=(
                int(obj["completion_rank"]) if obj.get("completion_rank") is not None else None
            ),
        )
    except (KeyError, ValueError, TypeError) as exc:
        raise StoreError(f"{path}: invalid trace record: {exc}") from exc


def _run_to_json(record: RunRecord) -> dict:
    outcome = record.outcome
    return {
        "run_id": record.run_id,
        "recorded_at": record.recorded_at,
        "model_id": record.model_id,
        "dataset": record.dataset.value,
        "spec": str(record.spec),
        "problem_id": record.problem_id,
        "config": record.config,
        "outcome": {
            "chosen": _answer_to_json(outcome.chosen),
            "correct": outcome.correct,
            "stats": {
                "total_tokens": outcome.stats.total_tokens,
                "sequential_tokens": outcome.stats.sequential_tokens,
                "billed_tokens": outcome.stats.billed_tokens,
            },
            "used_trace_indices": list(outcome.used_trace_indices),
            "degraded": outcome.degraded,
            "tie_broken": outcome.tie_broken,
        },
    }


def _run_from_json(obj: dict, path: Path) -> RunRecord:
    try:
        raw = obj["outcome"]
        stats = raw["stats"]
        outcome = StrategyOutcome(
            chosen=_answer_from_json(raw.get("chosen")),
            correct=raw.get("correct"),
            stats=TokenStats(
                total_tokens=int(stats["total_tokens"]),
                sequential_tokens=int(stats["sequential_tokens"]),
                billed_tokens=(
                    int(stats["billed_tokens"]) if stats.get("billed_tokens") is not None else None
                ),
            ),
            used_trace_indices=tuple(raw.get("used_trace_indices", [])),
            degraded=bool(raw.get("degraded", False)),
            tie_broken=bool(raw.get("tie_broken", False)),
        )
        return RunRecord(
            run_id=str(obj["run_id"]),
            recorded_at=str(obj.get("recorded_at", "")),
            model_id=str(obj["model_id"]),
            dataset=DatasetName(obj["dataset"]),
            spec=StrategySpec.parse(obj["spec"]),
            problem_id=str(obj["problem_id"]),
            config=dict(obj.get("config", {})),
            outcome=outcome,
        )
    except (KeyError, ValueError, TypeError) as exc:
        raise StoreError(f"{path}: invalid run record: {exc}") from exc
