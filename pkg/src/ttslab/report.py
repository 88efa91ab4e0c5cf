"""Report emission: per-model strategy tables and plot data.

Tables follow the benchmark convention: token rows first (in thousands, one
decimal), one accuracy row per dataset (percent, one decimal), best value per
row starred (all cells on a tie). Output is byte-deterministic for fixed
store contents.
"""

from __future__ import annotations

import csv
import json
import re
from pathlib import Path

from .analytics import (
    SEQ_TOKENS_METRIC,
    TOTAL_TOKENS_METRIC,
    OutcomeRow,
    PlotPoint,
    StrategyTable,
    plot_points,
    strategy_table,
)
from .runstore import RunRecord, RunStore, StoreError

ABSENT_CELL = "--"
BEST_MARK = "*"

PLOT_HEADER = ("strategy", "k", "N", "total_tokens", "sequential_tokens", "accuracy")


def emit_report(
    store: RunStore,
    out_dir: str | Path,
    *,
    model_ids: list[str] | None = None,
    run_ids: list[str] | None = None,
) -> list[Path]:
    """Write report_<model>.{csv,json} and plotdata_<model>.csv per model in scope."""
    records = [
        r
        for r in store.iter_runs()
        if (model_ids is None or r.model_id in model_ids)
        and (run_ids is None or r.run_id in run_ids)
    ]
    if not records:
        raise StoreError("no outcomes in scope")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written: list[Path] = []
    for model_id in sorted({r.model_id for r in records}):
        rows = [_outcome_row(r) for r in records if r.model_id == model_id]
        table = strategy_table(rows, model_id)
        slug = _slug(model_id)
        written.append(_write_table_csv(table, out_dir / f"report_{slug}.csv"))
        written.append(_write_table_json(table, out_dir / f"report_{slug}.json"))
        written.append(_write_plot_csv(plot_points(rows), out_dir / f"plotdata_{slug}.csv"))
    return written


def _outcome_row(record: RunRecord) -> OutcomeRow:
    return OutcomeRow(
        spec=record.spec,
        dataset=record.dataset,
        correct=record.outcome.correct,
        total_tokens=record.outcome.stats.total_tokens,
        sequential_tokens=record.outcome.stats.sequential_tokens,
    )


def format_table_text(table: StrategyTable) -> str:
    """Plain-text rendering for terminal summaries."""
    labels = ["metric"] + [spec.display_label for spec in table.columns]
    lines = ["\t".join(labels)]
    for row in table.rows:
        cells = [row.display]
        for spec in table.columns:
            cells.append(_render_cell(row, str(spec)))
        lines.append("\t".join(cells))
    return "\n".join(lines)


def _render_cell(row, spec_key: str) -> str:
    if spec_key not in row.values:
        return ABSENT_CELL
    value = row.values[spec_key]
    if row.metric in (SEQ_TOKENS_METRIC, TOTAL_TOKENS_METRIC):
        text = f"{value / 1000:.1f}k"
    else:
        text = f"{value:.1f}"
    if spec_key in row.best:
        text += BEST_MARK
    return text


def _write_table_csv(table: StrategyTable, path: Path) -> Path:
    with path.open("w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["metric"] + [spec.display_label for spec in table.columns])
        for row in table.rows:
            writer.writerow([row.display] + [_render_cell(row, str(s)) for s in table.columns])
    return path


def _write_table_json(table: StrategyTable, path: Path) -> Path:
    payload = {
        "model_id": table.model_id,
        "columns": [
            {"label": spec.display_label, "spec": str(spec)} for spec in table.columns
        ],
        "rows": [
            {
                "metric": row.metric,
                "display": row.display,
                "values": {key: round(value, 6) for key, value in sorted(row.values.items())},
                "best": sorted(row.best),
            }
            for row in table.rows
        ],
    }
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return path


def _write_plot_csv(points: list[PlotPoint], path: Path) -> Path:
    with path.open("w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(PLOT_HEADER)
        for point in points:
            writer.writerow(
                [
                    point.spec.kind.value,
                    point.spec.k if point.spec.k is not None else "",
                    point.spec.n if point.spec.n is not None else "",
                    f"{point.total_tokens:.1f}",
                    f"{point.sequential_tokens:.1f}",
                    f"{point.accuracy:.4f}" if point.accuracy is not None else "",
                ]
            )
    return path


def _slug(model_id: str) -> str:
    return re.sub(r"[^A-Za-z0-9._-]+", "_", model_id) or "model"
