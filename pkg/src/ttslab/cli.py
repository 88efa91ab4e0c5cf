"""Command-line surface: run, replay, analyze, classify, recommend, report, mock-serve.

Exit codes: 0 success, 1 usage error, 2 runtime failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .advisor import ComputeBudget, recommend
from .analytics import (
    AccuracyGrid,
    DifficultyLabel,
    ModelCategory,
    UnclassifiableError,
    accuracy_grid,
    classify_horizon,
    estimate_difficulty,
    score_traces,
)
from .corpus import (
    AnswerKind,
    CorpusError,
    DatasetName,
    Problem,
    PromptTemplate,
    load_dataset,
    render_prompt,
)
from .gateway import EndpointConfig, GatewayError, sample_parallel
from .mockserver import MockScript, MockServer, serve_mock
from .profiles import DEFAULT_SAMPLES, load_profile, resolve_sampling
from .report import emit_report
from .runstore import RunRecord, RunStore, StoreError, new_run_id
from .strategies import StrategyKind, StrategySpec, run_strategy
from .traces import StopRule

log = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_RUNTIME = 2


class UsageError(Exception):
    """Bad arguments discovered after parsing."""


class _Parser(argparse.ArgumentParser):
    def error(self, message: str) -> None:  # usage errors exit 1, not argparse's 2
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="ttslab", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="sample a strategy against an endpoint")
    run.add_argument("--strategy", required=True, help="e.g. mv:n=8, ffs:k=1,n=8, lfs:k=2,n=8, sd")
    run.add_argument("--dataset", required=True, metavar="[LABEL=]PATH", help="problem JSONL file")
    run.add_argument("--answer-kind", choices=["integer", "choice"], help="override the label default")
    run.add_argument("--endpoint", required=True, help="base URL, profile name, or 'mock'")
    run.add_argument("--mock-script", help="script file for --endpoint mock")
    run.add_argument("--model", help="model identifier sent to the endpoint")
    run.add_argument("--api-key-env", help="environment variable holding the API key")
    run.add_argument("--profile", help="JSON profile file with endpoints and model defaults")
    run.add_argument("--template", help="prompt template file with a {statement} placeholder")
    run.add_argument("--temperature", type=float)
    run.add_argument("--top-p", type=float, dest="top_p")
    run.add_argument("--max-tokens", type=int, dest="max_tokens")
    run.add_argument("--concurrency", type=int, default=8, help="max in-flight streams")
    run.add_argument("--timeout", type=float, default=120.0, help="per-request seconds")
    run.add_argument("--retries", type=int, default=1)
    run.add_argument("--store", help="run store directory for traces and outcomes")
    run.add_argument("--no-text", action="store_true", help="do not persist trace text")
    run.add_argument("--run-id", help="explicit run id (default: random)")
    run.add_argument("--limit", type=int, help="evaluate only the first N problems")
    run.set_defaults(func=cmd_run)

    replay = sub.add_parser("replay", help="re-evaluate stored trace sets under a new strategy")
    replay.add_argument("--store", required=True)
    replay.add_argument("--run-id", required=True, help="source run to replay")
    replay.add_argument("--strategy", required=True)
    replay.add_argument("--dataset", metavar="[LABEL=]PATH", help="needed to score correctness")
    replay.add_argument("--answer-kind", choices=["integer", "choice"])
    replay.add_argument("--new-run-id", help="run id for the replayed outcomes")
    replay.set_defaults(func=cmd_replay)

    analyze = sub.add_parser("analyze", help="difficulty estimates and accuracy grids")
    analyze.add_argument("--store", required=True)
    analyze.add_argument(
        "--dataset", action="append", required=True, metavar="[LABEL=]PATH",
        help="problem files (repeatable)",
    )
    analyze.add_argument("--answer-kind", choices=["integer", "choice"])
    analyze.add_argument("--run-id", help="restrict to one run")
    analyze.add_argument(
        "--median-split", choices=["pooled", "per_dataset"], default="pooled",
        help="difficulty median over the pooled task set or per dataset",
    )
    analyze.add_argument("--out", default="analysis", help="output directory")
    analyze.set_defaults(func=cmd_analyze)

    classify = sub.add_parser("classify", help="horizon category per model")
    classify.add_argument("--grids", help="JSON file of prebuilt accuracy grids")
    classify.add_argument("--store", help="compute grids from a run store instead")
    classify.add_argument("--dataset", action="append", metavar="[LABEL=]PATH")
    classify.add_argument("--answer-kind", choices=["integer", "choice"])
    classify.add_argument("--run-id")
    classify.add_argument(
        "--reasoning", action="append", default=[], metavar="MODEL",
        help="mark MODEL as a reasoning model (repeatable; store mode only)",
    )
    classify.add_argument("--out", help="also write the categories JSON here")
    classify.set_defaults(func=cmd_classify)

    rec = sub.add_parser("recommend", help="compute-optimal strategy for a model/budget")
    rec.add_argument(
        "--category",
        choices=[c.value for c in ModelCategory],
        help="model family; may come from --model-profile instead",
    )
    rec.add_argument(
        "--difficulty", choices=["easy", "hard", "unknown"], default="unknown",
        help="accepted for completeness; the matrix is difficulty-invariant",
    )
    rec.add_argument("--budget-tokens", type=int, required=True, help="tokens per problem")
    rec.add_argument(
        "--median-trace-tokens", type=int,
        help="model's median single-trace length; may come from --model-profile",
    )
    rec.add_argument(
        "--model-profile",
        help="JSON with category and median_trace_length (e.g. classify/analyze output)",
    )
    rec.add_argument("--n-max", type=int, default=DEFAULT_SAMPLES)
    rec.add_argument("--tier-multiple", type=float, default=2.0)
    rec.set_defaults(func=cmd_recommend)

    report = sub.add_parser("report", help="emit per-model tables and plot data")
    report.add_argument("--store", required=True)
    report.add_argument("--out", required=True)
    report.add_argument("--model", action="append", help="restrict to these models")
    report.add_argument("--run-id", action="append", help="restrict to these runs")
    report.set_defaults(func=cmd_report)

    mock = sub.add_parser("mock-serve", help="serve a deterministic mock endpoint")
    mock.add_argument("--script", required=True)
    mock.add_argument("--port", type=int, default=8080)
    mock.add_argument("--host", default="127.0.0.1")
    mock.set_defaults(func=cmd_mock_serve)
    return parser


# argument helpers -----------------------------------------------------------


def _parse_spec(text: str) -> StrategySpec:
    try:
        return StrategySpec.parse(text)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc


def _parse_dataset_arg(arg: str) -> tuple[DatasetName, Path]:
    label, sep, path = arg.partition("=")
    if not sep:
        return DatasetName.CUSTOM, Path(arg)
    try:
        return DatasetName(label), Path(path)
    except ValueError:
        raise UsageError(
            f"unknown dataset label {label!r}; expected one of "
            f"{', '.join(d.value for d in DatasetName)}"
        ) from None


def _answer_kind_for(dataset: DatasetName, override: str | None) -> AnswerKind:
    if override:
        return AnswerKind(override)
    return AnswerKind.CHOICE if dataset is DatasetName.GPQA_DIAMOND else AnswerKind.INTEGER


def _load_problems(args_dataset: list[str], override: str | None) -> list[Problem]:
    problems: list[Problem] = []
    for arg in args_dataset:
        dataset, path = _parse_dataset_arg(arg)
        kind = _answer_kind_for(dataset, override)
        problems.extend(load_dataset(path, kind, dataset))
    return problems


def _resolve_endpoint(args, profile: dict | None = None) -> tuple[EndpointConfig, MockServer | None]:
    profile = profile or {}
    if args.endpoint == "mock":
        if not args.mock_script:
            raise UsageError("--endpoint mock requires --mock-script")
        server = serve_mock(args.mock_script, port=0)
        return (
            EndpointConfig(
                base_url=server.base_url,
                model=args.model or "mock-model",
                max_concurrent=args.concurrency,
                timeout=args.timeout,
                retries=args.retries,
            ),
            server,
        )
    entry = profile.get("endpoints", {}).get(args.endpoint)
    if entry is not None:
        base_url = entry["base_url"]
        model = args.model or entry.get("model")
        api_key_env = args.api_key_env or entry.get("api_key_env")
    elif args.endpoint.startswith(("http://", "https://")):
        base_url, model, api_key_env = args.endpoint, args.model, args.api_key_env
    else:
        raise UsageError(f"endpoint {args.endpoint!r} is neither a URL, a profile name, nor 'mock'")
    if not model:
        raise UsageError("--model is required for this endpoint")
    return (
        EndpointConfig(
            base_url=base_url,
            model=model,
            api_key_env=api_key_env,
            max_concurrent=args.concurrency,
            timeout=args.timeout,
            retries=args.retries,
        ),
        None,
    )


# commands --------------------------------------------------------------------


def cmd_run(args) -> int:
    spec = _parse_spec(args.strategy)
    if spec.kind is StrategyKind.BEAM:
        raise UsageError(
            "beam decoding runs against a scripted backend, not a chat endpoint"
        )
    dataset, path = _parse_dataset_arg(args.dataset)
    kind = _answer_kind_for(dataset, args.answer_kind)
    problems = load_dataset(path, kind, dataset)
    if args.limit is not None:
        problems = problems[: args.limit]
    template = PromptTemplate.from_file(args.template) if args.template else PromptTemplate()
    profile = load_profile(args.profile) if args.profile else None
    endpoint, server = _resolve_endpoint(args, profile)
    temperature = args.temperature
    if temperature is None and spec.kind is StrategyKind.SD:
        temperature = 0.0  # simple decoding is greedy
    params = resolve_sampling(
        endpoint.model,
        dataset,
        profile,
        temperature=temperature,
        top_p=args.top_p,
        max_tokens=args.max_tokens,
    )
    n = spec.n if spec.n is not None else 1
    rule = StopRule(spec.k) if spec.kind is StrategyKind.FFS else StopRule()
    run_id = args.run_id or new_run_id()
    store = RunStore(args.store) if args.store else None
    config_snapshot = {
        "base_url": endpoint.base_url,
        "model": endpoint.model,
        "temperature": params.temperature,
        "top_p": params.top_p,
        "max_tokens": params.max_tokens,
        "n": n,
        "stop_rule": str(rule),
    }

    outcomes = []
    try:
        for problem in problems:
            prompt = render_prompt(template, problem)
            trace_set = sample_parallel(
                endpoint,
                prompt,
                params,
                n,
                rule,
                problem_id=problem.id,
                answer_kind=problem.answer_kind,
            )
            outcome = run_strategy(spec, trace_set, problem.gold)
            outcomes.append(outcome)
            if store is not None:
                store.append_traces(run_id, trace_set, include_text=not args.no_text)
                store.append_run(
                    RunRecord(
                        run_id=run_id,
                        model_id=endpoint.model,
                        dataset=dataset,
                        spec=spec,
                        problem_id=problem.id,
                        outcome=outcome,
                        config=config_snapshot,
                    )
                )
    finally:
        if server is not None:
            server.close()
    _print_summary(run_id, spec, endpoint.model, dataset, outcomes)
    return EXIT_OK


def _print_summary(run_id, spec, model_id, dataset, outcomes) -> None:
    judged = [o for o in outcomes if o.correct is not None]
    n = len(outcomes)
    print(
        f"run={run_id} strategy={spec} model={model_id} dataset={dataset.display} problems={n}"
    )
    if judged:
        accuracy = sum(o.correct for o in judged) / len(judged)
        print(f"accuracy={accuracy:.3f} ({sum(o.correct for o in judged)}/{len(judged)} judged)")
    total = sum(o.stats.total_tokens for o in outcomes) / max(n, 1)
    seq = sum(o.stats.sequential_tokens for o in outcomes) / max(n, 1)
    billed = [o.stats.billed_tokens for o in outcomes if o.stats.billed_tokens is not None]
    line = f"tokens: total mean={total:.1f} sequential mean={seq:.1f}"
    if billed:
        line += f" billed sum={sum(billed)}"
    print(line)


def cmd_replay(args) -> int:
    spec = _parse_spec(args.strategy)
    if spec.kind is StrategyKind.BEAM:
        raise UsageError("beam specs cannot be replayed over trace sets")
    store = RunStore(args.store)
    groups = store.load_tracesets(args.run_id)
    if not groups:
        raise StoreError(f"run {args.run_id!r} has no stored traces")
    gold_by_id = {}
    dataset = DatasetName.CUSTOM
    if args.dataset:
        dataset, path = _parse_dataset_arg(args.dataset)
        kind = _answer_kind_for(dataset, args.answer_kind)
        gold_by_id = {p.id: p.gold for p in load_dataset(path, kind, dataset)}
    source_datasets = {
        r.problem_id: r.dataset for r in store.iter_runs() if r.run_id == args.run_id
    }
    new_run_id_ = args.new_run_id or new_run_id()
    outcomes = []
    model_id = None
    for problem_id, model, trace_set in groups:
        try:
            outcome = run_strategy(spec, trace_set, gold_by_id.get(problem_id))
        except ValueError as exc:
            raise UsageError(f"cannot replay {spec} over run {args.run_id!r}: {exc}") from exc
        outcomes.append(outcome)
        model_id = model
        store.append_run(
            RunRecord(
                run_id=new_run_id_,
                model_id=model,
                dataset=source_datasets.get(problem_id, dataset),
                spec=spec,
                problem_id=problem_id,
                outcome=outcome,
                config={"replayed_from": args.run_id},
            )
        )
    _print_summary(new_run_id_, spec, model_id, dataset, outcomes)
    return EXIT_OK


def cmd_analyze(args) -> int:
    store = RunStore(args.store)
    problems = _load_problems(args.dataset, args.answer_kind)
    traces = store.load_traces(run_id=args.run_id)
    scored = score_traces(traces, problems)
    if not scored:
        raise StoreError("no finished traces to analyze")
    covered = {s.problem_id for s in scored}
    missing = [p.id for p in problems if p.id not in covered]
    if missing:
        log.warning(
            "%d problem(s) have no finished traces and are excluded: %s",
            len(missing),
            ", ".join(missing[:5]) + ("..." if len(missing) > 5 else ""),
        )
    estimates = estimate_difficulty(scored, split=args.median_split)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    _write_difficulty(out, estimates)
    labels = {e.problem_id: e.label for e in estimates}
    grids = []
    for model_id in sorted({s.model_id for s in scored}):
        grids.append(accuracy_grid(scored, model_id, labels))
    (out / "grids.json").write_text(
        json.dumps([_grid_to_json(g) for g in grids], indent=2, sort_keys=True) + "\n",
        encoding="utf-8",
    )
    easy = sum(1 for e in estimates if e.label is DifficultyLabel.EASY)
    print(
        f"analyzed {len(estimates)} problems ({easy} easy / {len(estimates) - easy} hard), "
        f"{len(grids)} models -> {out}"
    )
    return EXIT_OK


def _write_difficulty(out: Path, estimates) -> None:
    import csv

    with (out / "difficulty.csv").open("w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["problem_id", "dataset", "mean_accuracy", "mean_tokens", "label"])
        for e in estimates:
            writer.writerow(
                [e.problem_id, e.dataset.value, f"{e.mean_accuracy:.4f}",
                 f"{e.mean_tokens:.1f}", e.label.value]
            )
    payload = [
        {
            "problem_id": e.problem_id,
            "dataset": e.dataset.value,
            "mean_accuracy": round(e.mean_accuracy, 6),
            "mean_tokens": round(e.mean_tokens, 6),
            "label": e.label.value,
        }
        for e in estimates
    ]
    (out / "difficulty.json").write_text(
        json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )


def _grid_to_json(grid: AccuracyGrid) -> dict:
    return {
        "model_id": grid.model_id,
        "easy_short": grid.easy_short,
        "easy_long": grid.easy_long,
        "hard_short": grid.hard_short,
        "hard_long": grid.hard_long,
        "median_trace_length": grid.median_trace_length,
    }


def _grid_from_json(obj: dict) -> tuple[AccuracyGrid, bool]:
    grid = AccuracyGrid(
        model_id=str(obj["model_id"]),
        easy_short=obj.get("easy_short"),
        easy_long=obj.get("easy_long"),
        hard_short=obj.get("hard_short"),
        hard_long=obj.get("hard_long"),
        median_trace_length=float(obj.get("median_trace_length", 0.0)),
    )
    return grid, bool(obj.get("is_reasoning", False))


def cmd_classify(args) -> int:
    pairs: list[tuple[AccuracyGrid, bool]] = []
    if args.grids:
        data = json.loads(Path(args.grids).read_text(encoding="utf-8"))
        if not isinstance(data, list):
            raise UsageError("--grids file must hold a JSON list of grids")
        pairs = [_grid_from_json(obj) for obj in data]
    elif args.store:
        if not args.dataset:
            raise UsageError("--store classification needs --dataset files for gold answers")
        store = RunStore(args.store)
        problems = _load_problems(args.dataset, args.answer_kind)
        scored = score_traces(store.load_traces(run_id=args.run_id), problems)
        if not scored:
            raise StoreError("no finished traces to classify")
        labels = {e.problem_id: e.label for e in estimate_difficulty(scored)}
        reasoning = set(args.reasoning)
        for model_id in sorted({s.model_id for s in scored}):
            pairs.append((accuracy_grid(scored, model_id, labels), model_id in reasoning))
    else:
        raise UsageError("classify needs --grids or --store")
    results = []
    for grid, is_reasoning in pairs:
        category = classify_horizon(grid, is_reasoning)
        entry = {"model_id": grid.model_id, "category": category.value}
        if grid.median_trace_length:
            # feeds straight into `recommend --model-profile`
            entry["median_trace_length"] = grid.median_trace_length
        results.append(entry)
    text = json.dumps(results, indent=2, sort_keys=True)
    print(text)
    if args.out:
        Path(args.out).write_text(text + "\n", encoding="utf-8")
    return EXIT_OK


def cmd_recommend(args) -> int:
    category_text = args.category
    median = args.median_trace_tokens
    if args.model_profile:
        data = json.loads(Path(args.model_profile).read_text(encoding="utf-8"))
        if not isinstance(data, dict):
            raise UsageError("--model-profile must hold a JSON object")
        category_text = category_text or data.get("category")
        if median is None and data.get("median_trace_length") is not None:
            median = max(1, round(float(data["median_trace_length"])))
    if not category_text:
        raise UsageError("recommend needs --category or a --model-profile with one")
    if median is None:
        raise UsageError(
            "recommend needs --median-trace-tokens or a --model-profile with median_trace_length"
        )
    difficulty = None if args.difficulty == "unknown" else DifficultyLabel(args.difficulty)
    budget = ComputeBudget(
        tokens_per_problem=args.budget_tokens,
        est_trace_cost=median,
        high_tier_multiple=args.tier_multiple,
    )
    result = recommend(ModelCategory(category_text), difficulty, budget, n_max=args.n_max)
    print(
        json.dumps(
            {
                "strategy": str(result.spec),
                "kind": result.spec.kind.value,
                "tier": budget.tier.value,
                "rationale": result.rationale,
            },
            indent=2,
            sort_keys=True,
        )
    )
    return EXIT_OK


def cmd_report(args) -> int:
    store = RunStore(args.store)
    written = emit_report(store, args.out, model_ids=args.model, run_ids=args.run_id)
    for path in written:
        print(path)
    return EXIT_OK


def cmd_mock_serve(args) -> int:
    script = MockScript.from_file(args.script)
    server = MockServer(script, host=args.host, port=args.port)
    print(f"mock endpoint listening on {server.base_url}")
    try:
        server.serve_blocking()
    except KeyboardInterrupt:
        pass
    finally:
        server.close()
    return EXIT_OK


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
    )
    if not args.verbose:
        logging.getLogger("httpx").setLevel(logging.WARNING)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"ttslab: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (CorpusError, StoreError, GatewayError, UnclassifiableError) as exc:
        print(f"ttslab: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except (OSError, ValueError) as exc:
        print(f"ttslab: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
