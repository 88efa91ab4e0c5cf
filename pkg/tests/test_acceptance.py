"""Acceptance suite: ten criteria, one pass/fail line each.

Run with `pytest tests/test_acceptance.py -v -s` to see the lines.
"""

from __future__ import annotations

import json
import random
import time

import pytest
from scipy import stats as scipy_stats

from conftest import FIXTURES, make_set, random_traceset
from oracles import (
    oracle_best_path,
    oracle_extract,
    oracle_greedy,
    oracle_lockstep,
    oracle_select_longest,
    oracle_select_shortest,
    oracle_vote,
)
from test_corpus import EXTRACTION_CORPUS
from ttslab.advisor import ComputeBudget, recommend
from ttslab.analytics import (
    AccuracyGrid,
    DifficultyLabel,
    ModelCategory,
    classify_horizon,
    estimate_difficulty,
)
from ttslab.beam import BeamConfig, ScriptedBackend, beam_search
from ttslab.corpus import AnswerKind, extract_answer
from ttslab.gateway import SamplingParams, sample_parallel
from ttslab.mockserver import MockScript, MockServer
from ttslab.report import emit_report
from ttslab.runstore import RunStore
from ttslab.strategies import StrategySpec, run_strategy, select_ffs, select_lfs
from ttslab.traces import CostModel, StopRule, token_stats
from test_beam import DEPTH3_TREE, DELAYED_REWARD_TREE
from test_gateway import SLACK_TOKENS
from test_analytics import scored


def _report(criterion: int, text: str) -> None:
    print(f"ACCEPTANCE {criterion:02d} PASS: {text}")


def test_c01_voting_and_selection_oracles():
    rng = random.Random(1)
    started = time.monotonic()
    vote_hits = 0
    cases = 1000
    for _ in range(cases):
        ts = random_traceset(rng, n_max=8, alphabet=4, all_complete=True)
        outcome = run_strategy(StrategySpec.parse(f"mv:n={len(ts)}"), ts)
        expected = oracle_vote(
            [t.extracted for t in ts.traces], [t.token_count for t in ts.traces]
        )
        assert outcome.chosen == expected
        vote_hits += 1
        k = rng.randint(1, len(ts))
        assert select_ffs(ts, k) == oracle_select_shortest(ts, k)
        assert select_lfs(ts, k) == oracle_select_longest(ts, k)
    elapsed = time.monotonic() - started
    assert vote_hits == cases
    assert elapsed < 5.0
    _report(1, f"MV matches brute-force oracle {vote_hits}/{cases}; FFS/LFS selections "
               f"match naive sorts; {elapsed:.2f}s")


def test_c02_full_k_identities():
    rng = random.Random(2)
    cases = 1000
    for _ in range(cases):
        ts = random_traceset(rng, all_complete=True)
        n = len(ts)
        ffs = run_strategy(StrategySpec.parse(f"ffs:k={n},n={n}"), ts)
        lfs = run_strategy(StrategySpec.parse(f"lfs:k={n},n={n}"), ts)
        mv = run_strategy(StrategySpec.parse(f"mv:n={n}"), ts)
        assert ffs.chosen == lfs.chosen == mv.chosen
        assert ffs.stats == lfs.stats == mv.stats
        assert (
            frozenset(ffs.used_trace_indices)
            == frozenset(lfs.used_trace_indices)
            == frozenset(mv.used_trace_indices)
        )
    _report(2, f"FFS-N@N = LFS-N@N = MV@N in answer, cost, and used traces on {cases}/{cases} sets")


def test_c03_published_grid_categories():
    entries = json.loads((FIXTURES / "table1_grids.json").read_text(encoding="utf-8"))
    assert len(entries) == 8
    got = []
    for entry in entries:
        grid = AccuracyGrid(
            model_id=entry["model_id"],
            easy_short=entry["easy_short"],
            easy_long=entry["easy_long"],
            hard_short=entry["hard_short"],
            hard_long=entry["hard_long"],
            median_trace_length=entry["median_trace_length"],
        )
        category = classify_horizon(grid, entry["is_reasoning"])
        assert category is ModelCategory(entry["expected_category"]), entry["model_id"]
        got.append(category)
    assert got.count(ModelCategory.SHORT_HORIZON) == 3
    assert got.count(ModelCategory.LONG_HORIZON) == 3
    assert got.count(ModelCategory.NON_REASONING) == 2
    _report(3, "8/8 published grids classify to their published categories (3 short / 3 long / 2 non-reasoning)")


def test_c04_recipe_matrix():
    high = ComputeBudget(tokens_per_problem=40000, est_trace_cost=1000)
    low = ComputeBudget(tokens_per_problem=1500, est_trace_cost=1000)
    expected = {
        (ModelCategory.SHORT_HORIZON, "high"): "mv:n=8",
        (ModelCategory.SHORT_HORIZON, "low"): "ffs:k=1,n=8",
        (ModelCategory.LONG_HORIZON, "high"): "mv:n=8",
        (ModelCategory.LONG_HORIZON, "low"): "sd",
        (ModelCategory.NON_REASONING, "high"): "mv:n=8",
        (ModelCategory.NON_REASONING, "low"): "ffs:k=1,n=8",
    }
    for (category, tier), spec_text in expected.items():
        budget = high if tier == "high" else low
        easy = recommend(category, DifficultyLabel.EASY, budget, n_max=8)
        hard = recommend(category, DifficultyLabel.HARD, budget, n_max=8)
        assert str(easy.spec) == spec_text, (category, tier)
        assert easy.spec == hard.spec, (category, tier)
    _report(4, "all six (category x compute) recipe cells exact; Easy and Hard recommendations identical")


def test_c05_token_accounting():
    ts = make_set([3, 5, 9])
    mv = token_stats(ts, list(ts.traces), CostModel.ALL_COMPLETE)
    assert (mv.total_tokens, mv.sequential_tokens) == (17, 9)
    ffs1 = token_stats(ts, select_ffs(ts, 1), CostModel.FIRST_K)
    assert (ffs1.total_tokens, ffs1.sequential_tokens) == (9, 3)
    ffs2 = token_stats(ts, select_ffs(ts, 2), CostModel.FIRST_K)
    assert (ffs2.total_tokens, ffs2.sequential_tokens) == (13, 5)

    rng = random.Random(5)
    cases = 1000
    for _ in range(cases):
        n = rng.randint(1, 8)
        lengths = [rng.randint(1, 60) for _ in range(n)]
        k = rng.randint(1, n)
        sim_total, sim_steps = oracle_lockstep(lengths, k)
        stats = token_stats(make_set(lengths), select_ffs(make_set(lengths), k), CostModel.FIRST_K)
        assert stats.total_tokens == sim_total
        assert stats.sequential_tokens == sim_steps
    _report(5, f"{{3,5,9}} examples exact; lockstep simulation agrees exactly on {cases}/{cases} random multisets")


def test_c06_live_cancellation_savings():
    started = time.monotonic()
    lengths = [10, 100, 130, 160, 190, 220, 250, 280]  # 28x spread
    assert max(lengths) / min(lengths) >= 10
    script = {
        f"prob-{i}": [
            {"tokens": ["t"] * (length - 1) + ["\\boxed{7}"], "delay": 0.005}
            for length in lengths
        ]
        for i in range(5)
    }
    params = SamplingParams(max_tokens=10000)
    with MockServer(MockScript.from_dict(script)) as server:
        from ttslab.gateway import EndpointConfig

        config = EndpointConfig(base_url=server.base_url, model="mock-model", retries=0)
        mv_client_billed = 0
        for i in range(5):
            ts = sample_parallel(config, f"prob-{i}", params, n=8, problem_id=f"prob-{i}")
            stats = token_stats(ts, list(ts.traces), CostModel.ALL_COMPLETE)
            mv_client_billed += stats.billed_tokens
        mv_server_billed = server.emitted_tokens()
        server.reset()

        ffs_client_billed = 0
        for i in range(5):
            ts = sample_parallel(
                config, f"prob-{i}", params, n=8, rule=StopRule(1), problem_id=f"prob-{i}"
            )
            stats = token_stats(ts, select_ffs(ts, 1), CostModel.FIRST_K)
            ffs_client_billed += stats.billed_tokens
        time.sleep(0.4)  # cancelled handlers run into the broken pipe and stop
        ffs_server_billed = server.emitted_tokens()

    elapsed = time.monotonic() - started
    assert mv_server_billed == 5 * sum(lengths)
    assert ffs_server_billed <= 0.25 * mv_server_billed
    assert ffs_client_billed <= 0.25 * mv_client_billed
    lockstep_total, _ = oracle_lockstep(lengths, 1)
    assert ffs_server_billed <= 5 * (lockstep_total + 8 * SLACK_TOKENS)
    assert elapsed < 30.0
    _report(6, f"FFS-1@8 billed {ffs_server_billed} tokens vs MV@8 {mv_server_billed} "
               f"({100 * ffs_server_billed / mv_server_billed:.1f}% <= 25%); {elapsed:.1f}s")


def test_c07_beam_mechanics():
    for tree in (DELAYED_REWARD_TREE, DEPTH3_TREE):
        backend = ScriptedBackend(tree)
        result = beam_search(backend, BeamConfig(width=1, max_steps=10))
        greedy_tokens, _ = oracle_greedy(backend, max_steps=10)
        assert result.hypothesis.tokens == greedy_tokens

    backend = ScriptedBackend(DELAYED_REWARD_TREE)
    wide = beam_search(backend, BeamConfig(width=2, max_steps=10))
    best_tokens, best_score = oracle_best_path(backend, max_depth=10)
    assert wide.hypothesis.tokens == best_tokens
    assert wide.hypothesis.score == pytest.approx(best_score)

    depth3 = ScriptedBackend(DEPTH3_TREE)
    scores = [
        beam_search(depth3, BeamConfig(width=w, max_steps=10)).hypothesis.score
        for w in range(1, 9)
    ]
    assert all(later >= earlier for earlier, later in zip(scores, scores[1:]))
    _report(7, f"width-1 = greedy token-for-token; width-2 recovers the delayed-reward optimum; "
               f"scores over widths 1..8 nondecreasing: {scores}")


def test_c08_extraction_corpus():
    assert len(EXTRACTION_CORPUS) == 50
    agreements = 0
    for text, kind, expected in EXTRACTION_CORPUS:
        got = extract_answer(text, kind)
        assert got == oracle_extract(text, kind)
        assert got == expected
        agreements += 1
    # oracle agreement must hold for the other answer kind too
    for text, kind, _ in EXTRACTION_CORPUS:
        other = AnswerKind.CHOICE if kind is AnswerKind.INTEGER else AnswerKind.INTEGER
        assert extract_answer(text, other) == oracle_extract(text, other)
    _report(8, f"{agreements}/50 synthetic boxed-answer cases agree with the hand-built oracle parser")


def test_c09_difficulty_length_trend():
    rng = random.Random(9)
    rows = []
    problems = 200
    for i in range(problems):
        hardness = rng.random()
        for model in ("m-a", "m-b"):
            for _ in range(4):
                correct = rng.random() < (1.0 - 0.85 * hardness)
                tokens = max(1, int(400 + 2500 * hardness + rng.gauss(0, 120)))
                rows.append(scored(f"p{i}", correct, tokens, model=model))
    estimates = estimate_difficulty(rows)
    assert len(estimates) == problems
    rho, _ = scipy_stats.spearmanr(
        [e.mean_accuracy for e in estimates], [e.mean_tokens for e in estimates]
    )
    assert rho < -0.5
    _report(9, f"Spearman(mean accuracy, mean tokens) = {rho:.3f} < -0.5 over {problems} synthetic problems")


def test_c10_report_goldens(tmp_path):
    golden = FIXTURES / "golden_report"
    written = emit_report(RunStore(golden / "store"), tmp_path)
    expected_dir = golden / "expected"
    names = sorted(p.name for p in expected_dir.iterdir())
    assert sorted(p.name for p in written) == names
    for name in names:
        assert (tmp_path / name).read_bytes() == (expected_dir / name).read_bytes(), name
    tie_row = [
        line
        for line in (expected_dir / "report_m1.csv").read_text().splitlines()
        if line.startswith("AIME24")
    ][0]
    assert tie_row.count("*") == 2  # best-per-row marks, ties all marked
    _report(10, f"emit_report reproduced {len(names)} golden files byte-identically, tie marks included")
