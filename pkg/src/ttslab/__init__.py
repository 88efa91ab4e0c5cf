"""ttslab: a harness for parallel test-time-scaling strategies over LLM endpoints."""

from .advisor import ComputeBudget, ComputeTier, Recommendation, recommend
from .analytics import (
    AccuracyGrid,
    DifficultyEstimate,
    DifficultyLabel,
    ModelCategory,
    ModelProfile,
    ScoredTrace,
    UnclassifiableError,
    accuracy_grid,
    classify_horizon,
    estimate_difficulty,
    score_traces,
    strategy_table,
)
from .beam import (
    BackendError,
    BeamConfig,
    BeamResult,
    BeamStatus,
    GenerationBackend,
    Hypothesis,
    ScriptedBackend,
    beam_search,
)
from .corpus import (
    Answer,
    AnswerKind,
    CorpusError,
    DatasetName,
    Problem,
    PromptTemplate,
    extract_answer,
    load_dataset,
    render_prompt,
)
from .gateway import EndpointConfig, GatewayError, SamplingParams, sample_parallel
from .mockserver import MockScript, MockServer, serve_mock
from .report import emit_report
from .runstore import RunRecord, RunStore, StoreError, new_run_id
from .strategies import (
    StrategyKind,
    StrategyOutcome,
    StrategySpec,
    majority_vote,
    run_strategy,
    select_ffs,
    select_lfs,
)
from .traces import (
    ALL_COMPLETE,
    CostModel,
    StopRule,
    TokenStats,
    Trace,
    TraceSet,
    TraceStatus,
    token_stats,
)

__version__ = "0.1.0"
