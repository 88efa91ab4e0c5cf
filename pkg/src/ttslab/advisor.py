"""Budget-aware strategy recommendation.

Encodes the decision matrix: majority voting with the widest affordable
fan-out whenever compute is high; under low compute, short-horizon and
non-reasoning models get first-finish filtering with k=1 and a wide fan-out
(parallel width is cheap under early cancellation) while long-horizon models
fall back to simple decoding. Task difficulty never changes the answer.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

from .analytics import DifficultyLabel, ModelCategory
from .strategies import StrategyKind, StrategySpec

DEFAULT_N_MAX = 8
DEFAULT_HIGH_TIER_MULTIPLE = 2.0


class ComputeTier(str, Enum):
    LOW = "low"
    HIGH = "high"


@dataclass(frozen=True)
class ComputeBudget:
    """Token budget per problem against the model's median single-trace cost.

    The tier boundary is a multiple of the single-trace cost (default 2x, the
    smallest budget where any multi-trace strategy is affordable).
    """

    tokens_per_problem: int
    est_trace_cost: int
    high_tier_multiple: float = DEFAULT_HIGH_TIER_MULTIPLE

    def __post_init__(self) -> None:
        if self.tokens_per_problem < 1:
            raise ValueError("tokens_per_problem must be >= 1")
        if self.est_trace_cost < 1:
            raise ValueError("est_trace_cost must be >= 1")
        if self.high_tier_multiple <= 0:
            raise ValueError("high_tier_multiple must be > 0")

    @property
    def tier(self) -> ComputeTier:
        if self.tokens_per_problem >= self.high_tier_multiple * self.est_trace_cost:
            return ComputeTier.HIGH
        return ComputeTier.LOW

    @property
    def affordable_samples(self) -> int:
        return max(1, self.tokens_per_problem // self.est_trace_cost)


@dataclass(frozen=True)
class Recommendation:
    spec: StrategySpec
    rationale: str


def recommend(
    category: ModelCategory,
    difficulty: DifficultyLabel | None,
    budget: ComputeBudget,
    n_max: int = DEFAULT_N_MAX,
) -> Recommendation:
    """Map (model category, budget tier) to a concrete strategy spec.

    `difficulty` is accepted (Easy/Hard/None=unknown) but does not alter the
    recommendation: the matrix is difficulty-invariant.
    """
    if n_max < 1:
        raise ValueError("n_max must be >= 1")
    tier = budget.tier
    row = f"{category.value} at {tier.value} compute"
    if tier is ComputeTier.HIGH:
        n = min(n_max, budget.affordable_samples)
        spec = StrategySpec(StrategyKind.MV, n=n)
        rationale = f"{row}: majority voting over the largest affordable fan-out (N={n})"
    elif category is ModelCategory.LONG_HORIZON:
        spec = StrategySpec(StrategyKind.SD)
        rationale = f"{row}: a single greedy trace; one long trace beats a starved vote"
    else:
        spec = StrategySpec(StrategyKind.FFS, k=1, n=n_max)
        rationale = (
            f"{row}: first-finish with k=1 and N={n_max}; early cancellation keeps "
            "wide fan-out cheap"
        )
    return Recommendation(spec=spec, rationale=rationale)
