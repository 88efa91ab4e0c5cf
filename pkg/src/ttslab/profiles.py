"""Decoding defaults and endpoint/model profile files.

Ships the per-model completion caps and sampling settings the harness was
calibrated with; a JSON profile file can override any of them. K-units are
read as thousands of tokens.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Any

from .beam import DEFAULT_ANSWER_RESERVE, DEFAULT_WIDTH as DEFAULT_BEAM_WIDTH
from .corpus import DatasetName
from .gateway import SamplingParams

DEFAULT_TEMPERATURE = 0.6
DEFAULT_TOP_P = 0.95
DEFAULT_SAMPLES = 8
DEFAULT_MAX_TOKENS = 32000

__all__ = [
    "DEFAULT_TEMPERATURE",
    "DEFAULT_TOP_P",
    "DEFAULT_SAMPLES",
    "DEFAULT_BEAM_WIDTH",
    "DEFAULT_ANSWER_RESERVE",
    "DEFAULT_MAX_TOKENS",
    "MODEL_DECODING_DEFAULTS",
    "load_profile",
    "resolve_sampling",
]

_AIME = (DatasetName.AIME24, DatasetName.AIME25_I, DatasetName.AIME25_II)


def _caps(gpqa: int, aime: int) -> dict[str, int]:
    caps = {DatasetName.GPQA_DIAMOND.value: gpqa}
    caps.update({ds.value: aime for ds in _AIME})
    return caps


# Per-model decoding defaults; max_tokens keyed by dataset name.
MODEL_DECODING_DEFAULTS: dict[str, dict[str, Any]] = {
    "deepseek-chat": {"max_tokens": _caps(16000, 32000)},
    "deepseek-r1": {"max_tokens": _caps(32000, 32000)},
    "qwq-32b": {"max_tokens": _caps(32000, 32000)},
    "r1-distill-qwen-32b": {"max_tokens": _caps(32000, 32000)},
    "gpt-oss-120b": {"max_tokens": _caps(8000, 8000)},
    "qwen3-235b-instruct": {"max_tokens": _caps(5000, 5000)},
    "qwen3-32b": {"max_tokens": _caps(16000, 32000)},
    "dapo-qwen-32b": {
        "max_tokens": _caps(10100, 20500),
        "temperature": 1.0,
        "top_p": 0.7,
    },
}


def load_profile(path: str | Path) -> dict[str, Any]:
    """Load a JSON profile file: {"endpoints": {...}, "models": {...}}."""
    data = json.loads(Path(path).read_text(encoding="utf-8"))
    if not isinstance(data, dict):
        raise ValueError(f"profile {path} must hold a JSON object")
    return data


def resolve_sampling(
    model_id: str,
    dataset: DatasetName,
    profile: dict[str, Any] | None = None,
    *,
    temperature: float | None = None,
    top_p: float | None = None,
    max_tokens: int | None = None,
) -> SamplingParams:
    """Explicit overrides beat the profile file, which beats built-in defaults."""
    merged: dict[str, Any] = {}
    builtin = MODEL_DECODING_DEFAULTS.get(model_id.lower(), {})
    from_profile = (profile or {}).get("models", {}).get(model_id, {})
    for source in (builtin, from_profile):
        for key in ("temperature", "top_p"):
            if key in source:
                merged[key] = source[key]
        caps = source.get("max_tokens")
        if isinstance(caps, dict) and dataset.value in caps:
            merged["max_tokens"] = caps[dataset.value]
        elif isinstance(caps, int):
            merged["max_tokens"] = caps
    return SamplingParams(
        temperature=temperature if temperature is not None else merged.get("temperature", DEFAULT_TEMPERATURE),
        top_p=top_p if top_p is not None else merged.get("top_p", DEFAULT_TOP_P),
        max_tokens=max_tokens if max_tokens is not None else merged.get("max_tokens", DEFAULT_MAX_TOKENS),
    )
