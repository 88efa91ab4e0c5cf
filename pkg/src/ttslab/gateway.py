"""Parallel streaming sampler for OpenAI-compatible chat endpoints.

N samples are N independent streaming requests (never the provider's `n`
parameter) so each trace can be cancelled on its own. Under a first-k stop
rule the k-th finish flips a shared stop flag; every other worker notices it
between stream events and closes its connection, recording the partial token
count. Each worker writes only its own slot, so trace-set assembly is
race-free.
"""

from __future__ import annotations

import json
import logging
import os
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import httpx

from .corpus import Answer, AnswerKind, extract_answer
from .traces import StopRule, Trace, TraceSet, TraceStatus

log = logging.getLogger(__name__)


class GatewayError(RuntimeError):
    """Run-level failure: no stream produced a usable trace."""


@dataclass(frozen=True)
class EndpointConfig:
    base_url: str
    model: str
    api_key_env: str | None = None
    max_concurrent: int = 8
    timeout: float = 120.0
    retries: int = 1

    def __post_init__(self) -> None:
        if self.max_concurrent < 1:
            raise ValueError("max_concurrent must be >= 1")
        if self.timeout <= 0:
            raise ValueError("timeout must be > 0")
        if self.retries < 0:
            raise ValueError("retries must be >= 0")

    @property
    def completions_url(self) -> str:
        return self.base_url.rstrip("/") + "/v1/chat/completions"

    def headers(self) -> dict[str, str]:
        headers = {"Content-Type": "application/json"}
        if self.api_key_env:
            key = os.environ.get(self.api_key_env)
            if key:
                headers["Authorization"] = f"Bearer {key}"
            else:
                log.debug("api key env %s is not set; sending no credential", self.api_key_env)
        return headers


@dataclass(frozen=True)
class SamplingParams:
    temperature: float = 0.6
    top_p: float = 0.95
    max_tokens: int = 32000

    def __post_init__(self) -> None:
        if self.temperature < 0:
            raise ValueError("temperature must be >= 0")
        if not 0 < self.top_p <= 1:
            raise ValueError("top_p must be in (0, 1]")
        if self.max_tokens < 1:
            raise ValueError("max_tokens must be >= 1")


class _RunState:
    """Completion gate shared by the workers of one sample_parallel call."""

    def __init__(self, rule: StopRule) -> None:
        self.rule = rule
        self.lock = threading.Lock()
        self.stop = threading.Event()
        self.completions = 0

    def register_finish(self, truncated: bool) -> tuple[TraceStatus, int | None]:
        """Decide the status of a finished stream under the stop rule.

        A stream that finishes after the k-th completion is recorded as
        cancelled (its tokens stay billed) so a first-k set never holds more
        than k completed traces.
        """
        with self.lock:
            if truncated:
                return TraceStatus.TRUNCATED_AT_CAP, None
            if self.rule.is_first_k and self.completions >= self.rule.k:
                return TraceStatus.CANCELLED_EARLY, None
            self.completions += 1
            if self.rule.is_first_k and self.completions >= self.rule.k:
                self.stop.set()
            return TraceStatus.COMPLETE, self.completions


def sample_parallel(
    endpoint: EndpointConfig,
    prompt: str,
    params: SamplingParams,
    n: int,
    rule: StopRule = StopRule(),
    *,
    problem_id: str = "",
    answer_kind: AnswerKind | None = None,
) -> TraceSet:
    """Stream N parallel samples and assemble a live TraceSet.

    Token counts come from the terminal usage record when the stream finishes,
    else from counted delta events (cancelled and failed streams). Transport
    errors retry within the budget only if no tokens arrived yet, so a sample
    index never yields two traces.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    if rule.is_first_k and rule.k > n:
        raise ValueError(f"stop rule k={rule.k} exceeds n={n}")
    state = _RunState(rule)
    payload = {
        "model": endpoint.model,
        "messages": [{"role": "user", "content": prompt}],
        "temperature": params.temperature,
        "top_p": params.top_p,
        "max_tokens": params.max_tokens,
        "stream": True,
    }
    results: list[Trace | None] = [None] * n
    with httpx.Client(timeout=endpoint.timeout) as client:
        with ThreadPoolExecutor(max_workers=endpoint.max_concurrent) as pool:
            futures = [
                pool.submit(
                    _sample_one, client, endpoint, payload, state, problem_id, answer_kind, i
                )
                for i in range(n)
            ]
            for i, future in enumerate(futures):
                results[i] = future.result()
    traces = [t for t in results if t is not None]
    if all(t.status is TraceStatus.FAILED for t in traces):
        raise GatewayError(f"all {n} streams failed for problem {problem_id!r}")
    return TraceSet(
        problem_id=problem_id,
        model_id=endpoint.model,
        traces=tuple(traces),
        stop_rule=rule,
        live=True,
    )


def _sample_one(
    client: httpx.Client,
    endpoint: EndpointConfig,
    payload: dict,
    state: _RunState,
    problem_id: str,
    answer_kind: AnswerKind | None,
    index: int,
) -> Trace:
    def build(status: TraceStatus, text: str, tokens: int, rank: int | None = None) -> Trace:
        extracted: Answer | None = None
        if answer_kind is not None and text and status is not TraceStatus.FAILED:
            extracted = extract_answer(text, answer_kind)
        return Trace(
            problem_id=problem_id,
            model_id=endpoint.model,
            sample_index=index,
            text=text,
            token_count=tokens,
            status=status,
            extracted=extracted,
            completion_rank=rank,
        )

    attempts = 0
    while True:
        if state.stop.is_set():
            return build(TraceStatus.CANCELLED_EARLY, "", 0)
        parts: list[str] = []
        seen = 0
        usage_count: int | None = None
        finish_reason: str | None = None
        try:
            with client.stream(
                "POST", endpoint.completions_url, json=payload, headers=endpoint.headers()
            ) as response:
                if response.status_code != 200:
                    response.read()
                    raise httpx.HTTPStatusError(
                        f"endpoint returned {response.status_code}",
                        request=response.request,
                        response=response,
                    )
                for raw in response.iter_lines():
                    if state.stop.is_set():
                        return build(TraceStatus.CANCELLED_EARLY, "".join(parts), seen)
                    if not raw.startswith("data:"):
                        continue
                    data = raw[len("data:") :].strip()
                    if data == "[DONE]":
                        break
                    chunk = json.loads(data)
                    usage = chunk.get("usage")
                    if isinstance(usage, dict) and "completion_tokens" in usage:
                        usage_count = int(usage["completion_tokens"])
                    for choice in chunk.get("choices") or []:
                        delta = choice.get("delta") or {}
                        content = delta.get("content")
                        if content:
                            parts.append(content)
                            seen += 1
                        if choice.get("finish_reason"):
                            finish_reason = choice["finish_reason"]
        except httpx.TimeoutException:
            log.warning("sample %d timed out after %.1fs", index, endpoint.timeout)
            return build(TraceStatus.FAILED, "".join(parts), seen)
        except (httpx.HTTPError, OSError, json.JSONDecodeError) as exc:
            if seen == 0 and attempts < endpoint.retries and not state.stop.is_set():
                attempts += 1
                log.debug("sample %d retrying after %s (attempt %d)", index, exc, attempts)
                continue
            log.warning("sample %d failed: %s", index, exc)
            return build(TraceStatus.FAILED, "".join(parts), seen)

        text = "".join(parts)
        tokens = usage_count if usage_count is not None else seen
        if finish_reason is None and usage_count is None:
            # Clean EOF without a finish_reason or terminal usage record: the
            # server died mid-stream, not a completion.
            log.warning("sample %d stream ended without a finish signal", index)
            return build(TraceStatus.FAILED, text, seen)
        status, rank = state.register_finish(truncated=finish_reason == "length")
        return build(status, text, tokens, rank)
