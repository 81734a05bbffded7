"""Completion providers: a deterministic mock and an OpenAI-compatible
HTTP client, plus structured-output recovery from raw model text."""

from __future__ import annotations

import hashlib
import json
import os
import time
from dataclasses import dataclass
from enum import Enum
from importlib import resources
from typing import Any

import httpx

from . import heuristics
from .errors import (
    MalformedPayload,
    NoStructuredPayload,
    ProviderRefusal,
    ProviderUnavailable,
)
from .prompts import extract_input_block


class PromptStage(Enum):
    DETECT = "detect"
    SEGMENT = "segment"
    EXTRACT = "extract"
    SYNTHESIZE = "synthesize"
    REPAIR = "repair"
    TESTGEN = "testgen"


@dataclass(frozen=True)
class PromptRequest:
    stage: PromptStage
    system_text: str
    user_text: str
    temperature: float = 0.0
    max_output_tokens: int = 2048

    def __post_init__(self) -> None:
        if not 0.0 <= self.temperature <= 2.0:
            raise ValueError("temperature must be in [0, 2]")
        if self.max_output_tokens < 1:
            raise ValueError("max_output_tokens must be positive")


@dataclass(frozen=True)
class ProviderTranscript:
    """Audit snapshot of one completion call."""

    provider_id: str
    stage: str
    system_text: str
    user_text: str
    response_text: str
    attempts: int
    latency_ms: float

    def __post_init__(self) -> None:
        if self.attempts < 1:
            raise ValueError("attempt count must be >= 1")

    def to_dict(self) -> dict[str, Any]:
        return {
            "provider_id": self.provider_id,
            "stage": self.stage,
            "system_text": self.system_text,
            "user_text": self.user_text,
            "response_text": self.response_text,
            "attempts": self.attempts,
            "latency_ms": self.latency_ms,
        }


class Provider:
    """Minimal completion interface. Implementations must be safe for
    concurrent calls."""

    provider_id = "abstract"

    def complete(self, request: PromptRequest) -> tuple[str, ProviderTranscript]:
        raise NotImplementedError


def _strip_code_fences(raw: str) -> str:
    text = raw.strip()
    if "```" not in text:
        return text
    start = text.find("```")
    newline = text.find("\n", start)
    if newline == -1:
        return text
    end = text.find("```", newline)
    if end == -1:
        return text[newline + 1 :].strip()
    return text[newline + 1 : end].strip()


def extract_structured(raw: str) -> dict[str, Any]:
    """Recover the first balanced top-level JSON object embedded in model
    output, tolerating code fences and surrounding prose."""
    if not raw or not raw.strip():
        raise NoStructuredPayload("empty response text")
    text = _strip_code_fences(raw)
    span = _first_balanced_object(text)
    if span is None:
        raise NoStructuredPayload("no balanced object found in response")
    candidate = text[span[0] : span[1]]
    try:
        value = json.loads(candidate)
    except json.JSONDecodeError as exc:
        raise MalformedPayload(f"balanced span is not valid JSON: {exc}") from exc
    if not isinstance(value, dict):
        raise MalformedPayload("balanced span parsed to a non-object value")
    return value


def _first_balanced_object(text: str) -> tuple[int, int] | None:
    """(start, end) of the first brace span that balances, honoring string
    literals and escapes."""
    for start in (i for i, ch in enumerate(text) if ch == "{"):
        depth = 0
        in_string = False
        escaped = False
        for j in range(start, len(text)):
            ch = text[j]
            if in_string:
                if escaped:
                    escaped = False
                elif ch == "\\":
                    escaped = True
                elif ch == '"':
                    in_string = False
                continue
            if ch == '"':
                in_string = True
            elif ch == "{":
                depth += 1
            elif ch == "}":
                depth -= 1
                if depth == 0:
                    return start, j + 1
        # this start never balanced; try the next one
    return None


def _normalize_fixture_key(text: str) -> str:
    return " ".join(text.split()).lower()


def _fixture_digest(stage: str, text: str) -> str:
    payload = f"{stage}:{_normalize_fixture_key(text)}".encode()
    return hashlib.sha256(payload).hexdigest()


class MockProvider(Provider):
    """Deterministic provider for offline runs.

    Responses come from bundled fixtures keyed by (stage, normalized input
    hash); anything without a fixture falls back to the rule-based
    generators in :mod:`nl2rego.heuristics` so a run always completes. The
    output is a pure function of (stage, user_text).
    """

    provider_id = "mock"

    def __init__(self, fixtures: dict[str, str] | None = None, load_bundled: bool = True):
        self._fixtures: dict[str, str] = {}
        if load_bundled:
            self._load_bundled()
        if fixtures:
            self._fixtures.update(fixtures)

    def _load_bundled(self) -> None:
        ref = resources.files("nl2rego") / "data" / "mock_fixtures.json"
        for entry in json.loads(ref.read_text(encoding="utf-8")):
            self.register(entry["stage"], entry["input"], entry["response"])

    def register(self, stage: str, input_text: str, response: str) -> None:
        self._fixtures[_fixture_digest(stage, input_text)] = response

    def complete(self, request: PromptRequest) -> tuple[str, ProviderTranscript]:
        started = time.perf_counter()
        payload = extract_input_block(request.user_text)
        fixture = self._fixtures.get(_fixture_digest(request.stage.value, payload))
        text = fixture if fixture is not None else self._fallback(request.stage, payload, request.user_text)
        transcript = ProviderTranscript(
            provider_id=self.provider_id,
            stage=request.stage.value,
            system_text=request.system_text,
            user_text=request.user_text,
            response_text=text,
            attempts=1,
            latency_ms=(time.perf_counter() - started) * 1000.0,
        )
        return text, transcript

    def _fallback(self, stage: PromptStage, payload: str, user_text: str) -> str:
        if stage is PromptStage.DETECT:
            return self._fallback_detect(payload)
        if stage is PromptStage.SEGMENT:
            return self._fallback_segment(payload)
        if stage is PromptStage.EXTRACT:
            return self._fallback_extract(payload)
        if stage is PromptStage.SYNTHESIZE:
            return self._fallback_synthesize(payload)
        if stage is PromptStage.TESTGEN:
            return self._fallback_testgen(payload)
        if stage is PromptStage.REPAIR:
            return self._fallback_repair(payload, user_text)
        return "{}"

    @staticmethod
    def _fallback_detect(payload: str) -> str:
        is_policy, rationale = heuristics.looks_like_policy(payload)
        count = heuristics.estimate_statement_count(payload) if is_policy else 0
        return json.dumps({"is_policy": is_policy, "rationale": rationale, "statement_count": count})

    @staticmethod
    def _fallback_segment(payload: str) -> str:
        clauses = heuristics.heuristic_segment(payload)
        return json.dumps({"statements": [c.text for c in clauses]})

    @staticmethod
    def _fallback_extract(payload: str) -> str:
        parsed = heuristics.parse_statement(payload)
        return json.dumps(parsed) if parsed is not None else "{}"

    @staticmethod
    def _fallback_synthesize(payload: str) -> str:
        from . import codegen

        parsed = codegen.parse_synthesis_input(payload)
        if parsed is None:
            return "{}"
        tuples, slug, statements = parsed
        return codegen.emit_module(tuples, slug, statements).source

    @staticmethod
    def _fallback_testgen(payload: str) -> str:
        from . import codegen, testgen

        parsed = codegen.parse_synthesis_input(payload)
        if parsed is None:
            return "{}"
        tuples, slug, _ = parsed
        suite = testgen.rule_based_tests(tuples, slug)
        cases = [
            {
                "name": case.name,
                "statement_index": case.statement_index,
                "input": case.input_document,
                "expected_allow": case.expected_allow,
                "rationale": f"{case.kind.value.lower()} case for statement {case.statement_index}",
            }
            for case in suite.cases
        ]
        return json.dumps({"cases": cases})

    def _fallback_repair(self, payload: str, user_text: str) -> str:
        kind = ""
        for line in user_text.splitlines():
            if line.lower().startswith("repair kind:"):
                kind = line.split(":", 1)[1].strip().lower()
                break
        if kind == "extract":
            return self._fallback_extract(payload)
        if kind == "segment":
            return self._fallback_segment(payload)
        if kind in ("synthesize", "lint"):
            return self._fallback_synthesize(payload)
        if kind == "testgen":
            return self._fallback_testgen(payload)
        return "{}"


class OpenAICompatProvider(Provider):
    """Chat-completion client for any OpenAI-compatible endpoint.

    Endpoint and credentials come from configuration or the environment;
    transient transport failures are retried twice with backoff.
    """

    max_attempts = 3
    retry_backoff_s = 0.5

    def __init__(
        self,
        endpoint: str | None = None,
        model: str | None = None,
        api_key: str | None = None,
        timeout_s: float = 60.0,
    ):
        self.endpoint = (endpoint or os.environ.get("NL2REGO_ENDPOINT") or "https://api.openai.com/v1").rstrip("/")
        self.model = model or os.environ.get("NL2REGO_MODEL") or "gpt-4o-mini"
        self.api_key = api_key
        self.timeout_s = timeout_s
        self.provider_id = f"openai-compatible:{self.model}"

    def _headers(self) -> dict[str, str]:
        headers = {"Content-Type": "application/json"}
        if self.api_key:
            headers["Authorization"] = f"Bearer {self.api_key}"
        return headers

    def complete(self, request: PromptRequest) -> tuple[str, ProviderTranscript]:
        body = {
            "model": self.model,
            "messages": [
                {"role": "system", "content": request.system_text},
                {"role": "user", "content": request.user_text},
            ],
            "temperature": request.temperature,
            "max_tokens": request.max_output_tokens,
        }
        started = time.perf_counter()
        last_error: Exception | None = None
        text = ""
        attempts = 0
        for attempt in range(self.max_attempts):
            attempts = attempt + 1
            try:
                response = httpx.post(
                    f"{self.endpoint}/chat/completions",
                    json=body,
                    headers=self._headers(),
                    timeout=self.timeout_s,
                )
            except httpx.HTTPError as exc:
                last_error = exc
                if attempt + 1 < self.max_attempts:
                    time.sleep(self.retry_backoff_s * (2**attempt))
                continue
            if response.status_code >= 500:
                last_error = ProviderUnavailable(f"server error {response.status_code}")
                if attempt + 1 < self.max_attempts:
                    time.sleep(self.retry_backoff_s * (2**attempt))
                continue
            if response.status_code != 200:
                raise ProviderUnavailable(
                    f"endpoint returned {response.status_code}: {response.text[:200]}"
                )
            try:
                text = response.json()["choices"][0]["message"]["content"] or ""
            except (KeyError, IndexError, ValueError) as exc:
                raise ProviderUnavailable(f"unexpected response shape: {exc}") from exc
            if text.strip():
                break
            last_error = ProviderRefusal("provider returned an empty response")
            text = ""
        else:
            if isinstance(last_error, ProviderRefusal):
                raise last_error
            raise ProviderUnavailable(f"endpoint unreachable after {self.max_attempts} attempts: {last_error}")
        if not text.strip():
            raise ProviderRefusal("provider returned an empty response after retries")
        transcript = ProviderTranscript(
            provider_id=self.provider_id,
            stage=request.stage.value,
            system_text=request.system_text,
            user_text=request.user_text,
            response_text=text,
            attempts=attempts,
            latency_ms=(time.perf_counter() - started) * 1000.0,
        )
        return text, transcript


def get_provider(config) -> Provider:
    """Build the provider selected by a PipelineConfig."""
    if config.provider == "mock":
        return MockProvider()
    return OpenAICompatProvider(
        endpoint=config.endpoint,
        model=config.model,
        api_key=os.environ.get(config.api_key_env),
    )


__all__ = [
    "PromptStage",
    "PromptRequest",
    "ProviderTranscript",
    "Provider",
    "MockProvider",
    "OpenAICompatProvider",
    "extract_structured",
    "get_provider",
]
