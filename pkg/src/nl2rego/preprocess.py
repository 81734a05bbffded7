"""Stage 1: policy detection, co-reference resolution, and segmentation."""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Any

from . import heuristics
from .errors import (
    EmptyInput,
    MalformedPayload,
    NoStructuredPayload,
    ProviderRefusal,
    ProviderUnavailable,
    SegmentationFailed,
)
from .model import PipelineConfig, PolicyStatement
from .prompts import PromptLibrary
from .provider import PromptRequest, PromptStage, Provider, extract_structured


@dataclass(frozen=True)
class DetectionResult:
    """Verdict on whether input text expresses access control policies."""

    is_policy: bool
    rationale: str
    estimated_statement_count: int | None = None

    def __post_init__(self) -> None:
        if not self.rationale.strip():
            raise ValueError("rationale must be non-empty")
        if self.is_policy and (self.estimated_statement_count or 0) < 1:
            raise ValueError("policy detections must estimate at least one statement")
        if not self.is_policy and self.estimated_statement_count is not None:
            raise ValueError("non-policy detections carry no statement count")

    def to_dict(self) -> dict[str, Any]:
        return {
            "is_policy": self.is_policy,
            "rationale": self.rationale,
            "estimated_statement_count": self.estimated_statement_count,
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "DetectionResult":
        count = data.get("estimated_statement_count")
        return cls(
            is_policy=bool(data["is_policy"]),
            rationale=data["rationale"],
            estimated_statement_count=int(count) if count is not None else None,
        )


def _request(library: PromptLibrary, stage: PromptStage, config: PipelineConfig, **values: str) -> PromptRequest:
    system_text, user_text = library.render(stage.value, **values)
    return PromptRequest(
        stage=stage,
        system_text=system_text,
        user_text=user_text,
        temperature=config.temperature,
        max_output_tokens=config.max_output_tokens,
    )


def _heuristic_detection(text: str) -> DetectionResult:
    is_policy, rationale = heuristics.looks_like_policy(text)
    count = heuristics.estimate_statement_count(text) if is_policy else None
    return DetectionResult(is_policy=is_policy, rationale=rationale, estimated_statement_count=count)


def detect(
    text: str,
    provider: Provider,
    config: PipelineConfig,
    library: PromptLibrary | None = None,
    transcripts: list | None = None,
) -> DetectionResult:
    """Decide whether the input contains access control policy statements.

    Provider-backed; falls back to the deterministic cue heuristic when the
    provider is unreachable or its output is unusable.
    """
    if not text.strip():
        raise EmptyInput("input text is empty")
    library = library or PromptLibrary(config.prompt_dir)
    try:
        response, transcript = provider.complete(_request(library, PromptStage.DETECT, config, input=text))
        if transcripts is not None:
            transcripts.append(transcript)
        payload = extract_structured(response)
        is_policy = bool(payload["is_policy"])
        rationale = str(payload.get("rationale") or "").strip() or "no rationale given"
        raw_count = payload.get("statement_count")
        count = max(1, int(raw_count)) if is_policy and raw_count is not None else (1 if is_policy else None)
        return DetectionResult(is_policy=is_policy, rationale=rationale, estimated_statement_count=count)
    except (ProviderUnavailable, ProviderRefusal, NoStructuredPayload, MalformedPayload, KeyError, ValueError):
        return _heuristic_detection(text)


def _align_spans(raw: str, texts: list[str]) -> list[tuple[int, int]]:
    """Best-effort mapping of resolved statements back to source spans.

    Statements appearing verbatim get exact spans; rewritten ones (after
    co-reference resolution) get the remaining clause region. Spans are
    always in-bounds, ordered, and non-overlapping.
    """
    spans: list[tuple[int, int]] = []
    lower = raw.lower()
    cursor = 0
    for i, text in enumerate(texts):
        needle = text.strip().rstrip(".").lower()
        idx = lower.find(needle, cursor) if needle else -1
        if idx >= 0:
            spans.append((idx, idx + len(needle)))
            cursor = idx + len(needle)
            continue
        start = cursor
        while start < len(raw) and raw[start] in " \t\n,;.":
            start += 1
        head = re.match(r"(?:but|and|or|however)\s+", raw[start:], re.I)
        if head:
            start += head.end()
        if i == len(texts) - 1:
            end = len(raw)
        else:
            boundary = re.search(r";|,\s+(?:but|and)\s+|\.\s", raw[start:])
            end = start + boundary.start() if boundary else len(raw)
        end = max(start, min(end, len(raw)))
        spans.append((start, end))
        cursor = end
    return spans


def _statements_from_texts(raw: str, texts: list[str]) -> list[PolicyStatement]:
    cleaned = [t.strip() for t in texts if isinstance(t, str) and t.strip()]
    if not cleaned:
        raise SegmentationFailed("provider returned no usable statements")
    spans = _align_spans(raw, cleaned)
    return [
        PolicyStatement(text=t, index=i, origin_span=span)
        for i, (t, span) in enumerate(zip(cleaned, spans))
    ]


def segment_and_resolve(
    text: str,
    provider: Provider,
    config: PipelineConfig,
    library: PromptLibrary | None = None,
    transcripts: list | None = None,
) -> list[PolicyStatement]:
    """Split input into atomic, self-contained statements with pronouns
    resolved. One repair attempt; deterministic clause fallback when the
    provider is unreachable."""
    if not text.strip():
        raise EmptyInput("input text is empty")
    library = library or PromptLibrary(config.prompt_dir)

    def heuristic_statements() -> list[PolicyStatement]:
        clauses = heuristics.heuristic_segment(text)
        return [
            PolicyStatement(text=c.text, index=i, origin_span=(c.start, c.end))
            for i, c in enumerate(clauses)
        ]

    try:
        response, transcript = provider.complete(_request(library, PromptStage.SEGMENT, config, input=text))
        if transcripts is not None:
            transcripts.append(transcript)
    except (ProviderUnavailable, ProviderRefusal):
        return heuristic_statements()

    try:
        payload = extract_structured(response)
        return _statements_from_texts(text, list(payload["statements"]))
    except (NoStructuredPayload, MalformedPayload, SegmentationFailed, KeyError, TypeError, ValueError):
        pass

    # one structured-repair attempt before giving up
    repair = _request(
        library,
        PromptStage.REPAIR,
        config,
        repair_kind="segment",
        requirements='a JSON object {"statements": ["...", ...]} with one self-contained policy statement per entry',
        current_code=response,
        lint_findings="the previous answer could not be parsed into a statement list",
        input=text,
    )
    try:
        repaired, transcript = provider.complete(repair)
        if transcripts is not None:
            transcripts.append(transcript)
        payload = extract_structured(repaired)
        return _statements_from_texts(text, list(payload["statements"]))
    except (ProviderUnavailable, ProviderRefusal):
        return heuristic_statements()
    except (NoStructuredPayload, MalformedPayload, SegmentationFailed, KeyError, TypeError, ValueError) as exc:
        raise SegmentationFailed(f"statement list unrecoverable after repair: {exc}") from exc


__all__ = ["DetectionResult", "detect", "segment_and_resolve"]
