"""Prompt template loading and rendering.

Templates are plain text files with ``{{placeholder}}`` markers. Users can
edit them (directly or through the config API) to tune behavior without
touching the engine; the set of files below is the editable surface.
"""

from __future__ import annotations

import re
from importlib import resources
from pathlib import Path

TEMPLATE_STAGES = ("system", "detect", "segment", "extract", "synthesize", "repair", "testgen")

# Markers delimiting the payload block inside rendered prompts. The mock
# provider recovers its input from this block, so removing the markers from
# a template degrades the mock to hashing the whole prompt.
INPUT_OPEN = "INPUT:"
INPUT_CLOSE = "END INPUT"

_PLACEHOLDER_RE = re.compile(r"\{\{([a-z_]+)\}\}")


def _default_template(stage: str) -> str:
    ref = resources.files("nl2rego") / "data" / "prompts" / f"{stage}.txt"
    return ref.read_text(encoding="utf-8")


class PromptLibrary:
    """Resolves templates from an optional override directory, falling back
    to the bundled defaults."""

    def __init__(self, override_dir: str | Path | None = None):
        self.override_dir = Path(override_dir) if override_dir else None

    def get(self, stage: str) -> str:
        if stage not in TEMPLATE_STAGES:
            raise KeyError(f"unknown prompt stage {stage!r}")
        if self.override_dir is not None:
            candidate = self.override_dir / f"{stage}.txt"
            if candidate.is_file():
                return candidate.read_text(encoding="utf-8")
        return _default_template(stage)

    def set(self, stage: str, text: str) -> None:
        if stage not in TEMPLATE_STAGES:
            raise KeyError(f"unknown prompt stage {stage!r}")
        if self.override_dir is None:
            raise ValueError("no override directory configured")
        self.override_dir.mkdir(parents=True, exist_ok=True)
        (self.override_dir / f"{stage}.txt").write_text(text, encoding="utf-8")

    def reset(self, stage: str) -> None:
        if self.override_dir is not None:
            candidate = self.override_dir / f"{stage}.txt"
            if candidate.is_file():
                candidate.unlink()

    def all_templates(self) -> dict[str, str]:
        return {stage: self.get(stage) for stage in TEMPLATE_STAGES}

    def render(self, stage: str, **values: str) -> tuple[str, str]:
        """Render (system_text, user_text) for a stage. Unknown placeholders
        render as empty strings so edited templates cannot crash a run."""
        system_text = _substitute(self.get("system"), values)
        user_text = _substitute(self.get(stage), values)
        return system_text, user_text


def _substitute(template: str, values: dict[str, str]) -> str:
    def repl(m: re.Match[str]) -> str:
        return str(values.get(m.group(1), ""))

    return _PLACEHOLDER_RE.sub(repl, template)


def extract_input_block(user_text: str) -> str:
    """Recover the payload between the INPUT markers of a rendered prompt.
    Falls back to the full prompt when markers are absent."""
    open_idx = user_text.find(INPUT_OPEN)
    if open_idx == -1:
        return user_text.strip()
    start = open_idx + len(INPUT_OPEN)
    close_idx = user_text.rfind(INPUT_CLOSE)
    if close_idx == -1 or close_idx <= start:
        return user_text[start:].strip()
    return user_text[start:close_idx].strip()


__all__ = [
    "TEMPLATE_STAGES",
    "INPUT_OPEN",
    "INPUT_CLOSE",
    "PromptLibrary",
    "extract_input_block",
]
