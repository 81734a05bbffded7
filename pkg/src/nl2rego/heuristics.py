"""Deterministic fallbacks for detection, segmentation, and extraction.

These are intentionally narrow, pattern-based routines. They keep offline
runs (mock provider, unreachable endpoint) fully functional and
reproducible; anything more linguistically ambitious belongs in the prompt
templates, not here.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

# Authorization cue vocabulary used by policy detection. Multi-word cues are
# matched as phrases before single words.
AUTHORIZATION_CUES = (
    "must not",
    "allowed",
    "allow",
    "permitted",
    "permit",
    "denied",
    "deny",
    "prohibited",
    "prohibit",
    "cannot",
    "can",
    "may",
    "authorized",
)

# Tokens that do not count as content words on either side of a cue.
_FILLER_WORDS = frozenset(
    """a an the is are was were be been being to of in on at by for from
    they them it he she we you i not no but and or if this that these those
    their its his her our your do does did""".split()
)

_WORD_RE = re.compile(r"[A-Za-z']+")

# Ordered decision-cue patterns. Negative forms come first because several
# positive cues are substrings of their negations.
_CUE_PATTERNS: tuple[tuple[re.Pattern[str], str], ...] = (
    (re.compile(r"\b(?:is|are)\s+not\s+(?:allowed|permitted|authorized)\s+to\b", re.I), "deny"),
    (re.compile(r"\bnot\s+(?:allowed|permitted|authorized)\s+to\b", re.I), "deny"),
    (re.compile(r"\b(?:is|are)\s+(?:denied|prohibited|forbidden)\s+from\b", re.I), "deny"),
    (re.compile(r"\b(?:is|are)\s+(?:denied|prohibited|forbidden)\s+to\b", re.I), "deny"),
    (re.compile(r"\bmust\s+not\b", re.I), "deny"),
    (re.compile(r"\bmay\s+not\b", re.I), "deny"),
    (re.compile(r"\bcannot\b", re.I), "deny"),
    (re.compile(r"\bcan\s+not\b", re.I), "deny"),
    (re.compile(r"\b(?:is|are)\s+(?:allowed|permitted|authorized)\s+to\b", re.I), "allow"),
    (re.compile(r"\bcan\b", re.I), "allow"),
    (re.compile(r"\bmay\b", re.I), "allow"),
)

_NEGATION_RE = re.compile(
    r"\b(?:not\s+(?:allowed|permitted|authorized)|must\s+not|may\s+not|cannot|can\s+not|prohibited|forbidden|denied)\b",
    re.I,
)

_CONDITION_MARKERS = frozenset(
    "during when while if unless after before between outside with without".split()
)
_PURPOSE_MARKER = "for"
_ARTICLES = frozenset("a an the all any every each their its only".split())

_SUBJECT_PRONOUNS = ("they", "he", "she", "it")
_OBJECT_PRONOUNS = ("them", "it")


def _tokens(text: str) -> list[tuple[str, int]]:
    return [(m.group(0).lower(), m.start()) for m in _WORD_RE.finditer(text)]


def _cue_spans(text: str) -> list[tuple[int, int]]:
    """Character spans of authorization cues, longest-phrase first."""
    spans: list[tuple[int, int]] = []
    for cue in AUTHORIZATION_CUES:
        pattern = re.compile(r"\b" + re.escape(cue).replace(r"\ ", r"\s+") + r"\b", re.I)
        for m in pattern.finditer(text):
            if not any(s <= m.start() < e for s, e in spans):
                spans.append((m.start(), m.end()))
    return sorted(spans)


def looks_like_policy(text: str) -> tuple[bool, str]:
    """Detection heuristic: an authorization cue with at least one content
    word on each side."""
    spans = _cue_spans(text)
    if not spans:
        return False, "no authorization cue (allow/deny/permit/...) present"
    tokens = _tokens(text)

    def content_words(lo: int, hi: int) -> int:
        count = 0
        for word, pos in tokens:
            if lo <= pos < hi and word not in _FILLER_WORDS and not _inside(pos, spans):
                count += 1
        return count

    for start, end in spans:
        if content_words(0, start) >= 1 and content_words(end, len(text)) >= 1:
            return True, "authorization cue with subject and object context"
    return False, "authorization cue lacks surrounding subject/object context"


def _inside(pos: int, spans: list[tuple[int, int]]) -> bool:
    return any(s <= pos < e for s, e in spans)


@dataclass(frozen=True)
class Clause:
    """A candidate statement with its source span and resolved text."""

    text: str
    start: int
    end: int


def _strip_edges(raw: str, start: int, end: int) -> tuple[int, int]:
    while start < end and raw[start] in " \t\n,;.":
        start += 1
    while end > start and raw[end - 1] in " \t\n,;":
        end -= 1
    return start, end


_CONJUNCTION_HEAD_RE = re.compile(r"^(?:but|and|or|however|whereas)\s+", re.I)


def split_clauses(raw: str) -> list[Clause]:
    """Split raw input into candidate policy clauses on sentence boundaries,
    semicolons, and coordinated ''but''/''and'' clauses that carry their own
    authorization cue."""
    boundaries = [0]
    for m in re.finditer(r";|\.\s|\n", raw):
        boundaries.append(m.end())
    boundaries.append(len(raw))

    pieces: list[tuple[int, int]] = []
    for i in range(len(boundaries) - 1):
        start, end = _strip_edges(raw, boundaries[i], boundaries[i + 1])
        if end > start:
            pieces.append((start, end))

    clauses: list[Clause] = []
    for start, end in pieces:
        segment = raw[start:end]
        split_done = False
        for m in re.finditer(r",?\s+(?:but|and)\s+", segment, re.I):
            left = segment[: m.start()]
            right = segment[m.end():]
            if _cue_spans(left) and _cue_spans(right):
                ls, le = _strip_edges(raw, start, start + m.start())
                rs, re_ = _strip_edges(raw, start + m.end(), end)
                clauses.append(Clause(raw[ls:le], ls, le))
                clauses.append(Clause(raw[rs:re_], rs, re_))
                split_done = True
                break
        if not split_done:
            clauses.append(Clause(segment, start, end))
    return clauses


def resolve_coreferences(clauses: list[Clause]) -> list[Clause]:
    """Replace leading subject pronouns and trailing object pronouns with
    antecedents from the first clause that names them."""
    resolved: list[Clause] = []
    subject_antecedent: str | None = None
    object_antecedent: str | None = None
    for clause in clauses:
        text = _CONJUNCTION_HEAD_RE.sub("", clause.text).rstrip(".")
        parsed = parse_statement(text)
        if parsed is not None:
            if not _is_pronoun(parsed.get("subject", "")):
                subject_antecedent = parsed["subject"]
            if not _is_pronoun(parsed.get("resource", "")):
                object_antecedent = parsed["resource"]
        if subject_antecedent:
            for pronoun in _SUBJECT_PRONOUNS:
                pattern = re.compile(r"^" + pronoun + r"\b", re.I)
                if pattern.match(text):
                    text = pattern.sub(subject_antecedent, text)
                    break
        if object_antecedent:
            for pronoun in _OBJECT_PRONOUNS:
                pattern = re.compile(r"\b" + pronoun + r"$", re.I)
                if pattern.search(text):
                    text = pattern.sub(object_antecedent, text)
                    break
        resolved.append(Clause(text, clause.start, clause.end))
    return resolved


def _is_pronoun(phrase: str) -> bool:
    return phrase.lower() in _SUBJECT_PRONOUNS or phrase.lower() in _OBJECT_PRONOUNS


def heuristic_segment(raw: str) -> list[Clause]:
    """Deterministic segmentation + co-reference fallback. Keeps only
    clauses that individually look like policies; falls back to the whole
    input when nothing qualifies."""
    clauses = resolve_coreferences(split_clauses(raw))
    policy_clauses = [c for c in clauses if looks_like_policy(c.text)[0]]
    if policy_clauses:
        return policy_clauses
    stripped = raw.strip()
    return [Clause(stripped.rstrip("."), 0, len(raw))]


def estimate_statement_count(raw: str) -> int:
    return max(1, len(heuristic_segment(raw)))


def parse_statement(text: str) -> dict | None:
    """Pattern-based DSARCP extraction for a single self-contained statement.

    Returns raw phrases (pre-slugify) or None when no decision cue matches.
    Condition/purpose phrases keep their marker word ("during business
    hours", "for maintenance").
    """
    stripped = text.strip().rstrip(".!").strip()
    match: re.Match[str] | None = None
    polarity = ""
    for pattern, pol in _CUE_PATTERNS:
        m = pattern.search(stripped)
        if m and (match is None or m.start() < match.start()):
            match, polarity = m, pol
            break
    if match is None:
        return None

    # Explicit negation anywhere overrides a positive cue match.
    if polarity == "allow" and _NEGATION_RE.search(stripped):
        polarity = "deny"

    subject = _strip_articles(stripped[: match.start()].strip(" ,"))
    remainder = stripped[match.end():].strip()
    if remainder.lower().startswith("to "):
        remainder = remainder[3:]
    if not subject or not remainder:
        return None

    words = remainder.split()
    action = words[0].strip(",.").lower()
    rest = words[1:]

    marker_positions: list[tuple[int, str]] = []
    for i, word in enumerate(rest):
        bare = word.strip(",.").lower()
        if bare in _CONDITION_MARKERS:
            marker_positions.append((i, "condition"))
        elif bare == _PURPOSE_MARKER:
            marker_positions.append((i, "purpose"))

    resource_end = marker_positions[0][0] if marker_positions else len(rest)
    resource = _strip_articles(" ".join(rest[:resource_end]).strip(" ,."))

    conditions: list[str] = []
    purpose: str | None = None
    for idx, (pos, kind) in enumerate(marker_positions):
        end = marker_positions[idx + 1][0] if idx + 1 < len(marker_positions) else len(rest)
        phrase = " ".join(rest[pos:end]).strip(" ,.")
        if not phrase:
            continue
        if kind == "condition":
            conditions.append(phrase)
        elif purpose is None:
            purpose = phrase

    if not resource:
        return None
    return {
        "decision": polarity,
        "subject": subject,
        "action": action,
        "resource": resource,
        "condition": conditions,
        "purpose": purpose,
    }


def _strip_articles(phrase: str) -> str:
    words = phrase.split()
    while words and words[0].lower() in _ARTICLES:
        words.pop(0)
    return " ".join(words)


__all__ = [
    "AUTHORIZATION_CUES",
    "Clause",
    "looks_like_policy",
    "split_clauses",
    "resolve_coreferences",
    "heuristic_segment",
    "estimate_statement_count",
    "parse_statement",
]
