"""Exception types shared across the pipeline stages."""

from __future__ import annotations


class Nl2RegoError(Exception):
    """Base class for all pipeline errors."""


# --- core model ---


class EmptyValue(Nl2RegoError):
    """Slug normalization produced an empty identifier."""


class MalformedRecord(Nl2RegoError):
    """A persisted run record could not be decoded."""


# --- provider ---


class ProviderUnavailable(Nl2RegoError):
    """The completion endpoint could not be reached or refused auth."""


class ProviderRefusal(Nl2RegoError):
    """The provider returned an empty response after retries."""


class NoStructuredPayload(Nl2RegoError):
    """No balanced top-level object was found in the response text."""


class MalformedPayload(Nl2RegoError):
    """A balanced object span was found but failed to parse."""


# --- preprocessing ---


class EmptyInput(Nl2RegoError):
    """Input text is empty after trimming."""


class SegmentationFailed(Nl2RegoError):
    """Provider output could not be parsed into a statement list."""


# --- extraction ---


class MissingComponent(Nl2RegoError):
    """Required policy components were absent after the repair retry."""

    def __init__(self, components: list[str]):
        self.components = list(components)
        super().__init__(f"missing required components: {', '.join(self.components)}")


class ExtractionUnparseable(Nl2RegoError):
    """No structured payload could be recovered from the extraction response."""


class UnknownDecision(Nl2RegoError):
    """A decision word is not in the synonym table."""


# --- schema validation ---


class SchemaMalformed(Nl2RegoError):
    """Schema file is missing required keys or contains invalid values."""


class SchemaUnreadable(Nl2RegoError):
    """Schema file could not be read."""


# --- code generation ---


class NoTuples(Nl2RegoError):
    """Code or test generation was invoked with an empty tuple list."""


class AnnotationMalformed(Nl2RegoError):
    """Module annotations do not follow the documented grammar."""


class SynthesisRejected(Nl2RegoError):
    """A synthesized module failed the mechanical guardrail checks."""


# --- test generation ---


class ReservedSlugCollision(Nl2RegoError):
    """A tuple uses the reserved negative-test subject slug."""


# --- toolchain ---


class ToolUnavailable(Nl2RegoError):
    """An external binary (opa, regal) could not be found."""


class LintOutputUnparseable(Nl2RegoError):
    """The linter produced output that is not valid structured text."""


# --- orchestration ---


class PayloadTypeMismatch(Nl2RegoError):
    """An edited stage payload does not match that stage's output type."""
