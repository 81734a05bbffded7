"""nl2rego: natural-language access control policies to tested Rego.

The pipeline detects policy statements, extracts decision/subject/action/
resource/condition/purpose tuples, validates them against an organization
schema, emits a deny-by-default Rego module with audit annotations, and
validates the output via lint, compile, and generated unit tests.
"""

from .model import (
    Decision,
    DsarcpTuple,
    PipelineConfig,
    PolicyStatement,
    RegoArtifact,
    RunRecord,
    Schema,
    TestCase,
    TestSuite,
    Verdict,
    slugify,
)
from .orchestrator import BatchReport, RunStore, run_batch, run_single

__version__ = "0.1.0"

__all__ = [
    "Decision",
    "DsarcpTuple",
    "PipelineConfig",
    "PolicyStatement",
    "RegoArtifact",
    "RunRecord",
    "Schema",
    "TestCase",
    "TestSuite",
    "Verdict",
    "slugify",
    "BatchReport",
    "RunStore",
    "run_batch",
    "run_single",
    "__version__",
]
