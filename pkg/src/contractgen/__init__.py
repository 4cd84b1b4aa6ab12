"""Contract-guided multi-agent manuscript generation.

A shared, versioned contract records which figures, tables and citations a
manuscript must contain and where. Generation agents draft against it,
deterministic evaluators check drafts against it and propose amendments, and
the renderer refuses to emit LaTeX that breaks it.
"""

from .contract import ContractState, VisualArtifact, apply_deltas, new_contract, update_contract
from .evaluate import FeedbackSignal, Weights, aggregate_score, run_evaluators, score_delta
from .pipeline import RunJournal, run
from .render import emit, renderer_stage
from .scanner import scan
from .story import ResearchStory, parse_story
from .validator import validate_document

__version__ = "0.1.0"

__all__ = [
    "ContractState",
    "FeedbackSignal",
    "ResearchStory",
    "RunJournal",
    "VisualArtifact",
    "Weights",
    "aggregate_score",
    "apply_deltas",
    "emit",
    "new_contract",
    "parse_story",
    "renderer_stage",
    "run",
    "run_evaluators",
    "scan",
    "score_delta",
    "update_contract",
    "validate_document",
]
