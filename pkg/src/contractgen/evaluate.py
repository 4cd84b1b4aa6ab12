"""Rule-based evaluation agents and score aggregation.

Each evaluator looks at an intermediate artifact (one draft, a list of drafts
or a manuscript) against the current contract and reports a
:class:`FeedbackSignal`: a 0-10 score, the issues it found and the contract
deltas it proposes. Scores follow one rule everywhere::

    score = 10 * max(0, 1 - weighted_issues / max(1, checked))

with errors weighing 1 and warnings 0.25.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from decimal import ROUND_HALF_UP, Decimal
from enum import Enum
from typing import Iterable, Mapping, Protocol, Sequence

from .contract import ContractDelta, ContractState, DeltaAction, RuleKind, Severity, home_section
from .documents import Draft, Manuscript
from .errors import InputError, ViolationError
from .grammar import EXPLANATION_MIN_WORDS, MARKER_KIND, MARKER_RE, find_markers, malformed_markers, prose_word_count, split_paragraphs
from .story import ResearchStory, canonical_number, extract_numbers

ERROR_WEIGHT = 1.0
WARNING_WEIGHT = 0.25


class Dimension(str, Enum):
    STRUCTURAL_INTEGRITY = "structural_integrity"
    WRITING_CLARITY = "writing_clarity"
    METHODOLOGICAL_RIGOR = "methodological_rigor"
    EXPERIMENTAL_SUBSTANCE = "experimental_substance"
    CITATION_HYGIENE = "citation_hygiene"
    REPRODUCIBILITY = "reproducibility"
    FORMATTING_STABILITY = "formatting_stability"
    VISUAL_COMMUNICATION = "visual_communication"


class DuplicateDimension(ViolationError):
    pass


class EmptyAggregate(InputError):
    pass


@dataclass(frozen=True)
class Issue:
    code: str
    severity: Severity
    section_id: str
    message: str
    subject: str = ""
    span: tuple[int, int] | None = None

    def to_dict(self) -> dict:
        return {
            "code": self.code,
            "severity": self.severity.value,
            "section": self.section_id,
            "message": self.message,
            "subject": self.subject,
            "span": None if self.span is None else list(self.span),
        }


@dataclass(frozen=True)
class FeedbackSignal:
    evaluator_id: str
    dimension: Dimension
    score: float
    issues: tuple[Issue, ...] = ()
    deltas: tuple[ContractDelta, ...] = ()
    confidence: float = 1.0

    def __post_init__(self):
        if not 0.0 <= self.score <= 10.0:
            raise ValueError(f"score {self.score} outside [0, 10]")
        if not 0.0 <= self.confidence <= 1.0:
            raise ValueError(f"confidence {self.confidence} outside [0, 1]")
        for d in self.deltas:
            if d.origin != self.evaluator_id:
                raise ValueError(f"delta origin {d.origin!r} differs from evaluator {self.evaluator_id!r}")

    @property
    def errors(self) -> int:
        return sum(1 for i in self.issues if i.severity is Severity.ERROR)

    @property
    def warnings(self) -> int:
        return sum(1 for i in self.issues if i.severity is Severity.WARNING)

    def to_dict(self) -> dict:
        return {
            "evaluator_id": self.evaluator_id,
            "dimension": self.dimension.value,
            "score": self.score,
            "confidence": self.confidence,
            "issues": [i.to_dict() for i in self.issues],
            "deltas": [d.to_dict() for d in self.deltas],
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "FeedbackSignal":
        return cls(
            evaluator_id=d.get("evaluator_id", d["dimension"]),
            dimension=Dimension(d["dimension"]),
            score=float(d["score"]),
            issues=tuple(
                Issue(i["code"], Severity(i["severity"]), i.get("section", ""), i.get("message", ""),
                      i.get("subject", ""), tuple(i["span"]) if i.get("span") else None)
                for i in d.get("issues", ())
            ),
            deltas=tuple(ContractDelta.from_dict(x) for x in d.get("deltas", ())),
            confidence=float(d.get("confidence", 1.0)),
        )


def score_from_issues(issues: Iterable[Issue], checked: int) -> float:
    weighted = sum(ERROR_WEIGHT if i.severity is Severity.ERROR else WARNING_WEIGHT for i in issues)
    return 10.0 * max(0.0, 1.0 - weighted / max(1, checked))


# ---------------------------------------------------------------- artifact views


@dataclass(frozen=True)
class SectionText:
    section_id: str
    text: str


@dataclass(frozen=True)
class ArtifactView:
    """Uniform view over a draft, a set of drafts or a manuscript."""

    sections: tuple[SectionText, ...]
    whole: bool  # True when the view covers the complete manuscript

    @classmethod
    def of(cls, x: Draft | Sequence[Draft] | Manuscript) -> "ArtifactView":
        if isinstance(x, Draft):
            return cls((SectionText(x.section_id, x.text),), False)
        if isinstance(x, Manuscript):
            return cls(tuple(SectionText(s.section_id, t) for s, t in x.sections), True)
        return cls(tuple(SectionText(d.section_id, d.text) for d in x), True)


def _paragraph_texts(text: str) -> list[str]:
    return [text[a:b] for a, b in split_paragraphs(text)]


def is_explained(text: str, label: str) -> bool:
    """Some paragraph carries a marker for ``label`` plus enough running prose."""
    for para in _paragraph_texts(text):
        if any(mk.is_visual and mk.target == label for mk in find_markers(para)):
            if prose_word_count(para) >= EXPLANATION_MIN_WORDS:
                return True
    return False


class Evaluator(Protocol):
    evaluator_id: str
    dimension: Dimension

    def __call__(self, view: ArtifactView, c: ContractState, story: ResearchStory) -> FeedbackSignal: ...


@dataclass
class _Collector:
    evaluator_id: str
    issues: list[Issue] = field(default_factory=list)
    deltas: list[ContractDelta] = field(default_factory=list)

    def issue(self, code: str, severity: Severity, section: str, message: str, subject: str = "") -> None:
        self.issues.append(Issue(code, severity, section, message, subject))

    def delta(self, action: DeltaAction, **payload) -> None:
        self.deltas.append(ContractDelta.make(action, payload, self.evaluator_id))


class VisualConsistencyEvaluator:
    """Markers in the text against the contract's section obligations."""

    evaluator_id = "visual_consistency"
    dimension = Dimension.VISUAL_COMMUNICATION

    def __call__(self, view: ArtifactView, c: ContractState, story: ResearchStory) -> FeedbackSignal:
        col = _Collector(self.evaluator_id)
        checked = 0
        first_section: dict[str, str] = {}
        for sec in view.sections:
            ob = c.obligations.get(sec.section_id)
            markers = [mk for mk in find_markers(sec.text) if mk.is_visual]
            present = {mk.target for mk in markers}
            required = ob.required_artifacts if ob else ()
            explain = ob.required_explanations if ob else ()
            for label in required:
                checked += 1
                if label not in present:
                    col.issue("MissingVisualMarker", Severity.ERROR, sec.section_id,
                              f"section {sec.section_id} must reference {label}", label)
                    col.delta(DeltaAction.ADD_OBLIGATION, section=sec.section_id, label=label)
            for label in explain:
                checked += 1
                if not is_explained(sec.text, label):
                    col.issue("MissingExplanation", Severity.ERROR, sec.section_id,
                              f"{label} needs a paragraph of at least {EXPLANATION_MIN_WORDS} words", label)
            seen: set[str] = set()
            for mk in markers:
                if mk.target in seen:
                    continue
                seen.add(mk.target)
                first_section.setdefault(mk.target, sec.section_id)
                art = c.registry.get(mk.target)
                if art is None:
                    col.issue("UnknownVisualMarker", Severity.ERROR, sec.section_id,
                              f"{mk.target} is not in the registry", mk.target)
                elif art.kind.value != MARKER_KIND[mk.kind]:
                    col.issue("MarkerKindMismatch", Severity.ERROR, sec.section_id,
                              f"{mk.kind} marker for {art.kind.value} {mk.target}", mk.target)
                elif mk.target not in explain and not is_explained(sec.text, mk.target):
                    col.issue("ThinReference", Severity.WARNING, sec.section_id,
                              f"reference to {mk.target} lacks a descriptive paragraph", mk.target)
                    col.delta(DeltaAction.REQUIRE_EXPLANATION, label=mk.target)
        if view.whole:
            for label, sid in sorted(first_section.items()):
                home = home_section(c, label)
                if label in c.registry and home is not None and sid != home:
                    col.issue("MisplacedArtifact", Severity.WARNING, sid,
                              f"{label} first appears in {sid}, expected in {home}", label)
        return FeedbackSignal(self.evaluator_id, self.dimension, score_from_issues(col.issues, checked),
                              tuple(col.issues), tuple(col.deltas))


# decimals in running text; integers (years, counts) are deliberately ignored
_DECIMAL_RE = re.compile(r"(?:(?<![\w.\-])-)?(?<![\w.])\d+\.\d+(?![\d.]*\w)")


def numeric_literals(text: str) -> list[Decimal]:
    return [Decimal(m.group()) for m in _DECIMAL_RE.finditer(MARKER_RE.sub(" ", text))]


class DataFidelityEvaluator:
    """Every decimal quoted in the text must come from the story's evidence."""

    evaluator_id = "data_fidelity"
    dimension = Dimension.EXPERIMENTAL_SUBSTANCE

    def __call__(self, view: ArtifactView, c: ContractState, story: ResearchStory) -> FeedbackSignal:
        col = _Collector(self.evaluator_id)
        known = extract_numbers(story)
        checked = 0
        for sec in view.sections:
            for value in numeric_literals(sec.text):
                checked += 1
                if canonical_number(value) not in known:
                    col.issue("UnsupportedNumber", Severity.ERROR, sec.section_id,
                              f"{value} does not appear in the story evidence", str(value))
        return FeedbackSignal(self.evaluator_id, self.dimension, score_from_issues(col.issues, checked),
                              tuple(col.issues))


class StructureEvaluator:
    """Section presence and order against the blueprint declared in the contract."""

    evaluator_id = "structure"
    dimension = Dimension.STRUCTURAL_INTEGRITY

    def __call__(self, view: ArtifactView, c: ContractState, story: ResearchStory) -> FeedbackSignal:
        col = _Collector(self.evaluator_id)
        declared = c.section_ids()
        checked = len(declared) if view.whole else len(view.sections)
        if declared:
            ids = [s.section_id for s in view.sections]
            for sid in ids:
                if sid not in declared:
                    col.issue("UnexpectedSection", Severity.ERROR, sid, f"{sid} is not in the blueprint", sid)
            if view.whole:
                for sid in declared:
                    if sid not in ids:
                        col.issue("MissingSection", Severity.ERROR, sid, f"{sid} is missing", sid)
                common = [s for s in ids if s in declared]
                if common != [s for s in declared if s in common]:
                    col.issue("SectionOrder", Severity.ERROR, common[0],
                              f"section order {common} differs from blueprint {declared}")
            if col.issues and not c.has_rule(RuleKind.SECTION_ORDER, order=declared):
                col.delta(DeltaAction.ADD_RULE, kind=RuleKind.SECTION_ORDER.value,
                          params={"order": declared}, severity="error")
        for sec in view.sections:
            if not sec.text.strip():
                col.issue("EmptySection", Severity.WARNING, sec.section_id, f"{sec.section_id} has no text",
                          sec.section_id)
        return FeedbackSignal(self.evaluator_id, self.dimension, score_from_issues(col.issues, checked),
                              tuple(col.issues), tuple(col.deltas))


class CitationEvaluator:
    """Cite markers against the contract's citation registry and section obligations."""

    evaluator_id = "citation_hygiene"
    dimension = Dimension.CITATION_HYGIENE

    def __call__(self, view: ArtifactView, c: ContractState, story: ResearchStory) -> FeedbackSignal:
        col = _Collector(self.evaluator_id)
        checked = 0
        for sec in view.sections:
            cited = [mk.target for mk in find_markers(sec.text) if mk.kind == "CITE"]
            for key in cited:
                checked += 1
                if key not in c.citations:
                    col.issue("UnknownCitation", Severity.ERROR, sec.section_id,
                              f"{key} is not in the citation registry", key)
            ob = c.obligations.get(sec.section_id)
            for key in ob.required_citations if ob else ():
                checked += 1
                if key not in cited:
                    col.issue("MissingCitation", Severity.WARNING, sec.section_id,
                              f"{sec.section_id} should cite {key}", key)
        return FeedbackSignal(self.evaluator_id, self.dimension, score_from_issues(col.issues, checked),
                              tuple(col.issues))


_RAW_FLOAT_RE = re.compile(r"\\(?:begin|end)\{(?:figure|table)\*?\}|\\label\{")


class FormattingEvaluator:
    """Raw floats or labels that bypass the registry, malformed markers, unbalanced braces."""

    evaluator_id = "formatting"
    dimension = Dimension.FORMATTING_STABILITY

    def __call__(self, view: ArtifactView, c: ContractState, story: ResearchStory) -> FeedbackSignal:
        col = _Collector(self.evaluator_id)
        checked = 0
        for sec in view.sections:
            checked += max(1, len(split_paragraphs(sec.text)))
            for m in _RAW_FLOAT_RE.finditer(sec.text):
                col.issue("RawLatexFloat", Severity.ERROR, sec.section_id,
                          f"{m.group()!r} bypasses the registry; use a marker", m.group())
            for tok, _ in malformed_markers(sec.text):
                col.issue("MalformedMarker", Severity.ERROR, sec.section_id, f"malformed marker {tok!r}", tok)
            stripped = re.sub(r"\\.", "", sec.text)
            if stripped.count("{") != stripped.count("}"):
                col.issue("UnbalancedBraces", Severity.WARNING, sec.section_id, "unbalanced braces")
        return FeedbackSignal(self.evaluator_id, self.dimension, score_from_issues(col.issues, checked),
                              tuple(col.issues))


@dataclass(frozen=True)
class PassThroughEvaluator:
    """Slot for a dimension without a deterministic check: full score, zero confidence."""

    evaluator_id: str
    dimension: Dimension

    def __call__(self, view: ArtifactView, c: ContractState, story: ResearchStory) -> FeedbackSignal:
        return FeedbackSignal(self.evaluator_id, self.dimension, 10.0, confidence=0.0)


def default_evaluators(enabled: Mapping[str, bool] | None = None) -> list[Evaluator]:
    """All built-in evaluators, minus any switched off, in evaluator-id order."""
    evs: list[Evaluator] = [
        CitationEvaluator(),
        DataFidelityEvaluator(),
        FormattingEvaluator(),
        StructureEvaluator(),
        VisualConsistencyEvaluator(),
        PassThroughEvaluator("writing_clarity", Dimension.WRITING_CLARITY),
        PassThroughEvaluator("methodological_rigor", Dimension.METHODOLOGICAL_RIGOR),
        PassThroughEvaluator("reproducibility", Dimension.REPRODUCIBILITY),
    ]
    enabled = enabled or {}
    evs = [e for e in evs if enabled.get(e.evaluator_id, True)]
    return sorted(evs, key=lambda e: e.evaluator_id)


def run_evaluators(x: Draft | Sequence[Draft] | Manuscript, c: ContractState, story: ResearchStory,
                   evaluators: Sequence[Evaluator] | None = None) -> list[FeedbackSignal]:
    view = ArtifactView.of(x)
    evs = default_evaluators() if evaluators is None else sorted(evaluators, key=lambda e: e.evaluator_id)
    return [ev(view, c, story) for ev in evs]


# ---------------------------------------------------------------- aggregation


class Weights:
    """Non-negative per-dimension weights; normalized on construction."""

    def __init__(self, weights: Mapping[Dimension | str, float | int | str | Decimal]):
        raw: dict[Dimension, Decimal] = {}
        for k, v in weights.items():
            dim = Dimension(k)
            w = Decimal(str(v))
            if not w.is_finite() or w < 0:
                raise ValueError(f"weight for {dim.value} must be a non-negative number, got {v!r}")
            raw[dim] = w
        total = sum(raw.values(), Decimal(0))
        if total <= 0:
            raise ValueError("weights must not all be zero")
        self.raw = raw
        self.normalized = {k: v / total for k, v in raw.items()}

    @classmethod
    def equal(cls, dims: Iterable[Dimension | str] = tuple(Dimension)) -> "Weights":
        return cls({d: 1 for d in dims})

    def __getitem__(self, dim: Dimension | str) -> Decimal:
        return self.normalized.get(Dimension(dim), Decimal(0))

    def __contains__(self, dim: object) -> bool:
        return dim in self.normalized


def _dec(x: float | Decimal | str) -> Decimal:
    return x if isinstance(x, Decimal) else Decimal(repr(x) if isinstance(x, float) else str(x))


def aggregate_score(signals: Sequence[FeedbackSignal], w: Weights) -> Decimal:
    """Weighted sum of scores; weight of dimensions without a signal is spread proportionally."""
    seen: set[Dimension] = set()
    for s in signals:
        if s.dimension in seen:
            raise DuplicateDimension(f"two signals for {s.dimension.value}")
        seen.add(s.dimension)
    present = [s for s in signals if w[s.dimension] > 0]
    mass = sum((w[s.dimension] for s in present), Decimal(0))
    if mass == 0:
        raise EmptyAggregate("no weighted signal to aggregate")
    return sum((w[s.dimension] * _dec(s.score) for s in present), Decimal(0)) / mass


def score_delta(a: float | Decimal | str, b: float | Decimal | str) -> Decimal:
    return _dec(a) - _dec(b)


def report_value(x: float | Decimal, places: int = 3) -> Decimal:
    """Round half-up for reporting."""
    return _dec(x).quantize(Decimal(1).scaleb(-places), rounding=ROUND_HALF_UP)


def format_score(x: float | Decimal, places: int = 3) -> str:
    return f"{report_value(x, places)}"


def format_delta(x: float | Decimal, places: int = 3) -> str:
    v = report_value(x, places)
    # a delta that rounds to zero prints as +0.000, never -0.000
    return f"+{abs(v)}" if v >= 0 else f"{v}"
