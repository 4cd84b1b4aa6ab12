"""Orchestration of the generate-evaluate-adapt procedure.

The order of work is::

    architect
    for each section: write, evaluate, update contract
    repeat: refine, evaluate, update contract   (until clean or capped)
    render

Every stage appends a :class:`JournalEntry`. In fan-out mode (the default)
all sections are drafted concurrently against one frozen contract snapshot and
their feedback is folded in section order afterwards; strict-sequential mode
drafts each section against the contract as updated by the previous one.
"""

from __future__ import annotations

import json
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from datetime import datetime, timezone
from decimal import Decimal
from typing import Any, Callable, Sequence

from .agents import AgentRequest, Backend, MalformedResponse, Role, ScriptedBackend, ServiceBackend, dispatch
from .config import RunConfig
from .contract import (
    ContractDelta,
    ContractState,
    RuleKind,
    Severity,
    ValidationRule,
    VisualArtifact,
    add_citation,
    add_rule,
    apply_deltas,
    bind_obligation,
    declare_sections,
    new_contract,
    register_artifact,
    update_contract,
)
from .documents import Blueprint, Draft, Manuscript, SectionSpec
from .errors import ContractGenError, InputError, ViolationError
from .evaluate import Evaluator, FeedbackSignal, Issue, aggregate_score, default_evaluators, run_evaluators
from .grammar import MARKER_KIND
from .render import RenderBlocked, renderer_stage
from .story import ResearchStory

log = logging.getLogger(__name__)

STAGES = ("architect", "write", "evaluate", "refine", "render")


class BlueprintInvalid(ViolationError):
    pass


class DraftRejected(ViolationError):
    def __init__(self, section_id: str, labels: list[str]):
        super().__init__(f"draft for {section_id} references labels outside the registry: {', '.join(labels)}")
        self.section_id = section_id
        self.labels = labels


class AdaptExhausted(ViolationError):
    def __init__(self, iterations: int, issues: list[Issue], journal: "RunJournal | None" = None):
        super().__init__(f"{sum(i.severity is Severity.ERROR for i in issues)} error(s) remain after "
                         f"{iterations} refinement iteration(s)")
        self.iterations = iterations
        self.issues = issues
        self.journal = journal


class StageFailure(ContractGenError):
    """A stage failed; keeps the original error, its exit code and the journal so far."""

    def __init__(self, stage: str, cause: BaseException, journal: "RunJournal"):
        super().__init__(f"{stage} stage failed: {type(cause).__name__}: {cause}")
        self.stage = stage
        self.cause = cause
        self.journal = journal
        self.exit_code = getattr(cause, "exit_code", ContractGenError.exit_code)


# ---------------------------------------------------------------- journal


@dataclass(frozen=True)
class JournalEntry:
    stage: str
    scope: str
    version_before: int
    version_after: int
    iteration: int | None = None
    errors: int = 0
    warnings: int = 0
    scores: dict[str, float] = field(default_factory=dict)
    timestamp: str = ""

    def to_dict(self) -> dict:
        return {
            "stage": self.stage,
            "scope": self.scope,
            "iteration": self.iteration,
            "version_before": self.version_before,
            "version_after": self.version_after,
            "errors": self.errors,
            "warnings": self.warnings,
            "scores": dict(self.scores),
            "timestamp": self.timestamp,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "JournalEntry":
        if d.get("stage") not in STAGES:
            raise ValueError(f"unknown stage {d.get('stage')!r}")
        it = d.get("iteration")
        return cls(
            stage=d["stage"],
            scope=str(d["scope"]),
            version_before=int(d["version_before"]),
            version_after=int(d["version_after"]),
            iteration=None if it is None else int(it),
            errors=int(d.get("errors", 0)),
            warnings=int(d.get("warnings", 0)),
            scores={str(k): float(v) for k, v in d.get("scores", {}).items()},
            timestamp=str(d.get("timestamp", "")),
        )


class JournalError(InputError):
    def __init__(self, line: int, reason: str):
        super().__init__(f"journal line {line}: {reason}")
        self.line = line


class RunJournal:
    """Append-only record of stage transitions."""

    def __init__(self, fixed_clock: bool = False, clock: Callable[[], datetime] | None = None):
        self.entries: list[JournalEntry] = []
        self.fixed_clock = fixed_clock
        self._clock = clock or (lambda: datetime.now(timezone.utc))

    def _stamp(self) -> str:
        if self.fixed_clock:
            return str(len(self.entries))
        return self._clock().isoformat(timespec="milliseconds")

    def append(self, stage: str, scope: str, before: ContractState | int, after: ContractState | int,
               signals: Sequence[FeedbackSignal] = (), iteration: int | None = None,
               errors: int | None = None, warnings: int | None = None) -> JournalEntry:
        vb = before if isinstance(before, int) else before.version
        va = after if isinstance(after, int) else after.version
        if self.entries and vb < self.entries[-1].version_after:
            raise ValueError("contract versions in the journal must not decrease")
        entry = JournalEntry(
            stage=stage,
            scope=scope,
            version_before=vb,
            version_after=va,
            iteration=iteration,
            errors=sum(s.errors for s in signals) if errors is None else errors,
            warnings=sum(s.warnings for s in signals) if warnings is None else warnings,
            scores={s.evaluator_id: s.score for s in signals},
            timestamp=self._stamp(),
        )
        self.entries.append(entry)
        return entry

    def stages(self) -> list[str]:
        return [e.stage for e in self.entries]

    def dumps(self) -> str:
        return "".join(json.dumps(e.to_dict(), sort_keys=True) + "\n" for e in self.entries)

    @classmethod
    def loads(cls, text: str) -> "RunJournal":
        j = cls()
        for n, line in enumerate(text.splitlines(), 1):
            if not line.strip():
                continue
            try:
                j.entries.append(JournalEntry.from_dict(json.loads(line)))
            except (ValueError, KeyError, TypeError, AttributeError) as exc:
                raise JournalError(n, str(exc) or type(exc).__name__) from exc
        return j

    def adapt_errors(self) -> list[int]:
        """Error counts of the evaluations inside the refinement loop, in order."""
        return [e.errors for e in self.entries if e.stage == "evaluate" and e.iteration is not None]

    def is_monotone(self) -> bool:
        errs = self.adapt_errors()
        return all(b <= a for a, b in zip(errs, errs[1:]))


# ---------------------------------------------------------------- stages


def _snapshot(c: ContractState) -> dict:
    return c.to_dict()


def _sections_from(content: dict) -> list[SectionSpec]:
    return [
        SectionSpec(
            section_id=s["id"],
            title=s["title"],
            order_index=i,
            outline=tuple(s.get("outline", ())),
            evidence_links=tuple(s.get("evidence_links", ())),
            bound_artifacts=tuple(s.get("bound_artifacts", ())),
        )
        for i, s in enumerate(content["sections"])
    ]


def check_blueprint(bp: Blueprint, story: ResearchStory) -> None:
    if not bp.sections:
        raise BlueprintInvalid("blueprint has no sections")
    ids = [s.section_id for s in bp.sections]
    dup = sorted({i for i in ids if ids.count(i) > 1})
    if dup:
        raise BlueprintInvalid(f"duplicate section ids: {', '.join(dup)}")
    if sorted(s.order_index for s in bp.sections) != list(range(len(ids))):
        raise BlueprintInvalid("order_index values are not a permutation of 0..n-1")
    evidence = story.evidence_by_id()
    labels = {a.label for a in bp.artifact_proposals}
    for s in bp.sections:
        missing = [e for e in s.evidence_links if e not in evidence]
        if missing:
            raise BlueprintInvalid(f"section {s.section_id} links unknown evidence: {', '.join(missing)}")
        unbound = [label for label in s.bound_artifacts if label not in labels]
        if unbound:
            raise BlueprintInvalid(f"section {s.section_id} binds unproposed artifacts: {', '.join(unbound)}")
    for a in bp.artifact_proposals:
        bad = [e for e in a.expected_sections if e not in ids]
        if bad:
            raise BlueprintInvalid(f"{a.label} expects unknown sections: {', '.join(bad)}")
    refs = set(story.reference_keys())
    unknown = [k for k in bp.citation_proposals if k not in refs]
    if unknown:
        raise BlueprintInvalid(f"citations not in the story references: {', '.join(unknown)}")


def architect_stage(s: ResearchStory, c0: ContractState, backend: Backend) -> tuple[Blueprint, ContractState]:
    req = AgentRequest(Role.ARCHITECT, 0, _snapshot(c0), {"story": s.to_dict()})
    content = dispatch(backend, req).content
    try:
        artifacts = tuple(VisualArtifact.from_dict(a) for a in content["artifacts"])
        for a in artifacts:
            a.check()
    except (ValueError, ContractGenError) as exc:
        raise BlueprintInvalid(f"artifact proposal rejected: {exc}") from exc
    bp = Blueprint(tuple(_sections_from(content)), artifacts, tuple(content["citations"]))
    check_blueprint(bp, s)

    c = declare_sections(c0, [(sec.section_id, sec.title) for sec in bp.sections], origin="architect")
    order = [sec.section_id for sec in bp.sections]
    c = add_rule(c, ValidationRule.make(RuleKind.SECTION_ORDER, {"order": order}), origin="architect")
    for a in bp.artifact_proposals:
        c = register_artifact(c, a, origin="architect")
    for sec in bp.sections:
        for label in sec.bound_artifacts:
            c = bind_obligation(c, sec.section_id, label, origin="architect")
    for key in bp.citation_proposals:
        c = add_citation(c, key, origin="architect")
    return bp, c


def _foreign_labels(d: Draft, c: ContractState) -> list[str]:
    out = []
    for mk in d.markers:
        if not mk.is_visual:
            continue
        art = c.registry.get(mk.target)
        if (art is None or art.kind.value != MARKER_KIND[mk.kind]) and mk.target not in out:
            out.append(mk.target)
    return out


def writer_stage(spec: SectionSpec, c: ContractState, backend: Backend,
                 max_attempts: int = 3, story: ResearchStory | None = None) -> Draft:
    """Draft one section; re-ask up to ``max_attempts`` times while markers stray outside the registry."""
    foreign: list[str] = []
    for attempt in range(max_attempts):
        inputs: dict[str, Any] = {"section": spec.to_dict()}
        if story is not None:
            inputs["story"] = story.to_dict()
        if foreign:
            inputs["rejected_labels"] = foreign
        req = AgentRequest(Role.WRITER, spec.order_index, _snapshot(c), inputs, attempt)
        content = dispatch(backend, req).content
        if content["section_id"] != spec.section_id:
            raise MalformedResponse(
                f"writer answered for section {content['section_id']!r}, expected {spec.section_id!r}",
                json.dumps(content))
        draft = Draft(spec.section_id, content["text"])
        foreign = _foreign_labels(draft, c)
        if not foreign:
            return draft
        log.info("draft for %s rejected (attempt %d): %s", spec.section_id, attempt + 1, foreign)
    raise DraftRejected(spec.section_id, foreign)


def _evaluate(x, c: ContractState, story: ResearchStory, evaluators: Sequence[Evaluator]) -> tuple[list[FeedbackSignal], ContractState]:
    signals = run_evaluators(x, c, story, evaluators)
    return signals, update_contract(c, signals)


def _errors(signals: Sequence[FeedbackSignal]) -> int:
    return sum(s.errors for s in signals)


def refiner_stage(drafts: Sequence[Draft], c: ContractState, backend: Backend,
                  evaluators: Sequence[Evaluator], *, story: ResearchStory, blueprint: Blueprint,
                  max_adapt_iterations: int = 3, journal: RunJournal | None = None,
                  ) -> tuple[Manuscript, ContractState, list[FeedbackSignal]]:
    """Refine, evaluate and update until clean and stable, or until the iteration cap.

    Stops early once an evaluation reports no errors and its feedback leaves the
    contract unchanged. Raises :class:`AdaptExhausted` if errors remain at the cap.
    """
    journal = journal if journal is not None else RunJournal()
    order = [s.section_id for s in blueprint.sections]
    texts = {d.section_id: d.text for d in drafts}
    if sorted(texts) != sorted(order) or len(drafts) != len(order):
        raise ValueError("refiner needs exactly one draft per blueprint section")
    issues: list[Issue] = []
    m = Manuscript(story.title, tuple((spec, texts[spec.section_id]) for spec in blueprint.sections), c.version)
    signals: list[FeedbackSignal] = []
    for it in range(max_adapt_iterations):
        inputs = {
            "drafts": [{"section_id": sid, "text": texts[sid]} for sid in order],
            "issues": [i.to_dict() for i in issues],
        }
        content = dispatch(backend, AgentRequest(Role.REFINER, it, _snapshot(c), inputs)).content
        got = [sec["section_id"] for sec in content["sections"]]
        if len(got) != len(order) or sorted(got) != sorted(order):
            raise StageFailure("refine", ViolationError(
                f"refiner returned sections {got}, expected {order} (section count mismatch)"), journal)
        before = c
        c = apply_deltas(c, [ContractDelta.make(d["action"], d["payload"], "refiner")
                             for d in content.get("deltas", ())])
        journal.append("refine", "manuscript", before, c, iteration=it)
        texts = {sec["section_id"]: sec["text"] for sec in content["sections"]}
        m = Manuscript(story.title, tuple((spec, texts[spec.section_id]) for spec in blueprint.sections), c.version)

        before = c
        signals, c = _evaluate(m, c, story, evaluators)
        journal.append("evaluate", "manuscript", before, c, signals, iteration=it)
        issues = [i for sig in signals for i in sig.issues]
        if _errors(signals) == 0 and c.version == before.version:
            break
    if _errors(signals) > 0:
        raise AdaptExhausted(max_adapt_iterations, [i for i in issues if i.severity is Severity.ERROR], journal)
    return replace(m, contract_version_at_freeze=c.version), c, signals


# ---------------------------------------------------------------- run


@dataclass
class RunResult:
    manuscript: Manuscript
    journal: RunJournal
    score: Decimal
    signals: list[FeedbackSignal]
    contract: ContractState
    blueprint: Blueprint


def make_backend(config: RunConfig, story: ResearchStory) -> Backend:
    if config.backend == "service":
        if config.service is None or not config.service.endpoint:
            raise InputError("service backend selected but no [service] endpoint configured")
        return ServiceBackend(config.service)
    return ScriptedBackend(config.fixtures, config.scenario or story.id)


def run(s: ResearchStory, config: RunConfig | None = None, backend: Backend | None = None) -> RunResult:
    config = config or RunConfig()
    backend = backend or make_backend(config, s)
    evaluators = default_evaluators(config.evaluators)
    journal = RunJournal(fixed_clock=config.fixed_clock)
    stage = "architect"
    try:
        c0 = new_contract()
        bp, c = architect_stage(s, c0, backend)
        journal.append("architect", "blueprint", c0, c)

        def write(spec: SectionSpec, snapshot: ContractState) -> Draft:
            return writer_stage(spec, snapshot, backend, config.max_adapt_iterations, s)

        drafts: list[Draft] = []
        if config.strict_sequential:
            for spec in bp.sections:
                stage = "write"
                d = write(spec, c)
                drafts.append(d)
                journal.append("write", spec.section_id, c, c)
                stage = "evaluate"
                before = c
                signals, c = _evaluate(d, c, s, evaluators)
                journal.append("evaluate", spec.section_id, before, c, signals)
        else:
            stage = "write"
            frozen = c
            with ThreadPoolExecutor(max_workers=max(1, min(8, len(bp.sections)))) as pool:
                drafts = list(pool.map(lambda spec: write(spec, frozen), bp.sections))
            for spec in bp.sections:
                journal.append("write", spec.section_id, c, c)
            stage = "evaluate"
            for d in drafts:
                before = c
                signals, c = _evaluate(d, c, s, evaluators)
                journal.append("evaluate", d.section_id, before, c, signals)

        stage = "refine"
        m, c, signals = refiner_stage(drafts, c, backend, evaluators, story=s, blueprint=bp,
                                      max_adapt_iterations=config.max_adapt_iterations, journal=journal)
        stage = "render"
        try:
            m = renderer_stage(m, c)
        except RenderBlocked as exc:
            blocking = [v for v in exc.violations if v.severity is Severity.ERROR]
            journal.append("render", "manuscript", c, c, errors=len(blocking),
                           warnings=len(exc.violations) - len(blocking))
            exc.journal = journal
            raise
        journal.append("render", "manuscript", c, c)
        return RunResult(m, journal, aggregate_score(signals, config.weights), signals, c, bp)
    except (RenderBlocked, AdaptExhausted, StageFailure):
        raise
    except Exception as exc:
        raise StageFailure(stage, exc, journal) from exc
