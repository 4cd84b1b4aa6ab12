"""Document validation against a contract's rule set."""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass

from .contract import ContractState, RuleKind, Severity, ValidationRule, explanation_sections, home_section
from .grammar import EXPLANATION_MIN_WORDS, prose_word_count
from .scanner import ScannedDocument, Span


@dataclass(frozen=True)
class Violation:
    rule_key: str
    severity: Severity
    section_id: str
    span: Span | None
    message: str
    subject: str = ""
    section_index: int = -1

    @property
    def location(self) -> tuple[str, Span | None]:
        return (self.section_id, self.span)

    def sort_key(self) -> tuple:
        return (self.section_index, -1 if self.span is None else self.span[0], self.rule_key, self.subject)

    def to_dict(self) -> dict:
        return {
            "rule": self.rule_key,
            "severity": self.severity.value,
            "section": self.section_id,
            "span": None if self.span is None else list(self.span),
            "message": self.message,
            "subject": self.subject,
        }

    def format_line(self) -> str:
        where = self.section_id or "<front>"
        if self.span is not None:
            where += f"@{self.span[0]}-{self.span[1]}"
        return f"{self.severity.value}\t{where}\t{self.rule_key}\t{self.message}"


def blocking(violations: list[Violation]) -> list[Violation]:
    return [v for v in violations if v.severity is Severity.ERROR]


class _Locator:
    """Maps document positions to (section index, section id)."""

    def __init__(self, c: ContractState, doc: ScannedDocument):
        self.doc = doc
        by_title: dict[str, str] = {}
        for ref in c.sections:
            by_title.setdefault(ref.title, ref.section_id)
        self.ids = [by_title.get(title, title) for title, _ in doc.sections]

    def at(self, pos: int) -> tuple[int, str]:
        idx = self.doc.section_index_at(pos)
        return idx, ("" if idx < 0 else self.ids[idx])

    def of_section(self, section_id: str | None) -> int:
        if section_id in self.ids:
            return self.ids.index(section_id)
        return len(self.ids)


def _explained(doc: ScannedDocument, section_idx: int, label: str) -> bool:
    """A paragraph of the section references ``label`` and carries enough prose."""
    ref_spans = [s for v, s in doc.refs if v == label]
    for idx, (a, b) in doc.paragraphs:
        if idx != section_idx:
            continue
        if any(a <= rs <= re_ <= b for rs, re_ in ref_spans) and prose_word_count(doc.source[a:b]) >= EXPLANATION_MIN_WORDS:
            return True
    return False


def validate_document(c: ContractState, doc: ScannedDocument) -> list[Violation]:
    """Check ``doc`` against every rule in ``c``; returns violations in document order."""
    loc = _Locator(c, doc)
    out: list[Violation] = []

    def add(rule: ValidationRule, subject: str, message: str, span: Span | None = None,
            section_id: str | None = None) -> None:
        if span is not None:
            idx, sid = loc.at(span[0])
        else:
            sid = section_id or ""
            idx = loc.of_section(section_id) if section_id else -1
        out.append(Violation(rule.canonical_key, rule.severity, sid, span, message, subject, idx))

    for rule in c.rules.values():
        kind = rule.kind
        if kind is RuleKind.LABEL_UNIQUE:
            seen: Counter[str] = Counter()
            for value, span in doc.labels:
                seen[value] += 1
                if seen[value] == 2:
                    total = sum(1 for v, _ in doc.labels if v == value)
                    add(rule, value, f"label {value} defined {total} times", span)
        elif kind is RuleKind.REF_RESOLVES:
            defined = {v for v, _ in doc.labels}
            for value, span in doc.refs:
                if value not in defined:
                    add(rule, value, f"\\ref{{{value}}} does not resolve", span)
        elif kind is RuleKind.CITE_RESOLVES:
            for value, span in doc.cites:
                if value not in c.citations:
                    add(rule, value, f"\\cite{{{value}}} is not in the citation registry", span)
        elif kind is RuleKind.ARTIFACT_PLACED_ONCE:
            placed: dict[str, list[Span]] = {}
            for _, label, span in doc.environments:
                if label is not None:
                    placed.setdefault(label, []).append(span)
            for label in c.registry:
                spans = placed.get(label, [])
                if not spans:
                    add(rule, label, f"{label} is never placed", section_id=home_section(c, label))
                elif len(spans) > 1:
                    add(rule, label, f"{label} is placed {len(spans)} times", spans[1])
        elif kind is RuleKind.ARTIFACT_EXPLAINED:
            label = rule.param("label")
            for home in explanation_sections(c, label) or [home_section(c, label)]:
                idx = loc.of_section(home)
                if idx >= len(doc.sections) or not _explained(doc, idx, label):
                    add(rule, label, f"no paragraph in {home} explains {label}", section_id=home)
        elif kind is RuleKind.SECTION_ORDER:
            titles = {r.section_id: r.title for r in c.sections}
            expected = [titles.get(s, s) for s in rule.param("order", [])]
            actual = [t for t, _ in doc.sections]
            if actual != expected:
                first = next(
                    (i for i, (a, e) in enumerate(zip(actual, expected)) if a != e),
                    min(len(actual), len(expected)),
                )
                span = doc.sections[first][1] if first < len(doc.sections) else None
                add(rule, "", f"section order {actual} differs from blueprint {expected}", span)
    out.sort(key=Violation.sort_key)
    return out
