"""Label, cite-key and draft-marker grammars shared by every stage."""

from __future__ import annotations

import re
from dataclasses import dataclass

LABEL_RE = re.compile(r"(fig|tab):[a-z0-9_]+")
CITE_KEY_RE = re.compile(r"[A-Za-z0-9_:.\-]+")
SECTION_ID_RE = re.compile(r"[A-Za-z0-9_.\-]+")

# [[FIG:<label>]], [[TAB:<label>]], [[CITE:<key>]]
MARKER_RE = re.compile(r"\[\[(FIG|TAB|CITE):([^\[\]]*)\]\]")
# anything that opens like a marker, used to spot malformed ones
MARKER_LIKE_RE = re.compile(r"\[\[[^\[\]]*\]\]")

KIND_PREFIX = {"figure": "fig", "table": "tab"}
MARKER_KIND = {"FIG": "figure", "TAB": "table"}


def normalize_label(raw: str) -> str:
    """Lowercase and replace whitespace runs with ``_``."""
    return re.sub(r"\s+", "_", raw.strip().lower())


def is_label(s: str) -> bool:
    return LABEL_RE.fullmatch(s) is not None


def is_cite_key(s: str) -> bool:
    return CITE_KEY_RE.fullmatch(s) is not None


def is_section_id(s: str) -> bool:
    return SECTION_ID_RE.fullmatch(s) is not None


def label_kind(label: str) -> str | None:
    m = LABEL_RE.fullmatch(label)
    if m is None:
        return None
    return "figure" if m.group(1) == "fig" else "table"


@dataclass(frozen=True)
class Marker:
    kind: str  # FIG | TAB | CITE
    target: str
    span: tuple[int, int]

    @property
    def is_visual(self) -> bool:
        return self.kind in MARKER_KIND


def find_markers(text: str) -> list[Marker]:
    return [Marker(m.group(1), m.group(2), m.span()) for m in MARKER_RE.finditer(text)]


def malformed_markers(text: str) -> list[tuple[str, tuple[int, int]]]:
    """Bracket tokens that look like markers but do not parse as one."""
    out = []
    for m in MARKER_LIKE_RE.finditer(text):
        if MARKER_RE.fullmatch(m.group(0)) is None:
            out.append((m.group(0), m.span()))
    return out


def marker_problems(text: str) -> list[str]:
    """Grammar problems of every marker in ``text``, as messages."""
    problems = []
    for tok, _ in malformed_markers(text):
        problems.append(f"malformed marker {tok!r}")
    for mk in find_markers(text):
        if mk.is_visual:
            if not is_label(mk.target):
                problems.append(f"marker label {mk.target!r} violates the label grammar")
            elif label_kind(mk.target) != MARKER_KIND[mk.kind]:
                problems.append(f"marker kind {mk.kind} does not match label {mk.target!r}")
        elif not is_cite_key(mk.target):
            problems.append(f"cite key {mk.target!r} violates the cite-key grammar")
    return problems


def split_paragraphs(text: str) -> list[tuple[int, int]]:
    """Spans of blank-line separated, whitespace-trimmed paragraphs."""
    spans = []
    for m in re.finditer(r"\S(?:.*?\S)?(?=[ \t]*\n[ \t]*\n|\s*\Z)", text, re.S):
        spans.append(m.span())
    return spans


_REF_PHRASE_RE = re.compile(r"(?:Figure|Table)~\\ref\{[^{}]*\}")
_COMMAND_RE = re.compile(r"\\[A-Za-z]+\*?(?:\{[^{}]*\})*")
_WORD_RE = re.compile(r"[A-Za-z][A-Za-z'\-]*")

EXPLANATION_MIN_WORDS = 12


def prose_word_count(text: str) -> int:
    """Words of running prose, ignoring markers, LaTeX commands and references."""
    text = MARKER_RE.sub(" ", text)
    text = _REF_PHRASE_RE.sub(" ", text)
    text = _COMMAND_RE.sub(" ", text)
    return len(_WORD_RE.findall(text))
