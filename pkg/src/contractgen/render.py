"""Deterministic LaTeX emission and the render gate.

Draft markers expand as follows: ``[[FIG:fig:x]]`` becomes ``Figure~\\ref{fig:x}``,
``[[TAB:tab:x]]`` becomes ``Table~\\ref{tab:x}`` and ``[[CITE:k]]`` becomes
``\\cite{k}``. The float for an artifact is emitted once, right after the
paragraph holding its first marker.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

from .contract import ArtifactKind, ContractState, RuleKind, Severity, home_section
from .documents import Manuscript
from .errors import ViolationError
from .grammar import MARKER_KIND, MARKER_RE, find_markers, split_paragraphs
from .scanner import scan
from .validator import Violation, blocking, validate_document

PREAMBLE_VERSION = 1


class RenderError(ViolationError):
    def __init__(self, message: str, labels: list[str]):
        super().__init__(message)
        self.labels = labels


class UnknownMarker(RenderError):
    pass


class UnplacedArtifact(RenderError):
    pass


class RenderBlocked(ViolationError):
    def __init__(self, violations: list[Violation]):
        self.violations = violations
        errs = blocking(violations)
        super().__init__(
            f"{len(errs)} blocking violation(s): " + "; ".join(f"{v.rule_key} {v.subject}".strip() for v in errs)
        )


@dataclass(frozen=True)
class RenderStyle:
    document_class: str = "article"
    class_options: tuple[str, ...] = ()
    packages: tuple[str, ...] = ("graphicx", "booktabs")
    float_placement: str = "t"


@dataclass(frozen=True)
class Block:
    kind: str  # section | paragraph | float
    text: str = ""
    label: str = ""


@dataclass(frozen=True)
class RenderPlan:
    title: str
    blocks: tuple[Block, ...]
    style: RenderStyle = RenderStyle()


_ESCAPES = {
    "\\": r"\textbackslash{}",
    "{": r"\{",
    "}": r"\}",
    "&": r"\&",
    "%": r"\%",
    "$": r"\$",
    "#": r"\#",
    "_": r"\_",
    "~": r"\textasciitilde{}",
    "^": r"\textasciicircum{}",
}


def latex_escape(text: str) -> str:
    return "".join(_ESCAPES.get(ch, ch) for ch in text)


def _escape_prose(text: str) -> str:
    """Escape the characters that would break prose outside math: % & #."""
    out = []
    prev = ""
    for ch in text:
        if ch in "%&#" and prev != "\\":
            out.append("\\" + ch)
        else:
            out.append(ch)
        prev = ch
    return "".join(out)


def expand_markers(text: str) -> str:
    def sub(m):
        kind, target = m.group(1), m.group(2)
        if kind == "CITE":
            return f"\\cite{{{target}}}"
        return f"{'Figure' if kind == 'FIG' else 'Table'}~\\ref{{{target}}}"

    return MARKER_RE.sub(sub, text)


def paragraphs(text: str) -> list[str]:
    """Blank-line separated paragraphs with whitespace collapsed."""
    return [" ".join(text[a:b].split()) for a, b in split_paragraphs(text)]


def plan(m: Manuscript, c: ContractState, style: RenderStyle = RenderStyle()) -> RenderPlan:
    blocks: list[Block] = []
    placed: set[str] = set()
    unknown: list[str] = []
    for spec, text in m.sections:
        blocks.append(Block("section", spec.title))
        for para in paragraphs(text):
            floats = []
            for mk in find_markers(para):
                if not mk.is_visual:
                    continue
                art = c.registry.get(mk.target)
                if art is None or art.kind.value != MARKER_KIND[mk.kind]:
                    if mk.target not in unknown:
                        unknown.append(mk.target)
                elif mk.target not in placed:
                    placed.add(mk.target)
                    floats.append(Block("float", label=mk.target))
            blocks.append(Block("paragraph", expand_markers(_escape_prose(para))))
            blocks.extend(floats)
    if unknown:
        raise UnknownMarker("markers name labels outside the registry: " + ", ".join(unknown), unknown)
    unplaced = [label for label in c.registry if label not in placed]
    if unplaced:
        raise UnplacedArtifact("registered artifacts without a marker: " + ", ".join(unplaced), unplaced)
    return RenderPlan(m.title, tuple(blocks), style)


def _float_lines(c: ContractState, label: str, placement: str) -> list[str]:
    art = c.registry[label]
    env = art.kind.value
    lines = [f"\\begin{{{env}}}[{placement}]", "\\centering"]
    if art.kind is ArtifactKind.FIGURE:
        token = latex_escape(art.placeholder or "[FIGURE]")
        lines.append(f"\\fbox{{\\parbox{{0.9\\linewidth}}{{\\centering {token}}}}}")
        lines += [f"\\caption{{{latex_escape(art.description)}}}", f"\\label{{{label}}}"]
    else:
        lines += [f"\\caption{{{latex_escape(art.description)}}}", f"\\label{{{label}}}"]
        lines += [f"\\begin{{tabular}}{{{'l' * len(art.header)}}}", "\\toprule"]
        lines.append(" & ".join(latex_escape(h) for h in art.header) + " \\\\")
        lines.append("\\midrule")
        for row in art.rows:
            lines.append(" & ".join(latex_escape(cell) for cell in row) + " \\\\")
        lines += ["\\bottomrule", "\\end{tabular}"]
    lines.append(f"\\end{{{env}}}")
    return lines


def serialize(p: RenderPlan, c: ContractState) -> bytes:
    st = p.style
    opts = f"[{','.join(st.class_options)}]" if st.class_options else ""
    lines = [f"% contractgen manuscript, preamble v{PREAMBLE_VERSION}", f"\\documentclass{opts}{{{st.document_class}}}"]
    lines += [f"\\usepackage{{{pkg}}}" for pkg in st.packages]
    lines += [f"\\title{{{latex_escape(p.title)}}}", "\\date{}", "\\begin{document}", "\\maketitle", ""]
    for b in p.blocks:
        if b.kind == "section":
            lines += [f"\\section{{{latex_escape(b.text)}}}", ""]
        elif b.kind == "paragraph":
            lines += [b.text, ""]
        else:
            lines += _float_lines(c, b.label, st.float_placement) + [""]
    lines.append("\\end{document}")
    return ("\n".join(lines) + "\n").encode("utf-8")


def emit(m: Manuscript, c: ContractState, style: RenderStyle = RenderStyle()) -> bytes:
    return serialize(plan(m, c, style), c)


def _rule_key(c: ContractState, kind: RuleKind) -> tuple[str, Severity]:
    rule = c.rules.get(kind.value)
    return kind.value, rule.severity if rule is not None else Severity.ERROR


def renderer_stage(m: Manuscript, c: ContractState, style: RenderStyle = RenderStyle()) -> Manuscript:
    """Emit, re-scan and validate; attach the bytes only when nothing blocks."""
    try:
        out = emit(m, c, style)
    except UnplacedArtifact as exc:
        key, sev = _rule_key(c, RuleKind.ARTIFACT_PLACED_ONCE)
        raise RenderBlocked([
            Violation(key, sev, home_section(c, label) or "", None, f"{label} is never placed", label)
            for label in exc.labels
        ]) from exc
    except UnknownMarker as exc:
        key, sev = _rule_key(c, RuleKind.REF_RESOLVES)
        raise RenderBlocked([
            Violation(key, sev, "", None, f"marker for {label} does not resolve", label) for label in exc.labels
        ]) from exc
    violations = validate_document(c, scan(out))
    if blocking(violations):
        raise RenderBlocked(violations)
    return replace(m, rendered=out)
