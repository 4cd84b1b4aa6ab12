"""Single-pass reader for the LaTeX subset the renderer emits.

Recognized: ``\\section``, ``\\label``, ``\\ref``, ``\\cite`` (comma list),
``\\caption`` and ``figure``/``table`` environments. Everything else is opaque
text. ``%`` comments are skipped and backslash-escaped characters are never
treated as syntax. Section titles and captions are read as opaque arguments.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

from .errors import InputError
from .grammar import split_paragraphs

Span = tuple[int, int]

FLOAT_KINDS = ("figure", "table")
ARG_COMMANDS = {"section", "label", "ref", "cite", "caption", "begin", "end"}


class ScanError(InputError):
    def __init__(self, message: str, span: Span):
        super().__init__(f"{message} at {span[0]}..{span[1]}")
        self.span = span


class UnbalancedEnvironment(ScanError):
    pass


class UnterminatedCommandArgument(ScanError):
    pass


@dataclass(frozen=True)
class ScannedDocument:
    labels: tuple[tuple[str, Span], ...] = ()
    refs: tuple[tuple[str, Span], ...] = ()
    cites: tuple[tuple[str, Span], ...] = ()
    environments: tuple[tuple[str, str | None, Span], ...] = ()
    sections: tuple[tuple[str, Span], ...] = ()
    # (section index, span); index -1 is the front matter before the first section
    paragraphs: tuple[tuple[int, Span], ...] = ()
    length: int = 0
    source: str = field(default="", repr=False, compare=False)

    def section_index_at(self, pos: int) -> int:
        idx = -1
        for i, (_, span) in enumerate(self.sections):
            if span[0] <= pos:
                idx = i
            else:
                break
        return idx

    def to_dict(self) -> dict:
        return {
            "labels": [[v, list(s)] for v, s in self.labels],
            "refs": [[v, list(s)] for v, s in self.refs],
            "cites": [[v, list(s)] for v, s in self.cites],
            "environments": [[k, lab, list(s)] for k, lab, s in self.environments],
            "sections": [[t, list(s)] for t, s in self.sections],
            "paragraphs": [[i, list(s)] for i, s in self.paragraphs],
            "length": self.length,
        }


_TOKEN_RE = re.compile(r"\\([A-Za-z]+)|\\.|%", re.S)
_ARG_RE = re.compile(r"[\\{}%]")


def _read_argument(text: str, open_pos: int, cmd_start: int) -> tuple[int, int, int]:
    """Return (content start, content end, position after closing brace)."""
    depth = 1
    i = open_pos + 1
    while True:
        m = _ARG_RE.search(text, i)
        if m is None:
            raise UnterminatedCommandArgument("unterminated command argument", (cmd_start, len(text)))
        ch = m.group()
        if ch == "\\":
            i = m.end() + 1
            continue
        if ch == "%":
            nl = text.find("\n", m.end())
            if nl < 0:
                raise UnterminatedCommandArgument("unterminated command argument", (cmd_start, len(text)))
            i = nl
            continue
        depth += 1 if ch == "{" else -1
        if depth == 0:
            return open_pos + 1, m.start(), m.end()
        i = m.end()


def _trimmed(text: str, start: int, end: int) -> tuple[str, Span]:
    raw = text[start:end]
    lead = len(raw) - len(raw.lstrip())
    value = raw.strip()
    return value, (start + lead, start + lead + len(value))


def scan(latex: bytes | str) -> ScannedDocument:
    if isinstance(latex, bytes):
        try:
            text = latex.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise InputError(f"document is not UTF-8: {exc}") from exc
    else:
        text = latex

    labels, refs, cites, envs, sections = [], [], [], [], []
    # open float: (kind, begin span, first enclosed label)
    open_env: tuple[str, Span, str | None] | None = None
    pos = 0
    while True:
        m = _TOKEN_RE.search(text, pos)
        if m is None:
            break
        if m.group(0) == "%":
            nl = text.find("\n", m.end())
            pos = len(text) if nl < 0 else nl
            continue
        name = m.group(1)
        if name not in ARG_COMMANDS or m.end() >= len(text) or text[m.end()] != "{":
            pos = m.end()
            continue
        start = m.start()
        c0, c1, after = _read_argument(text, m.end(), start)
        pos = after
        if name in ("label", "ref"):
            value, span = _trimmed(text, c0, c1)
            if value:
                (labels if name == "label" else refs).append((value, span))
                if name == "label" and open_env is not None and open_env[2] is None:
                    open_env = (open_env[0], open_env[1], value)
        elif name == "cite":
            offset = c0
            for part in text[c0:c1].split(","):
                value, span = _trimmed(text, offset, offset + len(part))
                if value:
                    cites.append((value, span))
                offset += len(part) + 1
        elif name == "section":
            if open_env is not None:
                raise UnbalancedEnvironment(f"\\section inside {open_env[0]}", (open_env[1][0], after))
            sections.append((text[c0:c1].strip(), (start, after)))
        elif name in ("begin", "end"):
            kind = text[c0:c1].strip()
            if kind not in FLOAT_KINDS:
                continue
            if name == "begin":
                if open_env is not None:
                    raise UnbalancedEnvironment(f"{kind} nested inside {open_env[0]}", (start, after))
                open_env = (kind, (start, after), None)
            else:
                if open_env is None:
                    raise UnbalancedEnvironment(f"\\end{{{kind}}} without \\begin", (start, after))
                if open_env[0] != kind:
                    raise UnbalancedEnvironment(
                        f"\\end{{{kind}}} closes \\begin{{{open_env[0]}}}", (open_env[1][0], after)
                    )
                envs.append((kind, open_env[2], (open_env[1][0], after)))
                open_env = None
    if open_env is not None:
        raise UnbalancedEnvironment(f"\\begin{{{open_env[0]}}} is never closed", open_env[1])

    return ScannedDocument(
        labels=tuple(labels),
        refs=tuple(refs),
        cites=tuple(cites),
        environments=tuple(envs),
        sections=tuple(sections),
        paragraphs=tuple(_paragraphs(text, sections, envs)),
        length=len(text),
        source=text,
    )


def _paragraphs(text: str, sections: list, envs: list) -> list[tuple[int, Span]]:
    bounds = [0] + [s[1][1] for s in sections]
    ends = [s[1][0] for s in sections] + [len(text)]
    floats = sorted(e[2] for e in envs)
    out = []
    for idx, (lo, hi) in enumerate(zip(bounds, ends)):
        pieces = []
        cur = lo
        for fs, fe in floats:
            if fe <= lo or fs >= hi:
                continue
            pieces.append((cur, fs))
            cur = fe
        pieces.append((cur, hi))
        for a, b in pieces:
            for ps, pe in split_paragraphs(text[a:b]):
                out.append((idx - 1, (a + ps, a + pe)))
    return out
