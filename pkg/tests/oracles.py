"""Independent reference implementations and seeded generators used by the tests.

Nothing here imports the code under test except for the data types needed to
build inputs; the oracles recompute their answers from first principles.
"""

from __future__ import annotations

import random
import re
from collections import Counter
from dataclasses import dataclass
from decimal import Decimal

from contractgen.contract import ArtifactKind, ContractState, VisualArtifact, add_citation, declare_sections, new_contract, register_artifact

ARG_COMMANDS = ("section", "label", "ref", "cite", "caption", "begin", "end")


# ---------------------------------------------------------------- naive scanner


class OracleScanError(Exception):
    pass


def naive_scan(text: str) -> dict:
    """Character-by-character reader of the LaTeX subset.

    Returns plain lists so the result can be compared field by field with a
    ScannedDocument. Raises OracleScanError on unbalanced floats or an
    unterminated argument.
    """
    labels, refs, cites, envs, sections = [], [], [], [], []
    open_env = None  # [kind, begin_start, first_label]
    n = len(text)
    i = 0
    while i < n:
        ch = text[i]
        if ch == "%":
            while i < n and text[i] != "\n":
                i += 1
            continue
        if ch != "\\":
            i += 1
            continue
        if i + 1 >= n:
            break
        if not text[i + 1].isascii() or not text[i + 1].isalpha():
            i += 2
            continue
        j = i + 1
        while j < n and text[j].isascii() and text[j].isalpha():
            j += 1
        name = text[i + 1:j]
        if name not in ARG_COMMANDS or j >= n or text[j] != "{":
            i = j
            continue
        # argument walk
        depth, k = 1, j + 1
        while True:
            if k >= n:
                raise OracleScanError("unterminated")
            c = text[k]
            if c == "\\":
                k += 2
                continue
            if c == "%":
                while k < n and text[k] != "\n":
                    k += 1
                if k >= n:
                    raise OracleScanError("unterminated")
                continue
            if c == "{":
                depth += 1
            elif c == "}":
                depth -= 1
                if depth == 0:
                    break
            k += 1
        c0, c1, after = j + 1, k, k + 1
        body = text[c0:c1]
        if name in ("label", "ref"):
            val = body.strip()
            if val:
                lead = len(body) - len(body.lstrip())
                (labels if name == "label" else refs).append((val, (c0 + lead, c0 + lead + len(val))))
                if name == "label" and open_env is not None and open_env[2] is None:
                    open_env[2] = val
        elif name == "cite":
            off = c0
            for part in body.split(","):
                val = part.strip()
                if val:
                    lead = len(part) - len(part.lstrip())
                    cites.append((val, (off + lead, off + lead + len(val))))
                off += len(part) + 1
        elif name == "section":
            if open_env is not None:
                raise OracleScanError("section in float")
            sections.append((body.strip(), (i, after)))
        elif name in ("begin", "end"):
            kind = body.strip()
            if kind in ("figure", "table"):
                if name == "begin":
                    if open_env is not None:
                        raise OracleScanError("nested float")
                    open_env = [kind, i, None]
                else:
                    if open_env is None or open_env[0] != kind:
                        raise OracleScanError("bad end")
                    envs.append((kind, open_env[2], (open_env[1], after)))
                    open_env = None
        i = after
    if open_env is not None:
        raise OracleScanError("never closed")
    return {"labels": labels, "refs": refs, "cites": cites, "environments": envs, "sections": sections}


def scanned_fields(doc) -> dict:
    return {
        "labels": list(doc.labels),
        "refs": list(doc.refs),
        "cites": list(doc.cites),
        "environments": list(doc.environments),
        "sections": list(doc.sections),
    }


# ---------------------------------------------------------------- fuzz documents

_WORDS = ["alpha", "beta", "x", "result", "Figure~", "a_b", "{}", "}{", "$x$", "~", "-", ",", ".", "{ab}"]
_NAMES = ["fig:a", "fig:b", "tab:c", "fig:x_1", " fig:a ", "tab:c ", "k1", "k2"]


def _arg(rng: random.Random) -> str:
    return rng.choice(_NAMES + ["", " ", "a{b}c", "x\\}y", "p\\%q"])


def _fragment(rng: random.Random, in_float: bool) -> str:
    r = rng.random()
    if r < 0.30:
        return rng.choice(_WORDS)
    if r < 0.40:
        return f"\\label{{{_arg(rng)}}}"
    if r < 0.50:
        return f"\\ref{{{_arg(rng)}}}"
    if r < 0.57:
        keys = [rng.choice(["k1", "k2", " k3", "k:4 ", ""]) for _ in range(rng.randint(1, 3))]
        return f"\\cite{{{','.join(keys)}}}"
    if r < 0.62:
        body = rng.choice(["A caption.", "with {nested} braces", "label \\label{fig:q} inside"])
        return "\\caption{" + body + "}"
    if r < 0.68 and not in_float:
        return f"\\section{{{rng.choice(['Intro', 'Results', ' Method ', 'A {b} c'])}}}"
    if r < 0.72:
        return "% a comment \\label{fig:hidden}\n"
    if r < 0.76:
        return rng.choice(["\\%", "\\\\", "\\{", "\\}", "\\emph{x}", "\\label*{x}", "\\textbf {y}", "\\begin{center}x\\end{center}"])
    if r < 0.86:
        return rng.choice(["\n", "\n\n", "\n  \n", " "])
    if r < 0.93:
        return "{" + rng.choice(_WORDS) + "}"
    return rng.choice(["\\begin{itemize}", "\\end{itemize}", "\\ref {fig:a}", "\\sectionx{a}"])


def fuzz_document(rng: random.Random, size: int = 30) -> str:
    """A document inside the subset grammar: floats balanced and never nested."""
    parts = []
    for _ in range(rng.randint(0, size)):
        if rng.random() < 0.12:
            kind = rng.choice(["figure", "table"])
            inner = "".join(_fragment(rng, True) for _ in range(rng.randint(0, 5)))
            placement = rng.choice(["", "[t]", "[h!]"])
            parts.append(f"\\begin{{{kind}}}{placement}{inner}\\end{{{kind}}}")
        else:
            parts.append(_fragment(rng, False))
    return " ".join(parts) if rng.random() < 0.3 else "".join(parts)


_FLOAT_TOKEN = re.compile(r"\\(begin|end)\{(figure|table)\}")


def unbalanced_mutations(text: str, rng: random.Random) -> list[str]:
    """Variants of a balanced document that break float nesting."""
    out = []
    toks = [m for m in _FLOAT_TOKEN.finditer(text) if not _in_comment(text, m.start())]
    if toks:
        m = rng.choice(toks)
        out.append(text[:m.start()] + text[m.end():])  # drop one begin or end
        begins = [t for t in toks if t.group(1) == "begin"]
        if begins:
            b = rng.choice(begins)
            cut = text.find("}", b.end() - 1) + 1
            out.append(text[:cut] + "\\section{Inside}" + text[cut:])
            out.append(text[:cut] + f"\\begin{{{rng.choice(['figure', 'table'])}}}" + text[cut:])
            other = "table" if b.group(2) == "figure" else "figure"
            out.append(text[:cut] + f"\\end{{{other}}}" + text[cut:])
    out.append(text + "\n\\begin{figure}")
    out.append(text + "\n\\end{table}")
    return out


def _in_comment(text: str, pos: int) -> bool:
    line_start = text.rfind("\n", 0, pos) + 1
    line = text[line_start:pos]
    i = 0
    while i < len(line):
        if line[i] == "\\":
            i += 2
            continue
        if line[i] == "%":
            return True
        i += 1
    return False


# ---------------------------------------------------------------- validator oracle


@dataclass
class GeneratedCase:
    contract: ContractState
    latex: str
    labels: list[str]      # every \label written, in order
    env_labels: list[str]  # label of every float written
    refs: list[str]
    cites: list[str]


def _artifact(label: str, section: str) -> VisualArtifact:
    if label.startswith("fig:"):
        return VisualArtifact(ArtifactKind.FIGURE, label, f"Figure {label}", (section,))
    return VisualArtifact(ArtifactKind.TABLE, label, f"Table {label}", (section,), ("A",), (("1",),))


def random_case(rng: random.Random, max_registry: int = 8, max_doc: int = 8) -> GeneratedCase:
    pool = [f"fig:f{i}" for i in range(6)] + [f"tab:t{i}" for i in range(6)]
    sections = [("s1", "One"), ("s2", "Two")]
    c = declare_sections(new_contract(), sections)
    for label in rng.sample(pool, rng.randint(0, max_registry)):
        c = register_artifact(c, _artifact(label, rng.choice(["s1", "s2"])))
    keys = ["k1", "k2", "k3", "k4"]
    for k in rng.sample(keys, rng.randint(0, 3)):
        c = add_citation(c, k)

    labels, env_labels, refs, cites = [], [], [], []
    chunks = []
    for _ in range(rng.randint(0, max_doc)):
        r = rng.random()
        label = rng.choice(pool)
        if r < 0.35:
            kind = "figure" if label.startswith("fig:") else "table"
            chunks.append(f"\\begin{{{kind}}}[t]\n\\caption{{c}}\\label{{{label}}}\n\\end{{{kind}}}")
            labels.append(label)
            env_labels.append(label)
        elif r < 0.5:
            chunks.append(f"text \\label{{{label}}} text")
            labels.append(label)
        elif r < 0.85:
            chunks.append(f"see Figure~\\ref{{{label}}}.")
            refs.append(label)
        else:
            k = rng.choice(keys)
            chunks.append(f"as shown \\cite{{{k}}}.")
            cites.append(k)
    body = []
    for i, ch in enumerate(chunks):
        if i == 0:
            body.append("\\section{One}")
        if i == len(chunks) // 2 and i:
            body.append("\\section{Two}")
        body.append(ch)
    if len(chunks) < 2:
        body.append("\\section{One}" if not chunks else "")
        body.append("\\section{Two}")
    latex = "\n\n".join(b for b in body if b) + "\n"
    return GeneratedCase(c, latex, labels, env_labels, refs, cites)


def oracle_violations(case: GeneratedCase) -> Counter:
    """Baseline-rule violations by set difference over the generation ground truth."""
    out: Counter = Counter()
    counts = Counter(case.labels)
    for label, n in counts.items():
        if n > 1:
            out[("LabelUnique", label)] += 1
    defined = set(case.labels)
    for r in case.refs:
        if r not in defined:
            out[("RefResolves", r)] += 1
    for k in case.cites:
        if k not in case.contract.citations:
            out[("CiteResolves", k)] += 1
    placed = Counter(case.env_labels)
    for label in case.contract.registry:
        if placed[label] != 1:
            out[("ArtifactPlacedOnce", label)] += 1
    return out


# ---------------------------------------------------------------- numbers

_DECIMAL_ORACLE = re.compile(r"-?\d+\.\d+")


def oracle_decimals(text: str) -> set[Decimal]:
    """Every decimal literal in prose, markers stripped, normalized to 6 places."""
    text = re.sub(r"\[\[[^\[\]]*\]\]", " ", text)
    found = set()
    for tok in re.findall(r"[^\s,;()]+", text):
        tok = tok.rstrip(".:!?")
        if _DECIMAL_ORACLE.fullmatch(tok):
            found.add(Decimal(tok).quantize(Decimal("0.000001")).normalize())
    return found
