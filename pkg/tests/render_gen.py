"""Random manuscripts over a random registry, with ground truth for placement."""

from __future__ import annotations

import random
from dataclasses import dataclass

from contractgen.contract import ArtifactKind, ContractState, VisualArtifact, declare_sections, new_contract, register_artifact
from contractgen.documents import Manuscript, SectionSpec

_WORDS = ["the", "model", "improves", "50%", "a & b", "#1", "result", "under", "load", "x_1"]


@dataclass
class RenderCase:
    manuscript: Manuscript
    contract: ContractState
    registry: list[str]
    marked: list[str]  # labels in order of first marker


def random_render_case(rng: random.Random, max_artifacts: int = 10, drop_rate: float = 0.0) -> RenderCase:
    n_sections = rng.randint(1, 3)
    sections = [(f"s{i}", f"Section {i}") for i in range(n_sections)]
    c = declare_sections(new_contract(), sections)
    registry = []
    for i in range(rng.randint(0, max_artifacts)):
        fig = rng.random() < 0.5
        label = f"fig:g{i}" if fig else f"tab:g{i}"
        home = rng.choice(sections)[0]
        if fig:
            art = VisualArtifact(ArtifactKind.FIGURE, label, f"Figure {i} & more", (home,))
        else:
            art = VisualArtifact(ArtifactKind.TABLE, label, f"Table {i}", (home,), ("a", "b"), (("1", "2_x"),))
        c = register_artifact(c, art)
        registry.append(label)

    keep = [lab for lab in registry if rng.random() >= drop_rate]
    tokens = []
    for lab in keep:
        tokens += [lab] * rng.randint(1, 3)
    rng.shuffle(tokens)

    # scatter markers over paragraphs of the sections
    slots: list[list[list[str]]] = [[[] for _ in range(rng.randint(1, 3))] for _ in sections]
    for lab in tokens:
        rng.choice(rng.choice(slots)).append(lab)
    texts, marked = [], []
    for paras in slots:
        out = []
        for labs in paras:
            words = [rng.choice(_WORDS) for _ in range(rng.randint(0, 6))]
            for lab in labs:
                tag = "FIG" if lab.startswith("fig:") else "TAB"
                words.insert(rng.randint(0, len(words)), f"[[{tag}:{lab}]]")
            # recompute first-marker order from the final word order
            for w in words:
                if w.startswith("[[") and w[6:-2] not in marked:
                    marked.append(w[6:-2])
            out.append(" ".join(words) or "filler")
        texts.append("\n\n".join(out))
    specs = tuple((SectionSpec(sid, title, i), text) for i, ((sid, title), text) in enumerate(zip(sections, texts)))
    return RenderCase(Manuscript("Generated", specs), c, registry, marked)
