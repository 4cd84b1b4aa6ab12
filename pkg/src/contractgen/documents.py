"""Blueprint, section, draft and manuscript values passed between stages."""

from __future__ import annotations

from dataclasses import dataclass

from .contract import VisualArtifact
from .grammar import Marker, find_markers


@dataclass(frozen=True)
class SectionSpec:
    section_id: str
    title: str
    order_index: int
    outline: tuple[str, ...] = ()
    evidence_links: tuple[str, ...] = ()
    bound_artifacts: tuple[str, ...] = ()

    def to_dict(self) -> dict:
        return {
            "id": self.section_id,
            "title": self.title,
            "order_index": self.order_index,
            "outline": list(self.outline),
            "evidence_links": list(self.evidence_links),
            "bound_artifacts": list(self.bound_artifacts),
        }


@dataclass(frozen=True)
class Blueprint:
    sections: tuple[SectionSpec, ...]
    artifact_proposals: tuple[VisualArtifact, ...] = ()
    citation_proposals: tuple[str, ...] = ()

    def section(self, section_id: str) -> SectionSpec:
        for s in self.sections:
            if s.section_id == section_id:
                return s
        raise KeyError(section_id)


@dataclass(frozen=True)
class Draft:
    section_id: str
    text: str

    @property
    def markers(self) -> list[Marker]:
        # always a fresh scan, so it can never go stale
        return find_markers(self.text)


@dataclass(frozen=True)
class Manuscript:
    title: str
    sections: tuple[tuple[SectionSpec, str], ...]
    contract_version_at_freeze: int = 0
    rendered: bytes | None = None

    def drafts(self) -> list[Draft]:
        return [Draft(spec.section_id, text) for spec, text in self.sections]
