"""Research story input: schema-checked JSON parsing and evidence number extraction."""

from __future__ import annotations

import json
from dataclasses import dataclass
from decimal import ROUND_HALF_EVEN, Decimal, InvalidOperation
from functools import lru_cache
from importlib import resources
from typing import Any, Iterable

import jsonschema

from .errors import InputError

SCHEMA_VERSION = 1
REQUIRED_TAGS = ("motivation", "method")
NARRATIVE_TAGS = ("motivation", "method", "results", "context")
_SIX_PLACES = Decimal("0.000001")


class StoryError(InputError):
    pass


class SchemaError(StoryError):
    def __init__(self, message: str, path: str = "$"):
        super().__init__(f"{path}: {message}")
        self.path = path


class CompletenessError(StoryError):
    def __init__(self, missing: Iterable[str]):
        self.missing = tuple(missing)
        super().__init__("story lacks narrative blocks tagged " + ", ".join(repr(t) for t in self.missing))


class DuplicateKey(StoryError):
    def __init__(self, key: str, path: str):
        super().__init__(f"{path}: duplicate key {key!r}")
        self.key = key
        self.path = path


@dataclass(frozen=True)
class NarrativeBlock:
    tag: str
    body: str


@dataclass(frozen=True)
class EvidenceRecord:
    id: str
    kind: str  # measurement_table | claim
    header: tuple[str, ...] = ()
    rows: tuple[tuple[str, ...], ...] = ()
    statement: str = ""
    values: tuple[Decimal, ...] = ()

    def to_dict(self) -> dict:
        if self.kind == "measurement_table":
            return {"id": self.id, "kind": self.kind, "header": list(self.header), "rows": [list(r) for r in self.rows]}
        return {"id": self.id, "kind": self.kind, "statement": self.statement, "values": list(self.values)}


@dataclass(frozen=True)
class ReferenceEntry:
    key: str
    text: str


@dataclass(frozen=True)
class ResearchStory:
    id: str
    title: str
    narrative: tuple[NarrativeBlock, ...]
    evidence: tuple[EvidenceRecord, ...] = ()
    references: tuple[ReferenceEntry, ...] = ()

    def evidence_by_id(self) -> dict[str, EvidenceRecord]:
        return {e.id: e for e in self.evidence}

    def reference_keys(self) -> list[str]:
        return [r.key for r in self.references]

    def to_dict(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "id": self.id,
            "title": self.title,
            "narrative": [{"tag": b.tag, "body": b.body} for b in self.narrative],
            "evidence": [e.to_dict() for e in self.evidence],
            "references": [{"key": r.key, "text": r.text} for r in self.references],
        }


@lru_cache(maxsize=None)
def story_schema() -> dict:
    return json.loads(resources.files("contractgen").joinpath("schemas/story.schema.json").read_text("utf-8"))


def _json_path(parts: Iterable[Any]) -> str:
    out = "$"
    for p in parts:
        out += f"[{p}]" if isinstance(p, int) else f".{p}"
    return out


def _as_number(cell: str) -> Decimal | None:
    try:
        d = Decimal(cell.strip())
    except InvalidOperation:
        return None
    return d if d.is_finite() else None


def _canonical(d: Decimal) -> Decimal:
    return d.quantize(_SIX_PLACES, rounding=ROUND_HALF_EVEN).normalize()


def parse_story(data: bytes | str) -> ResearchStory:
    """Parse and validate a ``schema_version: 1`` story document."""
    try:
        raw = json.loads(data, parse_float=Decimal)
    except (ValueError, UnicodeDecodeError) as exc:
        raise SchemaError(f"not valid UTF-8 JSON ({exc})") from exc

    validator = jsonschema.Draft202012Validator(story_schema())
    errors = sorted(validator.iter_errors(raw), key=lambda e: (list(e.absolute_path), e.message))
    if errors:
        err = jsonschema.exceptions.best_match(errors)
        raise SchemaError(err.message, _json_path(err.absolute_path))

    seen: dict[str, str] = {}
    for i, ref in enumerate(raw["references"]):
        if ref["key"] in seen:
            raise DuplicateKey(ref["key"], f"$.references[{i}].key")
        seen[ref["key"]] = ref["text"]
    ids: set[str] = set()
    evidence = []
    for i, ev in enumerate(raw["evidence"]):
        if ev["id"] in ids:
            raise DuplicateKey(ev["id"], f"$.evidence[{i}].id")
        ids.add(ev["id"])
        if ev["kind"] == "measurement_table":
            header = tuple(ev["header"])
            for j, row in enumerate(ev["rows"]):
                if len(row) != len(header):
                    raise SchemaError(f"row has {len(row)} cells, header has {len(header)}", f"$.evidence[{i}].rows[{j}]")
            evidence.append(EvidenceRecord(ev["id"], ev["kind"], header, tuple(tuple(r) for r in ev["rows"])))
        else:
            values = tuple(Decimal(v) for v in ev["values"])
            evidence.append(EvidenceRecord(ev["id"], ev["kind"], statement=ev["statement"], values=values))

    narrative = tuple(NarrativeBlock(b["tag"], b["body"]) for b in raw["narrative"])
    present = {b.tag for b in narrative}
    missing = [t for t in REQUIRED_TAGS if t not in present]
    if missing:
        raise CompletenessError(missing)

    return ResearchStory(
        id=raw["id"],
        title=raw["title"],
        narrative=narrative,
        evidence=tuple(evidence),
        references=tuple(ReferenceEntry(r["key"], r["text"]) for r in raw["references"]),
    )


def _default(obj: Any) -> Any:
    if isinstance(obj, Decimal):
        return int(obj) if obj == obj.to_integral_value() and obj.as_tuple().exponent >= 0 else float(obj)
    raise TypeError(f"{type(obj).__name__} is not JSON serializable")


def serialize_story(story: ResearchStory) -> bytes:
    """Inverse of :func:`parse_story` for values with at most 15 significant digits."""
    return (json.dumps(story.to_dict(), indent=2, ensure_ascii=False, default=_default) + "\n").encode("utf-8")


def extract_numbers(story: ResearchStory) -> frozenset[Decimal]:
    """Every numeric value carried by structured evidence, rounded to 6 places.

    Table cells count when they parse as finite decimals; prose is never mined.
    """
    out: set[Decimal] = set()
    for ev in story.evidence:
        if ev.kind == "measurement_table":
            for row in ev.rows:
                for cell in row:
                    d = _as_number(cell)
                    if d is not None:
                        out.add(_canonical(d))
        else:
            out.update(_canonical(v) for v in ev.values)
    return frozenset(out)


def canonical_number(d: Decimal) -> Decimal:
    return _canonical(d)


STORY_TEMPLATE = {
    "_comment": "Research story template. Keys starting with '_' are ignored by the parser.",
    "schema_version": 1,
    "id": "my-story",
    "title": "Working title of the manuscript",
    "narrative": [
        {"_comment": "tags: motivation, method, results, context; motivation and method are required",
         "tag": "motivation", "body": "Why the problem matters."},
        {"tag": "method", "body": "What was built and how it works."},
        {"tag": "results", "body": "What the experiments showed."},
    ],
    "evidence": [
        {"_comment": "numeric cells are the only numbers a draft may quote",
         "id": "main_results", "kind": "measurement_table",
         "header": ["setting", "score"], "rows": [["baseline", "3.963"], ["ours", "6.145"]]},
        {"id": "headline", "kind": "claim", "statement": "Ours improves on the baseline.", "values": [2.182]},
    ],
    "references": [
        {"_comment": "cite keys referenced by [[CITE:key]] markers", "key": "smith2024", "text": "A. Smith. Prior work. 2024."},
    ],
}


def story_template() -> str:
    return json.dumps(STORY_TEMPLATE, indent=2) + "\n"
