"""The shared visual contract.

A :class:`ContractState` is an immutable value. Every operation returns a new
state, bumps ``version`` by one per effective change and appends a
:class:`LogRecord` to ``update_log``. Folding the log over :func:`new_contract`
(:func:`replay`) reproduces the state exactly, which is also how serialized
contracts are loaded back.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Any, Iterable, Mapping, Sequence

from .errors import InputError, ViolationError
from .grammar import KIND_PREFIX, is_cite_key, is_label, label_kind


class ContractError(ViolationError):
    pass


class DuplicateLabel(ContractError):
    pass


class MalformedLabel(ContractError):
    pass


class UnknownLabel(ContractError):
    pass


class UnknownTarget(ContractError):
    pass


class ContractLoadError(InputError):
    pass


class ArtifactKind(str, Enum):
    FIGURE = "figure"
    TABLE = "table"


class Severity(str, Enum):
    ERROR = "error"
    WARNING = "warning"


class RuleKind(str, Enum):
    LABEL_UNIQUE = "LabelUnique"
    REF_RESOLVES = "RefResolves"
    CITE_RESOLVES = "CiteResolves"
    ARTIFACT_PLACED_ONCE = "ArtifactPlacedOnce"
    ARTIFACT_EXPLAINED = "ArtifactExplained"
    SECTION_ORDER = "SectionOrderMatchesBlueprint"


BASELINE_RULES = (
    RuleKind.LABEL_UNIQUE,
    RuleKind.REF_RESOLVES,
    RuleKind.CITE_RESOLVES,
    RuleKind.ARTIFACT_PLACED_ONCE,
)


class DeltaAction(str, Enum):
    # declaration order is the canonical application order
    ADD_RULE = "AddRule"
    REQUIRE_EXPLANATION = "RequireExplanation"
    ADD_OBLIGATION = "AddObligation"
    ADJUST_PLACEMENT = "AdjustPlacement"


_ACTION_RANK = {a: i for i, a in enumerate(DeltaAction)}


def canonical_json(obj: Any) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), ensure_ascii=False)


def _freeze(value: Any) -> Any:
    if isinstance(value, (list, tuple)):
        return tuple(_freeze(v) for v in value)
    return value


def _thaw(value: Any) -> Any:
    if isinstance(value, tuple):
        return [_thaw(v) for v in value]
    return value


@dataclass(frozen=True)
class VisualArtifact:
    kind: ArtifactKind
    label: str
    description: str
    expected_sections: tuple[str, ...]
    # tables: header row + data rows; figures: placeholder token
    header: tuple[str, ...] = ()
    rows: tuple[tuple[str, ...], ...] = ()
    placeholder: str = ""

    def check(self) -> None:
        if not is_label(self.label):
            raise MalformedLabel(f"label {self.label!r} does not match (fig|tab):[a-z0-9_]+")
        if label_kind(self.label) != self.kind.value:
            raise MalformedLabel(
                f"label {self.label!r} must start with {KIND_PREFIX[self.kind.value]}: for a {self.kind.value}"
            )
        if not self.expected_sections:
            raise ContractError(f"artifact {self.label} has no expected sections")
        if self.kind is ArtifactKind.TABLE:
            if not self.header:
                raise ContractError(f"table {self.label} has no header row")
            for i, row in enumerate(self.rows):
                if len(row) != len(self.header):
                    raise ContractError(
                        f"table {self.label} row {i} has {len(row)} cells, header has {len(self.header)}"
                    )

    def to_dict(self) -> dict:
        d = {
            "kind": self.kind.value,
            "label": self.label,
            "description": self.description,
            "expected_sections": list(self.expected_sections),
        }
        if self.kind is ArtifactKind.TABLE:
            d["header"] = list(self.header)
            d["rows"] = [list(r) for r in self.rows]
        else:
            d["placeholder"] = self.placeholder
        return d

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> "VisualArtifact":
        return cls(
            kind=ArtifactKind(d["kind"]),
            label=d["label"],
            description=d.get("description", ""),
            expected_sections=tuple(d.get("expected_sections", ())),
            header=tuple(d.get("header", ())),
            rows=tuple(tuple(r) for r in d.get("rows", ())),
            placeholder=d.get("placeholder", ""),
        )


@dataclass(frozen=True)
class ObligationSet:
    section_id: str
    required_artifacts: tuple[str, ...] = ()
    required_citations: tuple[str, ...] = ()
    required_explanations: tuple[str, ...] = ()

    def is_empty(self) -> bool:
        return not (self.required_artifacts or self.required_citations or self.required_explanations)

    def to_dict(self) -> dict:
        return {
            "section_id": self.section_id,
            "required_artifacts": list(self.required_artifacts),
            "required_citations": list(self.required_citations),
            "required_explanations": list(self.required_explanations),
        }


@dataclass(frozen=True)
class ValidationRule:
    kind: RuleKind
    params: tuple[tuple[str, Any], ...] = ()
    severity: Severity = Severity.ERROR

    @classmethod
    def make(cls, kind: RuleKind | str, params: Mapping[str, Any] | None = None,
             severity: Severity | str = Severity.ERROR) -> "ValidationRule":
        items = tuple(sorted((k, _freeze(v)) for k, v in (params or {}).items()))
        return cls(RuleKind(kind), items, Severity(severity))

    @property
    def canonical_key(self) -> str:
        if not self.params:
            return self.kind.value
        return f"{self.kind.value}{canonical_json(self.param_dict())}"

    def param_dict(self) -> dict:
        return {k: _thaw(v) for k, v in self.params}

    def param(self, name: str, default: Any = None) -> Any:
        return _thaw(dict(self.params).get(name, default))

    def to_dict(self) -> dict:
        return {"kind": self.kind.value, "params": self.param_dict(), "severity": self.severity.value}


@dataclass(frozen=True)
class ContractDelta:
    action: DeltaAction
    payload: tuple[tuple[str, Any], ...]
    origin: str = ""

    @classmethod
    def make(cls, action: DeltaAction | str, payload: Mapping[str, Any], origin: str = "") -> "ContractDelta":
        items = tuple(sorted((k, _freeze(v)) for k, v in payload.items()))
        return cls(DeltaAction(action), items, origin)

    @property
    def canonical_key(self) -> str:
        # origin is deliberately not part of the key
        return f"{self.action.value}:{canonical_json(self.payload_dict())}"

    def payload_dict(self) -> dict:
        return {k: _thaw(v) for k, v in self.payload}

    def to_dict(self) -> dict:
        return {"action": self.action.value, "payload": self.payload_dict(), "origin": self.origin}

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> "ContractDelta":
        return cls.make(d["action"], d.get("payload", {}), d.get("origin", ""))


@dataclass(frozen=True)
class SectionRef:
    section_id: str
    title: str


@dataclass(frozen=True)
class LogRecord:
    version: int
    action: str
    payload: Mapping[str, Any]
    origin: str = ""
    note: str = ""

    def to_dict(self) -> dict:
        d = {"version": self.version, "action": self.action, "payload": dict(self.payload), "origin": self.origin}
        if self.note:
            d["note"] = self.note
        return d

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> "LogRecord":
        return cls(int(d["version"]), d["action"], dict(d["payload"]), d.get("origin", ""), d.get("note", ""))


@dataclass(frozen=True)
class ContractState:
    version: int = 0
    registry: Mapping[str, VisualArtifact] = field(default_factory=dict)
    obligations: Mapping[str, ObligationSet] = field(default_factory=dict)
    rules: Mapping[str, ValidationRule] = field(default_factory=dict)
    citations: frozenset[str] = frozenset()
    sections: tuple[SectionRef, ...] = ()
    update_log: tuple[LogRecord, ...] = ()

    __hash__ = None  # type: ignore[assignment]

    def section_ids(self) -> list[str]:
        return [s.section_id for s in self.sections]

    def known_sections(self) -> set[str]:
        known = set(self.section_ids()) | set(self.obligations)
        for art in self.registry.values():
            known.update(art.expected_sections)
        return known

    def has_rule(self, kind: RuleKind, **params: Any) -> bool:
        return ValidationRule.make(kind, params).canonical_key in self.rules

    def to_dict(self) -> dict:
        return {
            "version": self.version,
            "registry": {k: a.to_dict() for k, a in self.registry.items()},
            "obligations": {k: o.to_dict() for k, o in sorted(self.obligations.items())},
            "rules": [r.to_dict() for _, r in sorted(self.rules.items())],
            "citations": sorted(self.citations),
            "sections": [[s.section_id, s.title] for s in self.sections],
            "update_log": [r.to_dict() for r in self.update_log],
        }


def new_contract() -> ContractState:
    rules = {ValidationRule.make(k).canonical_key: ValidationRule.make(k) for k in BASELINE_RULES}
    return ContractState(rules=dict(sorted(rules.items())))


def home_section(c: ContractState, label: str) -> str | None:
    """The section an artifact belongs to: first obligating section, else its first expected one."""
    order = {sid: i for i, sid in enumerate(c.section_ids())}
    obligated = [s for s, ob in c.obligations.items() if label in ob.required_artifacts]
    if obligated:
        return min(obligated, key=lambda s: (order.get(s, len(order)), s))
    art = c.registry.get(label)
    if art is not None:
        return art.expected_sections[0]
    return None


def explanation_sections(c: ContractState, label: str) -> list[str]:
    """Sections whose obligations demand an explanation of ``label``, in declared order."""
    order = {sid: i for i, sid in enumerate(c.section_ids())}
    found = [s for s, ob in c.obligations.items() if label in ob.required_explanations]
    return sorted(found, key=lambda s: (order.get(s, len(order)), s))


# ---------------------------------------------------------------- transitions
#
# Each _apply_* returns the new state (without version/log bookkeeping), or the
# same object when the change would be a no-op.


def _with_obligation(c: ContractState, ob: ObligationSet) -> ContractState:
    obs = dict(c.obligations)
    if ob.is_empty():
        obs.pop(ob.section_id, None)
    else:
        obs[ob.section_id] = ob
    return replace(c, obligations=dict(sorted(obs.items())))


def _obligation(c: ContractState, section: str) -> ObligationSet:
    return c.obligations.get(section) or ObligationSet(section)


def _apply_register(c: ContractState, p: Mapping[str, Any]) -> ContractState:
    art = VisualArtifact.from_dict(p)
    art.check()
    if art.label in c.registry:
        raise DuplicateLabel(f"label {art.label} is already registered")
    reg = dict(c.registry)
    reg[art.label] = art
    return replace(c, registry=dict(sorted(reg.items())))


def _apply_bind(c: ContractState, p: Mapping[str, Any]) -> ContractState:
    section, label = p["section"], p["label"]
    if label not in c.registry:
        raise UnknownLabel(f"cannot bind unregistered label {label}")
    ob = _obligation(c, section)
    if label in ob.required_artifacts:
        return c
    return _with_obligation(c, replace(ob, required_artifacts=ob.required_artifacts + (label,)))


def _apply_citation(c: ContractState, p: Mapping[str, Any]) -> ContractState:
    key = p["key"]
    if not is_cite_key(key):
        raise ContractError(f"cite key {key!r} violates the cite-key grammar")
    if key in c.citations:
        return c
    return replace(c, citations=c.citations | {key})


def _apply_sections(c: ContractState, p: Mapping[str, Any]) -> ContractState:
    secs = tuple(SectionRef(sid, title) for sid, title in p["sections"])
    ids = [s.section_id for s in secs]
    if len(set(ids)) != len(ids):
        raise ContractError("duplicate section ids")
    if secs == c.sections:
        return c
    return replace(c, sections=secs)


def _apply_add_rule(c: ContractState, p: Mapping[str, Any]) -> ContractState:
    rule = ValidationRule.make(p["kind"], p.get("params", {}), p.get("severity", "error"))
    if rule.kind is RuleKind.ARTIFACT_EXPLAINED and rule.param("label") not in c.registry:
        raise UnknownTarget(f"ArtifactExplained targets unregistered label {rule.param('label')!r}")
    if rule.kind is RuleKind.SECTION_ORDER:
        unknown = [s for s in rule.param("order", []) if s not in c.known_sections()]
        if unknown:
            raise UnknownTarget(f"section order names unknown sections {unknown}")
    if rule.canonical_key in c.rules:
        return c
    rules = dict(c.rules)
    rules[rule.canonical_key] = rule
    return replace(c, rules=dict(sorted(rules.items())))


def _apply_require_explanation(c: ContractState, p: Mapping[str, Any]) -> ContractState:
    label = p["label"]
    if label not in c.registry:
        raise UnknownTarget(f"RequireExplanation targets unregistered label {label!r}")
    out = _apply_add_rule(c, {"kind": RuleKind.ARTIFACT_EXPLAINED.value, "params": {"label": label}})
    if explanation_sections(out, label):
        # already demanded somewhere; re-homing it would break idempotence
        return out
    home = home_section(out, label)
    ob = _obligation(out, home)
    if label not in ob.required_explanations:
        out = _with_obligation(out, replace(ob, required_explanations=ob.required_explanations + (label,)))
    return out


def _apply_add_obligation(c: ContractState, p: Mapping[str, Any]) -> ContractState:
    section = p["section"]
    if section not in c.known_sections():
        raise UnknownTarget(f"AddObligation targets unknown section {section!r}")
    if "label" in p:
        if p["label"] not in c.registry:
            raise UnknownTarget(f"AddObligation targets unregistered label {p['label']!r}")
        return _apply_bind(c, p)
    key = p["citation"]
    if key not in c.citations:
        raise UnknownTarget(f"AddObligation targets unknown citation {key!r}")
    ob = _obligation(c, section)
    if key in ob.required_citations:
        return c
    return _with_obligation(c, replace(ob, required_citations=ob.required_citations + (key,)))


def _apply_adjust_placement(c: ContractState, p: Mapping[str, Any]) -> ContractState:
    label, section = p["label"], p["section"]
    if label not in c.registry:
        raise UnknownTarget(f"AdjustPlacement targets unregistered label {label!r}")
    if section not in c.known_sections():
        raise UnknownTarget(f"AdjustPlacement targets unknown section {section!r}")
    explained = any(label in ob.required_explanations for ob in c.obligations.values())
    out = c
    for sid, ob in c.obligations.items():
        if sid == section:
            continue
        if label in ob.required_artifacts or label in ob.required_explanations:
            out = _with_obligation(out, replace(
                ob,
                required_artifacts=tuple(x for x in ob.required_artifacts if x != label),
                required_explanations=tuple(x for x in ob.required_explanations if x != label),
            ))
    ob = _obligation(out, section)
    if label not in ob.required_artifacts:
        ob = replace(ob, required_artifacts=ob.required_artifacts + (label,))
    if explained and label not in ob.required_explanations:
        ob = replace(ob, required_explanations=ob.required_explanations + (label,))
    out = _with_obligation(out, ob)
    art = out.registry[label]
    if art.expected_sections != (section,):
        reg = dict(out.registry)
        reg[label] = replace(art, expected_sections=(section,))
        out = replace(out, registry=reg)
    return out if out != c else c


_TRANSITIONS = {
    "RegisterArtifact": _apply_register,
    "BindObligation": _apply_bind,
    "AddCitation": _apply_citation,
    "DeclareSections": _apply_sections,
    DeltaAction.ADD_RULE.value: _apply_add_rule,
    DeltaAction.REQUIRE_EXPLANATION.value: _apply_require_explanation,
    DeltaAction.ADD_OBLIGATION.value: _apply_add_obligation,
    DeltaAction.ADJUST_PLACEMENT.value: _apply_adjust_placement,
}


def _commit(c: ContractState, action: str, payload: Mapping[str, Any], origin: str = "",
            note: str = "") -> ContractState:
    """Apply one transition; bump version and log it only when the state changed."""
    out = _TRANSITIONS[action](c, payload)
    if out is c or out == c:
        return c
    version = c.version + 1
    rec = LogRecord(version, action, json.loads(canonical_json(dict(payload))), origin, note)
    return replace(out, version=version, update_log=c.update_log + (rec,))


# ---------------------------------------------------------------- public ops


def register_artifact(c: ContractState, a: VisualArtifact, origin: str = "") -> ContractState:
    a.check()
    if a.label in c.registry:
        raise DuplicateLabel(f"label {a.label} is already registered")
    return _commit(c, "RegisterArtifact", a.to_dict(), origin)


def bind_obligation(c: ContractState, section_id: str, label: str, origin: str = "") -> ContractState:
    return _commit(c, "BindObligation", {"section": section_id, "label": label}, origin)


def add_citation(c: ContractState, key: str, origin: str = "") -> ContractState:
    return _commit(c, "AddCitation", {"key": key}, origin)


def declare_sections(c: ContractState, sections: Sequence[tuple[str, str]], origin: str = "") -> ContractState:
    return _commit(c, "DeclareSections", {"sections": [[sid, title] for sid, title in sections]}, origin)


def add_rule(c: ContractState, rule: ValidationRule, origin: str = "") -> ContractState:
    return _commit(c, DeltaAction.ADD_RULE.value, rule.to_dict(), origin)


def _check_target(c: ContractState, d: ContractDelta) -> None:
    p = d.payload_dict()
    label = p.get("label")
    if d.action is DeltaAction.ADD_RULE:
        label = p.get("params", {}).get("label")
    if label is not None and label not in c.registry:
        raise UnknownTarget(f"{d.action.value} from {d.origin or '?'} targets unregistered label {label!r}")
    section = p.get("section")
    if section is not None and section not in c.known_sections():
        raise UnknownTarget(f"{d.action.value} from {d.origin or '?'} targets unknown section {section!r}")


def apply_deltas(c: ContractState, deltas: Iterable[ContractDelta]) -> ContractState:
    """Deduplicate by canonical key, sort canonically, resolve conflicts and apply."""
    # duplicates collapse onto the smallest origin so the result depends only on the delta set
    unique: dict[str, ContractDelta] = {}
    for d in deltas:
        prev = unique.get(d.canonical_key)
        if prev is None or d.origin < prev.origin:
            unique[d.canonical_key] = d
    ordered = sorted(unique.values(), key=lambda d: (_ACTION_RANK[d.action], d.canonical_key))
    for d in ordered:
        _check_target(c, d)

    # conflicting placements: last in canonical order wins, losers are noted
    placements: dict[str, list[ContractDelta]] = {}
    for d in ordered:
        if d.action is DeltaAction.ADJUST_PLACEMENT:
            placements.setdefault(d.payload_dict()["label"], []).append(d)
    superseded: set[int] = set()
    notes: dict[int, str] = {}
    for label, group in placements.items():
        winner = group[-1]
        target = winner.payload_dict()["section"]
        losers = group[:-1] + [
            d for d in ordered
            if d.action is DeltaAction.ADD_OBLIGATION
            and d.payload_dict().get("label") == label
            and d.payload_dict()["section"] != target
        ]
        superseded.update(id(d) for d in losers)
        if losers:
            notes[id(winner)] = "conflict: overrides " + ", ".join(
                f"{d.action.value}->{d.payload_dict()['section']}" for d in losers
            )

    out = c
    for d in ordered:
        if id(d) in superseded:
            continue
        out = _commit(out, d.action.value, d.payload_dict(), d.origin, notes.get(id(d), ""))
    return out


def update_contract(c: ContractState, feedback: Iterable[Any]) -> ContractState:
    """Fold every delta proposed by ``feedback`` signals into the contract."""
    deltas = [d for sig in feedback for d in sig.deltas]
    return apply_deltas(c, deltas)


def replay(records: Iterable[LogRecord | Mapping[str, Any]], base: ContractState | None = None) -> ContractState:
    out = base if base is not None else new_contract()
    for rec in records:
        if not isinstance(rec, LogRecord):
            rec = LogRecord.from_dict(rec)
        if rec.action not in _TRANSITIONS:
            raise ContractLoadError(f"unknown log action {rec.action!r}")
        nxt = _commit(out, rec.action, rec.payload, rec.origin, rec.note)
        if nxt.version != rec.version:
            raise ContractLoadError(
                f"log record {rec.version} ({rec.action}) does not change the state it is applied to"
            )
        out = nxt
    return out


# ---------------------------------------------------------------- serialization


def dumps_contract(c: ContractState) -> str:
    return json.dumps(c.to_dict(), sort_keys=True, indent=2, ensure_ascii=False) + "\n"


def dumps_journal(c: ContractState) -> str:
    return "".join(canonical_json(r.to_dict()) + "\n" for r in c.update_log)


def loads_journal(text: str) -> list[LogRecord]:
    records = []
    for n, line in enumerate(text.splitlines(), 1):
        if not line.strip():
            continue
        try:
            records.append(LogRecord.from_dict(json.loads(line)))
        except (ValueError, KeyError, TypeError) as exc:
            raise ContractLoadError(f"journal line {n}: {exc}") from exc
    return records


def loads_contract(text: str) -> ContractState:
    """Parse a serialized contract; its log is replayed and must reproduce the stated fields."""
    try:
        data = json.loads(text)
        log = [LogRecord.from_dict(r) for r in data["update_log"]]
    except (ValueError, KeyError, TypeError) as exc:
        raise ContractLoadError(f"malformed contract: {exc}") from exc
    try:
        state = replay(log)
    except (ContractError, KeyError, TypeError, ValueError) as exc:
        raise ContractLoadError(f"contract log does not replay: {exc}") from exc
    if canonical_json(state.to_dict()) != canonical_json(data):
        raise ContractLoadError("contract fields disagree with the replayed update log")
    return state


def audit(c: ContractState) -> list[str]:
    """Global invariant check; returns human-readable breaches (empty when sound)."""
    problems = []
    if list(c.registry) != sorted(c.registry):
        problems.append("registry is not in lexicographic label order")
    for label, art in c.registry.items():
        if label != art.label:
            problems.append(f"registry key {label} holds artifact {art.label}")
        try:
            art.check()
        except ContractError as exc:
            problems.append(str(exc))
    for sid, ob in c.obligations.items():
        if sid != ob.section_id:
            problems.append(f"obligation key {sid} holds section {ob.section_id}")
        if len(set(ob.required_artifacts)) != len(ob.required_artifacts):
            problems.append(f"duplicate required artifacts in {sid}")
        for label in ob.required_artifacts + ob.required_explanations:
            if label not in c.registry:
                problems.append(f"section {sid} references unregistered {label}")
        for key in ob.required_citations:
            if key not in c.citations:
                problems.append(f"section {sid} requires unknown citation {key}")
    for kind in BASELINE_RULES:
        if kind.value not in c.rules:
            problems.append(f"baseline rule {kind.value} missing")
    for key, rule in c.rules.items():
        if key != rule.canonical_key:
            problems.append(f"rule stored under {key} has key {rule.canonical_key}")
    if len(c.update_log) != c.version:
        problems.append(f"version {c.version} but {len(c.update_log)} log records")
    if [r.version for r in c.update_log] != list(range(1, len(c.update_log) + 1)):
        problems.append("log versions are not 1..n")
    return problems
