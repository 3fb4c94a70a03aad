"""Security-event concept hierarchy.

Concepts form a DAG rooted at ``security_event`` and act as the shared
vocabulary between labeling algorithms and human operators.  The file
format is deliberately small: one ``concept`` line per concept, optional
``attr`` continuation lines, ``#`` comments (full line only, so templates
may contain ``#``), blank lines ignored::

    concept theft : security_event | label="theft" | template="..."
    concept abandoned_object : security_event | label="abandoned object"
    attr zone:text

The first segment after the colon is the comma-separated parent list
(empty for the root).  Templates substitute ``{camera}``, ``{confidence}``,
``{time}``, ``{label}`` plus any attribute declared on the concept.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from datetime import datetime, timezone
from importlib import resources

ROOT_ID = "security_event"
FIXED_PLACEHOLDERS = frozenset({"camera", "confidence", "time", "label"})
ATTRIBUTE_KINDS = ("text", "number", "flag")
DEFAULT_TEMPLATE = "{label} detected by camera {camera} (confidence {confidence})"

_ID_RE = re.compile(r"^[a-z0-9_]+$")
_CONCEPT_RE = re.compile(r"^concept\s+(\S+)\s*:\s*(.*)$")
_ATTR_RE = re.compile(r"^attr\s+([a-z0-9_]+)\s*:\s*(\S+)\s*$")
_FIELD_RE = re.compile(r'^(label|template)\s*=\s*"([^"]*)"$')
_PLACEHOLDER_RE = re.compile(r"\{([^{}]*)\}")


class OntologyError(Exception):
    """Base for every ontology loading/query failure."""


class OntologySyntaxError(OntologyError):
    def __init__(self, message: str, line: int = 0):
        super().__init__(f"line {line}: {message}" if line else message)
        self.line = line


class DuplicateIdError(OntologyError):
    def __init__(self, concept_id: str, line: int = 0):
        super().__init__(f"duplicate concept id {concept_id!r} (line {line})")
        self.concept_id = concept_id


class DanglingParentError(OntologyError):
    def __init__(self, concept_id: str, parent: str):
        super().__init__(f"concept {concept_id!r} references unknown parent {parent!r}")
        self.concept_id = concept_id
        self.parent = parent


class CycleError(OntologyError):
    def __init__(self, concept_id: str):
        super().__init__(f"parent links form a cycle through {concept_id!r}")
        self.concept_id = concept_id


class MissingRootError(OntologyError):
    def __init__(self, detail: str):
        super().__init__(detail)


class UnknownConceptError(OntologyError):
    def __init__(self, term: str, suggestions: tuple[str, ...] = ()):
        hint = f" (did you mean: {', '.join(suggestions)})" if suggestions else ""
        super().__init__(f"unknown concept {term!r}{hint}")
        self.term = term
        self.suggestions = suggestions


class MissingAttributeError(OntologyError):
    def __init__(self, concept_id: str, attribute: str):
        super().__init__(
            f"template for {concept_id!r} needs attribute {attribute!r} absent from the event"
        )
        self.concept_id = concept_id
        self.attribute = attribute


@dataclass(frozen=True)
class Concept:
    id: str
    label: str
    parents: tuple[str, ...] = ()
    template: str = DEFAULT_TEMPLATE
    attributes: tuple[tuple[str, str], ...] = ()

    def attribute_names(self) -> frozenset[str]:
        return frozenset(name for name, _ in self.attributes)


class Ontology:
    """Immutable concept DAG; reload produces a new instance."""

    def __init__(self, concepts: dict[str, Concept]):
        self.concepts = dict(concepts)
        self.root = ROOT_ID
        self._ancestors = self._close_ancestors()

    def _close_ancestors(self) -> dict[str, frozenset[str]]:
        closed: dict[str, frozenset[str]] = {}

        def close(cid: str, trail: tuple[str, ...]) -> frozenset[str]:
            if cid in closed:
                return closed[cid]
            if cid in trail:
                raise CycleError(cid)
            acc: set[str] = {cid}
            for parent in self.concepts[cid].parents:
                acc |= close(parent, trail + (cid,))
            closed[cid] = frozenset(acc)
            return closed[cid]

        for cid in self.concepts:
            close(cid, ())
        return closed

    def __contains__(self, concept_id: str) -> bool:
        return concept_id in self.concepts

    def __eq__(self, other: object) -> bool:
        return isinstance(other, Ontology) and self.concepts == other.concepts

    def ids(self) -> list[str]:
        return sorted(self.concepts)

    def subsumes(self, ancestor: str, descendant: str) -> bool:
        """True iff ``ancestor`` is reachable from ``descendant`` via parent links."""
        for cid in (ancestor, descendant):
            if cid not in self.concepts:
                raise UnknownConceptError(cid)
        return ancestor in self._ancestors[descendant]

    def descendants(self, concept_id: str) -> frozenset[str]:
        if concept_id not in self.concepts:
            raise UnknownConceptError(concept_id)
        return frozenset(c for c in self.concepts if concept_id in self._ancestors[c])

    def validate_term(self, term: str) -> str:
        """Resolve ``term`` to a concept id or fail with nearby suggestions."""
        if term in self.concepts:
            return term
        scored = sorted(
            (distance, cid)
            for cid in self.concepts
            if (distance := _levenshtein(term, cid, cap=2)) <= 2
        )
        raise UnknownConceptError(term, tuple(cid for _, cid in scored[:3]))

    def describe_event(self, event) -> str:
        """Instantiate the concept's template with the event's fields."""
        if event.concept not in self.concepts:
            raise UnknownConceptError(event.concept)
        concept = self.concepts[event.concept]
        values = {
            "camera": event.camera_id,
            "confidence": f"{event.confidence:.2f}",
            "time": format_timestamp(event.timestamp),
            "label": concept.label,
        }

        def resolve(match: re.Match) -> str:
            name = match.group(1)
            if name in values:
                return values[name]
            if name not in event.attributes:
                raise MissingAttributeError(concept.id, name)
            return _render_scalar(event.attributes[name])

        return _PLACEHOLDER_RE.sub(resolve, concept.template)


def format_timestamp(ms: int) -> str:
    """ISO-8601 UTC with millisecond precision, e.g. 2026-01-05T08:00:00.000Z."""
    dt = datetime.fromtimestamp(ms // 1000, tz=timezone.utc)
    return dt.strftime("%Y-%m-%dT%H:%M:%S") + f".{ms % 1000:03d}Z"


def _render_scalar(value) -> str:
    if isinstance(value, bool):
        return "yes" if value else "no"
    return str(value)


def _levenshtein(a: str, b: str, cap: int = 1_000_000) -> int:
    """Edit distance with an early-exit cap (returns cap+1 once exceeded)."""
    if abs(len(a) - len(b)) > cap:
        return cap + 1
    prev = list(range(len(b) + 1))
    for i, ca in enumerate(a, 1):
        cur = [i]
        best = i
        for j, cb in enumerate(b, 1):
            cost = min(prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (ca != cb))
            cur.append(cost)
            best = min(best, cost)
        if best > cap:
            return cap + 1
        prev = cur
    return prev[-1]


def load_ontology(source_text: str) -> Ontology:
    """Parse and validate the line-oriented ontology format."""
    raw: dict[str, dict] = {}
    order: list[str] = []
    current: str | None = None

    for lineno, line in enumerate(source_text.splitlines(), 1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if stripped.startswith("concept"):
            m = _CONCEPT_RE.match(stripped)
            if not m:
                raise OntologySyntaxError("malformed concept line", lineno)
            cid, rest = m.group(1), m.group(2)
            if not _ID_RE.match(cid):
                raise OntologySyntaxError(f"invalid concept id {cid!r}", lineno)
            if cid in raw:
                raise DuplicateIdError(cid, lineno)
            segments = [seg.strip() for seg in rest.split("|")]
            parents = tuple(p.strip() for p in segments[0].split(",") if p.strip())
            spec = {"parents": parents, "label": cid, "template": DEFAULT_TEMPLATE, "attrs": []}
            for seg in segments[1:]:
                if not seg:
                    continue
                fm = _FIELD_RE.match(seg)
                if fm:
                    spec[fm.group(1)] = fm.group(2)
                    continue
                am = _ATTR_RE.match(seg)
                if am:
                    spec["attrs"].append((am.group(1), am.group(2)))
                    continue
                raise OntologySyntaxError(f"unrecognized segment {seg!r}", lineno)
            raw[cid] = spec
            order.append(cid)
            current = cid
        elif stripped.startswith("attr"):
            if current is None:
                raise OntologySyntaxError("attr line before any concept", lineno)
            am = _ATTR_RE.match(stripped)
            if not am:
                raise OntologySyntaxError("malformed attr line", lineno)
            raw[current]["attrs"].append((am.group(1), am.group(2)))
        else:
            raise OntologySyntaxError(f"unrecognized line {stripped!r}", lineno)

    if ROOT_ID not in raw:
        raise MissingRootError(f"root concept {ROOT_ID!r} is not declared")
    if raw[ROOT_ID]["parents"]:
        raise MissingRootError(f"root concept {ROOT_ID!r} must not declare parents")

    concepts: dict[str, Concept] = {}
    for cid in order:
        spec = raw[cid]
        if cid != ROOT_ID and not spec["parents"]:
            raise MissingRootError(
                f"concept {cid!r} has no parents; only {ROOT_ID!r} may be a root"
            )
        for parent in spec["parents"]:
            if parent not in raw:
                raise DanglingParentError(cid, parent)
        allowed = FIXED_PLACEHOLDERS | {name for name, _ in spec["attrs"]}
        for kind in (k for _, k in spec["attrs"]):
            if kind not in ATTRIBUTE_KINDS:
                raise OntologySyntaxError(f"unknown attribute kind {kind!r} on {cid!r}")
        for placeholder in _PLACEHOLDER_RE.findall(spec["template"]):
            if placeholder not in allowed:
                raise OntologySyntaxError(
                    f"template for {cid!r} uses undeclared placeholder {placeholder!r}"
                )
        concepts[cid] = Concept(
            id=cid,
            label=spec["label"],
            parents=spec["parents"],
            template=spec["template"],
            attributes=tuple(spec["attrs"]),
        )

    return Ontology(concepts)  # Ontology.__init__ raises CycleError on cycles


def serialize_ontology(o: Ontology) -> str:
    """Render back to the file format; load_ontology(serialize_ontology(o)) == o."""
    lines = []
    ordered = [o.root] + [cid for cid in sorted(o.concepts) if cid != o.root]
    for cid in ordered:
        c = o.concepts[cid]
        parts = [f"concept {c.id} : {','.join(c.parents)}"]
        parts.append(f'label="{c.label}"')
        parts.append(f'template="{c.template}"')
        lines.append(" | ".join(parts))
        for name, kind in c.attributes:
            lines.append(f"attr {name}:{kind}")
    return "\n".join(lines) + "\n"


def load_ontology_file(path) -> Ontology:
    with open(path, encoding="utf-8") as fh:
        return load_ontology(fh.read())


def load_seed_ontology() -> Ontology:
    """The 12-concept seed vocabulary shipped with the package."""
    text = resources.files("vigil.data").joinpath("seed.ont").read_text("utf-8")
    return load_ontology(text)
