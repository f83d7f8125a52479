"""Reviewable threat-model documents: parse, validate, serialize, diff.

The on-disk artifact is a JSON document (conventional extension
``.otm.json``) with a fixed schema version.  Canonical serialization is
byte-deterministic: keys appear in a fixed order (see ``docs/otm_schema.md``),
every id-bearing array is sorted by id, id-reference arrays and tag lists
are sorted, STRIDE categories appear in S/T/R/I/D/E order, optional
classification keys are omitted when unset, output uses two-space indent
and ends with a newline.

``parse_otm`` never stops at the first problem: every structural or
referential violation becomes a path-addressed diagnostic such as
``threats[2].appliesTo[0]: references unknown component or dataflow 'ghost'``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

from threatgen.catalog import STRIDE_ORDER, StrideCategory

__all__ = [
    "OTM_VERSION",
    "OtmProject",
    "OtmComponent",
    "OtmDataflow",
    "OtmThreat",
    "OtmMitigation",
    "OtmDocument",
    "OtmDiagnostic",
    "OtmParseError",
    "OtmValidationError",
    "FieldChange",
    "ThreatChange",
    "OtmDiff",
    "parse_otm",
    "serialize_otm",
    "validate_document",
    "document_to_dict",
    "diff_otm",
    "diff_to_dict",
]

OTM_VERSION = "0.2.0-threomolia"

_COMPONENT_KINDS = {"external_entity", "process", "data_store"}
_STRIDE_NAMES = {c.value for c in StrideCategory}


@dataclass(frozen=True)
class OtmDiagnostic:
    path: str
    message: str

    def __str__(self) -> str:
        return f"{self.path}: {self.message}"


class OtmParseError(Exception):
    """The text is not JSON at all."""


class OtmValidationError(Exception):
    """The JSON is structurally or referentially invalid.

    ``diagnostics`` holds every violation found, not just the first.
    """

    def __init__(self, diagnostics: list[OtmDiagnostic]):
        super().__init__(
            f"{len(diagnostics)} validation problem(s): "
            + "; ".join(str(d) for d in diagnostics[:5])
        )
        self.diagnostics = list(diagnostics)


@dataclass(frozen=True)
class OtmProject:
    id: str
    name: str


@dataclass(frozen=True)
class OtmComponent:
    id: str
    name: str
    kind: str
    tags: tuple[str, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "tags", tuple(self.tags))


@dataclass(frozen=True)
class OtmDataflow:
    id: str
    source: str
    target: str


@dataclass(frozen=True)
class OtmThreat:
    id: str
    name: str
    description: str
    stride: tuple[StrideCategory, ...]
    owasp_llm_id: str | None
    atlas_technique_id: str | None
    likelihood: int
    impact: int
    applies_to: tuple[str, ...]

    def __post_init__(self):
        # Canonical S/T/R/I/D/E order regardless of input container, so
        # equal category sets compare equal and serialize identically.
        present = set(self.stride)
        object.__setattr__(
            self, "stride", tuple(c for c in STRIDE_ORDER if c in present)
        )
        object.__setattr__(self, "applies_to", tuple(self.applies_to))


@dataclass(frozen=True)
class OtmMitigation:
    id: str
    name: str
    description: str
    risk_reduction: int
    mitigates: tuple[str, ...]

    def __post_init__(self):
        object.__setattr__(self, "mitigates", tuple(self.mitigates))


@dataclass(frozen=True)
class OtmDocument:
    project: OtmProject
    components: tuple[OtmComponent, ...] = ()
    dataflows: tuple[OtmDataflow, ...] = ()
    threats: tuple[OtmThreat, ...] = ()
    mitigations: tuple[OtmMitigation, ...] = ()
    otm_version: str = OTM_VERSION

    def __post_init__(self):
        for name in ("components", "dataflows", "threats", "mitigations"):
            object.__setattr__(self, name, tuple(getattr(self, name)))

    def threat(self, threat_id: str) -> OtmThreat:
        for t in self.threats:
            if t.id == threat_id:
                return t
        raise KeyError(threat_id)


# --- validation -------------------------------------------------------------


def _is_str(value) -> bool:
    return isinstance(value, str)


def _is_int(value) -> bool:
    return isinstance(value, int) and not isinstance(value, bool)


class _Checker:
    def __init__(self):
        self.diagnostics: list[OtmDiagnostic] = []

    def add(self, path: str, message: str) -> None:
        self.diagnostics.append(OtmDiagnostic(path, message))

    def require_keys(self, obj: dict, path: str, required: tuple[str, ...],
                     optional: tuple[str, ...] = ()) -> None:
        for key in required:
            if key not in obj:
                self.add(f"{path}.{key}" if path else key, "missing required key")
        for key in obj:
            if key not in required and key not in optional:
                self.add(f"{path}.{key}" if path else key, "unknown key")

    def str_field(self, obj: dict, path: str, key: str) -> None:
        if key in obj and not _is_str(obj[key]):
            self.add(f"{path}.{key}", "must be a string")

    def int_field(self, obj: dict, path: str, key: str, lo: int, hi: int) -> None:
        if key in obj:
            if not _is_int(obj[key]):
                self.add(f"{path}.{key}", "must be an integer")
            elif not lo <= obj[key] <= hi:
                self.add(f"{path}.{key}", f"must be between {lo} and {hi}")

    def id_array(self, obj: dict, path: str, key: str, known: set[str],
                 what: str, require_nonempty: bool) -> None:
        value = obj.get(key)
        if value is None:
            return
        if not isinstance(value, list):
            self.add(f"{path}.{key}", "must be an array")
            return
        if require_nonempty and not value:
            self.add(f"{path}.{key}", "must not be empty")
        for i, ref in enumerate(value):
            if not _is_str(ref):
                self.add(f"{path}.{key}[{i}]", "must be a string")
            elif ref not in known:
                self.add(f"{path}.{key}[{i}]", f"references unknown {what} '{ref}'")


def _collect_ids(checker: _Checker, items: list, path: str) -> set[str]:
    seen: set[str] = set()
    for i, item in enumerate(items):
        if isinstance(item, dict) and _is_str(item.get("id")):
            if item["id"] in seen:
                checker.add(f"{path}[{i}].id", f"duplicate id '{item['id']}'")
            seen.add(item["id"])
    return seen


def _validate_data(data) -> list[OtmDiagnostic]:
    checker = _Checker()
    if not isinstance(data, dict):
        checker.add("", "document must be a JSON object")
        return checker.diagnostics

    checker.require_keys(
        data,
        "",
        ("otmVersion", "project", "components", "dataflows", "threats", "mitigations"),
    )

    version = data.get("otmVersion")
    if version is not None and version != OTM_VERSION:
        checker.add("otmVersion", f"expected '{OTM_VERSION}', found {version!r}")

    project = data.get("project")
    if project is not None:
        if not isinstance(project, dict):
            checker.add("project", "must be an object")
        else:
            checker.require_keys(project, "project", ("id", "name"))
            checker.str_field(project, "project", "id")
            checker.str_field(project, "project", "name")

    arrays: dict[str, list] = {}
    for key in ("components", "dataflows", "threats", "mitigations"):
        value = data.get(key)
        if value is None:
            arrays[key] = []
        elif not isinstance(value, list):
            checker.add(key, "must be an array")
            arrays[key] = []
        else:
            arrays[key] = value

    component_ids = _collect_ids(checker, arrays["components"], "components")
    dataflow_ids = _collect_ids(checker, arrays["dataflows"], "dataflows")
    threat_ids = _collect_ids(checker, arrays["threats"], "threats")
    _collect_ids(checker, arrays["mitigations"], "mitigations")
    subject_ids = component_ids | dataflow_ids

    for i, item in enumerate(arrays["components"]):
        path = f"components[{i}]"
        if not isinstance(item, dict):
            checker.add(path, "must be an object")
            continue
        checker.require_keys(item, path, ("id", "name", "kind", "tags"))
        checker.str_field(item, path, "id")
        checker.str_field(item, path, "name")
        kind = item.get("kind")
        if kind is not None and kind not in _COMPONENT_KINDS:
            checker.add(f"{path}.kind", f"must be one of {sorted(_COMPONENT_KINDS)}")
        tags = item.get("tags")
        if tags is not None:
            if not isinstance(tags, list):
                checker.add(f"{path}.tags", "must be an array")
            else:
                for j, tag in enumerate(tags):
                    if not _is_str(tag):
                        checker.add(f"{path}.tags[{j}]", "must be a string")

    for i, item in enumerate(arrays["dataflows"]):
        path = f"dataflows[{i}]"
        if not isinstance(item, dict):
            checker.add(path, "must be an object")
            continue
        checker.require_keys(item, path, ("id", "source", "target"))
        for key in ("id", "source", "target"):
            checker.str_field(item, path, key)
        for key in ("source", "target"):
            ref = item.get(key)
            if _is_str(ref) and ref not in component_ids:
                checker.add(f"{path}.{key}", f"references unknown component '{ref}'")

    for i, item in enumerate(arrays["threats"]):
        path = f"threats[{i}]"
        if not isinstance(item, dict):
            checker.add(path, "must be an object")
            continue
        checker.require_keys(
            item,
            path,
            ("id", "name", "description", "strideCategories", "likelihood",
             "impact", "appliesTo"),
            optional=("owaspLlmId", "atlasTechniqueId"),
        )
        checker.str_field(item, path, "id")
        checker.str_field(item, path, "name")
        checker.str_field(item, path, "description")
        stride = item.get("strideCategories")
        if stride is not None:
            if not isinstance(stride, list):
                checker.add(f"{path}.strideCategories", "must be an array")
            else:
                for j, cat in enumerate(stride):
                    if cat not in _STRIDE_NAMES:
                        checker.add(
                            f"{path}.strideCategories[{j}]",
                            f"unknown STRIDE category {cat!r}",
                        )
        for key in ("owaspLlmId", "atlasTechniqueId"):
            value = item.get(key)
            if value is not None and not _is_str(value):
                checker.add(f"{path}.{key}", "must be a string or omitted")
        owasp = item.get("owaspLlmId")
        if _is_str(owasp) and not (
            len(owasp) == 5 and owasp.startswith("LLM") and owasp[3:].isdigit()
        ):
            checker.add(f"{path}.owaspLlmId", f"malformed OWASP LLM id {owasp!r}")
        checker.int_field(item, path, "likelihood", 1, 5)
        checker.int_field(item, path, "impact", 1, 5)
        checker.id_array(item, path, "appliesTo", subject_ids,
                         "component or dataflow", require_nonempty=True)

    for i, item in enumerate(arrays["mitigations"]):
        path = f"mitigations[{i}]"
        if not isinstance(item, dict):
            checker.add(path, "must be an object")
            continue
        checker.require_keys(
            item, path, ("id", "name", "description", "riskReduction", "mitigates")
        )
        checker.str_field(item, path, "id")
        checker.str_field(item, path, "name")
        checker.str_field(item, path, "description")
        checker.int_field(item, path, "riskReduction", 0, 100)
        checker.id_array(item, path, "mitigates", threat_ids, "threat",
                         require_nonempty=True)

    return checker.diagnostics


def _build_document(data: dict) -> OtmDocument:
    return OtmDocument(
        otm_version=data["otmVersion"],
        project=OtmProject(data["project"]["id"], data["project"]["name"]),
        components=tuple(
            OtmComponent(c["id"], c["name"], c["kind"], tuple(c["tags"]))
            for c in data["components"]
        ),
        dataflows=tuple(
            OtmDataflow(f["id"], f["source"], f["target"]) for f in data["dataflows"]
        ),
        threats=tuple(
            OtmThreat(
                id=t["id"],
                name=t["name"],
                description=t["description"],
                stride=tuple(StrideCategory(c) for c in t["strideCategories"]),
                owasp_llm_id=t.get("owaspLlmId"),
                atlas_technique_id=t.get("atlasTechniqueId"),
                likelihood=t["likelihood"],
                impact=t["impact"],
                applies_to=tuple(t["appliesTo"]),
            )
            for t in data["threats"]
        ),
        mitigations=tuple(
            OtmMitigation(
                id=m["id"],
                name=m["name"],
                description=m["description"],
                risk_reduction=m["riskReduction"],
                mitigates=tuple(m["mitigates"]),
            )
            for m in data["mitigations"]
        ),
    )


def parse_otm(text: str) -> OtmDocument:
    """Parse and fully validate document text.

    Raises :class:`OtmParseError` when the text is not JSON and
    :class:`OtmValidationError` (carrying all diagnostics) when it is JSON
    but not a valid document.
    """
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise OtmParseError(f"not valid JSON: {exc}") from exc
    diagnostics = _validate_data(data)
    if diagnostics:
        raise OtmValidationError(diagnostics)
    return _build_document(data)


def validate_document(document: OtmDocument) -> list[OtmDiagnostic]:
    """All diagnostics for an in-memory document (empty when valid)."""
    return _validate_data(document_to_dict(document))


# --- canonical serialization -------------------------------------------------


def _stride_sorted(stride) -> list[str]:
    present = set(stride)
    return [c.value for c in STRIDE_ORDER if c in present]


def document_to_dict(document: OtmDocument) -> dict:
    """Canonical JSON-ready dict: fixed key order, arrays sorted by id."""
    doc: dict = {"otmVersion": document.otm_version}
    doc["project"] = {"id": document.project.id, "name": document.project.name}
    doc["components"] = [
        {"id": c.id, "name": c.name, "kind": c.kind, "tags": sorted(c.tags)}
        for c in sorted(document.components, key=lambda c: c.id)
    ]
    doc["dataflows"] = [
        {"id": f.id, "source": f.source, "target": f.target}
        for f in sorted(document.dataflows, key=lambda f: f.id)
    ]
    threats = []
    for t in sorted(document.threats, key=lambda t: t.id):
        entry: dict = {
            "id": t.id,
            "name": t.name,
            "description": t.description,
            "strideCategories": _stride_sorted(t.stride),
        }
        if t.owasp_llm_id is not None:
            entry["owaspLlmId"] = t.owasp_llm_id
        if t.atlas_technique_id is not None:
            entry["atlasTechniqueId"] = t.atlas_technique_id
        entry["likelihood"] = t.likelihood
        entry["impact"] = t.impact
        entry["appliesTo"] = sorted(t.applies_to)
        threats.append(entry)
    doc["threats"] = threats
    doc["mitigations"] = [
        {
            "id": m.id,
            "name": m.name,
            "description": m.description,
            "riskReduction": m.risk_reduction,
            "mitigates": sorted(m.mitigates),
        }
        for m in sorted(document.mitigations, key=lambda m: m.id)
    ]
    return doc


def serialize_otm(document: OtmDocument) -> str:
    """Canonical text for a valid document; equal documents, equal bytes."""
    return json.dumps(document_to_dict(document), indent=2, ensure_ascii=False) + "\n"


# --- diff ---------------------------------------------------------------------


@dataclass(frozen=True)
class FieldChange:
    field: str
    old: object
    new: object


@dataclass(frozen=True)
class ThreatChange:
    id: str
    fields: tuple[FieldChange, ...]


@dataclass(frozen=True)
class OtmDiff:
    added_threats: tuple[str, ...] = ()
    removed_threats: tuple[str, ...] = ()
    changed_threats: tuple[ThreatChange, ...] = ()
    added_mitigations: tuple[str, ...] = ()
    removed_mitigations: tuple[str, ...] = ()

    def is_empty(self) -> bool:
        return not (
            self.added_threats
            or self.removed_threats
            or self.changed_threats
            or self.added_mitigations
            or self.removed_mitigations
        )


def _threat_fields(t: OtmThreat) -> dict:
    return {
        "name": t.name,
        "description": t.description,
        "strideCategories": _stride_sorted(t.stride),
        "owaspLlmId": t.owasp_llm_id,
        "atlasTechniqueId": t.atlas_technique_id,
        "likelihood": t.likelihood,
        "impact": t.impact,
        "appliesTo": sorted(t.applies_to),
    }


def diff_otm(old: OtmDocument, new: OtmDocument) -> OtmDiff:
    """Structural diff of threats and mitigations, matched by id."""
    old_threats = {t.id: t for t in old.threats}
    new_threats = {t.id: t for t in new.threats}
    changed = []
    for tid in sorted(old_threats.keys() & new_threats.keys()):
        before = _threat_fields(old_threats[tid])
        after = _threat_fields(new_threats[tid])
        fields = tuple(
            FieldChange(key, before[key], after[key])
            for key in before
            if before[key] != after[key]
        )
        if fields:
            changed.append(ThreatChange(tid, fields))
    old_mits = {m.id for m in old.mitigations}
    new_mits = {m.id for m in new.mitigations}
    return OtmDiff(
        added_threats=tuple(sorted(new_threats.keys() - old_threats.keys())),
        removed_threats=tuple(sorted(old_threats.keys() - new_threats.keys())),
        changed_threats=tuple(changed),
        added_mitigations=tuple(sorted(new_mits - old_mits)),
        removed_mitigations=tuple(sorted(old_mits - new_mits)),
    )


def diff_to_dict(diff: OtmDiff) -> dict:
    return {
        "addedThreats": list(diff.added_threats),
        "removedThreats": list(diff.removed_threats),
        "changedThreats": [
            {
                "id": change.id,
                "fields": [
                    {"field": fc.field, "old": fc.old, "new": fc.new}
                    for fc in change.fields
                ],
            }
            for change in diff.changed_threats
        ],
        "addedMitigations": list(diff.added_mitigations),
        "removedMitigations": list(diff.removed_mitigations),
    }
