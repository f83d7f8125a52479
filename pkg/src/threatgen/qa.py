"""Quality assurance: syntactic gate, metamorphic checks, health score.

Generated threat models have no ground truth to compare against, so QA
leans on metamorphic relations: known-safe transformations of the diagram
whose effect on the deterministic backend's output is predictable.  Four
relations are checked:

* MR1 — adding an isolated element never removes findings.
* MR2 — consistently renaming every id renames findings and nothing else.
* MR3 — duplicating an element (with copies of its incident flows) leaves
  the findings on the original ids untouched.
* MR4 — removing a mitigation never lowers the document's residual risk.

MR1-MR3 probe the generator itself and hold for every valid diagram; MR4
is evaluated directly on the document under QA.  Failures are recorded as
data, never raised.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

from .catalog import ThreatCatalog, builtin_catalog
from .dfd import DataFlow, DfdElement, DfdModel, ElementKind
from .generation import offline_document
from .metrics import residual_risk
from .otm import OtmDocument, OtmParseError, OtmValidationError, parse_otm, validate_document
from .rules import IdentifiedThreat, identify_threats

__all__ = [
    "MrInstance",
    "MrResult",
    "QaReport",
    "add_isolated_element",
    "rename_model",
    "duplicate_element",
    "select_tests",
    "run_qa",
    "report_to_dict",
]

#: Health-score weights; the syntactic gate is hard, these are advisory.
WEIGHT_COMPONENT_COVERAGE = 0.4
WEIGHT_MR_PASS_RATE = 0.3
WEIGHT_MITIGATION_COVERAGE = 0.3

RENAME_SUFFIX = "_r"


@dataclass(frozen=True)
class MrInstance:
    """One applicable metamorphic test.

    ``touched`` holds the diagram element ids the instance exercises; the
    coverage-greedy selection strategy maximizes their union.
    """

    relation: str
    description: str
    touched: frozenset[str] = frozenset()
    kind_to_add: ElementKind | None = None
    element_id: str | None = None
    mitigation_id: str | None = None


@dataclass(frozen=True)
class MrResult:
    relation: str
    description: str
    passed: bool


@dataclass(frozen=True)
class QaReport:
    syntactic_valid: bool
    mr_results: tuple[MrResult, ...]
    component_coverage: float
    mitigation_coverage: float
    health_score: int

    @property
    def mr_pass_rate(self) -> float:
        if not self.mr_results:
            return 1.0
        return sum(1 for r in self.mr_results if r.passed) / len(self.mr_results)


# --- model transformations ----------------------------------------------------


def _all_ids(model: DfdModel) -> set[str]:
    return (
        {e.id for e in model.elements}
        | {f.id for f in model.flows}
        | {b.id for b in model.boundaries}
    )


def _fresh_id(base: str, taken: set[str]) -> str:
    candidate = base
    while candidate in taken:
        candidate += "-x"
    return candidate


def add_isolated_element(model: DfdModel, kind: ElementKind) -> DfdModel:
    """Append one element of ``kind`` with no flows, tags, or boundary."""
    probe = DfdElement(
        id=_fresh_id(f"mr1-{kind.value}", _all_ids(model)),
        name="Isolated probe",
        kind=kind,
    )
    return DfdModel(
        system_name=model.system_name,
        elements=model.elements + (probe,),
        flows=model.flows,
        boundaries=model.boundaries,
    )


def rename_model(model: DfdModel) -> tuple[DfdModel, dict[str, str]]:
    """Suffix every id consistently; display names stay untouched."""
    mapping = {x: x + RENAME_SUFFIX for x in _all_ids(model)}
    elements = tuple(
        replace(
            e,
            id=mapping[e.id],
            boundary=mapping[e.boundary] if e.boundary else None,
        )
        for e in model.elements
    )
    flows = tuple(
        replace(f, id=mapping[f.id], source=mapping[f.source], target=mapping[f.target])
        for f in model.flows
    )
    boundaries = tuple(
        replace(b, id=mapping[b.id], members=frozenset(mapping[m] for m in b.members))
        for b in model.boundaries
    )
    renamed = DfdModel(model.system_name, elements, flows, boundaries)
    return renamed, mapping


def duplicate_element(model: DfdModel, element_id: str) -> DfdModel:
    """Copy one element plus its incident flows under fresh ids.

    The copy joins no trust boundary; copied flows keep their labels and
    crossing flags but swap the duplicated endpoint for the copy.
    """
    original = next((e for e in model.elements if e.id == element_id), None)
    if original is None:
        raise ValueError(f"unknown element {element_id!r}")
    taken = _all_ids(model)
    dup_id = _fresh_id(element_id + "_dup", taken)
    taken.add(dup_id)
    duplicate = DfdElement(
        id=dup_id, name=original.name, kind=original.kind,
        tags=original.tags, boundary=None,
    )
    copied: list[DataFlow] = []
    for flow in model.flows:
        if element_id not in (flow.source, flow.target):
            continue
        copy_id = _fresh_id(flow.id + "_dup", taken)
        taken.add(copy_id)
        copied.append(replace(
            flow,
            id=copy_id,
            source=dup_id if flow.source == element_id else flow.source,
            target=dup_id if flow.target == element_id else flow.target,
        ))
    return DfdModel(
        system_name=model.system_name,
        elements=model.elements + (duplicate,),
        flows=model.flows + tuple(copied),
        boundaries=model.boundaries,
    )


# --- instance selection ---------------------------------------------------------


def _flow_endpoints(model: DfdModel) -> dict[str, tuple[str, str]]:
    return {f.id: (f.source, f.target) for f in model.flows}


def _touched_by_subjects(subjects, endpoints) -> frozenset[str]:
    touched: set[str] = set()
    for subject in subjects:
        if subject in endpoints:
            touched.update(endpoints[subject])
        else:
            touched.add(subject)
    return frozenset(touched)


def enumerate_instances(model: DfdModel,
                        catalog: ThreatCatalog | None = None) -> list[MrInstance]:
    """Every applicable MR instance, in deterministic order."""
    catalog = catalog or builtin_catalog()
    endpoints = _flow_endpoints(model)
    instances = [
        MrInstance(
            relation="MR1",
            description=f"add isolated {kind.value}",
            kind_to_add=kind,
        )
        for kind in ElementKind
    ]
    instances.append(MrInstance(
        relation="MR2",
        description=f"rename every id with suffix '{RENAME_SUFFIX}'",
        touched=frozenset(e.id for e in model.elements),
    ))
    for element in model.elements:
        incident = {
            endpoint
            for flow in model.flows
            if element.id in (flow.source, flow.target)
            for endpoint in (flow.source, flow.target)
        }
        instances.append(MrInstance(
            relation="MR3",
            description=f"duplicate element '{element.id}'",
            touched=frozenset({element.id} | incident),
            element_id=element.id,
        ))
    reference = offline_document(model, catalog)
    threats_by_id = {t.id: t for t in reference.threats}
    for mitigation in reference.mitigations:
        subjects = {
            subject
            for threat_id in mitigation.mitigates
            for subject in threats_by_id[threat_id].applies_to
        }
        instances.append(MrInstance(
            relation="MR4",
            description=f"remove mitigation '{mitigation.id}'",
            touched=_touched_by_subjects(subjects, endpoints),
            mitigation_id=mitigation.id,
        ))
    return instances


def select_tests(model: DfdModel, strategy: str = "all",
                 limit: int | None = None,
                 catalog: ThreatCatalog | None = None) -> list[MrInstance]:
    """Choose MR instances to run.

    ``all`` returns every applicable instance.  ``coverage-greedy``
    repeatedly picks the instance adding the most not-yet-covered element
    ids (ties broken by relation then description) and keeps picking until
    ``limit`` instances are selected or none remain.
    """
    instances = enumerate_instances(model, catalog)
    if strategy == "all":
        return instances
    if strategy != "coverage-greedy":
        raise ValueError(f"unknown selection strategy {strategy!r}")
    if limit is None or limit < 1:
        raise ValueError("coverage-greedy requires a positive limit")
    remaining = list(instances)
    covered: set[str] = set()
    picked: list[MrInstance] = []
    while remaining and len(picked) < limit:
        best = min(
            remaining,
            key=lambda inst: (
                -len(inst.touched - covered), inst.relation, inst.description,
            ),
        )
        remaining.remove(best)
        picked.append(best)
        covered |= best.touched
    return picked


# --- execution -------------------------------------------------------------------


def _mapped(finding: IdentifiedThreat, mapping: dict[str, str]) -> IdentifiedThreat:
    if isinstance(finding.subject, tuple):
        subject = tuple(mapping[s] for s in finding.subject)
    else:
        subject = mapping[finding.subject]
    return replace(finding, subject=subject)


def _run_instance(instance: MrInstance, model: DfdModel, document: OtmDocument,
                  base: tuple[IdentifiedThreat, ...],
                  catalog: ThreatCatalog) -> bool:
    if instance.relation == "MR1":
        grown = add_isolated_element(model, instance.kind_to_add)
        return set(base) <= set(identify_threats(grown, catalog))
    if instance.relation == "MR2":
        renamed, mapping = rename_model(model)
        expected = tuple(_mapped(t, mapping) for t in base)
        return identify_threats(renamed, catalog) == expected
    if instance.relation == "MR3":
        doubled = duplicate_element(model, instance.element_id)
        original_ids = {e.id for e in model.elements} | {f.id for f in model.flows}
        restricted = tuple(
            t for t in identify_threats(doubled, catalog)
            if all(s in original_ids for s in t.subject_ids)
        )
        return restricted == base
    if instance.relation == "MR4":
        if not any(m.id == instance.mitigation_id for m in document.mitigations):
            return True  # nothing to remove; vacuously satisfied
        stripped = replace(document, mitigations=tuple(
            m for m in document.mitigations if m.id != instance.mitigation_id
        ))
        return residual_risk(stripped) >= residual_risk(document) - 1e-9
    raise ValueError(f"unknown relation {instance.relation!r}")


def _invalid_report() -> QaReport:
    return QaReport(
        syntactic_valid=False,
        mr_results=(),
        component_coverage=0.0,
        mitigation_coverage=0.0,
        health_score=0,
    )


def run_qa(document: OtmDocument | str, model: DfdModel,
           instances: list[MrInstance],
           catalog: ThreatCatalog | None = None) -> QaReport:
    """Execute QA and compute the health score.

    ``document`` may be raw text, in which case a parse failure yields a
    report with ``syntactic_valid`` false and health score zero.
    """
    catalog = catalog or builtin_catalog()
    if isinstance(document, str):
        try:
            document = parse_otm(document)
        except (OtmParseError, OtmValidationError):
            return _invalid_report()
    elif validate_document(document):
        return _invalid_report()

    base = identify_threats(model, catalog)
    results = tuple(sorted(
        (
            MrResult(
                relation=inst.relation,
                description=inst.description,
                passed=_run_instance(inst, model, document, base, catalog),
            )
            for inst in instances
        ),
        key=lambda r: (r.relation, r.description),
    ))

    subjects = {e.id for e in model.elements} | {f.id for f in model.flows}
    referenced = {
        s for t in document.threats for s in t.applies_to if s in subjects
    }
    component_coverage = len(referenced) / len(subjects) if subjects else 1.0

    mitigated = {
        threat_id for m in document.mitigations for threat_id in m.mitigates
    }
    if document.threats:
        mitigation_coverage = (
            sum(1 for t in document.threats if t.id in mitigated)
            / len(document.threats)
        )
    else:
        mitigation_coverage = 1.0

    pass_rate = (
        sum(1 for r in results if r.passed) / len(results) if results else 1.0
    )
    health = round(100 * (
        WEIGHT_COMPONENT_COVERAGE * component_coverage
        + WEIGHT_MR_PASS_RATE * pass_rate
        + WEIGHT_MITIGATION_COVERAGE * mitigation_coverage
    ))
    return QaReport(
        syntactic_valid=True,
        mr_results=results,
        component_coverage=component_coverage,
        mitigation_coverage=mitigation_coverage,
        health_score=health,
    )


def report_to_dict(report: QaReport) -> dict:
    return {
        "syntacticValid": report.syntactic_valid,
        "mrResults": [
            {
                "relation": r.relation,
                "instanceDescription": r.description,
                "passed": r.passed,
            }
            for r in report.mr_results
        ],
        "componentCoverage": report.component_coverage,
        "mitigationCoverage": report.mitigation_coverage,
        "healthScore": report.health_score,
    }
