"""Evaluation metrics over a threat-model document and its diagram.

All metrics are static computations over the document and the diagram; no
attack simulation is involved.  The two metrics whose usual definitions
presume simulation (asset coverage, exposure level) are reinterpreted
statically, and every report carries ``notes`` flagging that
reinterpretation so downstream consumers cannot mistake the numbers for
simulation output.

The accuracy metric compares a document against a reference document over
the fixed classification universe ``(elements + flows) x 16 classes`` (six
STRIDE categories plus ten OWASP LLM codes), counting agreement on both
present and absent pairs.
"""

from __future__ import annotations

from dataclasses import dataclass

from .catalog import STRIDE_ORDER, ThreatCatalog, builtin_catalog
from .dfd import DfdModel, ElementKind
from .otm import OtmDocument

__all__ = [
    "MetricsReport",
    "ReferenceMismatchError",
    "compute_metrics",
    "metrics_to_dict",
    "total_risk",
    "residual_risk",
    "classification_pairs",
]

#: Fixed note lines attached to every report.
STATIC_INTERPRETATION_NOTES = (
    "assetCoverage counts components referenced by threats, not assets "
    "compromised in a simulated attack",
    "exposureLevel counts threat-bearing components reachable from an "
    "external entity, not simulated attacker reach",
)

_OWASP_CODES = tuple(f"LLM{n:02d}" for n in range(1, 11))
_CLASSES = tuple(c.value for c in STRIDE_ORDER) + _OWASP_CODES


class ReferenceMismatchError(Exception):
    """The reference document does not describe the same diagram."""


@dataclass(frozen=True)
class MetricsReport:
    accuracy: float | None
    threat_coverage: float
    asset_coverage: float
    atlas_coverage: float
    model_complexity: int
    total_risk: float
    residual_risk: float
    mitigation_effectiveness: float
    attack_success_probability: float
    exposure_level: float
    impact_severity: int
    notes: tuple[str, ...] = STATIC_INTERPRETATION_NOTES


def total_risk(document: OtmDocument) -> float:
    """Sum of likelihood x impact over all threats."""
    return float(sum(t.likelihood * t.impact for t in document.threats))


def _best_reduction(document: OtmDocument) -> dict[str, int]:
    best: dict[str, int] = {}
    for mitigation in document.mitigations:
        for threat_id in mitigation.mitigates:
            if mitigation.risk_reduction > best.get(threat_id, -1):
                best[threat_id] = mitigation.risk_reduction
    return best


def residual_risk(document: OtmDocument) -> float:
    """Total risk discounted by each threat's best applicable mitigation."""
    best = _best_reduction(document)
    return float(sum(
        t.likelihood * t.impact * (1.0 - best.get(t.id, 0) / 100.0)
        for t in document.threats
    ))


def classification_pairs(document: OtmDocument) -> set[tuple[str, str]]:
    """(subject id, class) pairs asserted by the document's threats.

    Classes are the six STRIDE category names and the ten OWASP LLM codes;
    adversarial-ML technique ids are deliberately outside the universe.
    """
    pairs: set[tuple[str, str]] = set()
    for threat in document.threats:
        labels = [c.value for c in threat.stride]
        if threat.owasp_llm_id is not None:
            labels.append(threat.owasp_llm_id)
        for subject in threat.applies_to:
            for label in labels:
                pairs.add((subject, label))
    return pairs


def _accuracy(document: OtmDocument, reference: OtmDocument,
              dfd: DfdModel) -> float:
    subjects = [e.id for e in dfd.elements] + [f.id for f in dfd.flows]
    universe_size = len(subjects) * len(_CLASSES)
    if universe_size == 0:
        return 1.0
    universe = {(s, c) for s in subjects for c in _CLASSES}
    in_doc = classification_pairs(document) & universe
    in_ref = classification_pairs(reference) & universe
    true_positive = len(in_doc & in_ref)
    true_negative = universe_size - len(in_doc | in_ref)
    return (true_positive + true_negative) / universe_size


def _check_reference(reference: OtmDocument, dfd: DfdModel) -> None:
    ref_components = {c.id for c in reference.components}
    dfd_elements = {e.id for e in dfd.elements}
    if ref_components != dfd_elements:
        raise ReferenceMismatchError(
            "reference components do not match the diagram: "
            f"reference {sorted(ref_components)}, diagram {sorted(dfd_elements)}"
        )
    ref_flows = {f.id for f in reference.dataflows}
    dfd_flows = {f.id for f in dfd.flows}
    if ref_flows != dfd_flows:
        raise ReferenceMismatchError(
            "reference dataflows do not match the diagram: "
            f"reference {sorted(ref_flows)}, diagram {sorted(dfd_flows)}"
        )


def _exposure_level(document: OtmDocument) -> float:
    if not document.components:
        return 0.0
    adjacency: dict[str, set[str]] = {}
    for flow in document.dataflows:
        adjacency.setdefault(flow.source, set()).add(flow.target)
    externals = [
        c.id for c in document.components
        if c.kind == ElementKind.EXTERNAL_ENTITY.value
    ]
    reachable: set[str] = set()
    stack = list(externals)
    seen = set(externals)
    while stack:
        node = stack.pop()
        for neighbor in adjacency.get(node, ()):
            reachable.add(neighbor)  # requires at least one flow hop
            if neighbor not in seen:
                seen.add(neighbor)
                stack.append(neighbor)
    component_ids = {c.id for c in document.components}
    threatened = {
        subject
        for threat in document.threats
        for subject in threat.applies_to
        if subject in component_ids
    }
    exposed = reachable & threatened & component_ids
    return len(exposed) / len(document.components)


def compute_metrics(document: OtmDocument, dfd: DfdModel,
                    reference: OtmDocument | None = None,
                    catalog: ThreatCatalog | None = None) -> MetricsReport:
    """All computable metrics; ``accuracy`` only when a reference is given.

    Raises :class:`ReferenceMismatchError` when the reference's component
    or dataflow ids differ from the diagram's.
    """
    catalog = catalog or builtin_catalog()
    if reference is not None:
        _check_reference(reference, dfd)

    threats = document.threats
    mitigated = {
        threat_id
        for mitigation in document.mitigations
        for threat_id in mitigation.mitigates
    }
    threat_cov = (
        sum(1 for t in threats if t.id in mitigated) / len(threats)
        if threats else 1.0
    )

    component_ids = {c.id for c in document.components}
    referenced = {
        subject
        for threat in threats
        for subject in threat.applies_to
        if subject in component_ids
    }
    asset_cov = len(referenced) / len(component_ids) if component_ids else 1.0

    known_techniques = {t.id for t in catalog.techniques}
    used_techniques = {
        t.atlas_technique_id for t in threats if t.atlas_technique_id is not None
    }
    atlas_cov = len(used_techniques & known_techniques) / len(known_techniques)

    complexity = (
        len(document.components)
        + len(document.threats)
        + len(document.mitigations)
        + len(document.dataflows)
        + sum(len(t.applies_to) for t in threats)
        + sum(len(m.mitigates) for m in document.mitigations)
    )

    tr = total_risk(document)
    rr = residual_risk(document)
    effectiveness = 1.0 - rr / tr if tr > 0 else 0.0

    asp = max((t.likelihood for t in threats), default=0) / 5.0
    severity = max((t.impact for t in threats), default=0)

    return MetricsReport(
        accuracy=_accuracy(document, reference, dfd) if reference is not None else None,
        threat_coverage=threat_cov,
        asset_coverage=asset_cov,
        atlas_coverage=atlas_cov,
        model_complexity=complexity,
        total_risk=tr,
        residual_risk=rr,
        mitigation_effectiveness=effectiveness,
        attack_success_probability=asp,
        exposure_level=_exposure_level(document),
        impact_severity=severity,
    )


def metrics_to_dict(report: MetricsReport) -> dict:
    """JSON-ready report; ``accuracy`` is omitted when no reference was given."""
    payload: dict = {}
    if report.accuracy is not None:
        payload["accuracy"] = report.accuracy
    payload.update({
        "threatCoverage": report.threat_coverage,
        "assetCoverage": report.asset_coverage,
        "atlasCoverage": report.atlas_coverage,
        "modelComplexity": report.model_complexity,
        "totalRisk": report.total_risk,
        "residualRisk": report.residual_risk,
        "mitigationEffectiveness": report.mitigation_effectiveness,
        "attackSuccessProbability": report.attack_success_probability,
        "exposureLevel": report.exposure_level,
        "impactSeverity": report.impact_severity,
        "notes": list(report.notes),
    })
    return payload
