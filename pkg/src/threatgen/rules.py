"""Deterministic threat identification over a data-flow diagram.

Two families of rules run over a model:

* STRIDE-per-element: every element and flow receives one finding per
  applicable STRIDE category from the chart in :mod:`threatgen.catalog`.
* LLM rules: structural patterns around ``llm``-tagged elements (prompt
  injection paths, output handling, leakage, feedback cycles, ...).

The interesting predicates are graph-theoretic and deserve precision,
because the QA metamorphic relations depend on them being stable under
model transformations:

* *direct* prompt injection fires per flow from an external entity into
  an llm element;
* *indirect* prompt injection fires on an llm element that terminates a
  directed flow walk of length >= 2 starting at an external entity, i.e.
  entity input can reach the model through at least one intermediate hop.
  Walks may revisit vertices, so an entity on a feedback cycle counts as
  reaching itself; a shortcut flow never masks a longer route.  (Shortest
  -path distances would not survive element duplication: the duplicate of
  an entity on a cycle reaches the original at cycle length even though
  the original's distance to itself is zero.)
* *self-replication* fires once per distinct vertex set of a directed
  flow cycle containing an llm element (a self-loop counts).

Output is fully deterministic: threats are ordered by subject declaration
order (elements, then flows, then cycles anchored at their earliest
member) and rule id.  Threat titles are built from display names, not
ids, so renaming ids leaves titles untouched.
"""

from __future__ import annotations

from dataclasses import dataclass

import networkx as nx

from threatgen.catalog import (
    IdentificationRule,
    StrideCategory,
    ThreatCatalog,
    builtin_catalog,
    stride_for,
)
from threatgen.dfd import DfdElement, DfdModel, ElementKind

__all__ = ["IdentifiedThreat", "identify_threats", "threat_title"]


@dataclass(frozen=True)
class IdentifiedThreat:
    """One finding: a rule applied to an element, flow, or cycle.

    ``subject`` is the element or flow id, or for cycle findings the tuple
    of member element ids in declaration order.  ``(rule_id, subject)``
    is unique within a result.
    """

    rule_id: str
    subject: str | tuple[str, ...]
    title: str
    stride: frozenset[StrideCategory]
    owasp_id: str | None
    atlas_id: str | None
    likelihood: int
    impact: int

    @property
    def subject_ids(self) -> tuple[str, ...]:
        """The ids this finding references, cycle members included."""
        return self.subject if isinstance(self.subject, tuple) else (self.subject,)


def threat_title(rule: IdentificationRule, display: str) -> str:
    return f"{rule.title} on {display}"


def _element_display(element: DfdElement) -> str:
    return f"'{element.name}'"


def _from_rule(rule: IdentificationRule, subject, display: str) -> IdentifiedThreat:
    return IdentifiedThreat(
        rule_id=rule.id,
        subject=subject,
        title=threat_title(rule, display),
        stride=rule.stride,
        owasp_id=rule.owasp_id,
        atlas_id=rule.atlas_id,
        likelihood=rule.likelihood,
        impact=rule.impact,
    )


def identify_threats(
    model: DfdModel, catalog: ThreatCatalog | None = None
) -> tuple[IdentifiedThreat, ...]:
    """Run all rules and return the ordered findings."""
    catalog = catalog if catalog is not None else builtin_catalog()
    rule = catalog.rule

    elements = {e.id: e for e in model.elements}
    element_index = {e.id: i for i, e in enumerate(model.elements)}
    flow_index = {f.id: i for i, f in enumerate(model.flows)}
    llm_elements = [e for e in model.elements if "llm" in e.tags]

    graph = nx.DiGraph()
    graph.add_nodes_from(elements)
    graph.add_edges_from((f.source, f.target) for f in model.flows)

    externals = [e.id for e in model.elements if e.kind is ElementKind.EXTERNAL_ENTITY]
    # Endpoints of directed walks of length >= 1 (and >= 2) from any
    # external entity.  A walk of length >= 1 ends anywhere reachable from
    # a successor of an entity; extending each such endpoint by one edge
    # gives exactly the endpoints of walks of length >= 2.
    walk1: set[str] = set()
    for ee in externals:
        for first in graph.successors(ee):
            walk1.add(first)
            walk1.update(nx.descendants(graph, first))
    walk2 = {f.target for f in model.flows if f.source in walk1}

    def reachable_from_external(eid: str) -> bool:
        return eid in walk1

    def indirectly_reached(eid: str) -> bool:
        return eid in walk2

    def has_direct_injection(eid: str) -> bool:
        return any(
            f.target == eid
            and elements[f.source].kind is ElementKind.EXTERNAL_ENTITY
            for f in model.flows
        )

    threats: list[IdentifiedThreat] = []

    # STRIDE-per-element over elements and flows.
    for e in model.elements:
        for cat in stride_for(e.kind):
            r = rule(f"R-STRIDE-{_LETTER[cat]}")
            threats.append(_from_rule(r, e.id, _element_display(e)))
    for f in model.flows:
        for cat in stride_for("flow"):
            r = rule(f"R-STRIDE-{_LETTER[cat]}")
            threats.append(_from_rule(r, f.id, f"flow '{f.label}'"))

    # Flow-scoped LLM rules.
    for f in model.flows:
        src, tgt = elements[f.source], elements[f.target]
        display = f"flow '{f.label}'"
        if "llm" in tgt.tags and src.kind is ElementKind.EXTERNAL_ENTITY:
            threats.append(_from_rule(rule("R-LLM01-DIRECT"), f.id, display))
        if "llm" in tgt.tags and src.kind is ElementKind.DATA_STORE and "training-data" in src.tags:
            threats.append(_from_rule(rule("R-LLM03"), f.id, display))
        if "llm" in src.tags:
            if tgt.kind is ElementKind.PROCESS and "sanitizer" not in tgt.tags:
                threats.append(_from_rule(rule("R-LLM02"), f.id, display))
            if "privileged" in tgt.tags:
                threats.append(_from_rule(rule("R-LLM08"), f.id, display))
            if "plugin" in tgt.tags:
                threats.append(_from_rule(rule("R-LLM07"), f.id, display))
        if (
            f.crosses_boundary
            and src.kind is ElementKind.DATA_STORE
            and "model-artifact" in src.tags
        ):
            threats.append(_from_rule(rule("R-LLM10"), f.id, display))

    # Element-scoped LLM rules.
    sensitive_sources = {
        f.target
        for f in model.flows
        if elements[f.source].kind is ElementKind.DATA_STORE
        and "sensitive" in elements[f.source].tags
    }
    has_outgoing = {f.source for f in model.flows}
    for e in llm_elements:
        display = _element_display(e)
        injected = has_direct_injection(e.id) or indirectly_reached(e.id)
        if indirectly_reached(e.id):
            threats.append(_from_rule(rule("R-LLM01-INDIRECT"), e.id, display))
        if injected and "guardrails" in e.tags:
            threats.append(_from_rule(rule("R-JAILBREAK"), e.id, display))
        if reachable_from_external(e.id):
            threats.append(_from_rule(rule("R-LLM04"), e.id, display))
        if e.id in sensitive_sources and e.id in has_outgoing:
            threats.append(_from_rule(rule("R-LLM06"), e.id, display))
        threats.append(_from_rule(rule("R-LLM05"), e.id, display))
        threats.append(_from_rule(rule("R-LLM09"), e.id, display))

    # Cycle rule: one finding per distinct vertex set of an elementary
    # cycle through an llm element.
    llm_ids = {e.id for e in llm_elements}
    cycle_sets: set[frozenset[str]] = set()
    for cyc in nx.simple_cycles(graph):
        members = frozenset(cyc)
        if members & llm_ids:
            cycle_sets.add(members)
    selfrep = rule("R-SELFREP")
    for members in cycle_sets:
        ordered = tuple(sorted(members, key=element_index.__getitem__))
        display = "cycle " + " -> ".join(
            _element_display(elements[m]) for m in ordered
        )
        threats.append(_from_rule(selfrep, ordered, display))

    def sort_key(t: IdentifiedThreat):
        if isinstance(t.subject, tuple):
            indices = tuple(element_index[m] for m in t.subject)
            return (2, min(indices), indices, t.rule_id)
        if t.subject in element_index:
            return (0, element_index[t.subject], (), t.rule_id)
        return (1, flow_index[t.subject], (), t.rule_id)

    threats.sort(key=sort_key)
    return tuple(threats)


_LETTER = {
    StrideCategory.SPOOFING: "S",
    StrideCategory.TAMPERING: "T",
    StrideCategory.REPUDIATION: "R",
    StrideCategory.INFORMATION_DISCLOSURE: "I",
    StrideCategory.DENIAL_OF_SERVICE: "D",
    StrideCategory.ELEVATION_OF_PRIVILEGE: "E",
}
