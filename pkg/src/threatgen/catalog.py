"""Threat knowledge base: STRIDE, OWASP LLM Top 10, MITRE ATLAS.

The catalog bundles four things:

* the STRIDE-per-element applicability chart,
* the OWASP Top 10 for LLM Applications entries (LLM01..LLM10),
* a slice of the MITRE ATLAS technique/tactic catalog relevant to
  LLM-integrated applications, with the OWASP cross-mapping,
* the identification rules and default mitigations the rule engine uses.

References:
- https://owasp.org/www-project-top-10-for-large-language-model-applications/
- https://atlas.mitre.org/

A deployment can replace or extend the built-in data by loading a JSON
file with the same shape (see :func:`load_catalog`); identification rule
predicates are fixed in code, but their titles, scores, and produced
classification ids live in the catalog.
"""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass

from threatgen.dfd import ElementKind

__all__ = [
    "StrideCategory",
    "OwaspLlmEntry",
    "AtlasTactic",
    "AtlasTechnique",
    "IdentificationRule",
    "MitigationTemplate",
    "ThreatCatalog",
    "UnknownTechniqueError",
    "stride_for",
    "map_atlas_to_owasp",
    "builtin_catalog",
    "load_catalog",
    "catalog_to_dict",
    "catalog_from_dict",
]


class StrideCategory(enum.Enum):
    """The six STRIDE threat categories."""

    SPOOFING = "Spoofing"
    TAMPERING = "Tampering"
    REPUDIATION = "Repudiation"
    INFORMATION_DISCLOSURE = "InformationDisclosure"
    DENIAL_OF_SERVICE = "DenialOfService"
    ELEVATION_OF_PRIVILEGE = "ElevationOfPrivilege"


#: Canonical ordering used wherever categories are listed.
STRIDE_ORDER = (
    StrideCategory.SPOOFING,
    StrideCategory.TAMPERING,
    StrideCategory.REPUDIATION,
    StrideCategory.INFORMATION_DISCLOSURE,
    StrideCategory.DENIAL_OF_SERVICE,
    StrideCategory.ELEVATION_OF_PRIVILEGE,
)

_STRIDE_LETTER = {
    StrideCategory.SPOOFING: "S",
    StrideCategory.TAMPERING: "T",
    StrideCategory.REPUDIATION: "R",
    StrideCategory.INFORMATION_DISCLOSURE: "I",
    StrideCategory.DENIAL_OF_SERVICE: "D",
    StrideCategory.ELEVATION_OF_PRIVILEGE: "E",
}

# STRIDE-per-element applicability: which categories make sense for each
# diagram subject kind.  Flows are keyed by the literal string "flow".
_STRIDE_CHART: dict[object, tuple[StrideCategory, ...]] = {
    ElementKind.EXTERNAL_ENTITY: (
        StrideCategory.SPOOFING,
        StrideCategory.REPUDIATION,
    ),
    ElementKind.PROCESS: STRIDE_ORDER,
    ElementKind.DATA_STORE: (
        StrideCategory.TAMPERING,
        StrideCategory.REPUDIATION,
        StrideCategory.INFORMATION_DISCLOSURE,
        StrideCategory.DENIAL_OF_SERVICE,
    ),
    "flow": (
        StrideCategory.TAMPERING,
        StrideCategory.INFORMATION_DISCLOSURE,
        StrideCategory.DENIAL_OF_SERVICE,
    ),
}


def stride_for(subject_kind: ElementKind | str) -> tuple[StrideCategory, ...]:
    """Applicable STRIDE categories for an element kind or ``"flow"``."""
    try:
        return _STRIDE_CHART[subject_kind]
    except KeyError:
        raise ValueError(f"unknown subject kind: {subject_kind!r}") from None


class UnknownTechniqueError(Exception):
    """Raised when a technique id is not present in the catalog."""

    def __init__(self, technique_id: str):
        super().__init__(f"unknown ATLAS technique id: {technique_id}")
        self.technique_id = technique_id


@dataclass(frozen=True)
class OwaspLlmEntry:
    """One entry of the OWASP Top 10 for LLM Applications."""

    id: str
    name: str
    description: str = ""


@dataclass(frozen=True)
class AtlasTactic:
    """An adversarial goal stage, e.g. ``AML.TA0010`` Exfiltration."""

    id: str
    name: str


@dataclass(frozen=True)
class AtlasTechnique:
    """An ATLAS technique with its tactics and optional OWASP mapping.

    ``owasp_id`` is ``None`` for techniques that have no counterpart in the
    OWASP LLM Top 10.
    """

    id: str
    name: str
    tactic_ids: frozenset[str]
    owasp_id: str | None = None
    description: str = ""

    def __post_init__(self):
        object.__setattr__(self, "tactic_ids", frozenset(self.tactic_ids))


@dataclass(frozen=True)
class IdentificationRule:
    """Metadata for one engine rule.

    ``subject_kind`` says what the rule reports against: a single element,
    a single flow, a flow cycle, or ``any`` for the generic STRIDE rules
    whose applicability the per-kind chart decides.  The predicate itself
    is implemented in :mod:`threatgen.rules` keyed by ``id``.
    """

    id: str
    title: str
    description: str
    subject_kind: str  # "element" | "flow" | "cycle" | "any"
    stride: frozenset[StrideCategory]
    owasp_id: str | None = None
    atlas_id: str | None = None
    likelihood: int = 4
    impact: int = 4

    def __post_init__(self):
        object.__setattr__(self, "stride", frozenset(self.stride))
        if not 1 <= self.likelihood <= 5 or not 1 <= self.impact <= 5:
            raise ValueError(f"rule {self.id}: scores must be within 1..5")


@dataclass(frozen=True)
class MitigationTemplate:
    """Default mitigation attached to every threat a rule produces."""

    rule_id: str
    name: str
    description: str
    risk_reduction: int  # percent, 0..100

    def __post_init__(self):
        if not 0 <= self.risk_reduction <= 100:
            raise ValueError(f"mitigation for {self.rule_id}: riskReduction 0..100")


@dataclass(frozen=True)
class ThreatCatalog:
    owasp: tuple[OwaspLlmEntry, ...]
    tactics: tuple[AtlasTactic, ...]
    techniques: tuple[AtlasTechnique, ...]
    rules: tuple[IdentificationRule, ...]
    mitigations: tuple[MitigationTemplate, ...]

    def __post_init__(self):
        owasp_ids = {e.id for e in self.owasp}
        tactic_ids = {t.id for t in self.tactics}
        technique_by_id: dict[str, AtlasTechnique] = {}
        for tech in self.techniques:
            if tech.id in technique_by_id:
                raise ValueError(f"duplicate technique id {tech.id}")
            technique_by_id[tech.id] = tech
            if tech.owasp_id is not None and tech.owasp_id not in owasp_ids:
                raise ValueError(f"technique {tech.id} maps to unknown {tech.owasp_id}")
            for tid in tech.tactic_ids:
                if tid not in tactic_ids:
                    raise ValueError(f"technique {tech.id} uses unknown tactic {tid}")
        for rule in self.rules:
            if rule.owasp_id is not None and rule.owasp_id not in owasp_ids:
                raise ValueError(f"rule {rule.id} produces unknown {rule.owasp_id}")
            if rule.atlas_id is not None:
                tech = technique_by_id.get(rule.atlas_id)
                if tech is None:
                    raise ValueError(f"rule {rule.id} produces unknown {rule.atlas_id}")
                # A rule may not claim a technique/OWASP pairing the catalog
                # cross-mapping contradicts.
                if tech.owasp_id != rule.owasp_id:
                    raise ValueError(
                        f"rule {rule.id}: {rule.atlas_id} maps to {tech.owasp_id}, "
                        f"not {rule.owasp_id}"
                    )
        rule_ids = {r.id for r in self.rules}
        for mit in self.mitigations:
            if mit.rule_id not in rule_ids:
                raise ValueError(f"mitigation references unknown rule {mit.rule_id}")

    def technique(self, technique_id: str) -> AtlasTechnique:
        for tech in self.techniques:
            if tech.id == technique_id:
                return tech
        raise UnknownTechniqueError(technique_id)

    def rule(self, rule_id: str) -> IdentificationRule:
        for rule in self.rules:
            if rule.id == rule_id:
                return rule
        raise KeyError(rule_id)

    def mitigation_for_rule(self, rule_id: str) -> MitigationTemplate | None:
        for mit in self.mitigations:
            if mit.rule_id == rule_id:
                return mit
        return None


def map_atlas_to_owasp(technique_id: str, catalog: ThreatCatalog | None = None) -> str | None:
    """OWASP LLM id for an ATLAS technique, or None when unmapped.

    Raises :class:`UnknownTechniqueError` for ids outside the catalog.
    """
    catalog = catalog if catalog is not None else builtin_catalog()
    return catalog.technique(technique_id).owasp_id


# --- built-in data ---------------------------------------------------------

_S = StrideCategory.SPOOFING
_T = StrideCategory.TAMPERING
_R = StrideCategory.REPUDIATION
_I = StrideCategory.INFORMATION_DISCLOSURE
_D = StrideCategory.DENIAL_OF_SERVICE
_E = StrideCategory.ELEVATION_OF_PRIVILEGE

_OWASP = (
    OwaspLlmEntry(
        "LLM01",
        "Prompt Injection",
        "Crafted input, direct or smuggled through retrieved content, that "
        "overrides the model's instructions.",
    ),
    OwaspLlmEntry(
        "LLM02",
        "Insecure Output Handling",
        "Downstream components consume model output without validation, "
        "enabling injection into interpreters, shells, or browsers.",
    ),
    OwaspLlmEntry(
        "LLM03",
        "Training Data Poisoning",
        "Tampering with training or fine-tuning corpora to implant "
        "backdoors or biases.",
    ),
    OwaspLlmEntry(
        "LLM04",
        "Model Denial of Service",
        "Resource-heavy or adversarial queries that degrade or exhaust the "
        "model service.",
    ),
    OwaspLlmEntry(
        "LLM05",
        "Supply Chain Vulnerabilities",
        "Compromised base models, datasets, or serving dependencies "
        "introduced from third parties.",
    ),
    OwaspLlmEntry(
        "LLM06",
        "Sensitive Information Disclosure",
        "Model responses reveal confidential data absorbed from context or "
        "training material.",
    ),
    OwaspLlmEntry(
        "LLM07",
        "Insecure Plugin Design",
        "Plugins or tools the model can call accept unchecked input or hold "
        "excessive permissions.",
    ),
    OwaspLlmEntry(
        "LLM08",
        "Excessive Agency",
        "The model is granted more autonomy or authority than the use case "
        "requires.",
    ),
    OwaspLlmEntry(
        "LLM09",
        "Overreliance",
        "Consumers act on model output without verification, absorbing "
        "hallucinated or wrong results.",
    ),
    OwaspLlmEntry(
        "LLM10",
        "Model Theft",
        "Exfiltration of proprietary model weights or their functional "
        "equivalent.",
    ),
)

_TACTICS = (
    AtlasTactic("AML.TA0004", "Initial Access"),
    AtlasTactic("AML.TA0005", "Execution"),
    AtlasTactic("AML.TA0006", "Persistence"),
    AtlasTactic("AML.TA0007", "Defense Evasion"),
    AtlasTactic("AML.TA0008", "Discovery"),
    AtlasTactic("AML.TA0010", "Exfiltration"),
    AtlasTactic("AML.TA0012", "Privilege Escalation"),
)

# Note on AML.T0062-PLUGIN: some published cross-mappings list the plugin
# compromise technique under the same external id as hallucination
# discovery.  The catalog keeps the two apart with a local suffix instead
# of guessing which external id was intended.
_TECHNIQUES = (
    AtlasTechnique(
        "AML.T0051",
        "LLM Prompt Injection",
        tactic_ids=frozenset(
            {"AML.TA0004", "AML.TA0006", "AML.TA0007", "AML.TA0012"}
        ),
        owasp_id="LLM01",
        description="Direct or indirect injection of adversarial instructions "
        "into the model prompt.",
    ),
    AtlasTechnique(
        "AML.T0061",
        "LLM Prompt Self-Replication",
        tactic_ids=frozenset({"AML.TA0006"}),
        owasp_id=None,
        description="A prompt that induces the model to reproduce the attack "
        "payload in its own output, persisting across turns.",
    ),
    AtlasTechnique(
        "AML.T0054",
        "LLM Jailbreak",
        tactic_ids=frozenset({"AML.TA0007", "AML.TA0012"}),
        owasp_id=None,
        description="Bypassing alignment guardrails to unlock restricted "
        "behaviors.",
    ),
    AtlasTechnique(
        "AML.T0056",
        "LLM Meta Prompt Extraction",
        tactic_ids=frozenset({"AML.TA0008", "AML.TA0010"}),
        owasp_id="LLM02",
        description="Coaxing the model into revealing its system prompt or "
        "other hidden instructions.",
    ),
    AtlasTechnique(
        "AML.T0062",
        "Discover LLM Hallucinations",
        tactic_ids=frozenset({"AML.TA0008"}),
        owasp_id=None,
        description="Probing for hallucinated entities (packages, URLs) an "
        "attacker can then register and control.",
    ),
    AtlasTechnique(
        "AML.T0062-PLUGIN",
        "LLM Plugin Compromise",
        tactic_ids=frozenset({"AML.TA0012", "AML.TA0005"}),
        owasp_id="LLM07",
        description="Abusing a model-callable plugin to execute actions or "
        "escalate privileges.",
    ),
    AtlasTechnique(
        "AML.T0057",
        "LLM Data Leakage",
        tactic_ids=frozenset({"AML.TA0010"}),
        owasp_id="LLM06",
        description="Sensitive data from context or training material leaks "
        "through model responses.",
    ),
)

_STRIDE_TITLE = {
    StrideCategory.SPOOFING: "Spoofing",
    StrideCategory.TAMPERING: "Tampering",
    StrideCategory.REPUDIATION: "Repudiation",
    StrideCategory.INFORMATION_DISCLOSURE: "Information Disclosure",
    StrideCategory.DENIAL_OF_SERVICE: "Denial of Service",
    StrideCategory.ELEVATION_OF_PRIVILEGE: "Elevation of Privilege",
}

# Generic STRIDE rules; the chart decides which subjects each applies to.
_GENERIC_RULES = tuple(
    IdentificationRule(
        id=f"R-STRIDE-{_STRIDE_LETTER[cat]}",
        title=_STRIDE_TITLE[cat],
        description=f"Generic STRIDE-per-element finding: {_STRIDE_TITLE[cat]}.",
        subject_kind="any",
        stride=frozenset({cat}),
        likelihood=2,
        impact=3,
    )
    for cat in STRIDE_ORDER
)

_LLM_RULES = (
    IdentificationRule(
        "R-LLM01-DIRECT",
        "Direct Prompt Injection",
        "An external entity feeds input straight into an llm-tagged element.",
        "flow",
        frozenset({_T, _E}),
        owasp_id="LLM01",
        atlas_id="AML.T0051",
    ),
    IdentificationRule(
        "R-LLM01-INDIRECT",
        "Indirect Prompt Injection",
        "External input reaches an llm-tagged element only through at least "
        "one intermediate hop, so injected instructions can hide in relayed "
        "or retrieved content.",
        "element",
        frozenset({_T, _E}),
        owasp_id="LLM01",
        atlas_id="AML.T0051",
    ),
    IdentificationRule(
        "R-JAILBREAK",
        "LLM Jailbreak",
        "A prompt-injection path targets an llm element that relies on "
        "guardrails, so bypassing them becomes the attack goal.",
        "element",
        frozenset({_E}),
        owasp_id=None,
        atlas_id="AML.T0054",
    ),
    IdentificationRule(
        "R-SELFREP",
        "LLM Prompt Self-Replication",
        "Model output can feed back into the model's own input along a flow "
        "cycle, letting injected prompts reproduce themselves.",
        "cycle",
        frozenset({_T}),
        owasp_id=None,
        atlas_id="AML.T0061",
    ),
    IdentificationRule(
        "R-LLM02",
        "Insecure Output Handling",
        "Model output flows into a process that does not sanitize it.",
        "flow",
        frozenset({_T, _I}),
        owasp_id="LLM02",
        atlas_id="AML.T0056",
    ),
    IdentificationRule(
        "R-LLM03",
        "Training Data Poisoning",
        "A store of training data feeds an llm-tagged element.",
        "flow",
        frozenset({_T}),
        owasp_id="LLM03",
    ),
    IdentificationRule(
        "R-LLM04",
        "Model Denial of Service",
        "The llm-tagged element is reachable from an external entity and can "
        "be saturated with expensive requests.",
        "element",
        frozenset({_D}),
        owasp_id="LLM04",
    ),
    IdentificationRule(
        "R-LLM05",
        "Supply Chain Vulnerabilities",
        "Informational: every llm element depends on third-party models, "
        "data, and serving infrastructure.",
        "element",
        frozenset({_T}),
        owasp_id="LLM05",
        likelihood=2,
        impact=3,
    ),
    IdentificationRule(
        "R-LLM06",
        "Sensitive Information Disclosure",
        "An llm element reads from a sensitive data store and emits output, "
        "so private context can leak into responses.",
        "element",
        frozenset({_I}),
        owasp_id="LLM06",
        atlas_id="AML.T0057",
    ),
    IdentificationRule(
        "R-LLM07",
        "Insecure Plugin Design",
        "Model output drives a plugin-tagged element.",
        "flow",
        frozenset({_E}),
        owasp_id="LLM07",
        atlas_id="AML.T0062-PLUGIN",
    ),
    IdentificationRule(
        "R-LLM08",
        "Excessive Agency",
        "Model output drives a privileged element.",
        "flow",
        frozenset({_E}),
        owasp_id="LLM08",
    ),
    IdentificationRule(
        "R-LLM09",
        "Overreliance",
        "Informational: consumers of every llm element may act on unverified "
        "output.",
        "element",
        frozenset({_R}),
        owasp_id="LLM09",
        likelihood=2,
        impact=3,
    ),
    IdentificationRule(
        "R-LLM10",
        "Model Theft",
        "A model artifact store ships data across a trust boundary.",
        "flow",
        frozenset({_I}),
        owasp_id="LLM10",
    ),
)

_MITIGATIONS = (
    MitigationTemplate(
        "R-LLM01-DIRECT",
        "Prompt isolation and input validation",
        "Separate instructions from data, validate and length-limit "
        "user-controlled input before it reaches the model.",
        60,
    ),
    MitigationTemplate(
        "R-LLM01-INDIRECT",
        "Context provenance filtering",
        "Treat retrieved or relayed content as untrusted: strip active "
        "instructions and record provenance for every context block.",
        50,
    ),
    MitigationTemplate(
        "R-JAILBREAK",
        "Layered guardrail policy",
        "Combine independent pre- and post-generation policy checks so one "
        "bypassed filter does not unlock the model.",
        40,
    ),
    MitigationTemplate(
        "R-SELFREP",
        "Feedback loop quarantine",
        "Tag model-generated text and block or review it before it is fed "
        "back into a prompt.",
        40,
    ),
    MitigationTemplate(
        "R-LLM02",
        "Output sanitization",
        "Validate, type-check, and encode model output before any "
        "downstream component consumes it.",
        70,
    ),
    MitigationTemplate(
        "R-LLM03",
        "Training data curation",
        "Source, sign, and review training corpora; monitor for anomalous "
        "fine-tuning behavior.",
        50,
    ),
    MitigationTemplate(
        "R-LLM04",
        "Rate and budget limits",
        "Enforce per-client rate limits, token budgets, and timeouts on "
        "model requests.",
        60,
    ),
    MitigationTemplate(
        "R-LLM05",
        "Supply chain pinning",
        "Pin model and dataset versions, verify checksums, and audit "
        "serving dependencies.",
        40,
    ),
    MitigationTemplate(
        "R-LLM06",
        "Context redaction",
        "Redact or tokenize sensitive fields before they enter prompts; "
        "filter responses for residual secrets.",
        60,
    ),
    MitigationTemplate(
        "R-LLM07",
        "Least-privilege plugins",
        "Scope plugin capabilities narrowly, validate plugin input, and "
        "require user confirmation for side effects.",
        50,
    ),
    MitigationTemplate(
        "R-LLM08",
        "Human approval gate",
        "Require explicit approval for privileged actions initiated from "
        "model output.",
        70,
    ),
    MitigationTemplate(
        "R-LLM09",
        "Independent verification",
        "Cross-check model output against authoritative sources before "
        "acting on it.",
        30,
    ),
    MitigationTemplate(
        "R-LLM10",
        "Artifact access control",
        "Encrypt model artifacts at rest and in transit; restrict and log "
        "boundary-crossing access.",
        50,
    ),
)

_BUILTIN = ThreatCatalog(
    owasp=_OWASP,
    tactics=_TACTICS,
    techniques=_TECHNIQUES,
    rules=_GENERIC_RULES + _LLM_RULES,
    mitigations=_MITIGATIONS,
)


def builtin_catalog() -> ThreatCatalog:
    """The catalog shipped with the package."""
    return _BUILTIN


# --- JSON (de)serialization -------------------------------------------------


def catalog_to_dict(catalog: ThreatCatalog) -> dict:
    return {
        "owasp": [
            {"id": e.id, "name": e.name, "description": e.description}
            for e in catalog.owasp
        ],
        "tactics": [{"id": t.id, "name": t.name} for t in catalog.tactics],
        "techniques": [
            {
                "id": t.id,
                "name": t.name,
                "tacticIds": sorted(t.tactic_ids),
                "owaspId": t.owasp_id,
                "description": t.description,
            }
            for t in catalog.techniques
        ],
        "rules": [
            {
                "id": r.id,
                "title": r.title,
                "description": r.description,
                "subjectKind": r.subject_kind,
                "stride": [c.value for c in STRIDE_ORDER if c in r.stride],
                "owaspId": r.owasp_id,
                "atlasId": r.atlas_id,
                "likelihood": r.likelihood,
                "impact": r.impact,
            }
            for r in catalog.rules
        ],
        "mitigations": [
            {
                "ruleId": m.rule_id,
                "name": m.name,
                "description": m.description,
                "riskReduction": m.risk_reduction,
            }
            for m in catalog.mitigations
        ],
    }


def catalog_from_dict(data: dict) -> ThreatCatalog:
    return ThreatCatalog(
        owasp=tuple(
            OwaspLlmEntry(e["id"], e["name"], e.get("description", ""))
            for e in data.get("owasp", [])
        ),
        tactics=tuple(AtlasTactic(t["id"], t["name"]) for t in data.get("tactics", [])),
        techniques=tuple(
            AtlasTechnique(
                t["id"],
                t["name"],
                frozenset(t.get("tacticIds", [])),
                t.get("owaspId"),
                t.get("description", ""),
            )
            for t in data.get("techniques", [])
        ),
        rules=tuple(
            IdentificationRule(
                r["id"],
                r["title"],
                r.get("description", ""),
                r["subjectKind"],
                frozenset(StrideCategory(c) for c in r.get("stride", [])),
                r.get("owaspId"),
                r.get("atlasId"),
                r.get("likelihood", 4),
                r.get("impact", 4),
            )
            for r in data.get("rules", [])
        ),
        mitigations=tuple(
            MitigationTemplate(
                m["ruleId"], m["name"], m.get("description", ""), m["riskReduction"]
            )
            for m in data.get("mitigations", [])
        ),
    )


def load_catalog(path: str) -> ThreatCatalog:
    """Load a catalog from a JSON file with the builtin schema."""
    with open(path, "r", encoding="utf-8") as fh:
        return catalog_from_dict(json.load(fh))
