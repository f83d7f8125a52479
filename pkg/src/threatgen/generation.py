"""Prompt assembly and threat-model generation (offline and remote).

The offline backend runs the rule engine and renders its findings as a
threat-model document; it needs no network and is bit-for-bit
deterministic, which makes it the reference backend for tests and the
fallback when no remote endpoint is configured.  The remote backend
assembles a budgeted prompt, calls an OpenAI-style chat-completions
endpoint, and validates whatever comes back.
"""

from __future__ import annotations

import enum
import json
import math
import re
import time
from collections.abc import Callable, Sequence
from dataclasses import dataclass, field

import requests

from .catalog import ThreatCatalog, builtin_catalog
from .dfd import DfdModel, serialize_dfd
from .otm import (
    OtmComponent,
    OtmDataflow,
    OtmDocument,
    OtmMitigation,
    OtmProject,
    OtmThreat,
    OtmValidationError,
    parse_otm,
    serialize_otm,
)
from .rag import RetrievalResult
from .rules import IdentifiedThreat, identify_threats

__all__ = [
    "SYSTEM_PROMPT_VERSION",
    "COT_INSTRUCTION",
    "ReasoningStrategy",
    "ContextBlock",
    "PromptBundle",
    "BudgetTooSmallError",
    "RemoteLlmError",
    "GenerationResult",
    "RemoteLlmClient",
    "token_estimate",
    "system_prompt",
    "build_prompt",
    "render_user_content",
    "offline_document",
    "generate_offline",
    "generate_remote",
    "extract_json_object",
]

SYSTEM_PROMPT_VERSION = "v1"

#: Appended to the system prompt under the chain-of-thought strategy.
COT_INSTRUCTION = (
    "reason step by step about each component and flow before listing threats"
)

#: Priority of the diagram block; always the highest, never dropped.
DFD_PRIORITY = 100

#: Retrieved chunks score 50 + round(10 * cosine), capped here.
CHUNK_PRIORITY_CAP = 90


class ReasoningStrategy(enum.Enum):
    DIRECT = "direct"
    CHAIN_OF_THOUGHT = "chain-of-thought"


class BudgetTooSmallError(Exception):
    """The mandatory prompt parts alone exceed the token budget."""


class RemoteLlmError(Exception):
    """The remote completion endpoint failed after all retries."""


@dataclass(frozen=True)
class ContextBlock:
    label: str
    text: str
    priority: int

    @property
    def token_estimate(self) -> int:
        return token_estimate(self.text)


@dataclass(frozen=True)
class PromptBundle:
    system_prompt: str
    user_prompt: str
    strategy: ReasoningStrategy
    included_blocks: tuple[ContextBlock, ...]
    dropped_blocks: tuple[str, ...]
    token_budget: int
    total_token_estimate: int


@dataclass(frozen=True)
class GenerationResult:
    backend: str
    raw_text: str
    document: OtmDocument | None
    parse_diagnostics: tuple[str, ...]
    elapsed_millis: int


def token_estimate(text: str) -> int:
    """Conservative 4-chars-per-token estimate used for budgeting."""
    return math.ceil(len(text) / 4)


def system_prompt(catalog: ThreatCatalog | None = None,
                  strategy: ReasoningStrategy = ReasoningStrategy.DIRECT) -> str:
    """Versioned instructions plus the closed classification vocabulary."""
    catalog = catalog or builtin_catalog()
    owasp = ", ".join(sorted(e.id for e in catalog.owasp))
    techniques = ", ".join(t.id for t in catalog.techniques)
    lines = [
        f"You are a threat-modeling assistant (prompt {SYSTEM_PROMPT_VERSION}).",
        "Given a data-flow diagram and optional design context, enumerate",
        "threats per element and flow and propose mitigations.",
        "Respond with a single JSON object in the open threat model format;",
        "do not include any text outside the JSON object.",
        f"Allowed OWASP LLM identifiers: {owasp}.",
        f"Allowed adversarial-ML technique identifiers: {techniques}.",
        "Use only identifiers from these lists or omit the field.",
    ]
    text = "\n".join(lines)
    if strategy is ReasoningStrategy.CHAIN_OF_THOUGHT:
        text += "\n" + COT_INSTRUCTION
    return text


def chunk_priority(score: float) -> int:
    return min(CHUNK_PRIORITY_CAP, 50 + round(10 * score))


def build_prompt(model: DfdModel, user_prompt: str,
                 strategy: ReasoningStrategy = ReasoningStrategy.DIRECT,
                 retrieved: Sequence[RetrievalResult] = (),
                 token_budget: int = 8000,
                 catalog: ThreatCatalog | None = None) -> PromptBundle:
    """Assemble a prompt that fits ``token_budget``.

    The system prompt, the stakeholder prompt, and the diagram block are
    mandatory; retrieved chunks fill the remaining budget in priority
    order (ties keep earlier retrieval rank) and the rest are dropped.
    """
    system = system_prompt(catalog, strategy)
    dfd_block = ContextBlock(
        label="data-flow diagram",
        text=serialize_dfd(model),
        priority=DFD_PRIORITY,
    )
    base = token_estimate(system) + token_estimate(user_prompt) + dfd_block.token_estimate
    if base > token_budget:
        raise BudgetTooSmallError(
            f"mandatory prompt parts need {base} tokens, budget is {token_budget}"
        )
    candidates = [
        ContextBlock(
            label=f"context {r.chunk.doc_id}#{r.chunk.seq}",
            text=r.chunk.text,
            priority=chunk_priority(r.score),
        )
        for r in retrieved
    ]
    order = sorted(range(len(candidates)), key=lambda i: (-candidates[i].priority, i))
    kept: list[ContextBlock] = []
    dropped: list[str] = []
    total = base
    exhausted = False
    for i in order:
        block = candidates[i]
        if not exhausted and total + block.token_estimate <= token_budget:
            kept.append(block)
            total += block.token_estimate
        else:
            # Keep-a-prefix rule: once one block is dropped, all
            # lower-priority blocks are dropped too, so a larger budget
            # can only extend the kept set.
            exhausted = True
            dropped.append(block.label)
    return PromptBundle(
        system_prompt=system,
        user_prompt=user_prompt,
        strategy=strategy,
        included_blocks=(dfd_block, *kept),
        dropped_blocks=tuple(dropped),
        token_budget=token_budget,
        total_token_estimate=total,
    )


def render_user_content(bundle: PromptBundle) -> str:
    parts = [bundle.user_prompt]
    for block in bundle.included_blocks:
        parts.append(f"## {block.label}\n{block.text}")
    return "\n\n".join(parts)


# ---------------------------------------------------------------------------
# Offline backend
# ---------------------------------------------------------------------------

_SLUG = re.compile(r"[^a-z0-9]+")


def _slug(text: str) -> str:
    slug = _SLUG.sub("-", text.lower()).strip("-")
    return slug or "system"


def _threat_id(threat: IdentifiedThreat) -> str:
    subject = "+".join(threat.subject_ids)
    return f"t-{threat.rule_id.lower()}-{subject}"


def offline_document(model: DfdModel,
                     catalog: ThreatCatalog | None = None) -> OtmDocument:
    """Deterministic document built straight from the rule engine.

    Threat ids are derived from the rule id and subject ids, so the same
    diagram always yields byte-identical serialized output.  Each
    rule with a mitigation template that fired contributes one mitigation
    covering every threat that rule produced.
    """
    catalog = catalog or builtin_catalog()
    threats = identify_threats(model, catalog)
    components = tuple(sorted(
        (
            OtmComponent(
                id=e.id,
                name=e.name,
                kind=e.kind.value,
                tags=tuple(sorted(e.tags)),
            )
            for e in model.elements
        ),
        key=lambda c: c.id,
    ))
    dataflows = tuple(sorted(
        (OtmDataflow(id=f.id, source=f.source, target=f.target) for f in model.flows),
        key=lambda f: f.id,
    ))
    otm_threats = []
    by_rule: dict[str, list[str]] = {}
    for threat in threats:
        tid = _threat_id(threat)
        by_rule.setdefault(threat.rule_id, []).append(tid)
        rule = catalog.rule(threat.rule_id)
        otm_threats.append(OtmThreat(
            id=tid,
            name=threat.title,
            description=rule.description,
            stride=threat.stride,
            owasp_llm_id=threat.owasp_id,
            atlas_technique_id=threat.atlas_id,
            likelihood=threat.likelihood,
            impact=threat.impact,
            applies_to=tuple(sorted(threat.subject_ids)),
        ))
    mitigations = []
    for rule_id in sorted(by_rule):
        template = catalog.mitigation_for_rule(rule_id)
        if template is None:
            continue
        mitigations.append(OtmMitigation(
            id=f"m-{rule_id.lower()}",
            name=template.name,
            description=template.description,
            risk_reduction=template.risk_reduction,
            mitigates=tuple(sorted(by_rule[rule_id])),
        ))
    return OtmDocument(
        project=OtmProject(id=_slug(model.system_name), name=model.system_name),
        components=components,
        dataflows=dataflows,
        threats=tuple(sorted(otm_threats, key=lambda t: t.id)),
        mitigations=tuple(sorted(mitigations, key=lambda m: m.id)),
    )


def generate_offline(model: DfdModel,
                     catalog: ThreatCatalog | None = None) -> GenerationResult:
    """Run the offline backend; the document is always present and valid."""
    started = time.monotonic()
    document = offline_document(model, catalog)
    raw = serialize_otm(document)
    elapsed = int(round((time.monotonic() - started) * 1000))
    return GenerationResult(
        backend="offline",
        raw_text=raw,
        document=document,
        parse_diagnostics=(),
        elapsed_millis=elapsed,
    )


# ---------------------------------------------------------------------------
# Remote backend
# ---------------------------------------------------------------------------


def extract_json_object(text: str) -> str | None:
    """Return the first decodable top-level JSON object embedded in text."""
    decoder = json.JSONDecoder()
    for start, char in enumerate(text):
        if char != "{":
            continue
        try:
            _, end = decoder.raw_decode(text[start:])
        except json.JSONDecodeError:
            continue
        return text[start:start + end]
    return None


@dataclass
class RemoteLlmClient:
    """Minimal chat-completions client with fixed-schedule retries.

    Any transport error, non-2xx status, or malformed response body counts
    as a failed attempt; after ``max_attempts`` the call raises
    :class:`RemoteLlmError`.  ``sleeper`` is injectable so tests can run
    the backoff schedule without waiting.
    """

    endpoint: str
    model: str
    auth_token: str | None = None
    timeout: float = 60.0
    max_attempts: int = 3
    backoff_seconds: tuple[float, ...] = (1.0, 2.0, 4.0)
    sleeper: Callable[[float], None] = time.sleep
    session: requests.Session = field(default_factory=requests.Session)

    def complete(self, system: str, user: str) -> str:
        payload = {
            "model": self.model,
            "messages": [
                {"role": "system", "content": system},
                {"role": "user", "content": user},
            ],
            "temperature": 0,
        }
        headers = {"Content-Type": "application/json"}
        if self.auth_token:
            headers["Authorization"] = f"Bearer {self.auth_token}"
        last_error: str = "no attempts made"
        for attempt in range(self.max_attempts):
            try:
                response = self.session.post(
                    self.endpoint, json=payload, headers=headers,
                    timeout=self.timeout,
                )
            except requests.RequestException as exc:
                last_error = f"transport error: {exc}"
            else:
                if 200 <= response.status_code < 300:
                    try:
                        body = response.json()
                        content = body["choices"][0]["message"]["content"]
                    except (ValueError, LookupError, TypeError) as exc:
                        last_error = f"malformed response body: {exc!r}"
                    else:
                        if isinstance(content, str):
                            return content
                        last_error = "malformed response body: content not a string"
                else:
                    last_error = f"status {response.status_code}"
            if attempt + 1 < self.max_attempts:
                self.sleeper(self.backoff_seconds[attempt])
        raise RemoteLlmError(
            f"completion request to {self.endpoint} failed after "
            f"{self.max_attempts} attempts: {last_error}"
        )


def generate_remote(bundle: PromptBundle, client: RemoteLlmClient) -> GenerationResult:
    """Call the remote backend and validate its reply.

    The reply may wrap the JSON document in prose; the first decodable
    top-level JSON object is extracted and validated.  Validation
    problems are reported in ``parse_diagnostics`` with ``document=None``
    rather than raised, so callers can persist the raw reply.  Transport
    failure still raises :class:`RemoteLlmError`.
    """
    started = time.monotonic()
    raw = client.complete(bundle.system_prompt, render_user_content(bundle))
    document: OtmDocument | None = None
    diagnostics: tuple[str, ...] = ()
    extracted = extract_json_object(raw)
    if extracted is None:
        diagnostics = ("no JSON object found in model reply",)
    else:
        try:
            document = parse_otm(extracted)
        except OtmValidationError as exc:
            diagnostics = tuple(str(d) for d in exc.diagnostics)
    elapsed = int(round((time.monotonic() - started) * 1000))
    return GenerationResult(
        backend="remote",
        raw_text=raw,
        document=document,
        parse_diagnostics=diagnostics,
        elapsed_millis=elapsed,
    )
