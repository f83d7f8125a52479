"""Prompt budgeting plus the offline and remote generation backends."""

from __future__ import annotations

import json
import random

import pytest
import requests

from threatgen.catalog import builtin_catalog
from threatgen.dfd import DfdModel, serialize_dfd
from threatgen.generation import (
    COT_INSTRUCTION,
    BudgetTooSmallError,
    PromptBundle,
    ReasoningStrategy,
    RemoteLlmClient,
    RemoteLlmError,
    build_prompt,
    chunk_priority,
    extract_json_object,
    generate_offline,
    generate_remote,
    offline_document,
    render_user_content,
    system_prompt,
    token_estimate,
)
from threatgen.otm import serialize_otm, validate_document
from threatgen.rag import Chunk, RetrievalResult, embed
from threatgen.rules import identify_threats

from support import random_model

# --- token estimation and system prompt -----------------------------------------


@pytest.mark.parametrize(
    ("text", "expected"),
    [("", 0), ("abc", 1), ("abcd", 1), ("abcde", 2), ("x" * 40, 10)],
)
def test_token_estimate(text, expected):
    assert token_estimate(text) == expected


def test_system_prompt_lists_vocabulary_and_version():
    prompt = system_prompt()
    assert "v1" in prompt
    for owasp_id in ("LLM01", "LLM06", "LLM10"):
        assert owasp_id in prompt
    for technique_id in ("AML.T0051", "AML.T0057", "AML.T0062-PLUGIN"):
        assert technique_id in prompt
    assert COT_INSTRUCTION not in prompt


def test_chain_of_thought_appends_fixed_instruction():
    direct = system_prompt()
    cot = system_prompt(strategy=ReasoningStrategy.CHAIN_OF_THOUGHT)
    assert cot == direct + "\n" + COT_INSTRUCTION
    assert COT_INSTRUCTION == (
        "reason step by step about each component and flow before listing threats"
    )


# --- prompt building -------------------------------------------------------------


@pytest.mark.parametrize(
    ("score", "priority"),
    [(0.0, 50), (1.0, 60), (0.32, 53), (4.2, 90), (8.0, 90)],
)
def test_chunk_priority(score, priority):
    assert chunk_priority(score) == priority


def _result(doc_id: str, text: str, score: float, seq: int = 0) -> RetrievalResult:
    chunk = Chunk(doc_id=doc_id, seq=seq, text=text, vector=embed(text))
    return RetrievalResult(chunk=chunk, score=score)


def _base_tokens(model: DfdModel, user_prompt: str,
                 strategy: ReasoningStrategy = ReasoningStrategy.DIRECT) -> int:
    return (
        token_estimate(system_prompt(strategy=strategy))
        + token_estimate(user_prompt)
        + token_estimate(serialize_dfd(model))
    )


def test_bundle_without_retrieval(chatbot_model):
    bundle = build_prompt(chatbot_model, "find the threats", token_budget=4000)
    assert bundle.strategy is ReasoningStrategy.DIRECT
    assert [b.label for b in bundle.included_blocks] == ["data-flow diagram"]
    dfd_block = bundle.included_blocks[0]
    assert dfd_block.priority == 100
    assert dfd_block.text == serialize_dfd(chatbot_model)
    assert bundle.dropped_blocks == ()
    assert bundle.total_token_estimate == _base_tokens(chatbot_model, "find the threats")
    assert bundle.total_token_estimate <= bundle.token_budget


def test_large_budget_keeps_every_chunk_in_priority_order(chatbot_model):
    retrieved = [
        _result("reqs", "requirements text", 0.10),
        _result("design", "design text", 0.90),
        _result("log", "log text", 0.50),
    ]
    bundle = build_prompt(
        chatbot_model, "go", retrieved=retrieved, token_budget=50_000
    )
    assert bundle.dropped_blocks == ()
    assert [b.label for b in bundle.included_blocks] == [
        "data-flow diagram",
        "context design#0",
        "context log#0",
        "context reqs#0",
    ]
    priorities = [b.priority for b in bundle.included_blocks]
    assert priorities == sorted(priorities, reverse=True)


def test_equal_priority_keeps_retrieval_order(chatbot_model):
    retrieved = [
        _result("b-doc", "beta", 0.5),
        _result("a-doc", "alfa", 0.5),
    ]
    bundle = build_prompt(chatbot_model, "go", retrieved=retrieved, token_budget=50_000)
    assert [b.label for b in bundle.included_blocks[1:]] == [
        "context b-doc#0",
        "context a-doc#0",
    ]


def test_exact_mandatory_budget_drops_all_chunks(chatbot_model):
    user = "enumerate"
    base = _base_tokens(chatbot_model, user)
    retrieved = [_result("d1", "some context", 0.9), _result("d2", "more", 0.1)]
    bundle = build_prompt(chatbot_model, user, retrieved=retrieved, token_budget=base)
    assert [b.label for b in bundle.included_blocks] == ["data-flow diagram"]
    assert bundle.dropped_blocks == ("context d1#0", "context d2#0")
    assert bundle.total_token_estimate == base


def test_budget_below_mandatory_parts_is_an_error(chatbot_model):
    with pytest.raises(BudgetTooSmallError, match="budget is 1"):
        build_prompt(chatbot_model, "x", token_budget=1)


def test_dropping_is_a_priority_prefix(chatbot_model):
    user = "go"
    base = _base_tokens(chatbot_model, user)
    retrieved = [
        _result("hi", "x" * 40, 0.9),   # 10 tokens
        _result("mid", "y" * 8, 0.5),   # 2 tokens
        _result("low", "z" * 4, 0.1),   # 1 token — would fit, but comes
                                        # after a dropped block
    ]
    bundle = build_prompt(
        chatbot_model, user, retrieved=retrieved, token_budget=base + 11
    )
    assert [b.label for b in bundle.included_blocks] == [
        "data-flow diagram",
        "context hi#0",
    ]
    assert bundle.dropped_blocks == ("context mid#0", "context low#0")
    assert bundle.total_token_estimate == base + 10


def test_block_dropping_is_monotone_in_budget(chatbot_model):
    rng = random.Random(42)
    retrieved = [
        _result(f"d{i}", "w" * rng.randint(1, 60), rng.random()) for i in range(8)
    ]
    base = _base_tokens(chatbot_model, "go")
    previous: list[str] = []
    for budget in range(base, base + 80, 3):
        bundle = build_prompt(
            chatbot_model, "go", retrieved=retrieved, token_budget=budget
        )
        assert bundle.total_token_estimate <= budget
        kept = [b.label for b in bundle.included_blocks]
        assert kept[: len(previous)] == previous
        previous = kept


def test_render_user_content_labels_blocks(chatbot_model):
    retrieved = [_result("notes", "the store holds PII", 0.7)]
    bundle = build_prompt(chatbot_model, "List threats.", retrieved=retrieved,
                          token_budget=50_000)
    content = render_user_content(bundle)
    assert content.startswith("List threats.")
    assert "## data-flow diagram\nsystem \"ChatBot\"" in content
    assert "## context notes#0\nthe store holds PII" in content


# --- offline backend --------------------------------------------------------------


def test_offline_result_contract(chatbot_model):
    result = generate_offline(chatbot_model)
    assert result.backend == "offline"
    assert result.parse_diagnostics == ()
    assert result.document is not None
    assert result.raw_text == serialize_otm(result.document)
    assert validate_document(result.document) == []


def test_offline_document_mirrors_diagram(chatbot_model):
    doc = offline_document(chatbot_model)
    assert doc.project.id == "chatbot"
    assert doc.project.name == "ChatBot"
    assert [c.id for c in doc.components] == ["app", "history", "llm", "user"]
    assert [f.id for f in doc.dataflows] == ["f1", "f2", "f3", "f4"]
    llm = next(c for c in doc.components if c.id == "llm")
    assert llm.kind == "process"
    assert llm.tags == ("guardrails", "llm")


def test_offline_threats_one_to_one_with_rule_engine(chatbot_model):
    doc = offline_document(chatbot_model)
    findings = identify_threats(chatbot_model)
    assert len(doc.threats) == len(findings) == 38
    expected = {
        (
            f"t-{t.rule_id.lower()}-{'+'.join(t.subject_ids)}",
            t.title,
            frozenset(t.stride),
            t.owasp_id,
            t.atlas_id,
            t.likelihood,
            t.impact,
            tuple(sorted(t.subject_ids)),
        )
        for t in findings
    }
    actual = {
        (
            t.id,
            t.name,
            frozenset(t.stride),
            t.owasp_llm_id,
            t.atlas_technique_id,
            t.likelihood,
            t.impact,
            t.applies_to,
        )
        for t in doc.threats
    }
    assert actual == expected
    assert "t-r-llm01-indirect-llm" in {t.id for t in doc.threats}
    assert "t-r-selfrep-app+llm" in {t.id for t in doc.threats}
    assert "t-r-stride-s-user" in {t.id for t in doc.threats}


def test_offline_mitigations_cover_fired_llm_rules(chatbot_model):
    catalog = builtin_catalog()
    doc = offline_document(chatbot_model)
    assert [m.id for m in doc.mitigations] == [
        "m-r-jailbreak",
        "m-r-llm01-indirect",
        "m-r-llm02",
        "m-r-llm04",
        "m-r-llm05",
        "m-r-llm06",
        "m-r-llm09",
        "m-r-selfrep",
    ]
    indirect = next(m for m in doc.mitigations if m.id == "m-r-llm01-indirect")
    assert indirect.mitigates == ("t-r-llm01-indirect-llm",)
    template = catalog.mitigation_for_rule("R-LLM01-INDIRECT")
    assert indirect.name == template.name
    assert indirect.risk_reduction == template.risk_reduction


def test_offline_empty_model(chatbot_model):
    doc = offline_document(DfdModel("Nothing Here !", (), (), ()))
    assert doc.project.id == "nothing-here"
    assert doc.threats == ()
    assert doc.mitigations == ()
    assert validate_document(doc) == []


def test_offline_generation_is_deterministic(chatbot_model):
    first = generate_offline(chatbot_model)
    second = generate_offline(chatbot_model)
    assert first.raw_text == second.raw_text
    assert first.document == second.document


def test_offline_random_models_always_validate():
    catalog = builtin_catalog()
    for seed in range(25):
        model = random_model(random.Random(7000 + seed))
        doc = offline_document(model, catalog)
        assert validate_document(doc) == []
        findings = identify_threats(model, catalog)
        assert len(doc.threats) == len(findings)
        fired_with_template = {
            t.rule_id for t in findings
            if catalog.mitigation_for_rule(t.rule_id) is not None
        }
        assert {m.id for m in doc.mitigations} == {
            f"m-{rule_id.lower()}" for rule_id in fired_with_template
        }


# --- JSON extraction ---------------------------------------------------------------


@pytest.mark.parametrize(
    ("text", "expected"),
    [
        ('prefix {"a": 1} suffix', '{"a": 1}'),
        ('{"s": "{not json", "o": {"x": 1}}', '{"s": "{not json", "o": {"x": 1}}'),
        ('x { broken then {"ok": true} end', '{"ok": true}'),
        ("no braces here", None),
        ("[1, 2, 3]", None),
        ("{", None),
    ],
)
def test_extract_json_object(text, expected):
    assert extract_json_object(text) == expected


# --- remote backend ----------------------------------------------------------------


class FakeResponse:
    def __init__(self, status_code=200, payload=None):
        self.status_code = status_code
        self._payload = payload

    def json(self):
        if self._payload is None:
            raise ValueError("not json")
        return self._payload


def _ok(content) -> FakeResponse:
    return FakeResponse(payload={"choices": [{"message": {"content": content}}]})


class FakeSession:
    def __init__(self, script):
        self.script = list(script)
        self.calls: list[dict] = []

    def post(self, url, json=None, headers=None, timeout=None):
        self.calls.append(
            {"url": url, "json": json, "headers": headers, "timeout": timeout}
        )
        item = self.script.pop(0)
        if isinstance(item, Exception):
            raise item
        return item


def _client(script, **kwargs) -> tuple[RemoteLlmClient, FakeSession, list[float]]:
    session = FakeSession(script)
    sleeps: list[float] = []
    client = RemoteLlmClient(
        endpoint="http://llm.invalid/v1/chat",
        model="tm-model",
        session=session,
        sleeper=sleeps.append,
        **kwargs,
    )
    return client, session, sleeps


def test_remote_client_request_shape():
    client, session, sleeps = _client([_ok("hi")], auth_token="sekret")
    assert client.complete("sys", "usr") == "hi"
    assert sleeps == []
    (call,) = session.calls
    assert call["url"] == "http://llm.invalid/v1/chat"
    assert call["json"] == {
        "model": "tm-model",
        "messages": [
            {"role": "system", "content": "sys"},
            {"role": "user", "content": "usr"},
        ],
        "temperature": 0,
    }
    assert call["headers"]["Authorization"] == "Bearer sekret"


def test_remote_client_omits_auth_header_without_token():
    client, session, _ = _client([_ok("hi")])
    client.complete("s", "u")
    assert "Authorization" not in session.calls[0]["headers"]


def test_remote_client_retries_with_backoff_then_succeeds():
    client, session, sleeps = _client(
        [
            requests.ConnectionError("refused"),
            FakeResponse(status_code=500),
            _ok("finally"),
        ]
    )
    assert client.complete("s", "u") == "finally"
    assert len(session.calls) == 3
    assert sleeps == [1.0, 2.0]


def test_remote_client_fails_after_three_attempts():
    client, session, sleeps = _client([FakeResponse(status_code=503)] * 3)
    with pytest.raises(RemoteLlmError, match="after 3 attempts: status 503"):
        client.complete("s", "u")
    assert len(session.calls) == 3
    assert sleeps == [1.0, 2.0]


def test_remote_client_treats_malformed_body_as_failure():
    client, _, sleeps = _client([FakeResponse(payload={"nope": 1}), _ok("ok")])
    assert client.complete("s", "u") == "ok"
    assert sleeps == [1.0]


class StubCompletion:
    """Duck-typed client whose reply is fixed."""

    def __init__(self, content):
        self.content = content

    def complete(self, system, user):
        if isinstance(self.content, Exception):
            raise self.content
        return self.content


def _bundle(model) -> PromptBundle:
    return build_prompt(model, "list threats", token_budget=50_000)


def test_generate_remote_with_valid_document(chatbot_model):
    text = serialize_otm(offline_document(chatbot_model))
    result = generate_remote(_bundle(chatbot_model), StubCompletion(text))
    assert result.backend == "remote"
    assert result.parse_diagnostics == ()
    assert result.document == offline_document(chatbot_model)
    assert result.raw_text == text


def test_generate_remote_extracts_document_from_prose(chatbot_model):
    text = serialize_otm(offline_document(chatbot_model))
    wrapped = "Sure! Here is the model you asked for:\n" + text + "\nLet me know."
    result = generate_remote(_bundle(chatbot_model), StubCompletion(wrapped))
    assert result.document == offline_document(chatbot_model)
    assert result.raw_text == wrapped


def test_generate_remote_reports_validation_diagnostics(chatbot_model):
    bad = json.dumps({
        "otmVersion": "0.2.0-threomolia",
        "project": {"id": "x", "name": "X"},
        "components": [],
        "dataflows": [],
        "threats": [
            {
                "id": "t", "name": "n", "description": "d",
                "strideCategories": ["Tampering"], "likelihood": 7, "impact": 2,
                "appliesTo": ["ghost"],
            }
        ],
        "mitigations": [],
    })
    result = generate_remote(_bundle(chatbot_model), StubCompletion(bad))
    assert result.document is None
    assert "threats[0].likelihood: must be between 1 and 5" in result.parse_diagnostics
    assert any("appliesTo" in d for d in result.parse_diagnostics)


def test_generate_remote_with_no_json_at_all(chatbot_model):
    result = generate_remote(
        _bundle(chatbot_model), StubCompletion("I cannot answer that.")
    )
    assert result.document is None
    assert result.parse_diagnostics == ("no JSON object found in model reply",)


def test_generate_remote_propagates_transport_failure(chatbot_model):
    with pytest.raises(RemoteLlmError):
        generate_remote(
            _bundle(chatbot_model), StubCompletion(RemoteLlmError("down"))
        )
