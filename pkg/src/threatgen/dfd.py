"""Data-flow diagram model and its line-oriented text format.

A model is a system name plus three ordered collections: elements
(external entities, processes, data stores), directed data flows between
elements, and trust boundaries grouping elements.  The text format is one
statement per line::

    system "ChatBot"
    external_entity user "End User"
    process llm "Chat LLM" tags[llm,guardrails]
    data_store history "Conversation Store" tags[sensitive]
    flow f1 user -> llm : "user message" crosses_boundary
    boundary internet "Internet" contains[user]

``#`` starts a comment that runs to the end of the line.  Identifiers
match ``[a-z][a-z0-9_-]*``; strings are double-quoted with backslash
escapes.  ``parse_dfd`` and ``serialize_dfd`` are inverses on canonical
text, and ``parse_dfd(serialize_dfd(m)) == m`` for every valid model.
"""

from __future__ import annotations

import enum
import re
from dataclasses import dataclass

__all__ = [
    "ElementKind",
    "DfdElement",
    "DataFlow",
    "TrustBoundary",
    "DfdModel",
    "DfdDiagnostic",
    "DfdSyntaxError",
    "DfdSemanticError",
    "KNOWN_TAGS",
    "parse_dfd",
    "serialize_dfd",
    "validate_dfd",
]

ID_PATTERN = re.compile(r"[a-z][a-z0-9_-]*")

#: Tags with built-in meaning to the rule engine.  Unknown tags are kept on
#: the model but trigger no rules.
KNOWN_TAGS = frozenset(
    {
        "llm",
        "training-data",
        "sensitive",
        "plugin",
        "privileged",
        "model-artifact",
        "guardrails",
        "sanitizer",
    }
)


class DfdSyntaxError(Exception):
    """Raised when the text does not match the grammar.

    Carries the 1-based ``line`` and ``column`` of the offending token.
    """

    def __init__(self, line: int, column: int, message: str):
        super().__init__(f"line {line}, column {column}: {message}")
        self.line = line
        self.column = column
        self.message = message


class DfdSemanticError(Exception):
    """Raised for well-formed text that violates a model invariant.

    ``entity_id`` names the identifier at fault (duplicate id, unknown
    flow endpoint, element claimed by two boundaries, ...).
    """

    def __init__(self, entity_id: str, message: str):
        super().__init__(f"{entity_id}: {message}")
        self.entity_id = entity_id
        self.message = message


class ElementKind(enum.Enum):
    EXTERNAL_ENTITY = "external_entity"
    PROCESS = "process"
    DATA_STORE = "data_store"


def _check_id(token: str, what: str) -> None:
    if not isinstance(token, str) or not ID_PATTERN.fullmatch(token):
        raise DfdSemanticError(str(token), f"invalid {what} identifier")


@dataclass(frozen=True)
class DfdElement:
    """A node of the diagram.  ``boundary`` is the owning boundary id, if any."""

    id: str
    name: str
    kind: ElementKind
    tags: frozenset[str] = frozenset()
    boundary: str | None = None

    def __post_init__(self):
        _check_id(self.id, "element")
        object.__setattr__(self, "tags", frozenset(self.tags))
        for tag in self.tags:
            _check_id(tag, "tag")


@dataclass(frozen=True)
class DataFlow:
    """A directed edge from ``source`` to ``target`` (element ids)."""

    id: str
    source: str
    target: str
    label: str = ""
    crosses_boundary: bool = False

    def __post_init__(self):
        _check_id(self.id, "flow")


@dataclass(frozen=True)
class TrustBoundary:
    id: str
    name: str
    members: frozenset[str] = frozenset()

    def __post_init__(self):
        _check_id(self.id, "boundary")
        object.__setattr__(self, "members", frozenset(self.members))


@dataclass(frozen=True)
class DfdModel:
    """An immutable, always-valid model.

    Construction re-checks every invariant: ids are unique across all three
    collections (threat subjects reference ids, so sharing an id between an
    element and a flow would make those references ambiguous), flows point at
    existing elements, boundary members exist, an element belongs to at most
    one boundary, and each element's ``boundary`` field agrees with the
    boundary membership lists.
    """

    system_name: str
    elements: tuple[DfdElement, ...] = ()
    flows: tuple[DataFlow, ...] = ()
    boundaries: tuple[TrustBoundary, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "elements", tuple(self.elements))
        object.__setattr__(self, "flows", tuple(self.flows))
        object.__setattr__(self, "boundaries", tuple(self.boundaries))

        seen: set[str] = set()
        for item in (*self.elements, *self.flows, *self.boundaries):
            if item.id in seen:
                raise DfdSemanticError(item.id, "duplicate identifier")
            seen.add(item.id)

        element_ids = {e.id for e in self.elements}
        for flow in self.flows:
            for endpoint in (flow.source, flow.target):
                if endpoint not in element_ids:
                    raise DfdSemanticError(
                        endpoint, f"flow {flow.id} references unknown element"
                    )

        owner: dict[str, str] = {}
        for boundary in self.boundaries:
            for member in boundary.members:
                if member not in element_ids:
                    raise DfdSemanticError(
                        member, f"boundary {boundary.id} contains unknown element"
                    )
                if member in owner:
                    raise DfdSemanticError(
                        member,
                        f"element in both boundaries {owner[member]} and {boundary.id}",
                    )
                owner[member] = boundary.id
        for element in self.elements:
            if element.boundary != owner.get(element.id):
                raise DfdSemanticError(
                    element.id,
                    "element boundary field does not match boundary membership",
                )

    def element(self, element_id: str) -> DfdElement:
        for e in self.elements:
            if e.id == element_id:
                return e
        raise KeyError(element_id)

    def flow(self, flow_id: str) -> DataFlow:
        for f in self.flows:
            if f.id == flow_id:
                return f
        raise KeyError(flow_id)


@dataclass(frozen=True)
class DfdDiagnostic:
    """A non-fatal finding from :func:`validate_dfd`."""

    code: str
    subject_id: str
    message: str


# --- lexer ---------------------------------------------------------------

_ESCAPES = {'"': '"', "\\": "\\", "n": "\n", "t": "\t", "r": "\r"}
_ESCAPES_INV = {"\\": "\\\\", '"': '\\"', "\n": "\\n", "\t": "\\t", "\r": "\\r"}
# Characters that must never appear raw inside a serialized string: anything
# a text editor or line splitter might treat as a line break, plus the rest
# of the control range.  They round-trip through \uXXXX escapes.
_FORCE_UNICODE_ESCAPE = frozenset(
    {chr(c) for c in range(0x20)} | {"\x7f", "\x85", " ", " "}
)


@dataclass(frozen=True)
class _Token:
    kind: str  # "id" | "string" | "symbol" | "end"
    value: str
    line: int
    column: int


def _lex_line(text: str, line_no: int) -> list[_Token]:
    tokens: list[_Token] = []
    i = 0
    n = len(text)
    while i < n:
        ch = text[i]
        if ch in " \t":
            i += 1
            continue
        if ch == "#":
            break
        column = i + 1
        if ch == '"':
            out: list[str] = []
            i += 1
            while True:
                if i >= n:
                    raise DfdSyntaxError(line_no, column, "unterminated string")
                c = text[i]
                if c == '"':
                    i += 1
                    break
                if c == "\\":
                    if i + 1 >= n:
                        raise DfdSyntaxError(line_no, column, "unterminated string")
                    esc = text[i + 1]
                    if esc == "u":
                        hex_digits = text[i + 2 : i + 6]
                        if len(hex_digits) != 4 or any(
                            d not in "0123456789abcdefABCDEF" for d in hex_digits
                        ):
                            raise DfdSyntaxError(
                                line_no, i + 2, "\\u escape needs four hex digits"
                            )
                        out.append(chr(int(hex_digits, 16)))
                        i += 6
                    elif esc in _ESCAPES:
                        out.append(_ESCAPES[esc])
                        i += 2
                    else:
                        raise DfdSyntaxError(
                            line_no, i + 2, f"unknown escape '\\{esc}'"
                        )
                else:
                    out.append(c)
                    i += 1
            tokens.append(_Token("string", "".join(out), line_no, column))
        elif ch == "-" and text[i : i + 2] == "->":
            tokens.append(_Token("symbol", "->", line_no, column))
            i += 2
        elif ch in ":[],":
            tokens.append(_Token("symbol", ch, line_no, column))
            i += 1
        else:
            m = ID_PATTERN.match(text, i)
            if not m:
                raise DfdSyntaxError(line_no, column, f"unexpected character {ch!r}")
            tokens.append(_Token("id", m.group(), line_no, column))
            i = m.end()
    tokens.append(_Token("end", "", line_no, len(text) + 1))
    return tokens


class _LineParser:
    def __init__(self, tokens: list[_Token]):
        self.tokens = tokens
        self.pos = 0

    def peek(self) -> _Token:
        return self.tokens[self.pos]

    def take(self) -> _Token:
        tok = self.tokens[self.pos]
        if tok.kind != "end":
            self.pos += 1
        return tok

    def expect_id(self, what: str = "identifier") -> _Token:
        tok = self.take()
        if tok.kind != "id":
            raise DfdSyntaxError(tok.line, tok.column, f"expected {what}")
        return tok

    def expect_string(self) -> _Token:
        tok = self.take()
        if tok.kind != "string":
            raise DfdSyntaxError(tok.line, tok.column, "expected quoted string")
        return tok

    def expect_symbol(self, symbol: str) -> _Token:
        tok = self.take()
        if tok.kind != "symbol" or tok.value != symbol:
            raise DfdSyntaxError(tok.line, tok.column, f"expected '{symbol}'")
        return tok

    def expect_end(self) -> None:
        tok = self.peek()
        if tok.kind != "end":
            raise DfdSyntaxError(
                tok.line, tok.column, f"unexpected trailing input {tok.value!r}"
            )

    def id_list(self) -> list[str]:
        """Parse ``[ id ("," id)* ]`` and return the ids."""
        self.expect_symbol("[")
        ids = [self.expect_id().value]
        while True:
            tok = self.peek()
            if tok.kind == "symbol" and tok.value == ",":
                self.take()
                ids.append(self.expect_id().value)
            else:
                break
        self.expect_symbol("]")
        return ids


_ELEMENT_KEYWORDS = {kind.value: kind for kind in ElementKind}


def parse_dfd(text: str) -> DfdModel:
    """Parse model text.

    Raises :class:`DfdSyntaxError` for grammar violations (with position)
    and :class:`DfdSemanticError` for naming violations (with the offending
    identifier).  Order of declaration is preserved per collection.
    """
    elements: list[DfdElement] = []
    flows: list[DataFlow] = []
    raw_boundaries: list[tuple[TrustBoundary, list[str]]] = []
    system_name: str | None = None

    lines = text.split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    for line_no, raw in enumerate(lines, start=1):
        if raw.endswith("\r"):
            raw = raw[:-1]
        tokens = _lex_line(raw, line_no)
        if tokens[0].kind == "end":
            continue
        p = _LineParser(tokens)
        head = p.take()
        if head.kind != "id":
            raise DfdSyntaxError(head.line, head.column, "expected statement keyword")

        if system_name is None:
            if head.value != "system":
                raise DfdSyntaxError(
                    head.line, head.column, "first statement must be 'system'"
                )
            system_name = p.expect_string().value
            p.expect_end()
            continue

        if head.value == "system":
            raise DfdSyntaxError(head.line, head.column, "duplicate 'system' statement")
        elif head.value in _ELEMENT_KEYWORDS:
            ident = p.expect_id("element id").value
            name = p.expect_string().value
            tags: list[str] = []
            tok = p.peek()
            if tok.kind == "id" and tok.value == "tags":
                p.take()
                tags = p.id_list()
            p.expect_end()
            elements.append(
                DfdElement(
                    id=ident,
                    name=name,
                    kind=_ELEMENT_KEYWORDS[head.value],
                    tags=frozenset(tags),
                )
            )
        elif head.value == "flow":
            ident = p.expect_id("flow id").value
            source = p.expect_id("source element id").value
            p.expect_symbol("->")
            target = p.expect_id("target element id").value
            p.expect_symbol(":")
            label = p.expect_string().value
            crosses = False
            tok = p.peek()
            if tok.kind == "id" and tok.value == "crosses_boundary":
                p.take()
                crosses = True
            p.expect_end()
            flows.append(
                DataFlow(
                    id=ident,
                    source=source,
                    target=target,
                    label=label,
                    crosses_boundary=crosses,
                )
            )
        elif head.value == "boundary":
            ident = p.expect_id("boundary id").value
            name = p.expect_string().value
            key = p.expect_id()
            if key.value != "contains":
                raise DfdSyntaxError(key.line, key.column, "expected 'contains'")
            members = p.id_list()
            p.expect_end()
            raw_boundaries.append(
                (TrustBoundary(id=ident, name=name, members=frozenset(members)), members)
            )
        else:
            raise DfdSyntaxError(
                head.line, head.column, f"unknown statement keyword {head.value!r}"
            )

    if system_name is None:
        raise DfdSyntaxError(1, 1, "empty document: missing 'system' statement")

    # Fill in each element's owning boundary before the model validates the
    # whole structure.
    owner: dict[str, str] = {}
    for boundary, members in raw_boundaries:
        for member in members:
            if member not in owner:
                owner[member] = boundary.id
    elements = [
        DfdElement(e.id, e.name, e.kind, e.tags, owner.get(e.id)) for e in elements
    ]

    return DfdModel(
        system_name=system_name,
        elements=tuple(elements),
        flows=tuple(flows),
        boundaries=tuple(b for b, _ in raw_boundaries),
    )


def _quote(value: str) -> str:
    out = []
    for c in value:
        if c in _ESCAPES_INV:
            out.append(_ESCAPES_INV[c])
        elif c in _FORCE_UNICODE_ESCAPE:
            out.append(f"\\u{ord(c):04x}")
        else:
            out.append(c)
    return '"' + "".join(out) + '"'


def serialize_dfd(model: DfdModel) -> str:
    """Render canonical text: system line, elements, flows, boundaries.

    Tag and member lists are emitted sorted so equal models always produce
    identical bytes.  Output ends with a newline.
    """
    lines = [f"system {_quote(model.system_name)}"]
    for e in model.elements:
        line = f"{e.kind.value} {e.id} {_quote(e.name)}"
        if e.tags:
            line += f" tags[{','.join(sorted(e.tags))}]"
        lines.append(line)
    for f in model.flows:
        line = f"flow {f.id} {f.source} -> {f.target} : {_quote(f.label)}"
        if f.crosses_boundary:
            line += " crosses_boundary"
        lines.append(line)
    for b in model.boundaries:
        lines.append(f"boundary {b.id} {_quote(b.name)} contains[{','.join(sorted(b.members))}]")
    return "\n".join(lines) + "\n"


def validate_dfd(model: DfdModel) -> list[DfdDiagnostic]:
    """Lint-style checks that do not make a model invalid.

    Reports isolated elements (no incident flow), flows marked
    ``crosses_boundary`` whose two endpoints sit inside the same boundary,
    and models with no ``llm``-tagged element.  Warning order: isolated
    elements in declaration order, then flow findings, then the model-wide
    finding.
    """
    diagnostics: list[DfdDiagnostic] = []
    touched = {f.source for f in model.flows} | {f.target for f in model.flows}
    for element in model.elements:
        if element.id not in touched:
            diagnostics.append(
                DfdDiagnostic(
                    "isolated-element",
                    element.id,
                    f"element {element.id} has no incoming or outgoing flow",
                )
            )
    boundary_of = {e.id: e.boundary for e in model.elements}
    for flow in model.flows:
        same = (
            boundary_of[flow.source] is not None
            and boundary_of[flow.source] == boundary_of[flow.target]
        )
        if flow.crosses_boundary and same:
            diagnostics.append(
                DfdDiagnostic(
                    "redundant-crossing",
                    flow.id,
                    f"flow {flow.id} is marked crosses_boundary but both endpoints "
                    f"are inside boundary {boundary_of[flow.source]}",
                )
            )
    if not any("llm" in e.tags for e in model.elements):
        diagnostics.append(
            DfdDiagnostic(
                "no-llm-element",
                "",
                "model has no element tagged 'llm'",
            )
        )
    return diagnostics
