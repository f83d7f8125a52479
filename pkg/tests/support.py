"""Seeded random generators shared by the test suite.

Everything here takes an explicit ``random.Random`` so corpora are
reproducible.  Models are built through the validating ``DfdModel``
constructor, so whatever comes out is valid by construction.
"""

from __future__ import annotations

import random
import string

from threatgen.dfd import DataFlow, DfdElement, DfdModel, ElementKind, TrustBoundary

TAG_POOL = (
    "llm",
    "training-data",
    "sensitive",
    "plugin",
    "privileged",
    "model-artifact",
    "guardrails",
    "sanitizer",
    "audited",  # unknown to the engine on purpose
)

_NAME_CHARS = string.ascii_letters + string.digits + " .,:;!?'()/+-_&"
_TRICKY = ['"', "\\", "\n", "\t", "\r", "é", "ü", "→"]


def random_name(rng: random.Random) -> str:
    n = rng.randint(0, 24)
    chars = [rng.choice(_NAME_CHARS) for _ in range(n)]
    # Sprinkle in characters that exercise escaping.
    for _ in range(rng.randint(0, 2)):
        chars.insert(rng.randint(0, len(chars)), rng.choice(_TRICKY))
    return "".join(chars)


def random_id(rng: random.Random, index: int) -> str:
    body = "".join(rng.choice("abcdefghijklmnopqrstuvwxyz0123456789_-") for _ in range(rng.randint(0, 5)))
    return f"{rng.choice(string.ascii_lowercase)}{body}_{index}"


def random_model(
    rng: random.Random,
    max_elements: int = 8,
    max_flows: int | None = None,
    llm_bias: float = 0.45,
) -> DfdModel:
    """A random valid model with 1..max_elements elements.

    ``llm_bias`` is the probability that at least one element is forced to
    carry the ``llm`` tag, so rule-engine tests see both tagged and
    untagged graphs.
    """
    n = rng.randint(1, max_elements)
    elements = []
    ids = []
    for i in range(n):
        eid = random_id(rng, i)
        ids.append(eid)
        tags = {t for t in TAG_POOL if rng.random() < 0.12}
        elements.append(
            DfdElement(
                id=eid,
                name=random_name(rng),
                kind=rng.choice(list(ElementKind)),
                tags=frozenset(tags),
            )
        )
    if rng.random() < llm_bias:
        i = rng.randrange(n)
        e = elements[i]
        elements[i] = DfdElement(e.id, e.name, e.kind, e.tags | {"llm"}, None)

    limit = max_flows if max_flows is not None else min(2 * n, 10)
    flows = []
    for j in range(rng.randint(0, limit)):
        flows.append(
            DataFlow(
                id=f"f{j}",
                source=rng.choice(ids),
                target=rng.choice(ids),
                label=random_name(rng),
                crosses_boundary=rng.random() < 0.25,
            )
        )

    boundaries = []
    if n >= 2 and rng.random() < 0.5:
        pool = ids[:]
        rng.shuffle(pool)
        b_count = rng.randint(1, min(2, n))
        taken = 0
        for b in range(b_count):
            size = rng.randint(1, max(1, (n - taken) // b_count or 1))
            members = pool[taken : taken + size]
            taken += size
            if members:
                boundaries.append(
                    TrustBoundary(
                        id=f"zone{b}", name=random_name(rng), members=frozenset(members)
                    )
                )
    owner = {m: b.id for b in boundaries for m in b.members}
    elements = [
        DfdElement(e.id, e.name, e.kind, e.tags, owner.get(e.id)) for e in elements
    ]

    return DfdModel(
        system_name=random_name(rng),
        elements=tuple(elements),
        flows=tuple(flows),
        boundaries=tuple(boundaries),
    )


WORDS = (
    "prompt model user data store token context request response filter "
    "guard output input chain agent plugin memory index vector risk threat "
    "boundary channel audit replay cache policy secret key session log"
).split()


def random_text(rng: random.Random, max_words: int = 120) -> str:
    return " ".join(rng.choice(WORDS) for _ in range(rng.randint(1, max_words)))
