#!/usr/bin/env python3
"""Rule-trigger frequency sweep over randomly generated architectures.

Generates N random DFDs, runs the identification engine on each, and
prints how often every rule fires, plus summary statistics for threat
counts and offline health scores.  Useful for judging how architecture
shape (size, LLM density) moves the threat surface.

    python3 scripts/rule_sweep.py
    python3 scripts/rule_sweep.py --models 2000 --max-elements 12 --llm-rate 0.8
"""

from __future__ import annotations

import argparse
import random
import statistics
import sys
from pathlib import Path

REPO_ROOT = Path(__file__).resolve().parent.parent
sys.path.insert(0, str(REPO_ROOT / "src"))

from threatgen.catalog import builtin_catalog  # noqa: E402
from threatgen.dfd import (  # noqa: E402
    DataFlow,
    DfdElement,
    DfdModel,
    ElementKind,
)
from threatgen.generation import generate_offline  # noqa: E402
from threatgen.qa import run_qa, select_tests  # noqa: E402
from threatgen.rules import identify_threats  # noqa: E402

TAGS = ("llm", "guardrails", "plugin", "sensitive", "training", "rate-limited")


def random_dfd(rng: random.Random, max_elements: int, llm_rate: float) -> DfdModel:
    n = rng.randint(1, max_elements)
    elements = []
    for i in range(n):
        tags = {t for t in TAGS if rng.random() < 0.15}
        if i == 0 and rng.random() < llm_rate:
            tags.add("llm")
        elements.append(
            DfdElement(
                id=f"e{i}",
                name=f"Element {i}",
                kind=rng.choice(list(ElementKind)),
                tags=frozenset(tags),
            )
        )
    flows = tuple(
        DataFlow(
            id=f"f{j}",
            source=f"e{rng.randrange(n)}",
            target=f"e{rng.randrange(n)}",
            label=f"flow {j}",
            crosses_boundary=rng.random() < 0.25,
        )
        for j in range(rng.randint(0, 2 * n))
    )
    return DfdModel(
        system_name="sweep", elements=tuple(elements), flows=flows, boundaries=()
    )


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--models", type=int, default=500)
    parser.add_argument("--max-elements", type=int, default=8)
    parser.add_argument(
        "--llm-rate",
        type=float,
        default=0.5,
        help="probability that a model contains at least one llm-tagged element",
    )
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()

    rng = random.Random(args.seed)
    catalog = builtin_catalog()
    fired: dict[str, int] = {}
    threat_counts: list[int] = []
    healths: list[int] = []

    for _ in range(args.models):
        model = random_dfd(rng, args.max_elements, args.llm_rate)
        threats = identify_threats(model, catalog)
        threat_counts.append(len(threats))
        for rule_id in {t.rule_id for t in threats}:
            fired[rule_id] = fired.get(rule_id, 0) + 1
        document = generate_offline(model, catalog).document
        report = run_qa(
            document, model, select_tests(model, "all", catalog=catalog), catalog
        )
        healths.append(report.health_score)

    print(f"models: {args.models}  (seed {args.seed}, "
          f"max elements {args.max_elements}, llm rate {args.llm_rate})")
    print(f"\nrule                fired   share")
    for rule_id in sorted(fired):
        share = fired[rule_id] / args.models
        print(f"{rule_id:<18} {fired[rule_id]:>6}   {share:6.1%}")

    print(f"\nthreats per model: min {min(threat_counts)}  "
          f"median {statistics.median(threat_counts):g}  "
          f"mean {statistics.fmean(threat_counts):.1f}  max {max(threat_counts)}")
    print(f"health score:      min {min(healths)}  "
          f"median {statistics.median(healths):g}  "
          f"mean {statistics.fmean(healths):.1f}  max {max(healths)}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
