#!/usr/bin/env python3
"""End-to-end offline walkthrough: parse, lint, generate, QA, metrics.

Runs the whole pipeline on a DFD file (the bundled chat-bot sample by
default) and prints every artifact a service client would see.  Purely
offline and deterministic; handy as a smoke test and as executable
documentation.

    python3 scripts/demo_pipeline.py
    python3 scripts/demo_pipeline.py --dfd my-system.dfd --out model.otm.json
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

REPO_ROOT = Path(__file__).resolve().parent.parent
sys.path.insert(0, str(REPO_ROOT / "src"))

from threatgen.catalog import builtin_catalog  # noqa: E402
from threatgen.dfd import parse_dfd, validate_dfd  # noqa: E402
from threatgen.generation import generate_offline  # noqa: E402
from threatgen.metrics import compute_metrics, metrics_to_dict  # noqa: E402
from threatgen.otm import serialize_otm  # noqa: E402
from threatgen.qa import run_qa, select_tests  # noqa: E402


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument(
        "--dfd",
        default=str(REPO_ROOT / "samples" / "chatbot.dfd"),
        help="DFD file to model (default: bundled chat-bot sample)",
    )
    parser.add_argument("--out", help="also write the document to this path")
    args = parser.parse_args()

    text = Path(args.dfd).read_text(encoding="utf-8")
    model = parse_dfd(text)
    catalog = builtin_catalog()

    print(f"== system: {model.system_name} ==")
    print(
        f"{len(model.elements)} elements, {len(model.flows)} flows, "
        f"{len(model.boundaries)} trust boundaries"
    )
    for warning in validate_dfd(model):
        print(f"lint: [{warning.code}] {warning.message}")

    result = generate_offline(model, catalog)
    document = result.document
    print(f"\n== generated document ==")
    print(f"threats: {len(document.threats)}")
    print(f"mitigations: {len(document.mitigations)}")
    by_rule: dict[str, int] = {}
    for threat in document.threats:
        prefix = threat.id.rsplit("-", 1)[0]
        by_rule[prefix] = by_rule.get(prefix, 0) + 1
    for prefix in sorted(by_rule):
        print(f"  {prefix:<22} x{by_rule[prefix]}")

    report = run_qa(
        document, model, select_tests(model, "all", catalog=catalog), catalog
    )
    print(f"\n== QA ==")
    print(f"syntactic: {'valid' if report.syntactic_valid else 'INVALID'}")
    passed = sum(1 for r in report.mr_results if r.passed)
    print(f"metamorphic: {passed}/{len(report.mr_results)} passed")
    for r in report.mr_results:
        if not r.passed:
            print(f"  FAIL {r.relation}: {r.instance_description}")
    print(f"health score: {report.health_score}")

    metrics = metrics_to_dict(compute_metrics(document, model, catalog=catalog))
    notes = metrics.pop("notes")
    print(f"\n== metrics ==")
    width = max(len(k) for k in metrics)
    for key, value in metrics.items():
        shown = f"{value:.6f}" if isinstance(value, float) else str(value)
        print(f"{key:<{width}}  {shown}")
    for note in notes:
        print(f"note: {note}")

    if args.out:
        Path(args.out).write_text(serialize_otm(document), encoding="utf-8")
        print(f"\nwrote {args.out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
