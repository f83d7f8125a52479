#!/usr/bin/env python3
"""Export canonical API payloads as JSON fixtures for the web client tests.

Runs the offline pipeline on the bundled chat-bot sample and writes the
exact bodies the HTTP API would return (model document, QA report,
metrics report) plus the DFD source text and an expected-count manifest.
The web client's test suite replays these instead of talking to a live
server, so both sides agree on one frozen contract.

    python3 scripts/export_ui_fixtures.py
    python3 scripts/export_ui_fixtures.py --out somewhere/else
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

REPO_ROOT = Path(__file__).resolve().parent.parent
sys.path.insert(0, str(REPO_ROOT / "src"))

from threatgen.catalog import builtin_catalog  # noqa: E402
from threatgen.dfd import parse_dfd  # noqa: E402
from threatgen.generation import generate_offline  # noqa: E402
from threatgen.metrics import compute_metrics, metrics_to_dict  # noqa: E402
from threatgen.otm import serialize_otm  # noqa: E402
from threatgen.qa import report_to_dict, run_qa, select_tests  # noqa: E402


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument(
        "--dfd", default=str(REPO_ROOT / "samples" / "chatbot.dfd")
    )
    parser.add_argument(
        "--out",
        default=str(REPO_ROOT / "frontend" / "tests" / "fixtures"),
        help="fixture directory (default: frontend/tests/fixtures)",
    )
    args = parser.parse_args()

    text = Path(args.dfd).read_text(encoding="utf-8")
    model = parse_dfd(text)
    catalog = builtin_catalog()
    document = generate_offline(model, catalog).document
    qa = report_to_dict(
        run_qa(document, model, select_tests(model, "all", catalog=catalog), catalog)
    )
    metrics = metrics_to_dict(compute_metrics(document, model, catalog=catalog))

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    (out / "chatbot.dfd").write_text(text, encoding="utf-8")
    (out / "model.json").write_text(serialize_otm(document), encoding="utf-8")
    for name, payload in (("qa.json", qa), ("metrics.json", metrics)):
        (out / name).write_text(
            json.dumps(payload, indent=2, ensure_ascii=False) + "\n",
            encoding="utf-8",
        )
    manifest = {
        "elements": len(model.elements),
        "flows": len(model.flows),
        "boundaries": len(model.boundaries),
        "threats": len(document.threats),
        "mitigations": len(document.mitigations),
        "healthScore": qa["healthScore"],
    }
    (out / "expected_counts.json").write_text(
        json.dumps(manifest, indent=2) + "\n", encoding="utf-8"
    )

    for name in (
        "chatbot.dfd", "model.json", "qa.json", "metrics.json",
        "expected_counts.json",
    ):
        print(f"wrote {out / name}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
