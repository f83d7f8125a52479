"""Command-line front end: generate, qa, metrics, validate, serve.

Offline invocations are bit-reproducible: identical inputs produce
identical stdout and identical output files, so the tool can gate CI
(``generate --min-health``) without flaky diffs.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from threatgen.catalog import builtin_catalog
from threatgen.config import ConfigError, load_config
from threatgen.dfd import (
    DfdModel,
    DfdSemanticError,
    DfdSyntaxError,
    parse_dfd,
    validate_dfd,
)
from threatgen.generation import (
    BudgetTooSmallError,
    ReasoningStrategy,
    RemoteLlmClient,
    RemoteLlmError,
    build_prompt,
    generate_offline,
    generate_remote,
)
from threatgen.metrics import ReferenceMismatchError, compute_metrics, metrics_to_dict
from threatgen.otm import (
    OtmDocument,
    OtmParseError,
    OtmValidationError,
    parse_otm,
    serialize_otm,
)
from threatgen.qa import report_to_dict, run_qa, select_tests
from threatgen.rag import (
    SourceDocument,
    UnsupportedDocumentError,
    VectorIndex,
    default_weight,
    load_text_file,
    retrieve,
)

__all__ = ["main"]

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_INPUT = 2
EXIT_QA_GATE = 3
EXIT_REMOTE = 4

_EXIT_CODE_DOC = """\
exit codes:
  0  success
  1  usage error
  2  input parse or validation failure
  3  QA gate failure (health score below --min-health)
  4  remote backend failure
"""


class _Parser(argparse.ArgumentParser):
    """argparse flavor whose usage errors exit 1, not 2."""

    def error(self, message: str) -> None:  # noqa: A003 - argparse API
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _read_text(path: str) -> str:
    if path == "-":
        return sys.stdin.read()
    return Path(path).read_text(encoding="utf-8")


def _read_dfd(path: str) -> DfdModel:
    return parse_dfd(_read_text(path))


def _read_otm(path: str) -> OtmDocument:
    return parse_otm(_read_text(path))


def _qa_lines(report_dict: dict) -> list[str]:
    results = report_dict["mrResults"]
    passed = sum(1 for r in results if r["passed"])
    lines = [
        f"syntactic: {'valid' if report_dict['syntacticValid'] else 'invalid'}",
        f"mr: {passed}/{len(results)} passed",
    ]
    lines.extend(
        f"  FAIL {r['relation']}: {r['instanceDescription']}"
        for r in results
        if not r["passed"]
    )
    lines.append(f"componentCoverage: {report_dict['componentCoverage']:.6f}")
    lines.append(f"mitigationCoverage: {report_dict['mitigationCoverage']:.6f}")
    lines.append(f"health: {report_dict['healthScore']}")
    return lines


def _corpus_from_dir(directory: str) -> list[SourceDocument]:
    docs = []
    for path in sorted(Path(directory).iterdir()):
        if not path.is_file():
            continue
        try:
            text = load_text_file(path)
        except UnsupportedDocumentError:
            print(f"skipping {path.name}: only .txt and .md are read", file=sys.stderr)
            continue
        docs.append(
            SourceDocument(
                id=path.name,
                kind="other",
                title=path.name,
                text=text,
                weight=default_weight("other"),
            )
        )
    return docs


def cmd_generate(args: argparse.Namespace) -> int:
    if args.k < 0:
        print("error: --k must be >= 0", file=sys.stderr)
        return EXIT_USAGE
    model = _read_dfd(args.dfd)
    catalog = builtin_catalog()
    config = load_config()

    retrieved = ()
    if args.docs and args.k > 0:
        index = VectorIndex()
        for doc in _corpus_from_dir(args.docs):
            index.add_document(doc)
        if len(index):
            retrieved = retrieve(index, args.prompt, args.k)

    strategy = ReasoningStrategy(args.strategy)
    bundle = build_prompt(
        model, args.prompt, strategy, retrieved, config.token_budget, catalog
    )

    if args.backend == "offline":
        result = generate_offline(model, catalog)
    else:
        if not config.llm_endpoint:
            raise RemoteLlmError(
                "remote backend is not configured (set THREATGEN_LLM_ENDPOINT)"
            )
        client = RemoteLlmClient(
            endpoint=config.llm_endpoint,
            model=config.llm_model,
            auth_token=config.llm_auth_token,
        )
        result = generate_remote(bundle, client)
        if result.document is None:
            for diagnostic in result.parse_diagnostics:
                print(f"error: {diagnostic}", file=sys.stderr)
            return EXIT_REMOTE

    Path(args.out).write_text(serialize_otm(result.document), encoding="utf-8")
    report = run_qa(
        result.document, model, select_tests(model, "all", catalog=catalog), catalog
    )
    payload = report_to_dict(report)
    print(f"wrote {args.out}")
    print(f"threats: {len(result.document.threats)}")
    print(f"mitigations: {len(result.document.mitigations)}")
    for line in _qa_lines(payload):
        print(line)
    if report.health_score < args.min_health:
        print(
            f"health {report.health_score} below required {args.min_health}",
            file=sys.stderr,
        )
        return EXIT_QA_GATE
    return EXIT_OK


def cmd_qa(args: argparse.Namespace) -> int:
    model = _read_dfd(args.dfd)
    document = _read_otm(args.otm)
    catalog = builtin_catalog()
    report = run_qa(
        document, model, select_tests(model, "all", catalog=catalog), catalog
    )
    payload = report_to_dict(report)
    if args.format == "json":
        print(json.dumps(payload, indent=2, ensure_ascii=False))
    else:
        for line in _qa_lines(payload):
            print(line)
    return EXIT_OK


def cmd_metrics(args: argparse.Namespace) -> int:
    model = _read_dfd(args.dfd)
    document = _read_otm(args.otm)
    reference = _read_otm(args.reference) if args.reference else None
    report = compute_metrics(document, model, reference, builtin_catalog())
    payload = metrics_to_dict(report)
    if args.format == "json":
        print(json.dumps(payload, indent=2, ensure_ascii=False))
    else:
        notes = payload.pop("notes")
        width = max(len(key) for key in payload)
        for key, value in payload.items():
            rendered = f"{value:.6f}" if isinstance(value, float) else str(value)
            print(f"{key:<{width}}  {rendered}")
        for note in notes:
            print(f"note: {note}")
    return EXIT_OK


def cmd_validate(args: argparse.Namespace) -> int:
    model = _read_dfd(args.dfd)
    warnings = validate_dfd(model)
    if args.format == "json":
        payload = {
            "valid": True,
            "elements": len(model.elements),
            "flows": len(model.flows),
            "boundaries": len(model.boundaries),
            "warnings": [
                {"code": w.code, "subjectId": w.subject_id, "message": w.message}
                for w in warnings
            ],
        }
        print(json.dumps(payload, indent=2, ensure_ascii=False))
    else:
        print(
            f"valid: {len(model.elements)} elements, {len(model.flows)} flows, "
            f"{len(model.boundaries)} boundaries"
        )
        for warning in warnings:
            print(f"warning [{warning.code}] {warning.message}")
    return EXIT_OK


def cmd_serve(args: argparse.Namespace) -> int:
    import uvicorn

    from threatgen.service import create_app

    config = load_config(args.config)
    app = create_app(config)
    uvicorn.run(app, host=config.host, port=config.port)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(
        prog="threatgen",
        description="Threat modeling for LLM-integrated applications.",
        epilog=_EXIT_CODE_DOC,
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    sub = parser.add_subparsers(dest="command", required=True)

    generate = sub.add_parser(
        "generate", help="produce a threat model document from a DFD"
    )
    generate.add_argument("--dfd", required=True, help="DFD file, or - for stdin")
    generate.add_argument("--docs", help="directory of .txt/.md context documents")
    generate.add_argument(
        "--backend", choices=("offline", "remote"), default="offline"
    )
    generate.add_argument("--k", type=int, default=5, help="retrieval depth")
    generate.add_argument("--prompt", default="", help="stakeholder prompt")
    generate.add_argument(
        "--strategy", choices=("direct", "chain-of-thought"), default="direct"
    )
    generate.add_argument("--out", required=True, help="output .otm.json path")
    generate.add_argument(
        "--min-health", type=int, default=0, help="exit 3 if health is lower"
    )
    generate.set_defaults(func=cmd_generate)

    qa = sub.add_parser("qa", help="run QA over an existing document")
    qa.add_argument("--otm", required=True)
    qa.add_argument("--dfd", required=True)
    qa.add_argument("--format", choices=("text", "json"), default="text")
    qa.set_defaults(func=cmd_qa)

    metrics = sub.add_parser("metrics", help="compute evaluation metrics")
    metrics.add_argument("--otm", required=True)
    metrics.add_argument("--dfd", required=True)
    metrics.add_argument("--reference", help="reference document for accuracy")
    metrics.add_argument("--format", choices=("text", "json"), default="text")
    metrics.set_defaults(func=cmd_metrics)

    validate = sub.add_parser("validate", help="parse and lint a DFD")
    validate.add_argument("--dfd", required=True)
    validate.add_argument("--format", choices=("text", "json"), default="text")
    validate.set_defaults(func=cmd_validate)

    serve = sub.add_parser("serve", help="run the HTTP service")
    serve.add_argument("--config", help="JSON config file")
    serve.set_defaults(func=cmd_serve)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except OtmValidationError as exc:
        print("error: invalid threat model document", file=sys.stderr)
        for diagnostic in exc.diagnostics:
            print(f"  {diagnostic}", file=sys.stderr)
        return EXIT_INPUT
    except (
        DfdSyntaxError,
        DfdSemanticError,
        OtmParseError,
        ReferenceMismatchError,
        UnsupportedDocumentError,
        BudgetTooSmallError,
        ConfigError,
        ValueError,
        OSError,
    ) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except RemoteLlmError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_REMOTE


if __name__ == "__main__":
    sys.exit(main())
