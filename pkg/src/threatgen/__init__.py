"""Threat modeling toolkit for LLM-integrated applications.

Pipeline: parse a data-flow diagram, run the identification rule engine
over it, emit a reviewable threat-model document, then score the document
with QA checks and risk metrics.  A session service and CLI wrap the
pipeline for iterative use.
"""

from threatgen.dfd import (
    DataFlow,
    DfdDiagnostic,
    DfdElement,
    DfdModel,
    DfdSemanticError,
    DfdSyntaxError,
    ElementKind,
    TrustBoundary,
    parse_dfd,
    serialize_dfd,
    validate_dfd,
)

__version__ = "0.1.0"

__all__ = [
    "DataFlow",
    "DfdDiagnostic",
    "DfdElement",
    "DfdModel",
    "DfdSemanticError",
    "DfdSyntaxError",
    "ElementKind",
    "TrustBoundary",
    "parse_dfd",
    "serialize_dfd",
    "validate_dfd",
    "__version__",
]
