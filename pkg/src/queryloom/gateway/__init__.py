"""Provider contract for completion models, the prompt registry, fenced
output parsing, and a deterministic scripted mock."""
from .templates import TEMPLATE_IDS, render, required_bindings, template_body
from .providers import (
    CompletionRequest,
    CompletionResponse,
    HttpProvider,
    ScriptedProvider,
    UNSCRIPTED,
    bindings_digest,
    complete,
)
from .parsing import extract_fenced

__all__ = [
    "TEMPLATE_IDS",
    "render",
    "required_bindings",
    "template_body",
    "CompletionRequest",
    "CompletionResponse",
    "HttpProvider",
    "ScriptedProvider",
    "UNSCRIPTED",
    "bindings_digest",
    "complete",
    "extract_fenced",
]
