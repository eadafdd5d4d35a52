"""Completion providers: a deterministic scripted mock and an HTTP
chat-completions client.

The mock resolves a response from (template_id, bindings): exact digests
first, then substring rules in registration order. Unscripted calls return
the UNSCRIPTED sentinel, which downstream parsing surfaces as
LlmMalformedOutput. The mock is pure - no call-order dependence.
"""
from __future__ import annotations

import hashlib
import json
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from ..errors import ProviderTimeout, ProviderUnavailable

UNSCRIPTED = "UNSCRIPTED"


@dataclass(frozen=True)
class CompletionRequest:
    prompt: str
    temperature: float = 0.0
    max_output_tokens: int = 2048
    template_id: Optional[str] = None
    bindings: Optional[dict] = None


@dataclass(frozen=True)
class CompletionResponse:
    text: str
    provider_metadata: dict = field(default_factory=dict)


def bindings_digest(bindings: dict) -> str:
    canonical = json.dumps(bindings or {}, sort_keys=True, ensure_ascii=False, default=str)
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


@dataclass
class _Rule:
    when: dict  # binding name -> required substring; empty = catch-all
    text: str

    def matches(self, bindings: dict) -> bool:
        for key, fragment in self.when.items():
            value = bindings.get(key)
            if value is None or fragment not in str(value):
                return False
        return True


class ScriptedProvider:
    """Deterministic mock provider keyed on template_id and bindings."""

    def __init__(self):
        self._exact: dict[tuple[str, str], str] = {}
        self._rules: dict[str, list[_Rule]] = {}

    def script_exact(self, template_id: str, bindings: dict, text: str) -> None:
        self._exact[(template_id, bindings_digest(bindings))] = text

    def script(self, template_id: str, text: str, when: Optional[dict] = None) -> None:
        self._rules.setdefault(template_id, []).append(_Rule(dict(when or {}), text))

    def complete(self, request: CompletionRequest) -> CompletionResponse:
        template_id = request.template_id or ""
        bindings = request.bindings or {}
        exact = self._exact.get((template_id, bindings_digest(bindings)))
        if exact is not None:
            return CompletionResponse(exact, {"provider": "scripted", "match": "exact"})
        for rule in self._rules.get(template_id, []):
            if rule.matches(bindings):
                return CompletionResponse(rule.text, {"provider": "scripted", "match": "rule"})
        return CompletionResponse(UNSCRIPTED, {"provider": "scripted", "match": "none"})

    @classmethod
    def from_dir(cls, path: str | Path) -> "ScriptedProvider":
        """Load script files: one <template_id>.json per template, each a
        list of {"when": {...}, "text": "..."} rules."""
        provider = cls()
        for file in sorted(Path(path).glob("*.json")):
            template_id = file.stem
            for rule in json.loads(file.read_text(encoding="utf-8")):
                provider.script(template_id, rule["text"], rule.get("when"))
        return provider


class HttpProvider:
    """Chat-completions-style HTTP provider; credentials via environment."""

    def __init__(self, base_url: Optional[str] = None, api_key: Optional[str] = None,
                 model: str = "default", timeout: float = 60.0):
        self.base_url = base_url or os.environ.get("QUERYLOOM_LLM_BASE_URL", "")
        self.api_key = api_key or os.environ.get("QUERYLOOM_LLM_API_KEY", "")
        self.model = model
        self.timeout = timeout

    def complete(self, request: CompletionRequest) -> CompletionResponse:
        if not self.base_url:
            raise ProviderUnavailable("QUERYLOOM_LLM_BASE_URL is not configured")
        import httpx

        try:
            response = httpx.post(
                f"{self.base_url.rstrip('/')}/chat/completions",
                headers={"Authorization": f"Bearer {self.api_key}"},
                json={
                    "model": self.model,
                    "messages": [{"role": "user", "content": request.prompt}],
                    "temperature": request.temperature,
                    "max_tokens": request.max_output_tokens,
                },
                timeout=self.timeout,
            )
        except httpx.TimeoutException as exc:
            raise ProviderTimeout(str(exc)) from exc
        except httpx.HTTPError as exc:
            raise ProviderUnavailable(str(exc)) from exc
        if response.status_code != 200:
            raise ProviderUnavailable(f"provider returned {response.status_code}")
        payload = response.json()
        text = payload["choices"][0]["message"]["content"]
        return CompletionResponse(text, {"provider": "http", "model": self.model})


def complete(request: CompletionRequest, provider) -> CompletionResponse:
    """One retry on retryable provider failures, then surface the error."""
    if not request.prompt:
        raise ProviderUnavailable("empty prompt")
    try:
        return provider.complete(request)
    except (ProviderUnavailable, ProviderTimeout):
        return provider.complete(request)


def estimate_tokens(prompt: str) -> int:
    """Characters/4 heuristic; only monotonicity matters for example dropping."""
    return (len(prompt) + 3) // 4
