"""Completion providers: the wire adapter and the provider contract.

A provider turns (system text, user text, decoding parameters) into a
completion string, or raises ProviderError on transport problems.
Retrying is the caller's concern; providers make exactly one attempt
per call. Anything implementing ``complete`` can be plugged in; the
deterministic mock used for experiments lives in the synthesis module.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Protocol, runtime_checkable

import requests

from ..errors import ProviderError


@dataclass(frozen=True)
class DecodingParams:
    temperature: float = 0.0


@runtime_checkable
class CompletionProvider(Protocol):
    name: str

    def complete(self, system: str | None, user: str, params: DecodingParams) -> str:
        ...


class HttpChatProvider:
    """Adapter for a local chat-completion HTTP endpoint.

    Sends ``{"model": ..., "messages": [...], "options": {...}}`` and
    accepts either a ``message.content`` or a ``choices[0].message.content``
    response shape.
    """

    def __init__(self, endpoint: str, model: str, timeout: float = 120.0):
        self.endpoint = endpoint
        self.model = model
        self.timeout = timeout
        self.name = f"http:{model}"

    def complete(self, system: str | None, user: str, params: DecodingParams) -> str:
        messages = []
        if system:
            messages.append({"role": "system", "content": system})
        messages.append({"role": "user", "content": user})
        payload = {
            "model": self.model,
            "messages": messages,
            "options": {"temperature": params.temperature},
            "stream": False,
        }
        try:
            response = requests.post(self.endpoint, json=payload, timeout=self.timeout)
            response.raise_for_status()
            body = response.json()
        except requests.RequestException as exc:
            raise ProviderError(f"completion request failed: {exc}") from exc
        except ValueError as exc:
            raise ProviderError("completion endpoint returned invalid JSON") from exc
        try:
            if "message" in body:
                return str(body["message"]["content"])
            return str(body["choices"][0]["message"]["content"])
        except (KeyError, IndexError, TypeError) as exc:
            raise ProviderError(
                f"unrecognized completion response shape: {sorted(body)}"
            ) from exc
