"""Prompt templates: asset loading, integrity checks, rendering.

The seven prompt bodies live as text assets next to this module and are
treated as frozen artifacts: every load verifies a pinned SHA-256, so
accidental edits (or trailing-whitespace "fixes") fail loudly instead of
silently changing model behaviour.
"""
from __future__ import annotations

import hashlib
import re
from dataclasses import dataclass
from importlib import resources

from ..errors import PromptAssetError
from ..registry import DOCUMENT_SLOTS
from .schemas import SCHEMAS

#: Text substituted for an empty document slot.
EMPTY_SLOT_TEXT = "Not available"

#: Pinned digests of the prompt assets; loading verifies these.
PROMPT_SHA256 = {
    "general_condition": "2f7853d0cd337124d16a87c984c5edf517bb6cbeb6180bea176bdd2df4ccc56c",
    "pathology": "31f96324b7a3432c129f93692b4c9ed634a05577d7deae8d79fcc24a176ebeb3",
    "disease_extent": "4f59ffbb183129fdc35ff924577660e68d72704cd9031d481caafeb2d247a88e",
    "disease_control": "b06a60cb31eb203bf5b00b1e944dd2ce45bca7bcb2f8c29865ea273d5d480cbb",
    "RT_aim": "e2ec31c263b9f9d571d9571abd9cb9d98a7f103a5486b635db65377ce4474e61",
    "re_RT": "e53ab33c8d0137af52e8de7c4006037057ceb682f4afd67498a8703279e887ee",
    "emergency": "e66921a3a45ffd66c0be22df999244d9f56ba1639cde1cffadd17e9b587c8d35",
}

INSTRUCTION_BLOCK = (
    "Strictly follow the format of the example provided. "
    "Provide only the response itself. "
    "Do not provide any unnecessary information."
)

_PLACEHOLDER = re.compile(r"\{([A-Za-z_][A-Za-z0-9_]*)\}")


@dataclass(frozen=True)
class PromptTemplate:
    key: str
    body: str
    placeholders: tuple[str, ...]

    @property
    def example_response(self) -> str:
        """The literal example the model is told to imitate."""
        match = re.search(
            r'\{\s*"%s=(\d+)"\s*\}' % re.escape(self.key), self.body
        )
        assert match is not None  # guaranteed by load-time validation
        return match.group(0)


def _read_asset(key: str) -> str:
    path = resources.files(__package__) / "assets" / f"{key}.txt"
    try:
        raw = path.read_bytes()
    except FileNotFoundError:
        raise PromptAssetError(f"prompt asset missing for {key!r}") from None
    digest = hashlib.sha256(raw).hexdigest()
    if digest != PROMPT_SHA256[key]:
        raise PromptAssetError(
            f"prompt asset for {key!r} fails its integrity check "
            f"(got {digest}, pinned {PROMPT_SHA256[key]})"
        )
    return raw.decode("utf-8")


def _validate(key: str, body: str) -> PromptTemplate:
    schema = SCHEMAS[key]
    found = tuple(dict.fromkeys(_PLACEHOLDER.findall(body)))
    unknown = [p for p in found if p not in DOCUMENT_SLOTS]
    if unknown:
        raise PromptAssetError(f"{key}: unknown placeholders {unknown}")
    if set(found) != set(schema.prompt_slots):
        raise PromptAssetError(
            f"{key}: placeholders {sorted(found)} do not match the schema "
            f"slots {sorted(schema.prompt_slots)}"
        )
    if not re.search(r'\{\s*"%s=\d+"\s*\}' % re.escape(key), body):
        raise PromptAssetError(f"{key}: example response not found in body")
    if not " ".join(body.split()).endswith(INSTRUCTION_BLOCK):
        raise PromptAssetError(f"{key}: body does not end with the instruction block")
    return PromptTemplate(key=key, body=body, placeholders=found)


def load_templates() -> dict[str, PromptTemplate]:
    """Load and verify all seven templates, keyed by category."""
    return {key: _validate(key, _read_asset(key)) for key in SCHEMAS}


def render_prompt(template: PromptTemplate, documents: dict[str, str]) -> str:
    """Substitute document texts into the template in a single pass.

    Empty or absent slots render as "Not available". Substitution never
    rescans inserted text, so documents that happen to contain
    placeholder-like fragments cannot alter the template.
    """

    def repl(match: re.Match) -> str:
        slot = match.group(1)
        if slot not in DOCUMENT_SLOTS:
            raise PromptAssetError(f"unknown placeholder {{{slot}}} in template")
        text = (documents.get(slot) or "").strip()
        return text if text else EMPTY_SLOT_TEXT

    return _PLACEHOLDER.sub(repl, template.body)
