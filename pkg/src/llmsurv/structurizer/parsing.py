"""Response parsing: a strict grammar with a tolerant salvage pass.

The models are instructed to answer with exactly::

    { "<key>=<code>" }

The strict pass accepts that shape (with arbitrary surrounding
whitespace, including inside the braces). When it fails, a tolerant
pass accepts the first ``<key>=<integer>`` occurrence anywhere in the
raw text, which rescues answers wrapped in code fences or prose. A code
outside the schema's admissible set is a failure in either pass; no
input can make the parser raise.
"""
from __future__ import annotations

import re
from dataclasses import dataclass

from .schemas import SCHEMAS, CategorySchema

PARSE_STRICT = "strict"
PARSE_TOLERANT = "tolerant"
PARSE_FALLBACK = "fallback"


@dataclass(frozen=True)
class ParsedCode:
    code: int
    status: str  # strict | tolerant


@dataclass(frozen=True)
class ParseFailure:
    raw: str
    reason: str


_STRICT: dict[str, re.Pattern] = {
    key: re.compile(r'\A\s*\{\s*"%s=(\d+)"\s*\}\s*\Z' % re.escape(key))
    for key in SCHEMAS
}
_TOLERANT: dict[str, re.Pattern] = {
    key: re.compile(r"%s=(-?\d+)" % re.escape(key)) for key in SCHEMAS
}


def parse_response(key: str, raw: str) -> ParsedCode | ParseFailure:
    schema: CategorySchema = SCHEMAS[key]
    if not isinstance(raw, str):
        return ParseFailure(raw=repr(raw), reason="non-text response")

    match = _STRICT[key].match(raw)
    if match:
        code = int(match.group(1))
        if code in schema.allowed_codes:
            return ParsedCode(code=code, status=PARSE_STRICT)
        return ParseFailure(raw=raw, reason=f"code {code} not admissible")

    match = _TOLERANT[key].search(raw)
    if match:
        try:
            code = int(match.group(1))
        except ValueError:  # absurdly long digit runs still fit in int, but be safe
            return ParseFailure(raw=raw, reason="unparseable integer")
        if code in schema.allowed_codes:
            return ParsedCode(code=code, status=PARSE_TOLERANT)
        return ParseFailure(raw=raw, reason=f"code {code} not admissible")

    return ParseFailure(raw=raw, reason="no recognizable answer")
