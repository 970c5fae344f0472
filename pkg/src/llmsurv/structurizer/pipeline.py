"""Orchestration of note structurization: retries, fallback, batching."""
from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

from ..cohort import PatientRecord
from ..errors import ProviderError, StructurizationGateError
from .parsing import PARSE_FALLBACK, ParsedCode, parse_response
from .prompts import PromptTemplate, load_templates, render_prompt
from .providers import CompletionProvider, DecodingParams
from .schemas import NOT_EVALUABLE, SCHEMAS


@dataclass(frozen=True)
class StructurizePolicy:
    max_attempts: int = 3
    decoding: DecodingParams = field(default_factory=DecodingParams)

    def __post_init__(self):
        if self.max_attempts < 1:
            raise ValueError("max_attempts must be at least 1")


@dataclass(frozen=True)
class Provenance:
    """How one code was obtained: raw text, parse route, attempts used."""

    raw_response: str
    parse_status: str
    attempts: int


@dataclass(frozen=True)
class ClinicalFeatureSet:
    patient_id: str
    codes: dict[str, int]
    provenance: dict[str, Provenance]


def structurize_patient(
    record: PatientRecord,
    provider: CompletionProvider,
    policy: StructurizePolicy = StructurizePolicy(),
    templates: dict[str, PromptTemplate] | None = None,
) -> ClinicalFeatureSet:
    """Extract all seven category codes for one record.

    Each category is queried independently at temperature 0. A failed
    parse or transport error triggers a fresh query, up to
    ``max_attempts`` in total; exhausting them assigns the not-evaluable
    code with a ``fallback`` provenance, never an exception.
    """
    if not record.passes_structurization_gate():
        raise StructurizationGateError(
            f"{record.patient_id}: record lacks the documents required "
            "for structurization"
        )
    if templates is None:
        templates = load_templates()
    codes: dict[str, int] = {}
    provenance: dict[str, Provenance] = {}
    for key in SCHEMAS:
        prompt = render_prompt(templates[key], record.documents)
        outcome = None
        raw = ""
        attempts = 0
        for attempts in range(1, policy.max_attempts + 1):
            try:
                raw = provider.complete(None, prompt, policy.decoding)
            except ProviderError as exc:
                raw = f"<transport error: {exc}>"
                continue
            outcome = parse_response(key, raw)
            if isinstance(outcome, ParsedCode):
                break
        if isinstance(outcome, ParsedCode):
            codes[key] = outcome.code
            provenance[key] = Provenance(
                raw_response=raw, parse_status=outcome.status, attempts=attempts
            )
        else:
            codes[key] = NOT_EVALUABLE
            provenance[key] = Provenance(
                raw_response=raw, parse_status=PARSE_FALLBACK, attempts=attempts
            )
    return ClinicalFeatureSet(
        patient_id=record.patient_id, codes=codes, provenance=provenance
    )


def batch_structurize(
    records: list[PatientRecord],
    provider: CompletionProvider,
    parallelism: int = 1,
    policy: StructurizePolicy = StructurizePolicy(),
) -> list[ClinicalFeatureSet]:
    """Structurize many records with at most ``parallelism`` in flight.

    Results keep the input order. With a deterministic provider the
    output is identical to a sequential run regardless of scheduling.
    """
    if parallelism < 1:
        raise ValueError("parallelism must be at least 1")
    templates = load_templates()
    worker = lambda rec: structurize_patient(rec, provider, policy, templates)
    if parallelism == 1:
        return [worker(rec) for rec in records]
    with ThreadPoolExecutor(max_workers=parallelism) as pool:
        return list(pool.map(worker, records))


# ---------------------------------------------------------------------------
# feature-set file I/O

def write_feature_sets(sets: list[ClinicalFeatureSet], path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for fs in sets:
            fh.write(
                json.dumps(
                    {
                        "patient_id": fs.patient_id,
                        "codes": fs.codes,
                        "provenance": {
                            k: {
                                "raw_response": p.raw_response,
                                "parse_status": p.parse_status,
                                "attempts": p.attempts,
                            }
                            for k, p in fs.provenance.items()
                        },
                    },
                    ensure_ascii=False,
                )
                + "\n"
            )


def read_feature_sets(path) -> list[ClinicalFeatureSet]:
    out = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            doc = json.loads(line)
            out.append(
                ClinicalFeatureSet(
                    patient_id=doc["patient_id"],
                    codes={k: int(v) for k, v in doc["codes"].items()},
                    provenance={
                        k: Provenance(
                            raw_response=p["raw_response"],
                            parse_status=p["parse_status"],
                            attempts=int(p["attempts"]),
                        )
                        for k, p in doc.get("provenance", {}).items()
                    },
                )
            )
    return out
