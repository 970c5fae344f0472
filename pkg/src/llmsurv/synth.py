"""Synthetic cohorts with a known proportional-hazards ground truth.

A single latent severity score per patient drives everything observable:
the seven clinical category codes (through noisy ordered thresholds),
the structured measurements (group-difference shifts calibrated to the
published cohort tables), and, through the category coefficients, the
Weibull survival time. Documents are rendered from sentence templates
that encode each gold code unambiguously, so a rule-based reference
extractor recovers the gold labels exactly and the deterministic mock
provider can answer prompts without any language understanding.

Generation is pure per patient given spawned seeds; only censoring-rate
tuning looks at the whole cohort.
"""
from __future__ import annotations

import datetime as dt
import hashlib
import math
import re
from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit, logit
from scipy.stats import norm

from .cohort import Observation, PatientRecord, SurvivalOutcome
from .errors import ConfigError, ProviderError, SynthesisError
from .registry import STRUCTURED_FEATURES
from .structurizer.pipeline import ClinicalFeatureSet, Provenance
from .structurizer.providers import DecodingParams
from .structurizer.schemas import CATEGORY_KEYS, NOT_EVALUABLE, SCHEMAS

# ---------------------------------------------------------------------------
# structured feature profiles
#
# mean/sd describe the low-risk bulk of the cohort; shift is the expected
# difference between early-mortality and surviving patients, applied along
# the latent severity. decimals controls value rounding so synthetic labs
# look like chart values (and carry realistic ties).


@dataclass(frozen=True)
class FeatureProfile:
    mean: float
    sd: float
    shift: float
    decimals: int = 1


DEFAULT_FEATURE_PROFILES: dict[str, FeatureProfile] = {
    "age": FeatureProfile(59.5, 13.0, 2.3, 0),
    "height": FeatureProfile(162.0, 10.7, 0.7, 1),
    "weight": FeatureProfile(61.5, 12.0, -2.8, 1),
    "bmi": FeatureProfile(23.4, 5.2, -1.4, 1),
    "sbp": FeatureProfile(124.1, 15.9, 1.4, 1),
    "dbp": FeatureProfile(75.8, 11.0, 2.5, 1),
    "pulse_rate": FeatureProfile(78.0, 17.3, 8.8, 1),
    "body_temp": FeatureProfile(36.8, 0.4, 0.1, 1),
    "wbc": FeatureProfile(7.2, 4.3, 2.9, 1),
    "rbc": FeatureProfile(3.9, 0.7, -0.4, 2),
    "platelet": FeatureProfile(250.5, 109.1, -19.6, 0),
    "hemoglobin": FeatureProfile(11.8, 2.0, -1.2, 1),
    "hematocrit": FeatureProfile(35.4, 5.8, -3.8, 1),
    "anc": FeatureProfile(4.9, 3.6, 3.2, 2),
    "alc": FeatureProfile(1.6, 1.3, -0.5, 2),
    "nlr": FeatureProfile(4.2, 5.4, 6.3, 1),
    "amc": FeatureProfile(0.6, 0.7, 0.1, 2),
    "aec": FeatureProfile(0.2, 0.2, -0.1, 2),
    "abc": FeatureProfile(0.0, 0.05, 0.0, 2),
    "calcium": FeatureProfile(9.1, 0.6, -0.2, 1),
    "phosphate": FeatureProfile(3.6, 0.7, -0.3, 1),
    "glucose": FeatureProfile(118.5, 44.0, 11.7, 0),
    "bun": FeatureProfile(15.5, 6.9, 3.1, 1),
    "creatinine": FeatureProfile(0.8, 0.5, 0.0, 2),
    "uric_acid": FeatureProfile(4.4, 1.6, -0.4, 1),
    "cholesterol": FeatureProfile(168.4, 45.0, -15.0, 0),
    "total_protein": FeatureProfile(6.7, 0.8, -0.5, 1),
    "albumin": FeatureProfile(4.0, 0.6, -0.7, 1),
    "alp": FeatureProfile(109.4, 133.6, 106.7, 0),
    "ast": FeatureProfile(30.5, 42.4, 27.4, 0),
    "alt": FeatureProfile(27.0, 35.3, 5.0, 0),
    "total_bilirubin": FeatureProfile(0.6, 0.9, 0.7, 2),
    "ggt": FeatureProfile(135.1, 197.9, 97.8, 0),
    "sodium": FeatureProfile(138.6, 3.5, -3.4, 1),
    "potassium": FeatureProfile(4.3, 0.5, -0.1, 2),
    "chloride": FeatureProfile(102.4, 4.1, -2.8, 1),
    "pt_inr": FeatureProfile(1.0, 0.2, 0.2, 2),
    "aptt": FeatureProfile(30.9, 5.8, -0.2, 1),
}

#: Fraction of males in the low-severity bulk, and the per-unit-severity
#: log-odds shift toward male (early mortality skews male in the source
#: cohort tables).
SEX_MALE_BASE = 0.48
SEX_SEVERITY_SLOPE = 0.35

DEFAULT_MISSINGNESS: dict[str, float] = {
    "age": 0.022, "sex": 0.114, "height": 0.217, "weight": 0.211,
    "bmi": 0.252, "sbp": 0.409, "dbp": 0.375, "pulse_rate": 0.369,
    "body_temp": 0.476, "wbc": 0.284, "rbc": 0.284, "platelet": 0.285,
    "hemoglobin": 0.284, "hematocrit": 0.281, "anc": 0.300, "alc": 0.300,
    "nlr": 0.301, "amc": 0.300, "aec": 0.300, "abc": 0.300,
    "calcium": 0.323, "phosphate": 0.325, "glucose": 0.313, "bun": 0.306,
    "creatinine": 0.306, "uric_acid": 0.337, "cholesterol": 0.515,
    "total_protein": 0.314, "albumin": 0.310, "alp": 0.330, "ast": 0.308,
    "alt": 0.308, "total_bilirubin": 0.320, "ggt": 0.870, "sodium": 0.459,
    "potassium": 0.459, "chloride": 0.465, "pt_inr": 0.559, "aptt": 0.572,
}

# ---------------------------------------------------------------------------
# category machinery

#: Marginal level probabilities in the low-severity bulk (not-evaluable
#: excluded, renormalized).
DEFAULT_CATEGORY_MARGINALS: dict[str, tuple[float, ...]] = {
    "general_condition": (0.0014, 0.1733, 0.2829, 0.5424),
    "pathology": (0.8342, 0.0273, 0.0388, 0.0309, 0.0673, 0.0015),
    "disease_extent": (0.1123, 0.3902, 0.2378, 0.2596),
    "disease_control": (0.0932, 0.3169, 0.1804, 0.4094),
    "RT_aim": (0.5714, 0.1712, 0.2500, 0.0074),
    "re_RT": (0.8083, 0.1917),
    "emergency": (0.3522, 0.1196, 0.4940, 0.0343),
}

#: How strongly each category's code follows the latent severity.
DEFAULT_CATEGORY_ALIGNMENT: dict[str, float] = {
    "general_condition": 1.0,
    "pathology": 0.0,
    "disease_extent": 1.1,
    "disease_control": 0.9,
    "RT_aim": 1.1,
    "re_RT": 0.4,
    "emergency": 0.9,
}

#: Log-hazard added per code level. General condition, disease extent and
#: treatment aim carry the heaviest weights by design.
DEFAULT_CATEGORY_COEFS: dict[str, tuple[float, ...]] = {
    "general_condition": (0.0, 0.5, 1.05, 1.75),
    "pathology": (0.0, 0.05, 0.15, 0.5, -0.55, 0.15),
    "disease_extent": (0.0, 0.4, 1.0, 2.0),
    "disease_control": (0.0, 0.2, 0.4, 0.75),
    "RT_aim": (0.0, 0.55, 1.8, 0.75),
    "re_RT": (0.0, 0.4),
    "emergency": (0.0, 0.2, 0.4, 0.75),
}

#: Probability that a category is not evaluable from the documents; the
#: gold label becomes 9 and the rendered note says so explicitly.
DEFAULT_NOT_EVALUABLE_RATES: dict[str, float] = {
    "general_condition": 0.0,
    "pathology": 0.002,
    "disease_extent": 0.015,
    "disease_control": 0.22,
    "RT_aim": 0.0,
    "re_RT": 0.01,
    "emergency": 0.0,
}

DEFAULT_MOCK_ERROR_RATES: dict[str, float] = {key: 0.125 for key in CATEGORY_KEYS}


@dataclass
class SynthConfig:
    n_patients: int = 4000
    seed: int = 0
    shape: float = 1.2  # Weibull shape of the baseline hazard
    scale: float = 420.0  # Weibull scale, days
    censor_target: float = 0.30  # fraction of records censored
    censor_tolerance: float = 0.05
    feature_trend: float = 0.75  # group-difference shift per unit severity
    feature_profiles: dict[str, FeatureProfile] = field(
        default_factory=lambda: dict(DEFAULT_FEATURE_PROFILES)
    )
    missingness: dict[str, float] = field(
        default_factory=lambda: dict(DEFAULT_MISSINGNESS)
    )
    category_marginals: dict[str, tuple[float, ...]] = field(
        default_factory=lambda: dict(DEFAULT_CATEGORY_MARGINALS)
    )
    category_alignment: dict[str, float] = field(
        default_factory=lambda: dict(DEFAULT_CATEGORY_ALIGNMENT)
    )
    category_coefs: dict[str, tuple[float, ...]] = field(
        default_factory=lambda: dict(DEFAULT_CATEGORY_COEFS)
    )
    structured_betas: dict[str, float] = field(default_factory=dict)
    not_evaluable_rates: dict[str, float] = field(
        default_factory=lambda: dict(DEFAULT_NOT_EVALUABLE_RATES)
    )
    mock_error_rates: dict[str, float] = field(
        default_factory=lambda: dict(DEFAULT_MOCK_ERROR_RATES)
    )

    def validate(self) -> None:
        """Raise ConfigError listing every violated field."""
        problems: list[str] = []
        if self.n_patients < 1:
            problems.append("n_patients: must be positive")
        if self.shape <= 0:
            problems.append("shape: must be positive")
        if self.scale <= 0:
            problems.append("scale: must be positive")
        if not 0.0 <= self.censor_target < 1.0:
            problems.append("censor_target: must lie in [0, 1)")
        for name, frac in self.missingness.items():
            if name not in self.feature_profiles and name != "sex":
                problems.append(f"missingness.{name}: unknown feature")
            elif not 0.0 <= frac < 1.0:
                problems.append(f"missingness.{name}: must lie in [0, 1)")
        for attr in (
            "category_marginals", "category_alignment", "category_coefs",
            "not_evaluable_rates", "mock_error_rates",
        ):
            for key in getattr(self, attr):
                if key not in CATEGORY_KEYS:
                    problems.append(f"{attr}.{key}: unknown category")
        for key in CATEGORY_KEYS:
            if key not in self.category_marginals:
                problems.append(f"category_marginals.{key}: missing")
                continue
            p = self.category_marginals[key]
            n_levels = len(SCHEMAS[key].allowed_codes) - 1
            if len(p) != n_levels:
                problems.append(
                    f"category_marginals.{key}: expected {n_levels} levels"
                )
            if any(x < 0 for x in p) or not math.isclose(sum(p), 1.0, abs_tol=1e-3):
                problems.append(f"category_marginals.{key}: not a distribution")
            coefs = self.category_coefs.get(key, ())
            if len(coefs) != n_levels:
                problems.append(f"category_coefs.{key}: expected {n_levels} values")
            elif not all(math.isfinite(c) for c in coefs):
                problems.append(f"category_coefs.{key}: non-finite value")
            rate = self.not_evaluable_rates.get(key, 0.0)
            if not 0.0 <= rate < 1.0:
                problems.append(f"not_evaluable_rates.{key}: must lie in [0, 1)")
            err = self.mock_error_rates.get(key, 0.0)
            if not 0.0 <= err <= 1.0:
                problems.append(f"mock_error_rates.{key}: must lie in [0, 1]")
        for name, beta in self.structured_betas.items():
            if name not in self.feature_profiles and name != "sex":
                problems.append(f"structured_betas.{name}: unknown feature")
            elif not math.isfinite(beta):
                problems.append(f"structured_betas.{name}: non-finite value")
        if problems:
            raise ConfigError("invalid synthesis config:\n  " + "\n  ".join(problems))


def null_coefficient_config(**overrides) -> SynthConfig:
    """Config whose hazard ignores every feature; survival is pure noise."""
    cfg = SynthConfig(**overrides)
    cfg.category_coefs = {
        key: tuple(0.0 for _ in coefs) for key, coefs in cfg.category_coefs.items()
    }
    cfg.structured_betas = {}
    return cfg


# ---------------------------------------------------------------------------
# document templates
#
# One sentence per (category, code); each appears verbatim in the note,
# which makes gold labels recoverable without any model in the loop.

CODE_SENTENCES: dict[str, dict[int, str]] = {
    "general_condition": {
        0: "The patient remains in good general condition.",
        1: "Minor performance issues are noted on review.",
        2: "Moderate performance issues limit daily activity.",
        3: "Severe performance issues are documented; the patient is largely bedbound.",
        9: "General condition cannot be assessed from the available records.",
    },
    "pathology": {
        0: "Biopsy confirms a carcinoma of epithelial origin.",
        1: "Histology demonstrates a sarcoma of mesenchymal origin.",
        2: "Hematopathology confirms a lymphoid malignancy.",
        3: "Immunostains support a neuroendocrine primary.",
        4: "Imaging and histology indicate a primary CNS tumor.",
        5: "The primary tumor defies standard histologic classification.",
        9: "No pathology report is available for classification.",
    },
    "disease_extent": {
        0: "Current imaging shows no evidence of disease.",
        1: "A tiny focus of residual disease persists.",
        2: "A moderate burden of residual disease remains.",
        3: "Extensive metastatic spread is documented.",
        9: "Disease extent cannot be determined from the available studies.",
    },
    "disease_control": {
        0: "Response assessment: complete response.",
        1: "Response assessment: partial response.",
        2: "Response assessment: stable disease.",
        3: "Response assessment: progressive disease.",
        9: "Response assessment is not possible on the current information.",
    },
    "RT_aim": {
        0: "The treatment intent is definitive.",
        1: "The treatment intent is salvage.",
        2: "The treatment intent is palliative.",
        3: "The treatment intent falls outside the usual categories.",
        9: "The treatment intent is not stated.",
    },
    "re_RT": {
        0: "No prior irradiation to the planned field.",
        1: "The planned field overlaps a previously irradiated volume.",
        9: "Prior radiation history is unobtainable.",
    },
    "emergency": {
        0: "There is no urgency to begin treatment.",
        1: "Scheduling is slightly urgent.",
        2: "Scheduling is moderately urgent.",
        3: "Emergency irradiation is indicated.",
        9: "Urgency cannot be judged from the available notes.",
    },
}

_CHIEF_COMPLAINTS = (
    "Back pain.",
    "Dysphagia.",
    "Headache and nausea.",
    "Cough with hemoptysis.",
    "Painful bone lesion.",
    "Incidental finding on surveillance imaging.",
)

_IMAGING_FLAVOR = {
    "bMRI": ("No intracranial metastasis.", "Enhancing lesions compatible with brain metastases."),
    "CCT": ("No new pulmonary nodules.", "Interval growth of known pulmonary metastases.",
            "Stable postoperative changes."),
    "APCT": ("No intra-abdominal disease.", "Hepatic lesions consistent with metastases.",
             "Unchanged retroperitoneal adenopathy."),
    "PET": ("No hypermetabolic focus.", "FDG-avid disease at the primary site."),
    "CXR": ("Clear lungs.", "Bilateral pulmonary nodules."),
    "abdomen": ("Nonspecific bowel gas pattern.", "No acute abdominal finding."),
}

#: Probability that an imaging slot is absent from the record.
_IMAGING_ABSENCE = {
    "bMRI": 0.65, "CCT": 0.25, "APCT": 0.30, "PET": 0.55,
    "CXR": 0.35, "abdomen": 0.60,
}

CASE_MARKER_RE = re.compile(r"\[case ([A-Za-z0-9_-]+)\]")


def _render_documents(rng, patient_id: str, gold: dict[str, int]) -> dict[str, str]:
    note_lines = [
        f"[case {patient_id}] Radiation oncology consultation note.",
        "Seen in clinic for radiotherapy planning.",
    ]
    note_lines.extend(CODE_SENTENCES[key][gold[key]] for key in CATEGORY_KEYS)
    docs = {
        "CC": _CHIEF_COMPLAINTS[rng.integers(len(_CHIEF_COMPLAINTS))],
        "PI": "Known malignancy under treatment; referred for radiotherapy evaluation.",
        "Note": "\n".join(note_lines),
        "Plan": "Plan: CT simulation and radiotherapy as discussed in clinic.",
    }
    for slot, variants in _IMAGING_FLAVOR.items():
        if rng.random() >= _IMAGING_ABSENCE[slot]:
            docs[slot] = variants[rng.integers(len(variants))]
    return docs


def reference_extract(record: PatientRecord) -> dict[str, int]:
    """Rule-based recovery of the codes encoded in the note.

    Each category must match exactly one of its template sentences;
    anything else means the note was not produced by this generator.
    """
    note = record.document("Note")
    codes: dict[str, int] = {}
    for key in CATEGORY_KEYS:
        hits = [code for code, s in CODE_SENTENCES[key].items() if s in note]
        if len(hits) != 1:
            raise SynthesisError(
                f"{record.patient_id}: note encodes {len(hits)} codes for {key}"
            )
        codes[key] = hits[0]
    return codes


# ---------------------------------------------------------------------------
# survival machinery

def weibull_survival_time(
    unit_exponential: float, log_hazard: float, shape: float, scale: float
) -> float:
    """Survival time under a Weibull proportional-hazards model.

    With E standard exponential, T = scale * (E * exp(-eta))^(1/shape)
    has cumulative hazard (t/scale)^shape * exp(eta), so hazards scale
    multiplicatively with exp(eta) at every t.
    """
    return scale * (unit_exponential * math.exp(-log_hazard)) ** (1.0 / shape)


def _ordered_code(rng, z: float, marginal: tuple[float, ...], alignment: float) -> int:
    """Threshold draw: higher latent severity favors higher codes."""
    spread = math.sqrt(1.0 + alignment * alignment)
    cum = np.cumsum(marginal[:-1])
    cuts = norm.ppf(np.clip(cum, 1e-12, 1 - 1e-12)) * spread
    y = alignment * z + rng.standard_normal()
    return int(np.sum(y > cuts))


def _draw_true_codes(rng, z: float, config: SynthConfig) -> dict[str, int]:
    codes: dict[str, int] = {}
    for key in CATEGORY_KEYS:
        marginal = config.category_marginals[key]
        align = config.category_alignment.get(key, 0.0)
        if key == "pathology":
            # Nominal, severity-independent; drawn from the marginal.
            codes[key] = int(rng.choice(len(marginal), p=np.asarray(marginal) / sum(marginal)))
        elif key == "RT_aim":
            # Rare "others" aside, intent behaves as an ordered severity.
            if rng.random() < marginal[3]:
                codes[key] = 3
            else:
                sub = tuple(p / sum(marginal[:3]) for p in marginal[:3])
                codes[key] = _ordered_code(rng, z, sub, align)
        elif key == "re_RT":
            p_yes = expit(logit(marginal[1]) + align * z)
            codes[key] = int(rng.random() < p_yes)
        else:
            codes[key] = _ordered_code(rng, z, marginal, align)
    return codes


def _category_log_hazard(config: SynthConfig, codes: dict[str, int]) -> float:
    """Sum of per-level coefficients, centered at the marginal mean."""
    eta = 0.0
    for key in CATEGORY_KEYS:
        coefs = config.category_coefs[key]
        marginal = config.category_marginals[key]
        center = sum(p * c for p, c in zip(marginal, coefs)) / sum(marginal)
        eta += coefs[codes[key]] - center
    return eta


# ---------------------------------------------------------------------------
# per-patient generation

@dataclass
class _Draft:
    patient_id: str
    z: float
    true_codes: dict[str, int]
    gold_codes: dict[str, int]
    log_hazard: float
    survival_time: float
    censor_uniform: float
    observations: tuple[Observation, ...]
    documents: dict[str, str]
    visit_date: dt.date
    rt_start_date: dt.date


_BASE_DATE = dt.date(2021, 1, 1)


def _draw_offset(rng, window: tuple[int, int]) -> int:
    lo, hi = window
    sd = (hi - lo) / 6.0
    return int(np.clip(round(rng.normal(-1.0, sd)), lo, hi))


def _generate_patient(seed, index: int, config: SynthConfig) -> _Draft:
    rng = np.random.default_rng(seed)
    pid = f"P{index:05d}"
    z = float(rng.standard_normal())

    true_codes = _draw_true_codes(rng, z, config)
    gold_codes = {}
    for key in CATEGORY_KEYS:
        rate = config.not_evaluable_rates.get(key, 0.0)
        gold_codes[key] = NOT_EVALUABLE if rng.random() < rate else true_codes[key]

    eta = _category_log_hazard(config, true_codes)

    # Latent physiology: group-difference shift along severity plus noise.
    # The hazard may reference these latent values directly through
    # structured_betas; what gets charted is a rounded, sometimes missing
    # view of them.
    observations: list[Observation] = []
    latent: dict[str, float] = {}
    for fdef in STRUCTURED_FEATURES:
        if fdef.name == "sex":
            p_male = expit(logit(SEX_MALE_BASE) + SEX_SEVERITY_SLOPE * z)
            latent["sex"] = float(rng.random() < p_male)
            continue
        prof = config.feature_profiles[fdef.name]
        value = prof.mean + config.feature_trend * prof.shift * z \
            + prof.sd * rng.standard_normal()
        latent[fdef.name] = max(value, 0.0)

    for name, beta in config.structured_betas.items():
        if name == "sex":
            eta += beta * (latent["sex"] - SEX_MALE_BASE)
        else:
            prof = config.feature_profiles[name]
            eta += beta * (latent[name] - prof.mean) / prof.sd

    for fdef in STRUCTURED_FEATURES:
        if rng.random() < config.missingness.get(fdef.name, 0.0):
            continue
        if fdef.name == "sex":
            value, decimals = latent["sex"], 0
        else:
            prof = config.feature_profiles[fdef.name]
            value, decimals = latent[fdef.name], prof.decimals
        offset = _draw_offset(rng, fdef.window)
        observations.append(
            Observation(fdef.name, round(value, decimals), offset)
        )
        # Occasionally chart a second, staler measurement so windowed
        # selection has something to reject.
        if rng.random() < 0.15:
            lo, hi = fdef.window
            far = lo if offset >= 0 else hi
            stale = round(value + 0.2 * abs(value) * rng.standard_normal(), decimals)
            observations.append(Observation(fdef.name, max(stale, 0.0), far))

    survival_time = weibull_survival_time(
        float(rng.standard_exponential()), eta, config.shape, config.scale
    )
    censor_uniform = float(rng.random())

    visit = _BASE_DATE + dt.timedelta(days=int(rng.integers(0, 731)))
    rt_start = visit + dt.timedelta(days=int(rng.integers(0, 29)))
    documents = _render_documents(rng, pid, gold_codes)

    return _Draft(
        patient_id=pid,
        z=z,
        true_codes=true_codes,
        gold_codes=gold_codes,
        log_hazard=eta,
        survival_time=survival_time,
        censor_uniform=censor_uniform,
        observations=tuple(observations),
        documents=documents,
        visit_date=visit,
        rt_start_date=rt_start,
    )


# ---------------------------------------------------------------------------
# censoring

def _tune_censoring(times: np.ndarray, uniforms: np.ndarray, config: SynthConfig) -> np.ndarray:
    """Censoring times C with P(C < T) matched to the configured target.

    C is exponential with a rate found by bisection against the fixed
    uniforms, which keeps the draw deterministic. A zero target turns
    censoring off entirely.
    """
    target = config.censor_target
    if target == 0.0:
        return np.full_like(times, np.inf)
    draws = -np.log(uniforms)

    def censored_fraction(rate: float) -> float:
        return float(np.mean(draws / rate < times))

    lo, hi = 0.0, 1.0 / config.scale
    for _ in range(200):
        if censored_fraction(hi) >= target:
            break
        hi *= 2.0
    else:
        raise SynthesisError("censoring target unreachable: rate search diverged")
    for _ in range(100):
        mid = 0.5 * (lo + hi)
        if censored_fraction(mid) < target:
            lo = mid
        else:
            hi = mid
    achieved = censored_fraction(hi)
    if abs(achieved - target) > config.censor_tolerance:
        raise SynthesisError(
            f"censoring target unreachable: wanted {target:.3f}, "
            f"best achievable {achieved:.3f}"
        )
    return draws / hi


# ---------------------------------------------------------------------------
# public entry points

def generate_cohort(
    config: SynthConfig,
) -> tuple[list[PatientRecord], list[ClinicalFeatureSet]]:
    config.validate()
    seeds = np.random.SeedSequence(config.seed).spawn(config.n_patients)
    drafts = [
        _generate_patient(seed, i + 1, config) for i, seed in enumerate(seeds)
    ]

    times = np.array([d.survival_time for d in drafts])
    uniforms = np.array([d.censor_uniform for d in drafts])
    censor_times = _tune_censoring(times, uniforms, config)

    records: list[PatientRecord] = []
    gold: list[ClinicalFeatureSet] = []
    for draft, c in zip(drafts, censor_times):
        event = draft.survival_time <= c
        duration = max(1, int(round(min(draft.survival_time, c))))
        records.append(
            PatientRecord(
                patient_id=draft.patient_id,
                visit_date=draft.visit_date,
                rt_start_date=draft.rt_start_date,
                observations=draft.observations,
                documents=draft.documents,
                outcome=SurvivalOutcome(duration_days=duration, event=bool(event)),
            )
        )
        gold.append(
            ClinicalFeatureSet(
                patient_id=draft.patient_id,
                codes=dict(draft.gold_codes),
                provenance={
                    key: Provenance(raw_response="", parse_status="gold", attempts=0)
                    for key in CATEGORY_KEYS
                },
            )
        )
    return records, gold


def gold_code_map(gold: list[ClinicalFeatureSet]) -> dict[str, dict[str, int]]:
    return {fs.patient_id: dict(fs.codes) for fs in gold}


# ---------------------------------------------------------------------------
# deterministic mock provider

_PROMPT_KEY_RE = re.compile(r'"([A-Za-z_]+)=\d')

#: Free-prose failure response; contains no key=value fragment, so both
#: parse passes reject it and the retry/fallback path gets exercised.
_PROSE_FAILURE = (
    "Given the overall clinical picture, the patient should continue regular "
    "follow-up with repeat imaging as clinically indicated. A definitive "
    "category cannot be assigned without further information, and management "
    "may change depending on future studies."
)


class MockChatProvider:
    """Answers structurization prompts from the gold labels, with noise.

    The response for a given (patient, category) is a pure function of
    the seed, so retries see the same text and runs are reproducible.
    With probability ``error_rate`` the answer is wrong: usually a
    uniformly chosen different code in strict format, sometimes (10% of
    the error branch) free prose that fails parsing altogether.
    """

    def __init__(
        self,
        gold: dict[str, dict[str, int]],
        error_rate: float | dict[str, float] = 0.0,
        seed: int = 0,
    ):
        self.gold = gold
        if isinstance(error_rate, dict):
            self.error_rates = {k: float(error_rate.get(k, 0.0)) for k in CATEGORY_KEYS}
        else:
            self.error_rates = {k: float(error_rate) for k in CATEGORY_KEYS}
        for key, rate in self.error_rates.items():
            if not 0.0 <= rate <= 1.0:
                raise ValueError(f"error rate for {key} out of [0, 1]: {rate}")
        self.seed = seed
        self.name = "mock"
        self.n_calls = 0

    def _rng(self, patient_id: str, key: str) -> np.random.Generator:
        digest = hashlib.sha256(
            f"{self.seed}|{patient_id}|{key}".encode()
        ).digest()
        return np.random.default_rng(int.from_bytes(digest[:8], "little"))

    def complete(self, system: str | None, user: str, params: DecodingParams) -> str:
        self.n_calls += 1
        case = CASE_MARKER_RE.search(user)
        if case is None:
            raise ProviderError("case marker not found in prompt")
        key_match = _PROMPT_KEY_RE.search(user)
        if key_match is None:
            raise ProviderError("category key not found in prompt")
        patient_id, key = case.group(1), key_match.group(1)
        try:
            gold_code = self.gold[patient_id][key]
        except KeyError:
            raise ProviderError(f"no gold label for {patient_id}/{key}") from None

        rng = self._rng(patient_id, key)
        if rng.random() >= self.error_rates[key]:
            code = gold_code
        else:
            if rng.random() < 0.1:
                return _PROSE_FAILURE
            wrong = sorted(SCHEMAS[key].allowed_codes - {gold_code})
            code = wrong[rng.integers(len(wrong))]
        return f'{{ "{key}={code}" }}'
