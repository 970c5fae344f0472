"""Run configuration: one YAML tree drives every pipeline stage.

Every stage seed is explicit in the resolved config, and the config
hash embedded in reports is the SHA-256 of the canonical resolved form,
so two runs with the same hash are comparable by construction.
"""
from __future__ import annotations

import dataclasses
import hashlib
import json
import math
from dataclasses import dataclass, field, fields

import yaml

from .errors import ConfigError
from .synth import (
    FeatureProfile,
    SynthConfig,
)

FEATURE_SET_STRUCTURED = "structured"
FEATURE_SET_WITH_LLM = "structured+llm"
FEATURE_SETS = (FEATURE_SET_STRUCTURED, FEATURE_SET_WITH_LLM)

MODEL_KEYS = ("cox", "rsf", "deepsurv")


@dataclass
class SplitSettings:
    seed: int = 11
    test_fraction: float = 0.2


@dataclass
class ScreeningSettings:
    tau_threshold: float = 0.1


@dataclass
class ProviderSettings:
    kind: str = "mock"  # "mock" or "http"
    endpoint: str = "http://localhost:11434/api/chat"
    model: str = "llama3:70b"
    timeout: float = 120.0
    seed: int = 7
    parallelism: int = 1
    max_attempts: int = 3


@dataclass
class CoxSettings:
    ties: str = "efron"
    ridge: float = 1e-6


@dataclass
class RsfSettings:
    n_trees: int = 200
    mtry: int | None = None
    min_node_events: int = 5
    max_depth: int | None = None
    max_thresholds: int = 32
    seed: int = 21


@dataclass
class DeepSurvSettings:
    hidden: tuple[int, ...] = (64, 64)
    dropout: float = 0.0
    learning_rate: float = 1e-3
    max_epochs: int = 500
    patience: int = 20
    val_fraction: float = 0.1
    seed: int = 33


@dataclass
class MetricsSettings:
    n_resamples: int = 1000
    level: float = 0.95
    grid_points: int = 100
    horizon_quantile: float = 0.9
    seed: int = 43


@dataclass
class ImportanceSettings:
    repeats: int = 10
    seed: int = 57


@dataclass
class RunConfig:
    synth: SynthConfig = field(default_factory=SynthConfig)
    split: SplitSettings = field(default_factory=SplitSettings)
    screening: ScreeningSettings = field(default_factory=ScreeningSettings)
    provider: ProviderSettings = field(default_factory=ProviderSettings)
    cox: CoxSettings = field(default_factory=CoxSettings)
    rsf: RsfSettings = field(default_factory=RsfSettings)
    deepsurv: DeepSurvSettings = field(default_factory=DeepSurvSettings)
    metrics: MetricsSettings = field(default_factory=MetricsSettings)
    importance: ImportanceSettings = field(default_factory=ImportanceSettings)

    def validate(self) -> None:
        problems: list[str] = []
        try:
            self.synth.validate()
        except ConfigError as exc:
            problems.extend(str(exc).splitlines()[1:])
        if not 0.0 < self.split.test_fraction < 1.0:
            problems.append("split.test_fraction: must lie in (0, 1)")
        if self.screening.tau_threshold < 0:
            problems.append("screening.tau_threshold: must be nonnegative")
        if self.provider.kind not in ("mock", "http"):
            problems.append("provider.kind: must be 'mock' or 'http'")
        if self.provider.parallelism < 1:
            problems.append("provider.parallelism: must be at least 1")
        if self.provider.max_attempts < 1:
            problems.append("provider.max_attempts: must be at least 1")
        if self.cox.ties not in ("efron", "breslow"):
            problems.append("cox.ties: must be 'efron' or 'breslow'")
        if self.cox.ridge < 0:
            problems.append("cox.ridge: must be nonnegative")
        if self.rsf.n_trees < 1:
            problems.append("rsf.n_trees: must be at least 1")
        if self.rsf.min_node_events < 1:
            problems.append("rsf.min_node_events: must be at least 1")
        if any(h < 1 for h in self.deepsurv.hidden):
            problems.append("deepsurv.hidden: layer widths must be positive")
        if not 0.0 <= self.deepsurv.dropout < 1.0:
            problems.append("deepsurv.dropout: must lie in [0, 1)")
        if self.deepsurv.learning_rate <= 0:
            problems.append("deepsurv.learning_rate: must be positive")
        if not 0.0 <= self.deepsurv.val_fraction < 1.0:
            problems.append("deepsurv.val_fraction: must lie in [0, 1)")
        if self.metrics.n_resamples < 1:
            problems.append("metrics.n_resamples: must be at least 1")
        if not 0.0 < self.metrics.level < 1.0:
            problems.append("metrics.level: must lie in (0, 1)")
        if self.metrics.grid_points < 2:
            problems.append("metrics.grid_points: must be at least 2")
        if not 0.0 < self.metrics.horizon_quantile <= 1.0:
            problems.append("metrics.horizon_quantile: must lie in (0, 1]")
        if self.importance.repeats < 1:
            problems.append("importance.repeats: must be at least 1")
        if problems:
            raise ConfigError("invalid run config:\n  " + "\n  ".join(problems))

    def reseed(self, master: int) -> None:
        """Derive every stage seed from one master seed, in a fixed order."""
        self.synth.seed = master
        self.split.seed = master + 1
        self.provider.seed = master + 2
        self.rsf.seed = master + 3
        self.deepsurv.seed = master + 4
        self.metrics.seed = master + 5
        self.importance.seed = master + 6


# ---------------------------------------------------------------------------
# loading

_SECTIONS = {
    "split": SplitSettings,
    "screening": ScreeningSettings,
    "provider": ProviderSettings,
    "cox": CoxSettings,
    "rsf": RsfSettings,
    "deepsurv": DeepSurvSettings,
    "metrics": MetricsSettings,
    "importance": ImportanceSettings,
}

#: synth fields that are plain scalars and can be set straight from YAML.
_SYNTH_SCALARS = (
    "n_patients", "seed", "shape", "scale", "censor_target",
    "censor_tolerance", "feature_trend",
)
_SYNTH_NAMED_MAPS = (
    "missingness", "category_alignment", "structured_betas",
    "not_evaluable_rates", "mock_error_rates",
)


def _fill_section(obj, data: dict, section: str, problems: list[str]):
    known = {f.name: f for f in fields(obj)}
    for key, value in data.items():
        if key not in known:
            problems.append(f"{section}.{key}: unknown setting")
            continue
        current = getattr(obj, key)
        if isinstance(current, tuple) and isinstance(value, list):
            value = tuple(value)
        if isinstance(current, bool) and not isinstance(value, bool):
            problems.append(f"{section}.{key}: expected a boolean")
            continue
        if isinstance(current, float) and isinstance(value, int):
            value = float(value)
        setattr(obj, key, value)
    return obj


def _fill_synth(cfg: SynthConfig, data: dict, problems: list[str]) -> SynthConfig:
    for key, value in data.items():
        if key in _SYNTH_SCALARS:
            setattr(cfg, key, float(value) if key != "n_patients" and key != "seed" else int(value))
        elif key in _SYNTH_NAMED_MAPS:
            if not isinstance(value, dict):
                problems.append(f"synth.{key}: expected a mapping")
                continue
            getattr(cfg, key).update({str(k): float(v) for k, v in value.items()})
        elif key == "category_marginals" or key == "category_coefs":
            if not isinstance(value, dict):
                problems.append(f"synth.{key}: expected a mapping")
                continue
            target = getattr(cfg, key)
            for cat, seq in value.items():
                target[str(cat)] = tuple(float(x) for x in seq)
        elif key == "feature_profiles":
            if not isinstance(value, dict):
                problems.append("synth.feature_profiles: expected a mapping")
                continue
            for name, spec in value.items():
                base = cfg.feature_profiles.get(
                    str(name), FeatureProfile(0.0, 1.0, 0.0)
                )
                cfg.feature_profiles[str(name)] = dataclasses.replace(
                    base, **{str(k): v for k, v in spec.items()}
                )
        else:
            problems.append(f"synth.{key}: unknown setting")
    return cfg


def config_from_dict(data: dict) -> RunConfig:
    cfg = RunConfig()
    problems: list[str] = []
    for section, value in (data or {}).items():
        if section == "synth":
            if not isinstance(value, dict):
                problems.append("synth: expected a mapping")
                continue
            _fill_synth(cfg.synth, value, problems)
        elif section in _SECTIONS:
            if not isinstance(value, dict):
                problems.append(f"{section}: expected a mapping")
                continue
            _fill_section(getattr(cfg, section), value, section, problems)
        else:
            problems.append(f"{section}: unknown section")
    if problems:
        raise ConfigError("invalid run config:\n  " + "\n  ".join(problems))
    cfg.validate()
    return cfg


def load_config(path) -> RunConfig:
    with open(path, encoding="utf-8") as fh:
        try:
            data = yaml.safe_load(fh)
        except yaml.YAMLError as exc:
            raise ConfigError(f"{path}: invalid YAML ({exc})") from None
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: top level must be a mapping")
    return config_from_dict(data)


# ---------------------------------------------------------------------------
# resolved form and hashing

def _plain(value):
    if dataclasses.is_dataclass(value) and not isinstance(value, type):
        return {f.name: _plain(getattr(value, f.name)) for f in fields(value)}
    if isinstance(value, dict):
        return {str(k): _plain(v) for k, v in sorted(value.items())}
    if isinstance(value, (list, tuple)):
        return [_plain(v) for v in value]
    if isinstance(value, float) and not math.isfinite(value):
        raise ConfigError("non-finite value in resolved config")
    return value


def resolved_dict(cfg: RunConfig) -> dict:
    """Fully explicit form of the config, defaults included."""
    return _plain(cfg)


def config_hash(cfg: RunConfig) -> str:
    canonical = json.dumps(resolved_dict(cfg), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode()).hexdigest()


def dump_resolved(cfg: RunConfig, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        yaml.safe_dump(resolved_dict(cfg), fh, sort_keys=True)
