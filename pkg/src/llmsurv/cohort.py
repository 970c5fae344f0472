"""Cohort assembly: patient records, windowed feature extraction, splits.

A cohort file is line-delimited JSON, one patient per line::

    {"patient_id": "P0001", "visit_date": "2021-06-14",
     "rt_start_date": "2021-06-21", "duration_days": 211, "event": true,
     "observations": [{"name": "albumin", "value": 3.1, "offset_days": -4}],
     "documents": {"CC": "...", "Note": "...", ...}}

Observation timestamps are day offsets relative to the planning visit;
calendar dates only appear at this boundary. Ingestion and windowing are
pure per-record transforms, so records may be processed in any order or
in parallel; the assembled matrix is immutable after construction.
"""
from __future__ import annotations

import csv
import datetime as dt
import json
from dataclasses import dataclass

import numpy as np

from .errors import IngestionError, SplitError
from .registry import (
    DOCUMENT_SLOTS,
    REQUIRED_FOR_STRUCTURIZATION,
    STRUCTURED_FEATURES,
    feature_def,
)

MATRIX_FORMAT_VERSION = 1

#: Maximum days the planning visit may precede the start of treatment.
MAX_VISIT_LEAD_DAYS = 365


@dataclass(frozen=True)
class Observation:
    """One raw measurement: feature name, value, day offset from the visit."""

    name: str
    value: float
    offset_days: int


@dataclass(frozen=True)
class SurvivalOutcome:
    """Follow-up duration in days from the start of treatment, event flag."""

    duration_days: int
    event: bool

    def __post_init__(self):
        if self.duration_days < 0:
            raise IngestionError(f"negative follow-up duration: {self.duration_days}")


@dataclass(frozen=True)
class PatientRecord:
    patient_id: str
    visit_date: dt.date
    rt_start_date: dt.date
    observations: tuple[Observation, ...]
    documents: dict[str, str]
    outcome: SurvivalOutcome | None = None

    def __post_init__(self):
        lead = (self.rt_start_date - self.visit_date).days
        if lead < -MAX_VISIT_LEAD_DAYS:
            raise IngestionError(
                f"{self.patient_id}: treatment start precedes the planning visit "
                f"by more than {MAX_VISIT_LEAD_DAYS} days"
            )
        for slot in self.documents:
            if slot not in DOCUMENT_SLOTS:
                raise IngestionError(f"{self.patient_id}: unknown document slot {slot!r}")

    def document(self, slot: str) -> str:
        """Text of a slot, empty string when absent."""
        if slot not in DOCUMENT_SLOTS:
            raise KeyError(f"unknown document slot: {slot!r}")
        return self.documents.get(slot, "") or ""

    def passes_structurization_gate(self) -> bool:
        """True when every document required for structurization is non-empty."""
        return all(self.document(s).strip() for s in REQUIRED_FOR_STRUCTURIZATION)


@dataclass(frozen=True)
class ColumnMeta:
    """Feature-matrix column: name, value kind, permutation group.

    Columns that one-hot encode a single nominal source share a ``group``
    so downstream importance analysis can permute them jointly.
    """

    name: str
    kind: str
    group: str | None = None

    @property
    def group_key(self) -> str:
        return self.group if self.group is not None else self.name


@dataclass
class FeatureMatrix:
    """Dense feature matrix with an explicit missingness mask.

    ``values`` is float64 with NaN in missing cells; ``mask`` is True
    exactly where a value is missing. Rows follow ``patient_ids``.
    """

    patient_ids: list[str]
    columns: list[ColumnMeta]
    values: np.ndarray
    mask: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        self.mask = np.asarray(self.mask, dtype=bool)
        n, p = self.values.shape
        if self.mask.shape != (n, p):
            raise ValueError("mask shape does not match values")
        if len(self.patient_ids) != n or len(self.columns) != p:
            raise ValueError("row/column labels do not match matrix shape")
        if len(set(self.patient_ids)) != n:
            raise ValueError("duplicate patient ids in matrix")
        # Masked cells carry NaN so accidental use is loud.
        self.values = np.where(self.mask, np.nan, self.values)

    @property
    def n_patients(self) -> int:
        return self.values.shape[0]

    @property
    def n_features(self) -> int:
        return self.values.shape[1]

    @property
    def column_names(self) -> list[str]:
        return [c.name for c in self.columns]

    def column_index(self, name: str) -> int:
        for i, c in enumerate(self.columns):
            if c.name == name:
                return i
        raise KeyError(f"no such column: {name!r}")

    def select_rows(self, patient_ids: list[str]) -> "FeatureMatrix":
        index = {pid: i for i, pid in enumerate(self.patient_ids)}
        try:
            rows = [index[p] for p in patient_ids]
        except KeyError as exc:
            raise KeyError(f"patient not in matrix: {exc.args[0]!r}") from None
        return FeatureMatrix(
            patient_ids=list(patient_ids),
            columns=list(self.columns),
            values=self.values[rows].copy(),
            mask=self.mask[rows].copy(),
        )

    def select_columns(self, names: list[str]) -> "FeatureMatrix":
        cols = [self.column_index(n) for n in names]
        return FeatureMatrix(
            patient_ids=list(self.patient_ids),
            columns=[self.columns[i] for i in cols],
            values=self.values[:, cols].copy(),
            mask=self.mask[:, cols].copy(),
        )

    def concat_columns(self, other: "FeatureMatrix") -> "FeatureMatrix":
        """Column-wise join of two matrices over the same patients."""
        if other.patient_ids != self.patient_ids:
            other = other.select_rows(self.patient_ids)
        overlap = set(self.column_names) & set(other.column_names)
        if overlap:
            raise ValueError(f"duplicate columns in join: {sorted(overlap)}")
        return FeatureMatrix(
            patient_ids=list(self.patient_ids),
            columns=list(self.columns) + list(other.columns),
            values=np.hstack([self.values, other.values]),
            mask=np.hstack([self.mask, other.mask]),
        )


@dataclass(frozen=True)
class MissingnessReport:
    """Per-column missing fraction and their unweighted average."""

    per_column: dict[str, float]
    overall: float


# ---------------------------------------------------------------------------
# windowing

def select_windowed_value(
    observations: tuple[Observation, ...] | list[Observation],
    feature_name: str,
    window: tuple[int, int],
) -> float | None:
    """Pick the observation closest to the visit inside ``window``.

    Candidates are observations of ``feature_name`` with offset inside the
    inclusive window. The smallest absolute offset wins; an exact tie in
    absolute offset is broken toward the earlier (pre-visit) observation.
    Returns None when no observation qualifies.
    """
    lo, hi = window
    best: Observation | None = None
    for obs in observations:
        if obs.name != feature_name or not (lo <= obs.offset_days <= hi):
            continue
        if best is None:
            best = obs
            continue
        cand, cur = abs(obs.offset_days), abs(best.offset_days)
        if cand < cur or (cand == cur and obs.offset_days < best.offset_days):
            best = obs
    return best.value if best is not None else None


def build_feature_matrix(records: list[PatientRecord]) -> FeatureMatrix:
    """Windowed extraction of the structured feature block, one row per record."""
    columns = [ColumnMeta(name=f.name, kind=f.kind) for f in STRUCTURED_FEATURES]
    n, p = len(records), len(columns)
    values = np.full((n, p), np.nan)
    mask = np.ones((n, p), dtype=bool)
    for i, rec in enumerate(records):
        for j, fdef in enumerate(STRUCTURED_FEATURES):
            v = select_windowed_value(rec.observations, fdef.name, fdef.window)
            if v is not None:
                values[i, j] = v
                mask[i, j] = False
    return FeatureMatrix(
        patient_ids=[r.patient_id for r in records],
        columns=columns, values=values, mask=mask,
    )


# ---------------------------------------------------------------------------
# exclusion

#: Exclusion reasons, stable strings used in the ledger file.
REASON_TOO_FEW_STRUCTURED = "structured<4"
REASON_NO_OUTCOME = "no outcome"

MIN_STRUCTURED_FEATURES = 4


def structured_feature_count(record: PatientRecord) -> int:
    """Number of structured features with an in-window observation."""
    return sum(
        select_windowed_value(record.observations, f.name, f.window) is not None
        for f in STRUCTURED_FEATURES
    )


def apply_exclusion(
    records: list[PatientRecord],
) -> tuple[list[PatientRecord], list[tuple[str, str]]]:
    """Split records into the analysis set and an exclusion ledger.

    A record is excluded when fewer than four structured features survive
    windowing, or when it has no survival outcome. Both reasons are
    recorded when both apply, one ``(patient_id, reason)`` entry each.
    """
    kept: list[PatientRecord] = []
    excluded: list[tuple[str, str]] = []
    for rec in records:
        reasons = []
        if structured_feature_count(rec) < MIN_STRUCTURED_FEATURES:
            reasons.append(REASON_TOO_FEW_STRUCTURED)
        if rec.outcome is None:
            reasons.append(REASON_NO_OUTCOME)
        if reasons:
            excluded.extend((rec.patient_id, r) for r in reasons)
        else:
            kept.append(rec)
    return kept, excluded


# ---------------------------------------------------------------------------
# split

def split_cohort(
    patient_ids: list[str], test_fraction: float = 0.2, seed: int = 0
) -> tuple[list[str], list[str]]:
    """Deterministic train/test split over unique patient ids.

    The test set holds ``round(test_fraction * n)`` patients drawn by a
    seeded shuffle of the sorted ids, so the outcome does not depend on
    input order. Cohorts below five patients cannot be split.
    """
    ids = sorted(patient_ids)
    if len(set(ids)) != len(ids):
        raise SplitError("duplicate patient ids in cohort")
    n = len(ids)
    if n < 5:
        raise SplitError("cohort too small to split")
    if not 0.0 < test_fraction < 1.0:
        raise SplitError(f"test fraction out of range: {test_fraction}")
    n_test = int(round(n * test_fraction))
    n_test = min(max(n_test, 1), n - 1)
    rng = np.random.default_rng(seed)
    order = rng.permutation(n)
    test = sorted(ids[i] for i in order[:n_test])
    train = sorted(ids[i] for i in order[n_test:])
    return train, test


# ---------------------------------------------------------------------------
# missingness

def missingness_report(matrix: FeatureMatrix) -> MissingnessReport:
    """Fraction of missing cells per column, plus the column-wise average."""
    if matrix.n_patients == 0:
        raise ValueError("empty matrix")
    frac = matrix.mask.mean(axis=0)
    per_column = {c.name: float(frac[j]) for j, c in enumerate(matrix.columns)}
    return MissingnessReport(per_column=per_column, overall=float(frac.mean()))


# ---------------------------------------------------------------------------
# cohort file I/O

def _parse_date(raw, pid: str, field_name: str) -> dt.date:
    try:
        return dt.date.fromisoformat(raw)
    except (TypeError, ValueError):
        raise IngestionError(f"{pid}: bad {field_name} {raw!r}, expected ISO-8601") from None


def _coerce_value(name: str, raw) -> float:
    fdef = feature_def(name)
    if isinstance(raw, str):
        if fdef.value_map is None or raw not in fdef.value_map:
            raise IngestionError(f"unmapped label {raw!r} for feature {name!r}")
        return fdef.value_map[raw]
    value = float(raw)
    if not np.isfinite(value):
        raise IngestionError(f"non-finite value for feature {name!r}")
    return value


def record_from_dict(doc: dict) -> PatientRecord:
    """Build a PatientRecord from one parsed cohort-file object."""
    try:
        pid = str(doc["patient_id"])
    except KeyError:
        raise IngestionError("record without patient_id") from None
    visit = _parse_date(doc.get("visit_date"), pid, "visit_date")
    rt_start = _parse_date(doc.get("rt_start_date"), pid, "rt_start_date")

    observations = []
    for entry in doc.get("observations", []):
        try:
            name = entry["name"]
            value = _coerce_value(name, entry["value"])
            offset = int(entry["offset_days"])
        except IngestionError:
            raise
        except (KeyError, TypeError, ValueError) as exc:
            raise IngestionError(f"{pid}: malformed observation {entry!r}") from exc
        observations.append(Observation(name=name, value=value, offset_days=offset))

    documents = {}
    for slot, text in (doc.get("documents") or {}).items():
        if text is None:
            continue
        documents[str(slot)] = str(text)

    outcome = None
    if doc.get("duration_days") is not None:
        if doc.get("event") is None:
            raise IngestionError(f"{pid}: duration without event flag")
        outcome = SurvivalOutcome(
            duration_days=int(doc["duration_days"]), event=bool(doc["event"])
        )

    return PatientRecord(
        patient_id=pid, visit_date=visit, rt_start_date=rt_start,
        observations=tuple(observations), documents=documents, outcome=outcome,
    )


def record_to_dict(rec: PatientRecord) -> dict:
    doc = {
        "patient_id": rec.patient_id,
        "visit_date": rec.visit_date.isoformat(),
        "rt_start_date": rec.rt_start_date.isoformat(),
        "duration_days": rec.outcome.duration_days if rec.outcome else None,
        "event": rec.outcome.event if rec.outcome else None,
        "observations": [
            {"name": o.name, "value": o.value, "offset_days": o.offset_days}
            for o in rec.observations
        ],
        "documents": {k: rec.documents[k] for k in DOCUMENT_SLOTS if k in rec.documents},
    }
    return doc


def read_cohort(path) -> list[PatientRecord]:
    records = []
    seen = set()
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                doc = json.loads(line)
            except json.JSONDecodeError as exc:
                raise IngestionError(f"{path}:{lineno}: invalid JSON") from exc
            rec = record_from_dict(doc)
            if rec.patient_id in seen:
                raise IngestionError(f"{path}:{lineno}: duplicate patient {rec.patient_id}")
            seen.add(rec.patient_id)
            records.append(rec)
    return records


def write_cohort(records: list[PatientRecord], path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(json.dumps(record_to_dict(rec), ensure_ascii=False) + "\n")


def write_exclusions(excluded: list[tuple[str, str]], path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for pid, reason in excluded:
            fh.write(json.dumps({"patient_id": pid, "reason": reason}) + "\n")


def read_exclusions(path) -> list[tuple[str, str]]:
    out = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                doc = json.loads(line)
                out.append((doc["patient_id"], doc["reason"]))
    return out


# ---------------------------------------------------------------------------
# outcome table I/O

def write_outcomes(records: list[PatientRecord], path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["patient_id", "duration_days", "event"])
        for rec in records:
            if rec.outcome is None:
                raise ValueError(f"{rec.patient_id}: no outcome to write")
            writer.writerow(
                [rec.patient_id, rec.outcome.duration_days, int(rec.outcome.event)]
            )


def read_outcomes(path) -> dict[str, SurvivalOutcome]:
    out: dict[str, SurvivalOutcome] = {}
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header != ["patient_id", "duration_days", "event"]:
            raise IngestionError(f"{path}: unexpected outcome header {header}")
        for row in reader:
            out[row[0]] = SurvivalOutcome(
                duration_days=int(row[1]), event=bool(int(row[2]))
            )
    return out


def outcome_arrays(
    outcomes: dict[str, SurvivalOutcome], patient_ids: list[str]
) -> tuple[np.ndarray, np.ndarray]:
    """Durations and event flags aligned to ``patient_ids``."""
    try:
        durations = np.array([outcomes[p].duration_days for p in patient_ids], dtype=float)
        events = np.array([outcomes[p].event for p in patient_ids], dtype=bool)
    except KeyError as exc:
        raise KeyError(f"no outcome for patient {exc.args[0]!r}") from None
    return durations, events


# ---------------------------------------------------------------------------
# matrix I/O
#
# A matrix is stored as <prefix>.csv (values; missing cells empty),
# <prefix>.mask.csv (0/1) and <prefix>.meta.json (format version and
# column metadata). Floats are written with repr so the round trip is
# bitwise exact.

def write_matrix(matrix: FeatureMatrix, prefix) -> None:
    prefix = str(prefix)
    with open(prefix + ".csv", "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["patient_id"] + matrix.column_names)
        for i, pid in enumerate(matrix.patient_ids):
            row = [pid] + [
                "" if matrix.mask[i, j] else repr(float(matrix.values[i, j]))
                for j in range(matrix.n_features)
            ]
            writer.writerow(row)
    with open(prefix + ".mask.csv", "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["patient_id"] + matrix.column_names)
        for i, pid in enumerate(matrix.patient_ids):
            writer.writerow([pid] + [int(x) for x in matrix.mask[i]])
    meta = {
        "format_version": MATRIX_FORMAT_VERSION,
        "n_patients": matrix.n_patients,
        "columns": [
            {"name": c.name, "kind": c.kind, "group": c.group} for c in matrix.columns
        ],
    }
    with open(prefix + ".meta.json", "w", encoding="utf-8") as fh:
        json.dump(meta, fh, indent=1)
        fh.write("\n")


def read_matrix(prefix) -> FeatureMatrix:
    prefix = str(prefix)
    try:
        with open(prefix + ".meta.json", encoding="utf-8") as fh:
            meta = json.load(fh)
    except FileNotFoundError:
        raise IngestionError(f"missing matrix metadata: {prefix}.meta.json") from None
    version = meta.get("format_version")
    if version != MATRIX_FORMAT_VERSION:
        raise IngestionError(
            f"unsupported matrix format version {version!r} "
            f"(expected {MATRIX_FORMAT_VERSION})"
        )
    columns = [
        ColumnMeta(name=c["name"], kind=c["kind"], group=c.get("group"))
        for c in meta["columns"]
    ]
    patient_ids: list[str] = []
    rows: list[list[float]] = []
    mask_rows: list[list[bool]] = []
    with open(prefix + ".csv", newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header != ["patient_id"] + [c.name for c in columns]:
            raise IngestionError(f"{prefix}.csv: header does not match metadata")
        for row in reader:
            patient_ids.append(row[0])
            vals, miss = [], []
            for cell in row[1:]:
                if cell == "":
                    vals.append(np.nan)
                    miss.append(True)
                else:
                    vals.append(float(cell))
                    miss.append(False)
            rows.append(vals)
            mask_rows.append(miss)
    values = np.array(rows, dtype=float).reshape(len(rows), len(columns))
    mask = np.array(mask_rows, dtype=bool).reshape(len(rows), len(columns))
    # The parallel mask file is authoritative; cross-check it.
    with open(prefix + ".mask.csv", newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        next(reader)
        stored = np.array(
            [[bool(int(x)) for x in row[1:]] for row in reader], dtype=bool
        ).reshape(len(rows), len(columns))
    if not np.array_equal(stored, mask):
        raise IngestionError(f"{prefix}: mask file disagrees with value file")
    return FeatureMatrix(
        patient_ids=patient_ids, columns=columns, values=values, mask=mask
    )
