"""Note structurization: templates, parsing, retries, accuracy scoring."""

import datetime as dt
import json
import re

import pytest
import requests

from llmsurv.cohort import PatientRecord, SurvivalOutcome
from llmsurv.errors import PromptAssetError, ProviderError, StructurizationGateError
from llmsurv.structurizer import (
    CATEGORY_KEYS,
    EMPTY_SLOT_TEXT,
    NOT_EVALUABLE,
    PARSE_FALLBACK,
    PARSE_STRICT,
    PARSE_TOLERANT,
    SCHEMAS,
    AccuracyEstimate,
    ClinicalFeatureSet,
    DecodingParams,
    HttpChatProvider,
    ParseFailure,
    ParsedCode,
    PromptTemplate,
    Provenance,
    ScoreRecord,
    StructurizePolicy,
    batch_structurize,
    evaluate_accuracy,
    load_templates,
    parse_response,
    read_feature_sets,
    read_score_records,
    render_prompt,
    score_against_gold,
    structurize_patient,
    write_feature_sets,
    write_score_records,
)
from llmsurv.structurizer.prompts import INSTRUCTION_BLOCK, PROMPT_SHA256

_KEY_IN_PROMPT = re.compile(r'\{\s*"([A-Za-z_]+)=\d+"\s*\}')


def _record(pid="P1", note="Known lung primary, stable on imaging."):
    return PatientRecord(
        patient_id=pid,
        visit_date=dt.date(2017, 5, 2),
        rt_start_date=dt.date(2017, 5, 9),
        observations=(),
        documents={"Note": note, "CC": "back pain"},
        outcome=SurvivalOutcome(200, True),
    )


class ScriptedProvider:
    """Answers from a per-category script; repeats the last entry."""

    name = "scripted"

    def __init__(self, script):
        self.script = {k: list(v) for k, v in script.items()}
        self.n_calls = 0

    def complete(self, system, user, params):
        self.n_calls += 1
        key = _KEY_IN_PROMPT.search(user).group(1)
        queue = self.script[key]
        item = queue.pop(0) if len(queue) > 1 else queue[0]
        if isinstance(item, Exception):
            raise item
        return item


def _echo_provider(templates):
    """Provider that answers every category with its template's example."""
    return ScriptedProvider({k: [t.example_response] for k, t in templates.items()})


# ---------------------------------------------------------------------------
# templates


def test_templates_load_and_self_describe():
    templates = load_templates()
    assert tuple(templates) == CATEGORY_KEYS
    for key, tpl in templates.items():
        parsed = parse_response(key, tpl.example_response)
        assert isinstance(parsed, ParsedCode)
        assert parsed.status == PARSE_STRICT
        assert set(tpl.placeholders) == set(SCHEMAS[key].prompt_slots)
        assert " ".join(tpl.body.split()).endswith(INSTRUCTION_BLOCK)


def test_template_digest_is_enforced(monkeypatch):
    monkeypatch.setitem(PROMPT_SHA256, "emergency", "0" * 64)
    with pytest.raises(PromptAssetError, match="integrity check"):
        load_templates()


def test_template_validation_rejects_mutations():
    from llmsurv.structurizer.prompts import _validate

    body = load_templates()["re_RT"].body
    with pytest.raises(PromptAssetError, match="instruction block"):
        _validate("re_RT", body + "\nBe creative.")
    with pytest.raises(PromptAssetError, match="example response"):
        _validate("re_RT", re.sub(r'\{\s*"re_RT=\d+"\s*\}', "NONE", body))
    with pytest.raises(PromptAssetError, match="unknown placeholders"):
        _validate("re_RT", body.replace("{Note}", "{Diary}", 1))


def test_render_prompt_fills_slots_and_defaults():
    templates = load_templates()
    tpl = templates["general_condition"]
    text = render_prompt(tpl, {"Note": "walks unaided", "CC": ""})
    assert "walks unaided" in text
    assert "{" + tpl.placeholders[0] + "}" not in text
    for slot in tpl.placeholders:
        if slot != "Note":
            assert EMPTY_SLOT_TEXT in text
            break


def test_render_prompt_does_not_rescan_inserted_text():
    tpl = load_templates()["general_condition"]
    text = render_prompt(tpl, {"Note": "beware of {Note} injection"})
    assert "beware of {Note} injection" in text


def test_render_prompt_rejects_unknown_placeholder():
    rogue = PromptTemplate(key="general_condition", body="{Diary}", placeholders=("Diary",))
    with pytest.raises(PromptAssetError, match="unknown placeholder"):
        render_prompt(rogue, {})


# ---------------------------------------------------------------------------
# parsing


def test_strict_parse_accepts_the_documented_shape():
    for raw in ['{ "general_condition=2" }', '{"general_condition=2"}', '  { "general_condition=2" }\n']:
        parsed = parse_response("general_condition", raw)
        assert parsed == ParsedCode(code=2, status=PARSE_STRICT)


def test_tolerant_parse_recovers_from_prose():
    parsed = parse_response("general_condition", "I believe general_condition=3 fits best.")
    assert parsed == ParsedCode(code=3, status=PARSE_TOLERANT)
    first = parse_response("general_condition", "general_condition=1 or general_condition=2")
    assert first.code == 1  # first occurrence wins


def test_parse_rejects_inadmissible_codes_and_junk():
    assert isinstance(parse_response("general_condition", '{ "general_condition=7" }'), ParseFailure)
    assert isinstance(parse_response("re_RT", "re_RT=2"), ParseFailure)
    assert isinstance(parse_response("general_condition", "general_condition=-1"), ParseFailure)
    assert isinstance(parse_response("general_condition", "no code here"), ParseFailure)
    failure = parse_response("general_condition", None)
    assert isinstance(failure, ParseFailure)
    assert failure.reason == "non-text response"
    # the sentinel for not-evaluable is itself a legal strict answer
    assert parse_response("pathology", '{ "pathology=9" }').code == NOT_EVALUABLE


# ---------------------------------------------------------------------------
# per-patient pipeline


def test_structurize_happy_path():
    templates = load_templates()
    provider = _echo_provider(templates)
    fs = structurize_patient(_record(), provider, templates=templates)
    assert fs.patient_id == "P1"
    assert set(fs.codes) == set(CATEGORY_KEYS)
    for key in CATEGORY_KEYS:
        expected = int(re.search(r"=(\d+)", templates[key].example_response).group(1))
        assert fs.codes[key] == expected
        assert fs.provenance[key] == Provenance(
            raw_response=templates[key].example_response,
            parse_status=PARSE_STRICT,
            attempts=1,
        )
    assert provider.n_calls == len(CATEGORY_KEYS)


def test_structurize_requires_the_gate_documents():
    with pytest.raises(StructurizationGateError):
        structurize_patient(_record(note="  "), ScriptedProvider({}))


def test_transport_errors_are_retried():
    templates = load_templates()
    script = {k: [t.example_response] for k, t in templates.items()}
    script["emergency"] = [ProviderError("socket reset"), templates["emergency"].example_response]
    provider = ScriptedProvider(script)
    fs = structurize_patient(_record(), provider, templates=templates)
    assert fs.provenance["emergency"].attempts == 2
    assert fs.provenance["emergency"].parse_status == PARSE_STRICT
    assert fs.codes["emergency"] == int(
        re.search(r"=(\d+)", templates["emergency"].example_response).group(1)
    )


def test_unparseable_answers_exhaust_into_fallback():
    templates = load_templates()
    script = {k: [t.example_response] for k, t in templates.items()}
    script["disease_control"] = ["the patient is doing fine"]
    policy = StructurizePolicy(max_attempts=3)
    fs = structurize_patient(_record(), ScriptedProvider(script), policy, templates)
    assert fs.codes["disease_control"] == NOT_EVALUABLE
    assert fs.provenance["disease_control"] == Provenance(
        raw_response="the patient is doing fine",
        parse_status=PARSE_FALLBACK,
        attempts=3,
    )


def test_tolerant_route_is_recorded_in_provenance():
    templates = load_templates()
    script = {k: [t.example_response] for k, t in templates.items()}
    script["RT_aim"] = ["Decision: RT_aim=1, as discussed."]
    fs = structurize_patient(_record(), ScriptedProvider(script), templates=templates)
    assert fs.codes["RT_aim"] == 1
    assert fs.provenance["RT_aim"].parse_status == PARSE_TOLERANT


def test_policy_validation():
    with pytest.raises(ValueError, match="max_attempts"):
        StructurizePolicy(max_attempts=0)


# ---------------------------------------------------------------------------
# batches


def test_batch_preserves_order_and_parallelism_is_transparent():
    templates = load_templates()
    records = [_record(pid=f"P{i}") for i in range(6)]
    sequential = batch_structurize(records, _echo_provider(templates), parallelism=1)
    threaded = batch_structurize(records, _echo_provider(templates), parallelism=3)
    assert [fs.patient_id for fs in sequential] == [r.patient_id for r in records]
    assert sequential == threaded
    with pytest.raises(ValueError, match="parallelism"):
        batch_structurize(records, _echo_provider(templates), parallelism=0)


def test_feature_set_file_round_trip(tmp_path):
    templates = load_templates()
    sets = batch_structurize([_record("P1"), _record("P2")], _echo_provider(templates))
    path = tmp_path / "llm_features.jsonl"
    write_feature_sets(sets, path)
    assert read_feature_sets(path) == sets


# ---------------------------------------------------------------------------
# accuracy harness


def _feature_set(pid, codes):
    return ClinicalFeatureSet(
        patient_id=pid,
        codes=codes,
        provenance={k: Provenance("", PARSE_STRICT, 1) for k in codes},
    )


def _gold_and_predictions(n_cases=20, wrong_general=0):
    gold = {}
    predicted = []
    for i in range(n_cases):
        pid = f"P{i:03d}"
        codes = {k: 1 for k in CATEGORY_KEYS}
        gold[pid] = dict(codes)
        guess = dict(codes)
        if i < wrong_general:
            guess["general_condition"] = 2
        predicted.append(_feature_set(pid, guess))
    return gold, predicted


def test_scoring_replicates_per_rater_and_requires_coverage():
    gold, predicted = _gold_and_predictions(4)
    records = score_against_gold(predicted, gold, n_raters=3)
    assert len(records) == 4 * len(CATEGORY_KEYS) * 3
    assert {r.rater_id for r in records} == {"rater1", "rater2", "rater3"}
    assert all(r.predicted_correct for r in records)
    with pytest.raises(KeyError, match="no prediction"):
        score_against_gold(predicted[:2], gold)


def test_accuracy_extremes_are_exact():
    gold, predicted = _gold_and_predictions(20)
    report = evaluate_accuracy(score_against_gold(predicted, gold), n_resamples=200)
    assert report.n_cases == 20
    assert report.average.accuracy == 1.0
    assert (report.average.ci_lo, report.average.ci_hi) == (1.0, 1.0)
    assert report.average.format_percent() == "100.0 (100.0-100.0)"

    all_wrong = [
        _feature_set(fs.patient_id, {k: 0 for k in CATEGORY_KEYS}) for fs in predicted
    ]
    report = evaluate_accuracy(score_against_gold(all_wrong, gold), n_resamples=200)
    assert report.average.accuracy == 0.0
    assert (report.average.ci_lo, report.average.ci_hi) == (0.0, 0.0)


def test_accuracy_counts_thirteen_of_twenty():
    gold, predicted = _gold_and_predictions(20, wrong_general=7)
    report = evaluate_accuracy(score_against_gold(predicted, gold), n_resamples=300)
    by_cat = {e.category: e for e in report.per_category}
    assert by_cat["general_condition"].accuracy == pytest.approx(0.65)
    assert by_cat["pathology"].accuracy == 1.0
    expected_avg = (0.65 + 6 * 1.0) / 7
    assert report.average.accuracy == pytest.approx(expected_avg)
    assert by_cat["general_condition"].ci_lo < 0.65 < by_cat["general_condition"].ci_hi


def test_accuracy_is_invariant_under_record_order():
    import random

    gold, predicted = _gold_and_predictions(12, wrong_general=3)
    records = score_against_gold(predicted, gold, n_raters=2)
    shuffled = records[:]
    random.Random(4).shuffle(shuffled)
    assert evaluate_accuracy(records, n_resamples=250) == evaluate_accuracy(
        shuffled, n_resamples=250
    )


def test_accuracy_input_validation():
    with pytest.raises(ValueError, match="no score records"):
        evaluate_accuracy([])
    records = [ScoreRecord("C1", "R1", "weather", 1, True)]
    with pytest.raises(ValueError, match="unknown categor"):
        evaluate_accuracy(records)
    partial = [
        ScoreRecord("C1", "R1", k, 1, True) for k in CATEGORY_KEYS
    ] + [ScoreRecord("C2", "R1", "general_condition", 1, True)]
    with pytest.raises(ValueError, match="every case"):
        evaluate_accuracy(partial)


def test_accuracy_estimate_formatting():
    est = AccuracyEstimate("average", 0.875, 0.8361, 0.9114)
    assert est.format_percent() == "87.5 (83.6-91.1)"


def test_score_record_file_round_trip(tmp_path):
    gold, predicted = _gold_and_predictions(3, wrong_general=1)
    records = score_against_gold(predicted, gold, n_raters=2)
    path = tmp_path / "scores.tsv"
    write_score_records(records, path)
    assert read_score_records(path) == records


# ---------------------------------------------------------------------------
# HTTP adapter


class _FakeResponse:
    def __init__(self, body, fail=False):
        self._body = body
        self._fail = fail

    def raise_for_status(self):
        if self._fail:
            raise requests.HTTPError("500")

    def json(self):
        if isinstance(self._body, Exception):
            raise self._body
        return self._body


def test_http_provider_happy_paths(monkeypatch):
    seen = {}

    def fake_post(url, json=None, timeout=None):
        seen.update(url=url, payload=json, timeout=timeout)
        return _FakeResponse({"message": {"content": "{ \"re_RT=0\" }"}})

    monkeypatch.setattr("llmsurv.structurizer.providers.requests.post", fake_post)
    provider = HttpChatProvider("http://localhost:11434/api/chat", "m1")
    out = provider.complete("sys", "user text", DecodingParams(temperature=0.0))
    assert out == '{ "re_RT=0" }'
    assert seen["url"].endswith("/api/chat")
    assert seen["payload"]["model"] == "m1"
    assert seen["payload"]["messages"][0] == {"role": "system", "content": "sys"}
    assert seen["payload"]["options"] == {"temperature": 0.0}
    assert seen["payload"]["stream"] is False

    monkeypatch.setattr(
        "llmsurv.structurizer.providers.requests.post",
        lambda *a, **k: _FakeResponse(
            {"choices": [{"message": {"content": "alt shape"}}]}
        ),
    )
    assert provider.complete(None, "u", DecodingParams()) == "alt shape"


def test_http_provider_error_paths(monkeypatch):
    provider = HttpChatProvider("http://localhost:9/api/chat", "m1")

    monkeypatch.setattr(
        "llmsurv.structurizer.providers.requests.post",
        lambda *a, **k: _FakeResponse({}, fail=True),
    )
    with pytest.raises(ProviderError, match="request failed"):
        provider.complete(None, "u", DecodingParams())

    monkeypatch.setattr(
        "llmsurv.structurizer.providers.requests.post",
        lambda *a, **k: _FakeResponse(ValueError("bad json")),
    )
    with pytest.raises(ProviderError, match="invalid JSON"):
        provider.complete(None, "u", DecodingParams())

    monkeypatch.setattr(
        "llmsurv.structurizer.providers.requests.post",
        lambda *a, **k: _FakeResponse({"unexpected": 1}),
    )
    with pytest.raises(ProviderError, match="response shape"):
        provider.complete(None, "u", DecodingParams())
