import json

import pytest

from synee.corpus import (
    EventSchema,
    RawSentence,
    iter_gold_spans,
    load_schema,
    load_sentences,
    parse_duee_record,
    resplit_dev,
)
from synee.errors import ParseError, SchemaError, SpanValidationError

LAYOFF_RECORD = {
    "text": "前两天，软件服务商Oracle公司宣布裁员900人。",
    "id": "doc-1",
    "event_list": [
        {
            "event_type": "组织关系-裁员",
            "trigger": "裁员",
            "trigger_start_index": 19,
            "arguments": [
                {"role": "时间", "argument": "前两天", "argument_start_index": 0},
                {"role": "裁员方", "argument": "软件服务商Oracle公司", "argument_start_index": 4},
            ],
        }
    ],
}


def record_line(record=LAYOFF_RECORD, **mutations) -> str:
    merged = {**record, **mutations}
    return json.dumps(merged, ensure_ascii=False)


def test_parse_layoff_record():
    sentence = parse_duee_record(record_line())
    assert sentence.id == "doc-1"
    assert len(sentence.events) == 1
    event = sentence.events[0]
    assert event.event_type == "组织关系-裁员"
    assert event.trigger_text == "裁员"
    assert sentence.text[event.trigger_start : event.trigger_start + 2] == "裁员"
    assert [a.role for a in event.arguments] == ["时间", "裁员方"]
    assert event.arguments[1].text == "软件服务商Oracle公司"


def test_parse_empty_event_list():
    sentence = parse_duee_record(record_line(event_list=[]))
    assert sentence.events == ()


def test_parse_rejects_shifted_trigger_offset():
    bad = json.loads(record_line())
    bad["event_list"][0]["trigger_start_index"] += 1
    with pytest.raises(SpanValidationError, match="裁员"):
        parse_duee_record(json.dumps(bad, ensure_ascii=False))


def test_parse_rejects_bad_argument_offset():
    bad = json.loads(record_line())
    bad["event_list"][0]["arguments"][0]["argument_start_index"] = 1
    with pytest.raises(SpanValidationError, match="时间"):
        parse_duee_record(json.dumps(bad, ensure_ascii=False))


def test_parse_rejects_out_of_range_offset():
    bad = json.loads(record_line())
    bad["event_list"][0]["trigger_start_index"] = 10_000
    with pytest.raises(SpanValidationError):
        parse_duee_record(json.dumps(bad, ensure_ascii=False))


def test_parse_error_carries_line_number():
    with pytest.raises(ParseError, match="line 42"):
        parse_duee_record("{not json", line_number=42)


def test_parse_requires_text_and_id():
    with pytest.raises(ParseError):
        parse_duee_record(json.dumps({"id": "x", "event_list": []}))
    with pytest.raises(ParseError):
        parse_duee_record(json.dumps({"text": "abc", "event_list": []}))


def test_parse_checks_schema_membership(schema):
    line = record_line()
    parse_duee_record(line, schema=schema)
    bad = json.loads(line)
    bad["event_list"][0]["event_type"] = "不存在的类型"
    with pytest.raises(SchemaError, match="不存在的类型"):
        parse_duee_record(json.dumps(bad, ensure_ascii=False), schema=schema)
    bad = json.loads(line)
    bad["event_list"][0]["arguments"][0]["role"] = "冠军"
    with pytest.raises(SchemaError, match="冠军"):
        parse_duee_record(json.dumps(bad, ensure_ascii=False), schema=schema)


def test_duplicate_events_are_dropped_with_warning(caplog):
    doubled = json.loads(record_line())
    doubled["event_list"].append(json.loads(json.dumps(doubled["event_list"][0])))
    with caplog.at_level("WARNING"):
        sentence = parse_duee_record(json.dumps(doubled, ensure_ascii=False))
    assert len(sentence.events) == 1
    assert "duplicate event" in caplog.text


def schema_line(event_type, roles):
    return json.dumps(
        {"event_type": event_type, "role_list": [{"role": r} for r in roles]},
        ensure_ascii=False,
    )


def test_load_schema_counts_types(tmp_path):
    path = tmp_path / "schema.json"
    lines = [schema_line(f"类型{i}", ["时间", "地点"]) for i in range(65)]
    path.write_text("\n".join(lines), encoding="utf-8")
    schema = load_schema(path)
    assert len(schema) == 65


def test_load_schema_single_type(tmp_path):
    path = tmp_path / "schema.json"
    path.write_text(schema_line("组织关系-裁员", ["时间"]), encoding="utf-8")
    schema = load_schema(path)
    assert len(schema) == 1
    assert schema.roles_for("组织关系-裁员") == ("时间",)


def test_load_schema_rejects_duplicates(tmp_path):
    path = tmp_path / "schema.json"
    path.write_text(
        schema_line("组织关系-裁员", ["时间"]) + "\n" + schema_line("组织关系-裁员", ["时间"]),
        encoding="utf-8",
    )
    with pytest.raises(SchemaError, match="duplicate"):
        load_schema(path)


def test_schema_rejects_empty_role_list():
    with pytest.raises(SchemaError):
        EventSchema({"组织关系-裁员": []})


def make_dummy(i):
    return RawSentence(id=f"d{i}", text=f"句子{i}")


def test_resplit_1500():
    dev = [make_dummy(i) for i in range(1500)]
    validation, test = resplit_dev(dev)
    assert len(validation) == 500
    assert len(test) == 1000
    assert validation == dev[:500]
    assert test == dev[500:]


def test_resplit_scales_small_input(caplog):
    with caplog.at_level("WARNING"):
        validation, test = resplit_dev([make_dummy(i) for i in range(3)])
    assert (len(validation), len(test)) == (1, 2)
    assert "expected 1500" in caplog.text


def test_resplit_is_deterministic_and_partitions():
    import random

    dev = [make_dummy(i) for i in range(1500)]
    random.Random(3).shuffle(dev)
    first = resplit_dev(dev)
    second = resplit_dev(dev)
    assert first == second
    validation, test = first
    validation_ids = {s.id for s in validation}
    test_ids = {s.id for s in test}
    assert validation_ids.isdisjoint(test_ids)
    assert validation_ids | test_ids == {s.id for s in dev}


def test_load_sentences_rejects_duplicate_ids(tmp_path):
    path = tmp_path / "corpus.json"
    path.write_text(record_line() + "\n" + record_line(), encoding="utf-8")
    with pytest.raises(ParseError, match="duplicate sentence id"):
        load_sentences(path)


def test_every_fixture_gold_span_slices_exactly(fixture_sentences):
    for sentence in fixture_sentences:
        for subtask in ("trigger", "role"):
            for _cls, text, start in iter_gold_spans(sentence, subtask):
                assert sentence.text[start : start + len(text)] == text
