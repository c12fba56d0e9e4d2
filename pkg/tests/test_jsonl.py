import pytest

from histkit.jsonl import JsonlError, iter_jsonl, read_jsonl, write_jsonl


def test_round_trip(tmp_path):
    path = tmp_path / "sub" / "data.jsonl"
    records = [{"a": 1}, {"b": [1, 2]}, {"c": "späit"}]
    assert write_jsonl(path, records) == 3
    assert read_jsonl(path) == records


def test_blank_lines_skipped(tmp_path):
    path = tmp_path / "data.jsonl"
    path.write_text('{"a": 1}\n\n   \n{"a": 2}\n', encoding="utf-8")
    assert [obj for _, obj in iter_jsonl(path)] == [{"a": 1}, {"a": 2}]


def test_line_numbers_are_one_based_and_skip_blanks(tmp_path):
    path = tmp_path / "data.jsonl"
    path.write_text('{"a": 1}\n\n{"a": 2}\n', encoding="utf-8")
    assert [lineno for lineno, _ in iter_jsonl(path)] == [1, 3]


def test_invalid_json_names_line(tmp_path):
    path = tmp_path / "data.jsonl"
    path.write_text('{"a": 1}\nnot json\n', encoding="utf-8")
    with pytest.raises(JsonlError, match="line 2: invalid JSON"):
        read_jsonl(path)
    try:
        read_jsonl(path)
    except JsonlError as exc:
        assert exc.line == 2


def test_non_object_line_rejected(tmp_path):
    path = tmp_path / "data.jsonl"
    path.write_text("[1, 2]\n", encoding="utf-8")
    with pytest.raises(JsonlError, match="line 1"):
        read_jsonl(path)
