import json

import pytest

from irqueue.core.config import load_app_config, section
from irqueue.core.storage import iter_jsonl, read_jsonl, save_report, write_jsonl
from irqueue.models.schemas import ExplorationReport, TableEntry


def test_default_config():
    cfg = load_app_config()
    assert section(cfg, "simulation")["level_count"] == 16
    assert section(cfg, "fuzz")["batch_size"] > 0
    assert section(cfg, "nope") == {}


def test_missing_and_malformed_config(tmp_path):
    with pytest.raises(FileNotFoundError):
        load_app_config(tmp_path / "absent.yaml")
    empty = tmp_path / "empty.yaml"
    empty.write_text("", encoding="utf-8")
    assert load_app_config(empty) == {}
    listing = tmp_path / "list.yaml"
    listing.write_text("- a\n- b\n", encoding="utf-8")
    with pytest.raises(ValueError):
        load_app_config(listing)


def test_jsonl_roundtrip_and_bad_line(tmp_path):
    path = write_jsonl(tmp_path / "deep" / "t.jsonl", [TableEntry(queue="q0", node="A"), TableEntry()])
    assert read_jsonl(path) == [{"queue": "q0", "node": "A"}, {"queue": None, "node": None}]
    path.write_text('{"ok": 1}\nnot json\n', encoding="utf-8")
    with pytest.raises(ValueError, match=":2:"):
        read_jsonl(path)


def test_jsonl_line_numbers_and_non_objects(tmp_path):
    path = tmp_path / "t.jsonl"
    path.write_text('{"a": 1}\n\n{"b": 2}\n', encoding="utf-8")
    assert list(iter_jsonl(path)) == [(1, {"a": 1}), (3, {"b": 2})]
    path.write_text('{"a": 1}\n[1, 2]\n', encoding="utf-8")
    with pytest.raises(ValueError, match=r":2: expected a JSON object, got list"):
        read_jsonl(path)


def test_report_file(tmp_path):
    path = save_report(tmp_path / "r.json", ExplorationReport(scenario="s", schedules_visited=3))
    assert json.loads(path.read_text(encoding="utf-8"))["schedules_visited"] == 3
