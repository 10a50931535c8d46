from __future__ import annotations

import json
from pathlib import Path

import pytest

from irqueue.services.scenario_parser import load_scenario

ROOT = Path(__file__).resolve().parents[1]
SCENARIOS = ROOT / "scenarios"
SUITE = sorted((SCENARIOS / "suite").glob("*.scn"))
GOLDENS = Path(__file__).resolve().parent / "goldens"


def pytest_addoption(parser):
    parser.addoption("--update-goldens", action="store_true", default=False, help="rewrite tests/goldens/*.json")


@pytest.fixture
def scenario():
    def _load(name: str):
        path = SCENARIOS / name
        if path.suffix != ".scn":
            path = path.with_suffix(".scn")
        return load_scenario(path)

    return _load


@pytest.fixture
def golden(request):
    """Compare ``value`` with ``tests/goldens/<name>.json``.

    Goldens are only written under ``--update-goldens``; a missing one fails.
    """
    update = request.config.getoption("--update-goldens")

    def _check(name: str, value):
        path = GOLDENS / f"{name}.json"
        if update:
            path.parent.mkdir(parents=True, exist_ok=True)
            path.write_text(json.dumps(value, indent=2, sort_keys=True) + "\n", encoding="utf-8")
            return
        if not path.exists():
            pytest.fail(f"golden {path.name} is missing; rerun with --update-goldens to record it")
        assert json.loads(path.read_text(encoding="utf-8")) == value, f"golden {path.name} changed"

    return _check
