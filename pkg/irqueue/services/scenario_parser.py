"""Line-oriented scenario and schedule files.

```
levels: 3
queue: q0
init: q0 A sentinel
op: V level=1 nodes=B
op: P level=0
schedule: start 0
schedule: advance 5
```
"""
from __future__ import annotations

import re
from pathlib import Path
from typing import Dict, List, Optional

from pydantic import ValidationError

from irqueue.models.schemas import ADVANCE, START, Choice, OpSpec, QueueSpec, Scenario
from irqueue.queue.frames import OpKind

_OP_INDEX_RE = re.compile(r"op (\d+):")
_KEYS = ("name", "levels", "queue", "init", "op", "schedule")


class ScenarioError(ValueError):
    def __init__(self, message: str, lineno: Optional[int] = None, source: str = "scenario"):
        where = f"{source}:{lineno}: " if lineno is not None else f"{source}: "
        super().__init__(where + message)
        self.lineno = lineno
        self.message = message


def _strip(line: str) -> str:
    return line.split("#", 1)[0].strip()


def _lines(text: str):
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = _strip(raw)
        if line:
            yield lineno, line


def _int(value: str, what: str) -> int:
    try:
        return int(value)
    except ValueError:
        raise ValueError(f"{what} must be an integer, got {value!r}") from None


def _parse_choices(value: str) -> List[str]:
    parts = value.split()
    if parts and parts[0] == ADVANCE and len(parts) <= 2:
        count = _int(parts[1], "advance count") if len(parts) == 2 else 1
        if count < 1:
            raise ValueError("advance count must be positive")
        return [ADVANCE] * count
    if len(parts) == 2 and parts[0] == START:
        return [str(Choice(START, _int(parts[1], "op index")))]
    raise ValueError(f"bad schedule entry {value!r} (expected 'advance [<count>]' or 'start <op>')")


def _parse_op(value: str, default_queue: Optional[str]) -> OpSpec:
    parts = value.split()
    if not parts:
        raise ValueError("op needs a kind")
    try:
        kind = OpKind(parts[0])
    except ValueError:
        raise ValueError(f"unknown op kind {parts[0]!r} (expected V, P or PEEK)") from None
    fields: Dict[str, str] = {}
    for part in parts[1:]:
        key, sep, val = part.partition("=")
        if not sep or key not in ("level", "queue", "nodes", "n"):
            raise ValueError(f"bad op field {part!r}")
        if key in fields:
            raise ValueError(f"op field {key!r} given twice")
        fields[key] = val
    if "level" not in fields:
        raise ValueError("op needs level=<int>")
    queue = fields.get("queue", default_queue)
    if queue is None:
        raise ValueError("op needs queue=<name> or a declared queue")
    return OpSpec(
        kind=kind,
        level=_int(fields["level"], "level"),
        queue=queue,
        nodes=[n for n in fields.get("nodes", "").split(",") if n],
        n=_int(fields["n"], "n") if "n" in fields else None,
    )


def _first_error(exc: ValidationError) -> str:
    msg = exc.errors()[0]["msg"]
    return msg[len("Value error, "):] if msg.startswith("Value error, ") else msg


def parse_scenario(text: str, name: str = "scenario", default_levels: Optional[int] = None) -> Scenario:
    """Parse and validate a scenario; nothing is executed on error."""
    levels: Optional[int] = None
    queues: List[QueueSpec] = []
    ops: List[OpSpec] = []
    op_lines: List[int] = []
    schedule: List[str] = []
    has_schedule = False

    for lineno, line in _lines(text):
        key, sep, value = line.partition(":")
        key, value = key.strip(), value.strip()
        if not sep or key not in _KEYS:
            raise ScenarioError(f"unknown directive {line!r}", lineno, name)
        try:
            if key == "name":
                name = value
            elif key == "levels":
                levels = _int(value, "levels")
            elif key == "queue":
                parts = value.split()
                if not parts or len(parts) > 2 or (len(parts) == 2 and parts[1] != "self-sentinel"):
                    raise ValueError("expected 'queue: <name> [self-sentinel]'")
                if any(q.name == parts[0] for q in queues):
                    raise ValueError(f"queue {parts[0]!r} declared twice")
                queues.append(QueueSpec(name=parts[0], self_sentinel=len(parts) == 2))
            elif key == "init":
                parts = value.split()
                if len(parts) < 2:
                    raise ValueError("expected 'init: <queue> <label|sentinel> ...'")
                matches = [q for q in queues if q.name == parts[0]]
                if not matches:
                    raise ValueError(f"init for undeclared queue {parts[0]!r}")
                if matches[0].init:
                    raise ValueError(f"queue {parts[0]!r} initialised twice")
                matches[0].init = parts[1:]
            elif key == "op":
                ops.append(_parse_op(value, queues[0].name if queues else "q0"))
                op_lines.append(lineno)
            else:
                has_schedule = True
                schedule.extend(_parse_choices(value))
        except (ValueError, ValidationError) as exc:
            message = _first_error(exc) if isinstance(exc, ValidationError) else str(exc)
            raise ScenarioError(message, lineno, name) from None

    data = {"name": name, "ops": ops}
    if levels is not None or default_levels is not None:
        data["level_count"] = levels if levels is not None else default_levels
    if queues:
        data["queues"] = queues
    if has_schedule:
        data["schedule"] = schedule
    try:
        return Scenario(**data)
    except ValidationError as exc:
        message = _first_error(exc)
        match = _OP_INDEX_RE.match(message)
        lineno = op_lines[int(match.group(1))] if match and int(match.group(1)) < len(op_lines) else None
        raise ScenarioError(message, lineno, name) from None


def load_scenario(path: Path, default_levels: Optional[int] = None) -> Scenario:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"Missing scenario file: {path}")
    return parse_scenario(path.read_text(encoding="utf-8"), name=path.stem, default_levels=default_levels)


def parse_schedule(text: str, source: str = "schedule") -> List[Choice]:
    choices: List[Choice] = []
    for lineno, line in _lines(text):
        if line.startswith("schedule:"):
            line = line[len("schedule:"):].strip()
        try:
            choices.extend(Choice.parse(entry) for entry in _parse_choices(line))
        except ValueError as exc:
            raise ScenarioError(str(exc), lineno, source) from None
    return choices


def load_schedule(path: Path) -> List[Choice]:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"Missing schedule file: {path}")
    return parse_schedule(path.read_text(encoding="utf-8"), source=path.name)

