from collections import Counter

import pytest

from irqueue.models.schemas import OpSpec, Scenario
from irqueue.queue.frames import OpKind
from irqueue.queue.procedures import P_PATHS, V_PATHS
from irqueue.services.driver import Driver, simulate
from irqueue.services.explorer import _backtrack, explore
from irqueue.services.scenario_parser import load_scenario
from tests.conftest import SUITE


def count_schedules(scenario, prefix=()):
    """Independent recursive count of legal schedules (fresh replay per tree node)."""
    driver = Driver(scenario)
    for choice in prefix:
        driver.apply(choice)
    if driver.finished:
        return 1
    return sum(count_schedules(scenario, prefix + (choice,)) for choice in driver.legal_choices())


def test_empty_scenario_has_one_schedule():
    report = explore(Scenario(name="empty"))
    assert report.schedules_visited == 1
    assert report.failures == 0


def test_two_level_visits_every_preemption_point(scenario):
    s = scenario("two_level")
    solo = simulate(s).frames[0]
    assert solo.kind is OpKind.V and solo.level == 1
    report = explore(s)
    assert report.schedules_visited == solo.steps + 1
    assert report.failures == 0
    assert report.livelock_suspects == []


@pytest.mark.parametrize("name", ["two_level", "suite/three_level", "suite/self_sentinel"])
def test_schedule_count_matches_recursive_enumeration(scenario, name):
    s = scenario(name)
    assert explore(s).schedules_visited == count_schedules(s)


def test_stall_is_exhibited_and_still_delivered(scenario):
    report = explore(scenario("two_level"))
    assert report.stalls_observed > 0
    assert report.stall_witness is not None
    assert report.failures == 0


def test_serial_frames_are_isolated(scenario):
    report = explore(scenario("serial_abc"))
    assert report.schedules_visited == 1
    assert report.isolated_frames == 3
    assert report.reorder.max_displacement == 0


def test_exploration_is_deterministic(scenario):
    s = scenario("suite/three_level")
    first, second = explore(s), explore(s)
    assert first.schedules_visited == second.schedules_visited
    assert first.max_v_steps == second.max_v_steps
    assert first.digest == second.digest


def test_livelock_bound_is_reported_not_raised(scenario):
    report = explore(scenario("two_level"), max_steps=5)
    assert report.livelock_suspects
    assert report.failures == 0


def test_backtrack():
    assert _backtrack([(0, 2), (0, 1), (1, 2)]) == [1]
    assert _backtrack([(1, 2), (0, 1)]) is None
    assert _backtrack([]) is None


@pytest.fixture(scope="module")
def suite_reports():
    return {path.stem: explore(load_scenario(path)) for path in SUITE}


@pytest.mark.parametrize("path", SUITE, ids=lambda p: p.stem)
def test_suite_has_no_failures(path, golden, suite_reports):
    report = suite_reports[path.stem]
    assert report.failures == 0, report.failure_cases[:3]
    assert report.livelock_suspects == []
    golden(
        f"explore_{path.stem}",
        {"schedules_visited": report.schedules_visited, "max_V_steps": report.max_v_steps},
    )


def test_suite_reaches_every_branch_of_v_and_p(suite_reports):
    paths = Counter()
    for report in suite_reports.values():
        paths.update(report.paths)
    assert {pc: paths[pc] for pc in V_PATHS + P_PATHS if not paths[pc]} == {}


def grid_scenario(levels, enqueues, dequeues):
    """Enqueue ``i`` runs at level ``i % levels``; the dequeues follow at level 0."""
    ops = [OpSpec(kind=OpKind.V, level=i % levels, queue="q0", nodes=[chr(ord("A") + i)]) for i in range(enqueues)]
    ops += [OpSpec(kind=OpKind.P, level=0, queue="q0") for _ in range(dequeues)]
    return Scenario(name=f"grid_{levels}l_{enqueues}v_{dequeues}p", level_count=levels, ops=ops)


GRID = [(levels, enqueues, dequeues) for levels in (2, 3) for enqueues in (2, 3, 4) for dequeues in (0, 1, 2)]


@pytest.mark.parametrize("levels, enqueues, dequeues", GRID)
def test_grid(levels, enqueues, dequeues, golden):
    s = grid_scenario(levels, enqueues, dequeues)
    report = explore(s)
    assert report.failures == 0, report.failure_cases[:3]
    assert report.livelock_suspects == []
    golden(f"explore_{s.name}", {"schedules_visited": report.schedules_visited, "max_V_steps": report.max_v_steps})
