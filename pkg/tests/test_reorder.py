import pytest

from irqueue.services.driver import Driver, UsageError
from irqueue.services.reorder import measure_reorder
from irqueue.services.runner import run_scenario


def by_node(report):
    return {e.node: e for e in report.entries}


def test_serial_trace_has_zero_displacement(scenario):
    trace, _ = run_scenario(scenario("serial_abc"))
    report = measure_reorder(trace)
    assert [e.node for e in report.entries] == ["A", "B", "C"]
    assert all(e.displacement == 0 and e.arrival_displacement == 0 for e in report.entries)
    assert report.max_displacement == 0
    assert report.histogram == {"0": 3}


def test_reordered_trace_reports_both_bases(scenario):
    trace, _ = run_scenario(scenario("preempt_reorder"))
    entries = by_node(measure_reorder(trace))
    assert {n: e.displacement for n, e in entries.items()} == {"A": 0, "C": 0, "B": 0}
    assert {n: e.arrival_displacement for n, e in entries.items()} == {"A": 0, "B": 1, "C": -1}
    assert entries["B"].arrival_rank == 1
    assert entries["B"].completion_rank == 2


@pytest.mark.parametrize("name", ["preempt_reorder", "suite/four_enqueues", "suite/two_queues"])
def test_displacements_sum_to_zero(scenario, name):
    trace, _ = run_scenario(scenario(name))
    report = measure_reorder(trace)
    assert sum(e.displacement for e in report.entries) == 0
    assert sum(e.arrival_displacement for e in report.entries) == 0


def test_undrained_trace_is_rejected(scenario):
    driver = Driver(scenario("serial_abc"))
    driver.run()
    with pytest.raises(UsageError):
        measure_reorder(driver.trace())
