import csv
import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hymlab.flows import FlowOptions
from hymlab.lab import (MONITOR_COLUMNS, REPORT_COLUMNS, ConvergenceReport, ReportRow, Scenario, bubbling_monitor,
                        fit_rate, holonomy_distance, kappa_sq, monitor_record, run_collapse_experiment,
                        thread_count, write_report)
from hymlab.testbed import TestbedGrid, linear_section_connection

nonneg = st.floats(0, 1e6, allow_nan=False)


def small(**kw):
    base = dict(N=16, count=3, t0=1.0, amplitude=0.3, kmax=1, t_ref=0.1, base_samples=((0.0, 0.0),),
                flow=FlowOptions(track_gauge=True))
    return Scenario(**{**base, **kw})


def test_unperturbed_scenario_is_exact():
    report, monitor = run_collapse_experiment(small(amplitude=0.0, base_samples=((0.0, 0.0), (0.2, 0.1))))
    assert [r.t for r in report.rows] == [0.5, 0.25, 0.125]
    for r in report.rows:
        assert r.dist_l2 == 0 and r.dist_l21 == 0 and r.f_c0 == 0 and r.steps == 0
    assert len(monitor) == 6 and all(m.m == 0 for m in monitor)
    assert report.rate is None and report.failed == []


def test_sweep_decays_and_is_thread_independent():
    sc = small()
    a, ma = run_collapse_experiment(sc, threads=1)
    b, mb = run_collapse_experiment(sc, threads=2)
    assert a == b and ma == mb
    d = [r.dist_l21 for r in a.rows]
    assert d[0] > d[1] > d[2]
    assert all(r.status == "ok" for r in a.rows)
    tm = [m.tm for m in ma]
    assert tm[0] > tm[1] > tm[2]


def test_failed_rows_do_not_abort():
    report, _ = run_collapse_experiment(small(flow=FlowOptions(max_steps=1)))
    assert report.failed == [0.5, 0.25, 0.125]
    assert all(r.status.startswith("failed") and math.isnan(r.dist_l2) for r in report.rows)


def test_scenario_validation():
    with pytest.raises(ValueError):
        Scenario(amplitude=-1.0)
    with pytest.raises(ValueError):
        Scenario(count=0)
    with pytest.raises(ValueError):
        Scenario(t_ref=0.0)
    assert Scenario(t0=2.0, count=3).t_sequence == [1.0, 0.5, 0.25]


@settings(max_examples=50, deadline=None)
@given(st.floats(1e-4, 1.0), nonneg, nonneg, nonneg)
def test_monitor_record_sum(t, fb, fa, k2):
    m = monitor_record(t, 0, fb, fa, k2)
    assert abs(m.m - (m.f_b + m.f_a_scaled + m.kappa_sq)) <= 1e-14 * max(1.0, m.m)
    assert m.tm == t * m.m and min(m.f_b, m.f_a_scaled, m.kappa_sq) >= 0


def test_bubbling_monitor_constant_section():
    A = linear_section_connection(TestbedGrid(8, 0.5), [0.2, -0.2], [0, 0])
    for m in bubbling_monitor(A, [(0, 0), (3, 5)], 0.1):
        assert m.f_b == 0 and m.f_a_scaled == 0 and m.kappa_sq == 0


@pytest.mark.parametrize("s", [1.0, 0.3])
def test_bubbling_monitor_linear_section(s):
    c = np.array([1 + 2j, -1 - 2j])
    A = linear_section_connection(TestbedGrid(8, s), [0.2, -0.2], c)
    recs = bubbling_monitor(A, [(0, 0), (4, 2)], 0.1)
    # Theta_j has Frobenius norm^2 = 2 |c_j|^2, and the metric factors s, 1/s cancel
    want = 8 * np.pi**2 * np.sum(np.abs(c) ** 2)
    for m in recs:
        assert m.f_b == 0 and m.f_a_scaled == 0
        assert m.kappa_sq == pytest.approx(want, rel=1e-12)
    sc = Scenario(lifts=(0.2, -0.2), slope=tuple(c))
    assert kappa_sq(sc, (0.1, 0.0)) == pytest.approx(want, rel=1e-6)
    assert kappa_sq(Scenario(), (0.0, 0.0)) == 0.0


def test_holonomy_distance_of_reference_is_zero():
    _, _, A0 = small().fiber((0.0, 0.0))
    assert holonomy_distance(A0, A0) == 0.0


def rows_from(pairs):
    return [ReportRow(1.0, 0.0, d, f, 0.0, 1, 1.0) for f, d in pairs]


def test_fit_rate():
    f = np.array([1e-1, 1e-2, 1e-3, 1e-7])
    rows = rows_from(zip(f, 3 * f**1.5))
    # the last row is below the accuracy floor and is ignored
    assert fit_rate(rows) == pytest.approx(1.5, abs=1e-12)
    assert fit_rate(rows[:1]) is None
    assert fit_rate(rows_from([(1e-2, 1.0), (1e-2, 2.0)])) is None


def test_thread_count(monkeypatch):
    monkeypatch.setenv("HYMLAB_THREADS", "3")
    assert thread_count(10) == 3 and thread_count(2) == 2
    monkeypatch.delenv("HYMLAB_THREADS")
    assert 1 <= thread_count(1) == 1


def test_write_report(tmp_path):
    rows = [ReportRow(0.5, 0.1, 0.2, 0.3, 0.0, 4, 0.2),
            ReportRow(0.25, float("nan"), float("nan"), float("nan"), float("nan"), 0, 0.0, "failed: x, y")]
    report = ConvergenceReport("demo", rows, None, [0.25])
    mon = [monitor_record(0.5, 0, 0.0, 0.1, 0.0)]
    write_report(report, mon, tmp_path)
    with open(tmp_path / "report.csv", newline="") as fh:
        table = list(csv.reader(fh))
    assert tuple(table[0]) == REPORT_COLUMNS
    assert table[1][:2] == ["0.5", "0.1"] and table[2][-1] == "failed: x, y"
    assert table[-1] == ["fitted_rate", ""]
    with open(tmp_path / "monitor.csv", newline="") as fh:
        assert tuple(next(csv.reader(fh))) == MONITOR_COLUMNS
    text = (tmp_path / "report.json").read_text()
    data = json.loads(text)
    assert list(data) == sorted(data)
    assert data["rows"][1]["dist_l2"] is None and data["failed_rows"] == [0.25]
