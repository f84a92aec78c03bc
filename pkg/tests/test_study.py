import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from nonloc.study import (CSV_COLUMNS, ConvergenceTable, LevelResult, Mode, Schedule,
                          compute_rates, fixed_h_view, parse_csv, problem_catalog, render_report,
                          regression_slope, run_schedule, table_from_rows)


def _row(level, delta, h, e, l2=1e-3):
    return LevelResult(level, delta, h, 10, e, l2, l2, 0.5, 3, e / 2)


def test_catalog_fields():
    ex51 = problem_catalog("ex51")
    assert ex51.dimension == 2
    assert ex51.f(0.5, 0.5, 0.4) == pytest.approx(-3.0)
    assert ex51.u_ref(0.5, 0.5) == pytest.approx(0.375)
    a = problem_catalog("ex52a")
    x1, x2 = np.array([0.3, 0.9]), np.array([0.2, 0.7])
    assert np.allclose(a.f(x1, x2, 0.0), ex51.f(x1, x2, 0.0))
    assert np.allclose(a.g(x1, x2, 0.0), ex51.g(x1, x2, 0.0))
    assert a.mu == 0 and problem_catalog("ex52b").mu == 1
    b = problem_catalog("ex52b")
    assert b.g(0.3, 0.2, 0.1) - ex51.g(0.3, 0.2, 0.1) == pytest.approx(1e-3 * math.sin(0.3 - 0.4))
    c = problem_catalog("ex53a")
    assert c.dimension == 1 and c.u_ref(1.0) == 1.0
    assert c.f(0.5, 0.1) == pytest.approx(-3.0 + 0.01 * math.exp(0.5))
    assert problem_catalog("ex53b").g(2.0, 0.1) == pytest.approx(8 + 1e-3 * math.sin(2.0))
    with pytest.raises(ValueError):
        problem_catalog("ex99")


def test_compute_rates():
    assert compute_rates([1.01e-2, 2.83e-3], [0.2, 0.1])[0] == pytest.approx(1.84, abs=5e-3)
    assert compute_rates([4, 1], [2, 1]) == [2.0]
    assert compute_rates([1e-2, 1e-2], [2, 1]) == [0.0]
    with pytest.raises(ValueError):
        compute_rates([1.0, 0.0], [2, 1])
    with pytest.raises(ValueError):
        compute_rates([1.0], [1.0])


@settings(max_examples=50, deadline=None)
@given(st.floats(-3, 3), st.floats(1e-3, 10), st.lists(st.integers(0, 8), min_size=2,
                                                          max_size=6, unique=True))
def test_rates_recover_power_law(p, c, ks):
    params = [2.0 ** -k for k in ks]
    errs = [c * x ** p for x in params]
    assert np.allclose(compute_rates(errs, params), p, atol=1e-9)
    assert regression_slope(params, errs) == pytest.approx(p, abs=1e-9)


def test_schedule_parameters():
    s = Schedule("fixed-delta", 0.4, 3)
    assert s.parameters() == [(0.4, 0.4), (0.4, 0.2), (0.4, 0.1)]
    s = Schedule("fixed_ratio", 0.4, 3, m=2)
    assert s.mode is Mode.FIXED_RATIO
    assert np.allclose(s.parameters(), [(0.4, 0.2), (0.2, 0.1), (0.1, 0.05)])
    s = Schedule("power-law", 0.4, 3, m=2, beta=1.5)
    (d0, h0), (d1, h1), _ = s.parameters()
    assert d0 / h0 == pytest.approx(2.0)
    assert d1 == pytest.approx(0.4 * 2 / 3)
    assert h1 / d1 ** 1.5 == pytest.approx(h0 / d0 ** 1.5)


def test_schedule_validation():
    with pytest.raises(ValueError):
        Schedule("fixed-delta", 0.4, 1)
    with pytest.raises(ValueError):
        Schedule("spiral", 0.4, 3)
    with pytest.raises(ValueError):
        Schedule("fixed-ratio", 0.4, 3, m=0.5)
    with pytest.raises(ValueError):
        Schedule("fixed-delta", 0.4, 3, mesh_size="area")
    with pytest.raises(ValueError):
        Schedule("power-law", 0.4, 3, beta=1.0, c=2.0).parameters()


def test_report_layouts():
    one = ConvergenceTable(Schedule("fixed-delta", 0.4, 2), [_row(0, 0.4, 0.4, 1e-2)])
    text = render_report(one)
    lines = text.strip().split("\n")
    assert lines[0] == ",".join(CSV_COLUMNS)
    assert len(lines) == 2 and lines[1].split(",")[4] == "--"
    two = ConvergenceTable(one.schedule, [_row(0, 0.4, 0.4, 1e-2), _row(1, 0.4, 0.2, 2.5e-3)])
    rows = parse_csv(render_report(two))
    assert rows[1]["energy_rate"] == pytest.approx(2.0)
    md = render_report(two, "md", extended=True)
    assert md.startswith("| delta/h |") and "2.00" in md
    with pytest.raises(ValueError):
        render_report(two, "xml")
    with pytest.raises(ValueError):
        render_report(ConvergenceTable(one.schedule))


@settings(max_examples=50, deadline=None)
@given(st.lists(st.tuples(st.floats(1e-6, 1.0), st.floats(1e-8, 1.0)), min_size=1, max_size=5))
def test_csv_roundtrip(vals):
    rows = [_row(k, 0.4 / 2 ** k, 0.1 / 2 ** k, e, l2) for k, (e, l2) in enumerate(vals)]
    table = ConvergenceTable(Schedule("fixed-ratio", 0.4, 2), rows)
    back = table_from_rows(parse_csv(render_report(table, extended=True)))
    for a, b in zip(rows, back.rows):
        for name in ("delta", "h", "energy", "l2", "max_err", "energy_h"):
            # 15 significant digits are written
            assert getattr(b, name) == pytest.approx(getattr(a, name), rel=1e-14)


def test_equal_errors_rate_zero():
    table = ConvergenceTable(Schedule("fixed-delta", 0.4, 2),
                             [_row(0, 0.4, 0.4, 1e-2), _row(1, 0.4, 0.2, 1e-2)])
    assert table.rates("energy") == [None, 0.0]


def test_fixed_h_view():
    a = ConvergenceTable(Schedule("fixed-ratio", 0.4, 2, m=2),
                         [_row(0, 0.4, 0.2, 1e-2), _row(1, 0.2, 0.1, 5e-3)])
    b = ConvergenceTable(Schedule("fixed-ratio", 0.6, 2, m=3),
                         [_row(0, 0.6, 0.2, 2e-2), _row(1, 0.3, 0.1, 1e-2)])
    view = fixed_h_view([a, b])
    assert [d for d, _, _ in view[0.1]] == [0.2, 0.3]


def test_run_schedule_small():
    s = Schedule("fixed-delta", 0.4, 3, policy="exactcaps")
    seen = []
    t = run_schedule(s, seen.append)
    assert len(t.rows) == 3 and len(seen) == 3
    e = [r.energy for r in t.rows]
    assert e[0] > e[1] > e[2]  # monotone refinement
    # L2 / energy stays within a band
    ratio = np.array([r.l2 / r.energy for r in t.rows])
    assert ratio.max() / ratio.min() <= 3
    # determinism: every error column repeats exactly; seconds is wall time
    again = run_schedule(s)
    cols = [c for c in CSV_COLUMNS if c != "seconds"]
    strip = [{c: r[c] for c in cols} for r in parse_csv(render_report(again, extended=True))]
    assert strip == [{c: r[c] for c in cols} for r in parse_csv(render_report(t, extended=True))]


def test_run_schedule_cache():
    cache = {}
    s = Schedule("fixed-ratio", 0.3, 2, m=3, problem="ex53b")
    a = run_schedule(s, cache=cache)
    b = run_schedule(Schedule("fixed-ratio", 0.3, 3, m=3, problem="ex53b"), cache=cache)
    assert len(cache) == 3
    assert [r.energy for r in b.rows[:2]] == [r.energy for r in a.rows]
    b.rows[0].energy = -1.0  # copies, not shared rows
    assert a.rows[0].energy > 0


def test_run_schedule_error_context():
    with pytest.raises(RuntimeError, match="level 0"):
        run_schedule(Schedule("fixed-delta", 0.4, 2, outer_degree=9))


def test_diameter_convention():
    s = Schedule("fixed-delta", 0.4, 2, mesh_size="diameter")
    t = run_schedule(s)
    # spacing h / sqrt(2), rounded up to whole cells; h is reported as a diameter
    assert t.rows[1].h == pytest.approx(math.sqrt(2) / math.ceil(math.sqrt(2) / 0.2))
