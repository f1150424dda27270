import math
import xml.etree.ElementTree as ET
from pathlib import Path

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from matplotlib import cbook

from raretail.plots import BoxStats, bar_plot_svg, box_plot_svg, box_stats, line_plot_svg

DATA = Path(__file__).parent / "data"


def test_box_stats_matches_matplotlib():
    x = np.random.default_rng(0).standard_t(3, size=100)
    ref = cbook.boxplot_stats(x)[0]
    s = box_stats(x)
    assert s.median == pytest.approx(ref["med"])
    assert s.q25 == pytest.approx(ref["q1"])
    assert s.q75 == pytest.approx(ref["q3"])
    assert s.whisker_low == pytest.approx(ref["whislo"])
    assert s.whisker_high == pytest.approx(ref["whishi"])
    np.testing.assert_allclose(sorted(s.outliers), np.sort(ref["fliers"]))
    assert s.count == 100


@settings(max_examples=100, deadline=None)
@given(st.lists(st.floats(-1e6, 1e6), min_size=1, max_size=200))
def test_box_stats_invariants(values):
    s = box_stats(values)
    assert s.whisker_low <= s.q25 <= s.median <= s.q75 <= s.whisker_high
    x = np.asarray(values)
    inside = x[(x >= s.whisker_low) & (x <= s.whisker_high)]
    assert inside.size + len(s.outliers) == x.size
    ref = cbook.boxplot_stats(x)[0]
    assert s.whisker_low == pytest.approx(ref["whislo"]) and s.whisker_high == pytest.approx(ref["whishi"])


def test_box_stats_covers_and_empty():
    s = box_stats([-1.0, 0.5, 1.0, 2.0])
    assert s.q25 == pytest.approx(0.125)
    assert not s.covers(0.0) and s.covers(0.125)
    assert box_stats([1.0, 2.0, 3.0]).covers(2.0)
    e = box_stats([np.nan])
    assert e.count == 0 and math.isnan(e.median)
    assert e.to_dict()["outliers"] == []


def _parse(svg):
    root = ET.fromstring(svg)
    assert root.tag.endswith("svg")
    return root


def test_empty_series_render():
    _parse(box_plot_svg([], title="none"))
    _parse(box_plot_svg([("empty", box_stats([]))]))
    _parse(line_plot_svg([], title="none"))
    _parse(line_plot_svg([("all nan", [1, 2], [np.nan, np.nan])]))
    _parse(bar_plot_svg([], []))


def test_zero_iqr_box_is_a_line():
    svg = box_plot_svg([("flat", box_stats([2.0] * 10))])
    root = _parse(svg)
    ns = "{http://www.w3.org/2000/svg}"
    assert not [r for r in root.iter(ns + "rect") if r.get("fill") == "none"]


def test_nan_breaks_line():
    svg = line_plot_svg([("s", [1, 2, 3, 4, 5], [0.1, 0.2, np.nan, 0.3, 0.4])])
    assert svg.count("<polyline") == 2


def test_titles_are_escaped():
    root = _parse(bar_plot_svg(["a<b"], [1.0], title="p & q"))
    assert any(t.text == "p & q" for t in root.iter("{http://www.w3.org/2000/svg}text"))


def test_bar_chart_golden():
    svg = bar_plot_svg(["t(4)", "Exp", "Normal"], [0.12, 0.003, 0.0], [0.01, 0.001, 0.0],
                       title="relative error", xlabel="distribution", ylabel="|p - p_u| / p")
    assert svg == (DATA / "bar_golden.svg").read_text()
    assert svg == bar_plot_svg(["t(4)", "Exp", "Normal"], [0.12, 0.003, 0.0], [0.01, 0.001, 0.0],
                               title="relative error", xlabel="distribution", ylabel="|p - p_u| / p")


def test_box_plot_deterministic():
    groups = [("a", box_stats(np.arange(20.0))), ("b", box_stats(np.arange(20.0) ** 2))]
    assert box_plot_svg(groups, reference=0.0) == box_plot_svg(groups, reference=0.0)
    assert isinstance(groups[0][1], BoxStats)
