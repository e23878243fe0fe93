import math
import re
import xml.etree.ElementTree as ET

import pytest

from conftest import make_dataset
from svnet.community import Partition
from svnet.errors import EmptyInputError
from svnet.plots import render_ccdf, render_microarray
from svnet.states import build_state_matrix

NS = "{http://www.w3.org/2000/svg}"


def _svg(path):
    return ET.parse(path).getroot()


def _cells(root):
    return [e for e in root.iter(NS + "rect") if "cell" in e.get("class", "")]


def test_single_buy_day(tmp_path):
    ds = make_dataset([("a", 2, 5, 0)], calendar_length=4)
    info = render_microarray(build_state_matrix(ds), Partition({"a": 0}), tmp_path / "m.svg")
    root = _svg(tmp_path / "m.svg")
    (bg,) = [e for e in root.iter(NS + "rect") if e.get("class") == "background"]
    assert bg.get("fill") == "#000000"
    (cell,) = _cells(root)
    assert cell.get("fill") == "#ff0000" and cell.get("y") == "2"
    assert info["cells"] == 1 and info["separators"] == 0


def test_two_clusters_one_separator(tmp_path):
    ds = make_dataset([("a", 0, 5, 0), ("b", 1, 0, 5), ("c", 0, 1, 1)], calendar_length=3)
    part = Partition({"a": 0, "b": 0, "c": 1})
    render_microarray(build_state_matrix(ds), part, tmp_path / "m.svg")
    root = _svg(tmp_path / "m.svg")
    lines = [e for e in root.iter(NS + "line") if e.get("class") == "separator"]
    assert len(lines) == 1 and lines[0].get("stroke") == "#add8e6"
    fills = {c.get("fill") for c in _cells(root)}
    assert fills == {"#ff0000", "#00b000", "#ffffff"}


def test_bs_cell_position(tmp_path):
    ds = make_dataset([("a", 0, 1, 0), ("b", 3, 10, 10)], calendar_length=5)
    render_microarray(build_state_matrix(ds), Partition({"a": 0, "b": 1}), tmp_path / "m.svg",
                      cell_width=4, cell_height=2)
    (white,) = [c for c in _cells(_svg(tmp_path / "m.svg")) if c.get("fill") == "#ffffff"]
    assert (white.get("x"), white.get("y")) == ("4", "6")


def test_within_cluster_order_by_activity(tmp_path):
    ds = make_dataset([("a", 0, 1, 0)] + [("b", d, 1, 0) for d in range(3)], calendar_length=3)
    render_microarray(build_state_matrix(ds), Partition({"a": 0, "b": 0}), tmp_path / "m.svg")
    xs = {c.get("x") for c in _cells(_svg(tmp_path / "m.svg")) if c.get("height") == "3"}
    assert xs == {"0"}  # b, the busier investor, is the first column


def test_empty_partition(tmp_path):
    ds = make_dataset([("a", 0, 1, 0)])
    with pytest.raises(EmptyInputError):
        render_microarray(build_state_matrix(ds), Partition({}), tmp_path / "m.svg")


def test_ccdf_single_point(tmp_path):
    ds = make_dataset([(i, d, 1, 0) for i in "abc" for d in range(5)])
    info = render_ccdf(ds, tmp_path / "c.svg")
    points = [e for e in _svg(tmp_path / "c.svg").iter(NS + "circle")]
    assert info["points"] == len(points) == 1


def test_ccdf_guide_slope(tmp_path):
    ds = make_dataset([("a", d, 1, 0) for d in range(40)] + [("b", 0, 1, 0)], calendar_length=40)
    render_ccdf(ds, tmp_path / "c.svg")
    (guide,) = [e for e in _svg(tmp_path / "c.svg").iter(NS + "line") if e.get("class") == "guide"]
    x1, y1, x2, y2 = (float(guide.get(f"data-{k}")) for k in ("x1", "y1", "x2", "y2"))
    slope = (math.log10(y2) - math.log10(y1)) / (math.log10(x2) - math.log10(x1))
    assert slope == pytest.approx(-1.0, abs=1e-12)
    assert guide.get("stroke-dasharray")
    render_ccdf(ds, tmp_path / "n.svg", guide=False)
    assert 'class="guide"' not in (tmp_path / "n.svg").read_text()


def test_ccdf_axes_cover_range(tmp_path):
    rows = [("a", 0, 1, 0)] + [("b", d, 1, 0) for d in range(10_000)]
    ds = make_dataset(rows, calendar_length=10_000)
    info = render_ccdf(ds, tmp_path / "c.svg")
    lo, hi = info["x_decades"]
    assert lo <= 0 and hi >= 4
    text = (tmp_path / "c.svg").read_text()
    assert re.search(r'data-log10-x="0 4"', text)


def test_ccdf_empty(tmp_path):
    with pytest.raises(EmptyInputError):
        render_ccdf(make_dataset([("a", 0, 0, 0)]), tmp_path / "c.svg")
