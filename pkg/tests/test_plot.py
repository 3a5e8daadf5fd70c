import re
import xml.etree.ElementTree as ET

import numpy as np
import pytest

from purets.plot import emit_line_plot, line_plot_svg

NS = "{http://www.w3.org/2000/svg}"


def test_svg_is_deterministic(tmp_path):
    s = [np.sin(np.arange(720) / 30), np.cos(np.arange(720) / 30)]
    a, b = tmp_path / "a.svg", tmp_path / "b.svg"
    emit_line_plot(s, ["pred", "truth"], a, title="x")
    emit_line_plot(s, ["pred", "truth"], b, title="x")
    assert a.read_bytes() == b.read_bytes()


def test_one_polyline_per_series_with_all_points():
    s = [np.sin(np.arange(720) / 30), np.cos(np.arange(720) / 30)]
    root = ET.fromstring(line_plot_svg(s, ["pred", "truth"]))
    lines = root.findall(f"{NS}polyline")
    assert len(lines) == 2
    assert all(len(p.get("points").split()) == 720 for p in lines)
    assert [t.text for t in root.findall(f"{NS}text")][-2:] == ["pred", "truth"]


def test_constant_series_renders():
    svg = line_plot_svg([np.ones(5), np.ones(5)], ["a", "b"])
    ys = {pt.split(",")[1] for pt in re.findall(r'points="([^"]*)"', svg)[0].split()}
    assert len(ys) == 1


def test_log_scale_and_labels_escaped():
    svg = line_plot_svg([[1.0, 1e-3, 1e-6]], ["a<b"], log_y=True)
    assert "a&lt;b" in svg
    ET.fromstring(svg)


@pytest.mark.parametrize("series, labels", [([], []), ([[]], ["a"]), ([[1, 2], [1]], ["a", "b"]), ([[1, 2]], [])])
def test_invalid_input(series, labels):
    with pytest.raises(ValueError):
        line_plot_svg(series, labels)
