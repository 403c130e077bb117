"""Unit Tests for render.py Module"""

import pytest

from LSTMPlanner.LSTMP import plan
from LSTMPlanner.render import render_svg


@pytest.fixture(scope="module")
def change_plan(lane_change_problem):
    return plan(lane_change_problem)


@pytest.mark.parametrize("style", ["snapshot", "st"])
def test_render_plan(change_plan, lane_change_problem, tmp_path, style):
    """Both styles write an SVG file"""
    path = render_svg(
        change_plan, tmp_path / f"{style}.svg", style, road=lane_change_problem.road
    )
    assert path.exists(), "Should write the file"
    assert "<svg" in path.read_text(), "Should be SVG"


def test_render_errors(change_plan, road, tmp_path):
    """Unknown styles and missing roads are rejected"""
    with pytest.raises(ValueError):
        render_svg(change_plan, tmp_path / "x.svg", "polar", road=road)
    with pytest.raises(ValueError):
        render_svg(None, tmp_path / "x.svg")
    assert render_svg(None, tmp_path / "road.svg", road=road).exists(), "Should draw"
