import math
import random

import pytest

from conftest import make_obs
from loho.core import Trace
from loho.render import (
    Canvas,
    DegenerateCanvas,
    TraceStyle,
    bresenham,
    from_ppm,
    read_ppm,
    render_observation,
    render_trace,
    to_ppm,
    write_ppm,
)

PLAIN = TraceStyle(markers=False)
WHITE = (255, 255, 255)


def painted(canvas):
    return {(x, y) for y in range(canvas.height) for x in range(canvas.width) if canvas.get(x, y) != WHITE}


def test_horizontal_trace_is_one_row():
    c = render_trace(Canvas.blank(100, 100), Trace(((0, 500), (1000, 500))), PLAIN)
    # 500 * 99 / 1000 = 49.5 rounds half up to 50
    assert painted(c) == {(x, 50) for x in range(100)}


def test_diagonal_pixel_count():
    c = render_trace(Canvas.blank(101, 101), Trace(((0, 0), (1000, 1000))), PLAIN)
    assert painted(c) == {(i, i) for i in range(101)}


def test_bresenham_against_line_oracle():
    rng = random.Random(3)
    for _ in range(300):
        x0, y0, x1, y1 = (rng.randint(-40, 40) for _ in range(4))
        pts = bresenham(x0, y0, x1, y1)
        assert len(pts) == max(abs(x1 - x0), abs(y1 - y0)) + 1
        assert pts[0] == (x0, y0) and pts[-1] == (x1, y1)
        for (ax, ay), (bx, by) in zip(pts, pts[1:]):
            assert max(abs(bx - ax), abs(by - ay)) == 1
        n = math.hypot(x1 - x0, y1 - y0)
        if n:
            major = max(abs(x1 - x0), abs(y1 - y0))
            for x, y in pts:
                # distance along the minor axis to the ideal line is at most half a pixel
                off = abs((x1 - x0) * (y0 - y) - (x0 - x) * (y1 - y0)) / major
                assert off <= 0.5 + 1e-9


def test_markers():
    c = render_trace(Canvas.blank(50, 50), Trace(((200, 200), (800, 800))))
    style = TraceStyle()
    assert c.get(10, 10) == style.start and c.get(9, 11) == style.start
    assert c.get(39, 39) == style.end and c.get(37, 41) == style.end


def test_render_is_idempotent_and_pure():
    blank = Canvas.blank(64, 48)
    tr = Trace(((0, 0), (300, 900), (1000, 200)))
    once = render_trace(blank, tr)
    assert render_trace(once, tr) == once
    assert blank == Canvas.blank(64, 48)


def test_ppm_bytes_deterministic(tmp_path):
    tr = Trace(((10, 20), (500, 980), (990, 5)))
    for i in range(2):
        write_ppm(render_trace(Canvas.blank(80, 60), tr, TraceStyle(gradient=True)), tmp_path / f"{i}.ppm")
    assert (tmp_path / "0.ppm").read_bytes() == (tmp_path / "1.ppm").read_bytes()
    assert (tmp_path / "0.ppm").read_bytes().startswith(b"P6\n80 60\n255\n")


def test_ppm_round_trip(tmp_path):
    c = render_observation(make_obs((500, 500), {"cup": ((100, 900), False), "box": ((700, 200), True)}), 40, 30)
    assert from_ppm(to_ppm(c)) == c
    write_ppm(c, tmp_path / "o.ppm")
    assert read_ppm(tmp_path / "o.ppm") == c


def test_ppm_with_comment():
    c = Canvas.blank(2, 1, (1, 2, 3))
    data = b"P6\n# made by hand\n2 1\n255\n" + c.pixels
    assert from_ppm(data) == c
    with pytest.raises(ValueError):
        from_ppm(b"P3\n2 1\n255\n1 2 3 1 2 3\n")


@pytest.mark.parametrize("w, h", [(0, 10), (10, 0), (-1, 5)])
def test_degenerate_canvas(w, h):
    with pytest.raises(DegenerateCanvas):
        Canvas.blank(w, h)


def test_markers_clip_at_border():
    c = render_trace(Canvas.blank(10, 10), Trace(((0, 0), (1000, 1000))))
    assert c.get(0, 0) == TraceStyle().start
    assert c.get(9, 9) == TraceStyle().end


def test_gradient_runs_start_to_end():
    style = TraceStyle(markers=False, gradient=True)
    c = render_trace(Canvas.blank(101, 11), Trace(((0, 500), (500, 500), (1000, 500))), style)
    assert c.get(10, 5) == style.start
    assert c.get(90, 5) == style.end
