"""Rasterize traces onto RGB canvases and read/write binary PPM."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Union

from .core import PX_MAX, LohoError, Observation, Trace
from .geometry import round_half_up

Color = tuple[int, int, int]


class DegenerateCanvas(LohoError, ValueError):
    pass


@dataclass(frozen=True)
class Canvas:
    width: int
    height: int
    pixels: bytes  # row-major RGB

    def __post_init__(self) -> None:
        if self.width <= 0 or self.height <= 0:
            raise DegenerateCanvas(f"canvas is {self.width}x{self.height}")
        if len(self.pixels) != self.width * self.height * 3:
            raise ValueError("pixel buffer size does not match canvas dimensions")

    @classmethod
    def blank(cls, width: int, height: int, color: Color = (255, 255, 255)) -> "Canvas":
        if width <= 0 or height <= 0:
            raise DegenerateCanvas(f"canvas is {width}x{height}")
        return cls(width, height, bytes(color) * (width * height))

    def get(self, x: int, y: int) -> Color:
        i = 3 * (y * self.width + x)
        return tuple(self.pixels[i : i + 3])


@dataclass(frozen=True)
class TraceStyle:
    line: Color = (0, 90, 255)
    start: Color = (0, 200, 0)
    end: Color = (230, 0, 0)
    markers: bool = True
    # color the line from ``start`` to ``end`` along the waypoints
    gradient: bool = False


def to_canvas_px(p, width: int, height: int) -> tuple[int, int]:
    return (round_half_up(p[0] * (width - 1) / PX_MAX), round_half_up(p[1] * (height - 1) / PX_MAX))


def bresenham(x0: int, y0: int, x1: int, y1: int) -> list[tuple[int, int]]:
    """Integer line from (x0, y0) to (x1, y1), both ends included."""
    pts = []
    dx, dy = abs(x1 - x0), -abs(y1 - y0)
    sx = 1 if x0 < x1 else -1
    sy = 1 if y0 < y1 else -1
    err = dx + dy
    while True:
        pts.append((x0, y0))
        if x0 == x1 and y0 == y1:
            return pts
        e2 = 2 * err
        if e2 >= dy:
            err += dy
            x0 += sx
        if e2 <= dx:
            err += dx
            y0 += sy


class _Raster:
    def __init__(self, canvas: Canvas):
        self.w, self.h = canvas.width, canvas.height
        self.buf = bytearray(canvas.pixels)

    def put(self, x: int, y: int, c: Color) -> None:
        if 0 <= x < self.w and 0 <= y < self.h:
            i = 3 * (y * self.w + x)
            self.buf[i : i + 3] = bytes(c)

    def square(self, cx: int, cy: int, size: int, c: Color) -> None:
        r = size // 2
        for y in range(cy - r, cy + r + 1):
            for x in range(cx - r, cx + r + 1):
                self.put(x, y, c)

    def canvas(self) -> Canvas:
        return Canvas(self.w, self.h, bytes(self.buf))


def _lerp(a: Color, b: Color, t: float) -> Color:
    return tuple(round_half_up(a[i] + (b[i] - a[i]) * t) for i in range(3))


def render_trace(canvas: Canvas, trace: Trace, style: TraceStyle = TraceStyle()) -> Canvas:
    """Draw ``trace`` on a copy of ``canvas``: Bresenham polyline, 3x3 start and 5x5 end squares."""
    r = _Raster(canvas)
    pts = [to_canvas_px(p, r.w, r.h) for p in trace.waypoints]
    nseg = len(pts) - 1
    for i in range(nseg):
        color = _lerp(style.start, style.end, i / max(nseg - 1, 1)) if style.gradient else style.line
        for x, y in bresenham(*pts[i], *pts[i + 1]):
            r.put(x, y, color)
    if style.markers:
        r.square(*pts[0], 3, style.start)
        r.square(*pts[-1], 5, style.end)
    return r.canvas()


def render_observation(obs: Observation, width: int, height: int, background: Color = (255, 255, 255)) -> Canvas:
    """Schematic top-down frame: objects as 5x5 squares, gripper as a 3x3 cross."""
    r = _Raster(Canvas.blank(width, height, background))
    for oid in sorted(obs.objects):
        v = obs.objects[oid]
        c = (120, 120, 120) if v.graspable else (40, 40, 40)
        if v.at_destination:
            c = (90, 170, 90)
        r.square(*to_canvas_px(v.px, width, height), 5, c)
    gx, gy = to_canvas_px(obs.gripper_px, width, height)
    for d in (-1, 0, 1):
        r.put(gx + d, gy, (0, 0, 0))
        r.put(gx, gy + d, (0, 0, 0))
    return r.canvas()


def to_ppm(canvas: Canvas) -> bytes:
    return b"P6\n%d %d\n255\n" % (canvas.width, canvas.height) + canvas.pixels


def from_ppm(data: bytes) -> Canvas:
    tokens: list[bytes] = []
    pos = 0
    while len(tokens) < 4:
        while pos < len(data) and data[pos : pos + 1].isspace():
            pos += 1
        if data[pos : pos + 1] == b"#":
            pos = data.index(b"\n", pos) + 1
            continue
        start = pos
        while pos < len(data) and not data[pos : pos + 1].isspace():
            pos += 1
        tokens.append(data[start:pos])
    if tokens[0] != b"P6" or tokens[3] != b"255":
        raise ValueError("only 8-bit binary PPM (P6) is supported")
    w, h = int(tokens[1]), int(tokens[2])
    pos += 1  # single whitespace byte before the raster
    return Canvas(w, h, data[pos : pos + w * h * 3])


def write_ppm(canvas: Canvas, path: Union[str, Path]) -> None:
    Path(path).write_bytes(to_ppm(canvas))


def read_ppm(path: Union[str, Path]) -> Canvas:
    return from_ppm(Path(path).read_bytes())
