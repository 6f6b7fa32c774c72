"""Text/CSV diagram serialization and SVG barcode / scatter plots.

Every writer here is a pure function of its input and returns bytes; the
test suite pins them against golden files.
"""

from __future__ import annotations

import csv
import io
import math

from morsegrid.errors import ParseError
from morsegrid.persistence import INF, PersistenceDiagram, PersistencePair

TXT_HEADER = "# birth death dimension creator_x creator_y creator_z destructor_x destructor_y destructor_z weight"
CSV_HEADER = "index,birth,death"


def _fmt(v) -> str:
    return "inf" if v == INF else str(int(v))


def write_txt(D: PersistenceDiagram, keep_zero: bool = False) -> bytes:
    """One record per pair: coordinates are doubled-grid positions with z = 0.

    Essential classes carry death ``inf`` and destructor ``0 0 0``. The weight
    column is the creator cell's gray value, i.e. the birth.
    """
    lines = [TXT_HEADER]
    for p in D.pairs:
        if p.zero_length and not keep_zero:
            continue
        cx, cy = p.creator
        dx, dy = p.destructor if p.destructor is not None else (0, 0)
        lines.append(f"{p.birth} {_fmt(p.death)} {p.dimension} {cx} {cy} 0 {dx} {dy} 0 {p.birth}")
    return ("\n".join(lines) + "\n").encode("ascii")


def parse_txt(data: bytes) -> PersistenceDiagram:
    pairs = []
    offset = 0
    for line in data.decode("ascii").splitlines(keepends=True):
        start = offset
        offset += len(line.encode("ascii"))
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        f = line.split()
        if len(f) != 10:
            raise ParseError(start, f"expected 10 fields, got {len(f)}")
        try:
            birth, dim = int(f[0]), int(f[2])
            death = INF if f[1] == "inf" else int(f[1])
            cx, cy, cz, dx, dy, dz, weight = (int(x) for x in f[3:])
        except ValueError:
            raise ParseError(start, "non-integer field") from None
        if cz != 0 or dz != 0:
            raise ParseError(start, "z coordinates must be 0 for 2D diagrams")
        if weight != birth:
            raise ParseError(start, f"weight {weight} differs from birth {birth}")
        destructor = None if death == INF else (dx, dy)
        pairs.append(PersistencePair(dim, birth, death, (cx, cy), destructor))
    return PersistenceDiagram(tuple(pairs))


def write_csv(D: PersistenceDiagram, include_essential: bool = False, keep_zero: bool = False) -> bytes:
    """``index,birth,death`` rows numbered from 1 in canonical diagram order."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_HEADER.split(","))
    index = 0
    for p in D.pairs:
        if (p.essential and not include_essential) or (p.zero_length and not keep_zero):
            continue
        index += 1
        w.writerow([index, p.birth, _fmt(p.death)])
    return buf.getvalue().encode("ascii")


def parse_csv(data: bytes) -> list[tuple[int, float]]:
    """(birth, death) records of an exported CSV, in file order."""
    out = []
    offset = 0
    for lineno, line in enumerate(data.decode("ascii").splitlines(keepends=True), 1):
        start = offset
        offset += len(line.encode("ascii"))
        row = line.strip()
        if not row:
            continue
        if lineno == 1 and row.replace(" ", "") == CSV_HEADER:
            continue
        f = [x.strip() for x in row.split(",")]
        if len(f) != 3:
            raise ParseError(start, f"line {lineno}: expected index,birth,death")
        try:
            int(f[0])
            birth = int(f[1])
            death = INF if f[2] == "inf" else int(f[2])
        except ValueError:
            raise ParseError(start, f"line {lineno}: non-integer field") from None
        out.append((birth, death))
    return out


# --------------------------------------------------------------------------
# SVG

_COLORS = {0: "#1f5fa8", 1: "#c0392b", 2: "#2e8b57"}
_LEFT, _RIGHT, _TOP, _BOTTOM = 48, 40, 36, 44
_SCALE = 2  # pixels per gray level
_AXIS = 255 * _SCALE


def _x(v: float) -> int:
    return _LEFT + int(v) * _SCALE


def _ticks(y: int) -> list[str]:
    out = [f'<line x1="{_LEFT}" y1="{y}" x2="{_LEFT + _AXIS}" y2="{y}" stroke="#000"/>']
    for t in (0, 64, 128, 192, 255):
        out.append(f'<line x1="{_x(t)}" y1="{y}" x2="{_x(t)}" y2="{y + 5}" stroke="#000"/>')
        out.append(f'<text x="{_x(t)}" y="{y + 18}" text-anchor="middle">{t}</text>')
    return out


def _barcode(D: PersistenceDiagram, title: str) -> list[str]:
    bars = list(D.pairs)
    step = 8
    height = _TOP + step * max(len(bars), 1) + _BOTTOM
    width = _LEFT + _AXIS + _RIGHT
    body = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="11">',
        f'<text x="{width // 2}" y="20" text-anchor="middle">{title}</text>',
    ]
    end = _LEFT + _AXIS + _RIGHT - 8
    for i, p in enumerate(bars):
        y = _TOP + step * i + step // 2
        color = _COLORS.get(p.dimension, "#555")
        x2 = end - 6 if p.essential else _x(p.death)
        body.append(
            f'<line class="bar dim{p.dimension}" x1="{_x(p.birth)}" y1="{y}" x2="{x2}" y2="{y}" '
            f'stroke="{color}" stroke-width="4"/>'
        )
        if p.essential:
            body.append(f'<polygon class="arrow" points="{end - 6},{y - 4} {end},{y} {end - 6},{y + 4}" fill="{color}"/>')
    axis_y = height - _BOTTOM + 6
    body += _ticks(axis_y)
    body.append(f'<text x="{_LEFT + _AXIS // 2}" y="{height - 6}" text-anchor="middle">gray value</text>')
    return body


def _scatter(D: PersistenceDiagram, title: str) -> list[str]:
    size = _AXIS
    width = _LEFT + size + _RIGHT
    height = _TOP + 16 + size + _BOTTOM
    top = _TOP + 16  # band above the plot holds essential classes

    def y(v):
        return top + size - int(v) * _SCALE

    body = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="11">',
        f'<text x="{width // 2}" y="20" text-anchor="middle">{title}</text>',
        f'<line x1="{_x(0)}" y1="{y(0)}" x2="{_x(255)}" y2="{y(255)}" stroke="#999" stroke-dasharray="4 3"/>',
        f'<line x1="{_LEFT}" y1="{top}" x2="{_LEFT}" y2="{y(0)}" stroke="#000"/>',
    ]
    for p in D.pairs:
        color = _COLORS.get(p.dimension, "#555")
        if p.essential:
            cx, cy = _x(p.birth), top - 10
            body.append(f'<polygon class="arrow dim{p.dimension}" points="{cx - 4},{cy + 4} {cx},{cy - 4} {cx + 4},{cy + 4}" fill="{color}"/>')
        else:
            body.append(f'<circle class="point dim{p.dimension}" cx="{_x(p.birth)}" cy="{y(p.death)}" r="3" fill="{color}"/>')
    for t in (0, 64, 128, 192, 255):
        body.append(f'<text x="{_LEFT - 6}" y="{y(t) + 4}" text-anchor="end">{t}</text>')
    body += _ticks(y(0))
    body.append(f'<text x="{_LEFT + size // 2}" y="{height - 6}" text-anchor="middle">birth</text>')
    return body


def render_diagram(D: PersistenceDiagram, style: str = "barcode", title: str = "", keep_zero: bool = False) -> bytes:
    """Deterministic SVG of the diagram; zero-length pairs are hidden by default."""
    D = D.visible(keep_zero)
    title = title.replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;")
    if style == "barcode":
        body = _barcode(D, title)
    elif style == "scatter":
        body = _scatter(D, title)
    else:
        raise ValueError(f"unknown plot style {style!r}")
    body.append("</svg>")
    return ("\n".join(body) + "\n").encode("utf-8")


def bar_count(D: PersistenceDiagram) -> int:
    return len(D.finite()) + len(D.essential())


def lifespans(records) -> list[float]:
    return [d - b for b, d in records if not math.isinf(d)]
