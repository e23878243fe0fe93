"""Static SVG figures: cluster activity grid and activity CCDF."""

from __future__ import annotations

import math
from collections import Counter

from .community import Partition
from .errors import EmptyInputError
from .market_data import Dataset, activity_ccdf, id_sort_key
from .states import StateMatrix, TradeState

STATE_COLORS = {TradeState.B: "#ff0000", TradeState.S: "#00b000", TradeState.BS: "#ffffff"}
INACTIVE = "#000000"
SEPARATOR = "#add8e6"


def _fmt(x: float) -> str:
    return f"{x:.3f}".rstrip("0").rstrip(".")


def microarray_columns(m: StateMatrix, part: Partition, max_clusters=None) -> list:
    """Investor columns as ``[(cluster_id, [investor, ...]), ...]``.

    Clusters keep partition order; members are ordered by descending number
    of active days, ties by canonical id.
    """
    active = Counter(m.investors[k] for k in m.inv.tolist())
    known = set(m.investors)
    columns = []
    for cid, members in enumerate(part.clusters()):
        members = [i for i in members if i in known]
        if not members:
            continue
        members.sort(key=lambda i: (-active.get(i, 0), id_sort_key(i)))
        columns.append((cid, members))
        if max_clusters is not None and len(columns) >= max_clusters:
            break
    return columns


def render_microarray(m: StateMatrix, part: Partition, path, max_clusters=None,
                      cell_width: float = 4.0, cell_height: float = 1.0) -> dict:
    """Investors on x grouped by cluster, trading days on y.

    Red is buying, green selling, white buying-and-selling, black inactive;
    light-blue vertical lines separate clusters.
    """
    if not part.assignment:
        raise EmptyInputError("empty partition")
    columns = microarray_columns(m, part, max_clusters)
    order = [inv for _, members in columns for inv in members]
    if not order:
        raise EmptyInputError("no partitioned investor appears in the state matrix")
    xpos = {inv: k for k, inv in enumerate(order)}
    width = len(order) * cell_width
    height = m.calendar_length * cell_height

    rows = m.rows()
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_fmt(width)}" height="{_fmt(height)}" '
        f'viewBox="0 0 {_fmt(width)} {_fmt(height)}" shape-rendering="crispEdges">',
        f'<rect class="background" x="0" y="0" width="{_fmt(width)}" height="{_fmt(height)}" '
        f'fill="{INACTIVE}"/>',
    ]
    n_cells = 0
    for inv in order:
        x = xpos[inv] * cell_width
        days = sorted(rows.get(inv, {}).items())
        k = 0
        while k < len(days):
            start, state = days[k]
            end = start
            while k + 1 < len(days) and days[k + 1][0] == end + 1 and days[k + 1][1] == state:
                k += 1
                end += 1
            parts.append(
                f'<rect class="cell state-{state.name}" x="{_fmt(x)}" y="{_fmt(start * cell_height)}" '
                f'width="{_fmt(cell_width)}" height="{_fmt((end - start + 1) * cell_height)}" '
                f'fill="{STATE_COLORS[state]}"/>')
            n_cells += end - start + 1
            k += 1
    boundary = 0
    n_separators = 0
    for _, members in columns[:-1]:
        boundary += len(members)
        x = boundary * cell_width
        parts.append(f'<line class="separator" x1="{_fmt(x)}" y1="0" x2="{_fmt(x)}" '
                     f'y2="{_fmt(height)}" stroke="{SEPARATOR}" stroke-width="1"/>')
        n_separators += 1
    parts.append("</svg>")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(parts) + "\n")
    return {"investors": len(order), "clusters": len(columns), "cells": n_cells,
            "separators": n_separators}


def render_ccdf(ds: Dataset, path, guide: bool = True, width: int = 480, height: int = 360) -> dict:
    """Log-log CCDF of per-investor transaction days, optional slope -1 guide."""
    if ds.n_investors == 0:
        raise EmptyInputError("activity CCDF of an empty dataset")
    points = activity_ccdf(ds)
    xs = [p[0] for p in points]
    ys = [p[1] for p in points]
    lx0 = math.floor(math.log10(min(xs)))
    lx1 = max(math.ceil(math.log10(max(xs))), lx0 + 1)
    guide_end = min(xs) / 10 ** lx1
    ly0 = math.floor(math.log10(min(min(ys), guide_end if guide else 1.0)))
    ly0 = min(ly0, -1)
    ly1 = 0
    margin = 50
    pw, ph = width - 2 * margin, height - 2 * margin

    def px(x):
        return margin + (math.log10(x) - lx0) / (lx1 - lx0) * pw

    def py(y):
        return margin + (ly1 - math.log10(y)) / (ly1 - ly0) * ph

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}">',
        f'<rect x="0" y="0" width="{width}" height="{height}" fill="#ffffff"/>',
        f'<g class="axes" data-log10-x="{lx0} {lx1}" data-log10-y="{ly0} {ly1}" stroke="#000000">',
        f'<line x1="{margin}" y1="{margin + ph}" x2="{margin + pw}" y2="{margin + ph}"/>',
        f'<line x1="{margin}" y1="{margin}" x2="{margin}" y2="{margin + ph}"/>',
        "</g>",
    ]
    for e in range(lx0, lx1 + 1):
        x = _fmt(px(10.0 ** e))
        out.append(f'<text class="xtick" x="{x}" y="{margin + ph + 18}" font-size="11" '
                   f'text-anchor="middle">1e{e}</text>')
    for e in range(ly0, ly1 + 1):
        y = _fmt(py(10.0 ** e))
        out.append(f'<text class="ytick" x="{margin - 6}" y="{y}" font-size="11" '
                   f'text-anchor="end">1e{e}</text>')
    out.append(f'<text x="{margin + pw / 2}" y="{height - 8}" font-size="12" '
               f'text-anchor="middle">N (transaction days)</text>')
    out.append(f'<text x="12" y="{margin + ph / 2}" font-size="12" text-anchor="middle" '
               f'transform="rotate(-90 12 {margin + ph / 2})">P(count &gt;= N)</text>')
    if guide:
        gx0, gx1 = float(min(xs)), float(10 ** lx1)
        gy0, gy1 = 1.0, gx0 / gx1
        out.append(
            f'<line class="guide" data-slope="-1" data-x1="{gx0!r}" data-y1="{gy0!r}" '
            f'data-x2="{gx1!r}" data-y2="{gy1!r}" x1="{_fmt(px(gx0))}" y1="{_fmt(py(gy0))}" '
            f'x2="{_fmt(px(gx1))}" y2="{_fmt(py(gy1))}" stroke="#555555" stroke-dasharray="6,4"/>')
    for x, y in zip(xs, ys):
        out.append(f'<circle class="point" data-n="{x}" data-p="{y!r}" cx="{_fmt(px(x))}" '
                   f'cy="{_fmt(py(y))}" r="2.5" fill="#1f4e99"/>')
    out.append("</svg>")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(out) + "\n")
    return {"points": len(points), "x_decades": (lx0, lx1), "y_decades": (ly0, ly1)}
