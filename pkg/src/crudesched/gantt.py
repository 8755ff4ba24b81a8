"""Deterministic SVG rendering of a simulated schedule.

One row per tank shows when the tank feeds which CDU (colored bars) and
when it receives a vessel parcel (triangle markers); one row per CDU shows
its residue mode per period and flags changeover boundaries.  Output is a
pure function of the trajectory: same schedule, same bytes.
"""
from __future__ import annotations

import io

from .simulate import Trajectory, gantt_description

_CDU_COLORS = ("#4878cf", "#6acc65", "#d65f5f", "#b47cc7",
               "#c4ad66", "#77bedb", "#e48532", "#8c8c8c")
_VESSEL_COLOR = "#2f2f2f"

_CELL_W = 46
_ROW_H = 26
_LEFT = 90
_TOP = 34


def _esc(text: str) -> str:
    return (text.replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;"))


def render_svg(traj: Trajectory) -> str:
    """Render the schedule chart; returns the SVG document as a string."""
    desc = gantt_description(traj)
    horizon = desc["horizon"]
    tanks = desc["tanks"]
    cdus = desc["cdus"]
    rows = len(tanks) + len(cdus)
    width = _LEFT + horizon * _CELL_W + 12
    height = _TOP + rows * _ROW_H + 16
    tank_y = {tid: _TOP + i * _ROW_H for i, tid in enumerate(tanks)}
    cdu_y = {uid: _TOP + (len(tanks) + i) * _ROW_H for i, uid in enumerate(cdus)}
    color = {uid: _CDU_COLORS[i % len(_CDU_COLORS)] for i, uid in enumerate(cdus)}

    out = io.StringIO()
    w = out.write
    w(
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" '
        f'height="{height}" viewBox="0 0 {width} {height}" '
        f'font-family="monospace" font-size="11">\n'
    )
    w(f'<rect width="{width}" height="{height}" fill="#ffffff"/>\n')

    # period grid and headers
    for n in range(horizon + 1):
        x = _LEFT + n * _CELL_W
        w(f'<line x1="{x}" y1="{_TOP - 14}" x2="{x}" '
          f'y2="{_TOP + rows * _ROW_H}" stroke="#dddddd"/>\n')
        if n < horizon:
            w(f'<text x="{x + _CELL_W // 2}" y="{_TOP - 4}" '
              f'text-anchor="middle" fill="#444444">{n + 1}</text>\n')
    w(f'<text x="{_LEFT - 8}" y="{_TOP - 4}" text-anchor="end" '
      f'fill="#444444">period</text>\n')

    for tid in tanks:
        y = tank_y[tid]
        w(f'<text x="{_LEFT - 8}" y="{y + 17}" text-anchor="end" '
          f'fill="#000000">{_esc(f"tank {tid}")}</text>\n')
        w(f'<line x1="{_LEFT}" y1="{y + _ROW_H}" '
          f'x2="{_LEFT + horizon * _CELL_W}" y2="{y + _ROW_H}" '
          f'stroke="#eeeeee"/>\n')
    for uid in cdus:
        y = cdu_y[uid]
        w(f'<text x="{_LEFT - 8}" y="{y + 17}" text-anchor="end" '
          f'fill="{color[uid]}">{_esc(f"cdu {uid}")}</text>\n')
        w(f'<line x1="{_LEFT}" y1="{y + _ROW_H}" '
          f'x2="{_LEFT + horizon * _CELL_W}" y2="{y + _ROW_H}" '
          f'stroke="#eeeeee"/>\n')

    # charging intervals: tank row bars colored by CDU
    for seg in desc["charge"]:
        x = _LEFT + (seg["start"] - 1) * _CELL_W
        width_px = (seg["end"] - seg["start"] + 1) * _CELL_W
        y = tank_y[seg["tank"]] + 4
        w(f'<rect x="{x + 1}" y="{y}" width="{width_px - 2}" height="14" '
          f'rx="3" fill="{color[seg["cdu"]]}" fill-opacity="0.85"/>\n')
        w(f'<text x="{x + width_px // 2}" y="{y + 11}" text-anchor="middle" '
          f'fill="#ffffff">U{seg["cdu"]}</text>\n')

    # receipts: triangle marker with vessel id
    for ev in desc["receive"]:
        x = _LEFT + (ev["period"] - 1) * _CELL_W + _CELL_W // 2
        y = tank_y[ev["tank"]] + _ROW_H - 3
        w(f'<path d="M {x - 5} {y} L {x + 5} {y} L {x} {y - 7} Z" '
          f'fill="{_VESSEL_COLOR}"/>\n')
        w(f'<text x="{x}" y="{y - 9}" text-anchor="middle" '
          f'fill="{_VESSEL_COLOR}">V{ev["vessel"]}</text>\n')

    # residue modes on the CDU rows
    for ev in desc["modes"]:
        x = _LEFT + (ev["period"] - 1) * _CELL_W + _CELL_W // 2
        y = cdu_y[ev["cdu"]]
        w(f'<text x="{x}" y="{y + 17}" text-anchor="middle" '
          f'fill="#555555">R{ev["residue"]}</text>\n')

    # changeover boundaries: red tick at the start of the period
    for ev in desc["changeovers"]:
        x = _LEFT + (ev["period"] - 1) * _CELL_W
        y = cdu_y[ev["cdu"]]
        w(f'<line x1="{x}" y1="{y + 2}" x2="{x}" y2="{y + _ROW_H - 2}" '
          f'stroke="#cc0000" stroke-width="3"/>\n')

    w("</svg>\n")
    return out.getvalue()


def write_svg(traj: Trajectory, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(render_svg(traj))
