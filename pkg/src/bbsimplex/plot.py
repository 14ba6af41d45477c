"""Static SVG of a completed run.

Grey paths for history, red dots for final positions, short velocity rays,
predicted paths of checked proposals (green accepted, blue rejected) and the
closest pair highlighted with its distance printed in the corner. Output is
a pure function of the run, formatted with fixed precision, so identical
runs give identical files.
"""
from __future__ import annotations

import numpy as np

WIDTH = 640
HEIGHT = 640
MARGIN = 40


def _fmt(v: float) -> str:
    s = f"{v:.2f}"
    return "0.00" if s == "-0.00" else s


class _Frame:
    def __init__(self, pts: np.ndarray):
        lo = pts.min(axis=0)
        hi = pts.max(axis=0)
        span = float(max(hi[0] - lo[0], hi[1] - lo[1], 1e-9))
        self.lo = lo
        self.mid = (lo + hi) / 2
        self.scale = (WIDTH - 2 * MARGIN) / span

    def __call__(self, p):
        p = np.asarray(p, dtype=float)
        x = WIDTH / 2 + (p[..., 0] - self.mid[0]) * self.scale
        y = HEIGHT / 2 - (p[..., 1] - self.mid[1]) * self.scale
        return x, y


def _polyline(frame, pts, **attrs) -> str:
    x, y = frame(pts)
    coords = " ".join(f"{_fmt(a)},{_fmt(b)}" for a, b in zip(x, y))
    extra = "".join(f' {k.replace("_", "-")}="{v}"' for k, v in attrs.items())
    return f'<polyline points="{coords}" fill="none"{extra}/>'


def render_svg(paths: np.ndarray, velocities=None, overlays=(), closest=None,
               title: str = "", units: str = "") -> str:
    """``paths``: (k, n, 2) positions; ``overlays``: (step, accepted, (m, n, 2));
    ``closest``: (index, i, j, distance) into ``paths``."""
    paths = np.asarray(paths, dtype=float)
    if paths.ndim != 3 or paths.shape[0] == 0:
        raise ValueError("empty trajectory")
    frame = _Frame(paths.reshape(-1, 2))
    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
           f'viewBox="0 0 {WIDTH} {HEIGHT}">',
           '<defs><clipPath id="view"><rect x="0" y="0" width="%d" height="%d"/></clipPath></defs>'
           % (WIDTH, HEIGHT),
           f'<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
           '<g clip-path="url(#view)">']
    for step, ok, pred in overlays:
        color = "green" if ok else "blue"
        for i in range(pred.shape[1]):
            out.append(_polyline(frame, pred[:, i], stroke=color, stroke_width="1",
                                 stroke_dasharray="4,3", data_step=str(step)))
    for i in range(paths.shape[1]):
        out.append(_polyline(frame, paths[:, i], stroke="grey", stroke_width="1.5"))
    fin = paths[-1]
    if velocities is not None:
        v = np.asarray(velocities, dtype=float)
        vn = np.linalg.norm(v, axis=1).max()
        if vn > 0:
            span = (WIDTH - 2 * MARGIN) / frame.scale
            tip = fin + v / vn * 0.05 * span
            for i in range(fin.shape[0]):
                out.append(_polyline(frame, np.stack([fin[i], tip[i]]), stroke="black",
                                     stroke_width="1"))
    x, y = frame(fin)
    for a, b in zip(x, y):
        out.append(f'<circle cx="{_fmt(a)}" cy="{_fmt(b)}" r="3.5" fill="red"/>')
    out.append("</g>")
    if closest is not None:
        k, i, j, d = closest
        pts = paths[k, [i, j]]
        x, y = frame(pts)
        for a, b in zip(x, y):
            out.append(f'<circle cx="{_fmt(a)}" cy="{_fmt(b)}" r="6" fill="none" stroke="red" '
                       'stroke-width="1.5"/>')
        out.append(f'<text x="{WIDTH - 10}" y="{HEIGHT - 10}" text-anchor="end" font-family="monospace" '
                   f'font-size="13">closest {i}-{j}: {d:.3f}{units}</text>')
    if title:
        out.append(f'<text x="10" y="20" font-family="monospace" font-size="13">{title}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def emit_svg(res) -> str:
    """SVG for a RunResult (see runner)."""
    from .runner import overlays
    s = res.summary
    if res.config.case_study == "aircraft":
        paths = res.substeps
        vel = res.states[-1].velocity()
        k = int(round(s["min_separation_time"] / res.config.aircraft.substep))
        units = " ft"
    else:
        paths = np.stack([st.p for st in res.states])
        vel = res.states[-1].v
        k = s["min_separation_step"]
        units = ""
    closest = None
    if paths.shape[1] > 1 and k >= 0:
        closest = (k, s["min_separation_i"], s["min_separation_j"], s["min_separation"])
    title = f'{s["name"]} seed={s["seed"]} accepted={s["accepted"]} rejected={s["rejected"]}'
    return render_svg(paths, vel, overlays(res), closest, title, units)
