"""Pass/fail tables, their JSON/CSV form, and small native SVG line charts."""

from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict, dataclass
from pathlib import Path
from xml.sax.saxutils import escape

__all__ = ["Row", "Report", "svg_line_chart"]

PASS, FAIL, INFO = "PASS", "FAIL", "INFO"


@dataclass
class Row:
    name: str
    estimate: float
    target: float | None = None
    std_error: float | None = None
    z: float | None = None
    tolerance: float | None = None
    status: str = INFO
    note: str = ""


@dataclass
class Report:
    title: str
    metadata_hash: str = ""
    rows: list = None

    def __post_init__(self):
        if self.rows is None:
            self.rows = []

    def add(self, row: Row) -> Row:
        self.rows.append(row)
        return row

    def check_z(self, name, estimate, target, se, k=4.0, note="") -> Row:
        """PASS when ``|estimate - target| <= k * se``."""
        if se > 0:
            z = (estimate - target) / se
        else:
            z = 0.0 if estimate == target else math.inf
        return self.add(Row(name, float(estimate), float(target), float(se), float(z), k, PASS if abs(z) <= k else FAIL, note))

    def check_abs(self, name, estimate, bound, note="") -> Row:
        """PASS when ``|estimate| < bound``."""
        return self.add(Row(name, float(estimate), 0.0, None, None, bound, PASS if abs(estimate) < bound else FAIL, note))

    @property
    def passed(self) -> bool:
        return all(r.status != FAIL for r in self.rows)

    def to_dict(self) -> dict:
        return {"title": self.title, "metadata_hash": self.metadata_hash, "passed": self.passed, "rows": [asdict(r) for r in self.rows]}

    def write(self, stem) -> tuple[Path, Path]:
        """Write ``stem.json`` and ``stem.csv``."""
        stem = Path(stem)
        stem.parent.mkdir(parents=True, exist_ok=True)
        jp, cp = stem.with_suffix(".json"), stem.with_suffix(".csv")
        jp.write_text(json.dumps(self.to_dict(), indent=2, default=str) + "\n")
        with cp.open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["name", "estimate", "target", "std_error", "z", "tolerance", "status", "note", "metadata_hash"])
            for r in self.rows:
                w.writerow([r.name, _fmt(r.estimate), _fmt(r.target), _fmt(r.std_error), _fmt(r.z), _fmt(r.tolerance), r.status, r.note, self.metadata_hash])
        return jp, cp

    def format_table(self) -> str:
        lines = [f"{'name':<40} {'estimate':>13} {'target':>13} {'z':>8} status"]
        for r in self.rows:
            lines.append(f"{r.name:<40} {_fmt(r.estimate):>13} {_fmt(r.target):>13} {_fmt(r.z, 2):>8} {r.status}")
        return "\n".join(lines)


def _fmt(x, digits=6) -> str:
    if x is None:
        return ""
    return f"{x:.{digits}g}"


def svg_line_chart(path, series: dict, xlabel: str = "", ylabel: str = "", title: str = "", logx: bool = False, width=560, height=360) -> Path:
    """``series`` maps a label to ``(xs, ys)``; points are joined in the given order."""
    path = Path(path)
    pad_l, pad_r, pad_t, pad_b = 70, 140, 36, 50
    tx = (lambda v: math.log10(v)) if logx else (lambda v: v)
    pts = [(tx(x), y) for xs, ys in series.values() for x, y in zip(xs, ys) if math.isfinite(y)]
    if not pts:
        raise ValueError("nothing to plot")
    x0, x1 = min(p[0] for p in pts), max(p[0] for p in pts)
    y0, y1 = min(0.0, min(p[1] for p in pts)), max(p[1] for p in pts)
    x1 = x1 if x1 > x0 else x0 + 1
    y1 = y1 if y1 > y0 else y0 + 1
    pw, ph = width - pad_l - pad_r, height - pad_t - pad_b

    def X(v):
        return pad_l + (tx(v) - x0) / (x1 - x0) * pw

    def Y(v):
        return pad_t + ph - (v - y0) / (y1 - y0) * ph

    colors = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"]
    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" font-family="sans-serif" font-size="12">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
        f'<text x="{pad_l}" y="20" font-size="14">{escape(title)}</text>',
        f'<line x1="{pad_l}" y1="{pad_t + ph}" x2="{pad_l + pw}" y2="{pad_t + ph}" stroke="black"/>',
        f'<line x1="{pad_l}" y1="{pad_t}" x2="{pad_l}" y2="{pad_t + ph}" stroke="black"/>',
        f'<text x="{pad_l + pw / 2}" y="{height - 10}" text-anchor="middle">{escape(xlabel)}</text>',
        f'<text x="15" y="{pad_t + ph / 2}" transform="rotate(-90 15 {pad_t + ph / 2})" text-anchor="middle">{escape(ylabel)}</text>',
    ]
    for k in range(5):
        yv = y0 + (y1 - y0) * k / 4
        out.append(f'<text x="{pad_l - 6}" y="{Y(yv) + 4:.1f}" text-anchor="end">{yv:.3g}</text>')
    xs_all = sorted({x for xs, _ in series.values() for x in xs})
    for xv in xs_all:
        out.append(f'<text x="{X(xv):.1f}" y="{pad_t + ph + 16}" text-anchor="middle">{xv:.3g}</text>')
    for idx, (label, (xs, ys)) in enumerate(series.items()):
        c = colors[idx % len(colors)]
        good = [(x, y) for x, y in zip(xs, ys) if math.isfinite(y)]
        d = " ".join(f"{X(x):.1f},{Y(y):.1f}" for x, y in good)
        out.append(f'<polyline fill="none" stroke="{c}" stroke-width="2" points="{d}"/>')
        for x, y in good:
            out.append(f'<circle cx="{X(x):.1f}" cy="{Y(y):.1f}" r="3" fill="{c}"/>')
        ly = pad_t + 14 * idx
        out.append(f'<text x="{pad_l + pw + 10}" y="{ly + 4}" fill="{c}">{escape(str(label))}</text>')
    out.append("</svg>")
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text("\n".join(out) + "\n")
    return path
