"""Bar charts of query statistics, written as standalone SVG."""

from __future__ import annotations

import csv
import logging
from collections import OrderedDict
from pathlib import Path
from xml.sax.saxutils import escape

log = logging.getLogger(__name__)

LABEL_KEYS = ("algorithm", "ablation", "arm", "parameter", "value", "epsilon", "init_size")
COLORS = ("#4c72b0", "#dd8452", "#55a868", "#c44e52", "#8172b3", "#937860")


def _read(path: Path) -> list[dict]:
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    for i, r in enumerate(rows):
        for key in ("query_mean", "query_std"):
            if key not in r:
                raise ValueError(f"{path}: missing column {key!r}")
            try:
                r[key] = float(r[key])
            except ValueError:
                raise ValueError(f"{path}: row {i + 1} has non-numeric {key}") from None
    return rows


def _labels(rows):
    """Label each row by the label columns that actually vary."""
    varying = [k for k in LABEL_KEYS if k in rows[0] and len({r[k] for r in rows}) > 1]
    if not varying:
        varying = [k for k in LABEL_KEYS if k in rows[0]][:1]
    return [" ".join(f"{k}={r[k]}" if k in ("epsilon", "init_size", "value") else r[k] for k in varying) for r in rows]


def _groups(rows):
    """Split rows into one chart per problem (and per ablation when present)."""
    out = OrderedDict()
    for r in rows:
        key = (r.get("problem", ""), r.get("ablation", ""), r.get("parameter", ""))
        out.setdefault(key, []).append(r)
    return out


def bar_chart_svg(title: str, labels: list[str], means: list[float], stds: list[float]) -> str:
    bar_w, gap, left, top, height = 46, 24, 60, 40, 240
    width = left + len(labels) * (bar_w + gap) + gap
    ymax = max((m + s for m, s in zip(means, stds)), default=1.0) or 1.0
    scale = height / (1.1 * ymax)
    base = top + height
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{base + 110}">',
        f'<text x="{width / 2:.1f}" y="22" text-anchor="middle" font-size="14">{escape(title)}</text>',
        f'<line x1="{left - 6}" y1="{base}" x2="{width}" y2="{base}" stroke="black"/>',
        f'<line x1="{left - 6}" y1="{top}" x2="{left - 6}" y2="{base}" stroke="black"/>',
    ]
    for frac in (0.0, 0.5, 1.0):
        v = frac * 1.1 * ymax
        y = base - v * scale
        parts.append(f'<text x="{left - 10}" y="{y + 4:.1f}" text-anchor="end" font-size="10">{v:.0f}</text>')
    for i, (lab, m, s) in enumerate(zip(labels, means, stds)):
        x = left + gap + i * (bar_w + gap)
        h = m * scale
        cx = x + bar_w / 2
        parts.append(
            f'<rect x="{x}" y="{base - h:.1f}" width="{bar_w}" height="{h:.1f}" fill="{COLORS[i % len(COLORS)]}"/>'
        )
        if s > 0:
            parts.append(
                f'<line x1="{cx}" y1="{base - (m + s) * scale:.1f}" x2="{cx}" '
                f'y2="{base - max(m - s, 0) * scale:.1f}" stroke="black"/>'
            )
        parts.append(f'<text x="{cx}" y="{base - h - 4:.1f}" text-anchor="middle" font-size="10">{m:.1f}</text>')
        parts.append(
            f'<text x="{cx}" y="{base + 14}" font-size="10" text-anchor="end" '
            f'transform="rotate(-35 {cx} {base + 14})">{escape(lab)}</text>'
        )
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def emit_plots(csv_path, out_dir=None) -> list[Path]:
    """Write one SVG per problem (or ablation / parameter) found in ``csv_path``.

    Bars show mean query times with a one-standard-deviation whisker. An empty
    CSV produces no files and a warning.
    """
    csv_path = Path(csv_path)
    out_dir = Path(out_dir) if out_dir is not None else csv_path.parent
    rows = _read(csv_path)
    if not rows:
        log.warning("%s has no rows; nothing to plot", csv_path)
        return []
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []
    for (problem, ablation, parameter), group in _groups(rows).items():
        suffix = "_".join(p for p in (problem, ablation and f"ablation{ablation}", parameter) if p)
        path = out_dir / f"{csv_path.stem}{'_' + suffix if suffix else ''}.svg"
        title = f"{csv_path.stem} {suffix}".strip() + ": mean query times"
        svg = bar_chart_svg(title, _labels(group), [r["query_mean"] for r in group], [r["query_std"] for r in group])
        path.write_text(svg)
        written.append(path)
    return written
