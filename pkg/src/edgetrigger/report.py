"""Plain-text summary table and SVG charts rendered from a RunReport document.

Everything here reads the JSON form of the report, so the same functions
serve a fresh run and a report loaded back from disk.
"""

from __future__ import annotations

import math
import xml.etree.ElementTree as ET

SUMMARY_COLUMNS = (
    ("Detector", "detector", "s"),
    ("DR%", "DR_percent", ".2f"),
    ("TP", "TP", "d"),
    ("FP", "FP", "d"),
    ("FN", "FN", "d"),
    ("Prec%", "precision_percent", ".2f"),
    ("FAR/hr", "FAR_per_node_hour", ".2f"),
    ("Lat ms", "latency_median_ms", ".2f"),
    ("99th ms", "latency_p99_ms", ".2f"),
    ("Net kB/hr", "throughput_kB_per_hr", ".2f"),
)

COLORS = {"TP": "#1f77b4", "FN": "#e6c229", "FP": "#d62728", "DR": "#2a9d8f"}


def _cell(value, fmt: str) -> str:
    if value is None:
        return "-"
    return format(value, fmt)


def summary_table(doc: dict) -> str:
    """Fixed-width table; numeric cells print the rounded JSON values verbatim."""
    rows = [[h for h, _, _ in SUMMARY_COLUMNS]]
    for d in doc["detectors"]:
        rows.append([_cell(d[key], fmt) for _, key, fmt in SUMMARY_COLUMNS])
    widths = [max(len(r[i]) for r in rows) for i in range(len(SUMMARY_COLUMNS))]
    lines = [
        f"{doc['node_count']} nodes x {doc['duration_h']:g} h, seed {doc['seed']}, {doc['total_events']} events",
    ]
    for j, r in enumerate(rows):
        cells = [r[0].ljust(widths[0])] + [c.rjust(w) for c, w in zip(r[1:], widths[1:])]
        lines.append("  ".join(cells).rstrip())
        if j == 0:
            lines.append("  ".join("-" * w for w in widths))
    lines.append("Latency and kB/hr are model-dependent (invented grid network model).")
    return "\n".join(lines) + "\n"


def parse_summary_table(text: str) -> dict[str, dict[str, str]]:
    """Inverse of ``summary_table`` for the per-detector rows (cells kept as text)."""
    lines = text.splitlines()
    header = lines[1]
    keys = [k for _, k, _ in SUMMARY_COLUMNS]
    out = {}
    for line in lines[3:]:
        parts = line.split()
        if len(parts) != len(keys) or line.startswith("Latency"):
            continue
        out[parts[0]] = dict(zip(keys, parts))
    if not header.startswith("Detector"):
        raise ValueError("not a summary table")
    return out


def _svg_root(width: int, height: int) -> ET.Element:
    return ET.Element(
        "svg",
        {"xmlns": "http://www.w3.org/2000/svg", "width": str(width), "height": str(height),
         "viewBox": f"0 0 {width} {height}", "font-family": "sans-serif", "font-size": "12"},
    )


def _text(parent, x, y, s, **attrs):
    el = ET.SubElement(parent, "text", {"x": f"{x:g}", "y": f"{y:g}", **attrs})
    el.text = s
    return el


def bar_chart_svg(doc: dict) -> str:
    """One row per detector: detection rate (linear) and false positives (log10)."""
    dets = doc["detectors"]
    row_h, label_w, bar_w = 28, 110, 260
    width = label_w + 2 * bar_w + 80
    height = 50 + row_h * len(dets)
    root = _svg_root(width, height)
    _text(root, label_w, 18, "Detection rate (%)")
    _text(root, label_w + bar_w + 40, 18, "False positives (log scale)")
    fp_max = max([d["FP"] for d in dets] + [1])
    decades = max(1.0, math.ceil(math.log10(fp_max + 1)))
    for i, d in enumerate(dets):
        y = 34 + i * row_h
        g = ET.SubElement(root, "g", {"class": "row", "data-detector": d["detector"]})
        _text(g, 4, y + 14, d["detector"])
        dr_w = bar_w * d["DR_percent"] / 100.0
        ET.SubElement(g, "rect", {"x": str(label_w), "y": str(y), "width": f"{dr_w:.2f}", "height": "18",
                                  "fill": COLORS["DR"]})
        _text(g, label_w + dr_w + 4, y + 14, f"{d['DR_percent']:.1f}")
        x0 = label_w + bar_w + 40
        fp_w = bar_w * math.log10(d["FP"] + 1) / decades
        ET.SubElement(g, "rect", {"x": str(x0), "y": str(y), "width": f"{fp_w:.2f}", "height": "18",
                                  "fill": COLORS["FP"]})
        _text(g, x0 + fp_w + 4, y + 14, str(d["FP"]))
    return ET.tostring(root, encoding="unicode") + "\n"


def node_grid_svg(doc: dict, cols: int = 20, cap: int = 3) -> str:
    """Per-node dots for each detector: TP blue, FN yellow, FP red (capped at ``cap``)."""
    dets = [d["detector"] for d in doc["detectors"]]
    nodes = doc["per_node"]
    cell, pad = 14, 6
    rows_per = math.ceil(len(nodes) / cols)
    block_h = rows_per * cell + 24
    width = cols * cell + 2 * pad
    height = block_h * len(dets) + pad
    root = _svg_root(width, height)
    for b, det in enumerate(dets):
        y0 = pad + b * block_h
        g = ET.SubElement(root, "g", {"class": "detector", "data-detector": det})
        _text(g, pad, y0 + 12, det)
        for j, row in enumerate(nodes):
            c = row[det]
            cx = pad + (j % cols) * cell
            cy = y0 + 20 + (j // cols) * cell
            dots = ["TP"] * min(c["TP"], cap) + ["FN"] * min(c["FN"], cap) + ["FP"] * min(c["FP"], cap)
            for k, kind in enumerate(dots[: 3 * cap]):
                ET.SubElement(g, "circle", {"cx": f"{cx + 2 + (k % 3) * 4}", "cy": f"{cy + 2 + (k // 3) * 4}",
                                            "r": "1.6", "fill": COLORS[kind]})
    return ET.tostring(root, encoding="unicode") + "\n"
