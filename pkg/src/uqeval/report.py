"""Metric reports, curve tables and reliability-diagram SVGs.

Every payload here is a deterministic function of its inputs: no
timestamps, fixed key order, shortest round-trip floats.
"""

from __future__ import annotations

import csv
import io
import json
import math
from typing import Iterable, List, Optional, Sequence

import numpy as np

from .calibration import CalibrationReport, calibration_report, reliability_data
from .core import EvaluationSet, accuracy
from .exceptions import MissingLogits
from .io import fmt_float
from .selective import Curve, brier, nll, selective_report

__all__ = [
    "SCHEMA_VERSION",
    "DEFAULT_SCHEMES",
    "eval_report",
    "dumps_json",
    "curve_csv",
    "reliability_csv",
    "reliability_svg",
]

SCHEMA_VERSION = 1
DEFAULT_SCHEMES = ("equal-range:10", "adaptive:0.2")
_RELIABILITY_COLUMNS = ("lo", "hi", "count", "mean_confidence", "empirical_accuracy",
                        "gap", "density")


def _clean(obj):
    if isinstance(obj, float):
        return None if math.isnan(obj) or math.isinf(obj) else obj
    if isinstance(obj, np.floating):
        return _clean(float(obj))
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, dict):
        return {k: _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    return obj


def dumps_json(obj) -> str:
    return json.dumps(_clean(obj), indent=2, allow_nan=False, ensure_ascii=False) + "\n"


def _calibration_block(rep: CalibrationReport) -> dict:
    return {
        "scheme": rep.scheme,
        "ece": rep.ece,
        "mce": rep.mce,
        "n_bins_used": rep.n_bins_used,
        "bins": reliability_data(rep.bins),
    }


def eval_report(eval_set: EvaluationSet, schemes: Sequence[str] = DEFAULT_SCHEMES):
    """Build the JSON-ready report for one set.

    Returns ``(report_dict, selective, calibration_reports)``; undefined
    metrics are None and explained under ``errors``.
    """
    sel = selective_report(eval_set)
    cals = [calibration_report(eval_set, s) for s in schemes]
    try:
        nll_value = nll(eval_set)
    except MissingLogits:
        nll_value = None
    report = {
        "schema_version": SCHEMA_VERSION,
        "model": eval_set.name,
        "n_samples": len(eval_set),
        "accuracy": accuracy(eval_set),
        "full_coverage_risk": sel.full_coverage_risk,
        "auroc": sel.auroc,
        "aupr": sel.aupr,
        "aurc": sel.aurc,
        "supplementary": {"brier": brier(eval_set), "nll": nll_value},
        "calibration": [_calibration_block(c) for c in cals],
        "errors": dict(sorted(sel.errors.items())),
    }
    return report, sel, cals


def _csv_text(header: Iterable[str], rows: Iterable[Iterable]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(list(header))
    for row in rows:
        w.writerow([fmt_float(v) if isinstance(v, float) else v for v in row])
    return buf.getvalue()


_AXES = {"ROC": ("fpr", "tpr"), "PR": ("recall", "precision"), "RC": ("coverage", "risk")}


def curve_csv(curve: Curve) -> str:
    xname, yname = _AXES[curve.kind.value]
    thr = curve.thresholds if curve.thresholds is not None else np.full(len(curve), np.nan)
    return _csv_text([xname, yname, "threshold"],
                     zip(curve.x.tolist(), curve.y.tolist(), thr.tolist()))


def reliability_csv(rep: CalibrationReport) -> str:
    rows = reliability_data(rep.bins)
    return _csv_text(_RELIABILITY_COLUMNS,
                     ([float(r[c]) if c != "count" else r[c] for c in _RELIABILITY_COLUMNS]
                      for r in rows))


def _f(v: float) -> str:
    return f"{v:.2f}"


def reliability_svg(rep: CalibrationReport, title: Optional[str] = None) -> str:
    """Static reliability diagram: accuracy bars with the calibration gap
    overlaid (red where over-confident, blue where under-confident) and a
    sample-density histogram underneath."""
    W, H = 640, 520
    left, right, top = 60, 20, 40
    main_h, gap_h, dens_h = 300, 40, 100
    pw = W - left - right
    main_bottom = top + main_h
    dens_top = main_bottom + gap_h
    dens_bottom = dens_top + dens_h
    px = lambda v: left + v * pw
    py = lambda v: main_bottom - v * main_h
    min_w = 1.0

    rows = reliability_data(rep.bins)
    max_density = max(r["density"] for r in rows)
    out: List[str] = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{W}" height="{H}" '
        f'viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="11">',
        f'<rect x="0" y="0" width="{W}" height="{H}" fill="white"/>',
    ]
    heading = title or rep.scheme
    out.append(f'<text x="{W / 2:.2f}" y="20" text-anchor="middle" font-size="13">'
               f'{_esc(heading)}  ECE={rep.ece:.4f}  MCE={rep.mce:.4f}  bins={rep.n_bins_used}'
               '</text>')
    # frames
    out.append(f'<rect x="{left}" y="{top}" width="{pw}" height="{main_h}" '
               'fill="none" stroke="black"/>')
    out.append(f'<rect x="{left}" y="{dens_top}" width="{pw}" height="{dens_h}" '
               'fill="none" stroke="black"/>')
    for i in range(6):
        t = i / 5
        out.append(f'<line x1="{_f(px(t))}" y1="{dens_bottom}" x2="{_f(px(t))}" '
                   f'y2="{dens_bottom + 4}" stroke="black"/>')
        out.append(f'<text x="{_f(px(t))}" y="{dens_bottom + 16}" text-anchor="middle">'
                   f'{t:.1f}</text>')
        out.append(f'<line x1="{left - 4}" y1="{_f(py(t))}" x2="{left}" y2="{_f(py(t))}" '
                   'stroke="black"/>')
        out.append(f'<text x="{left - 6}" y="{_f(py(t) + 4)}" text-anchor="end">{t:.1f}</text>')
    out.append(f'<text x="{W / 2:.2f}" y="{H - 6}" text-anchor="middle">confidence</text>')
    out.append(f'<text x="14" y="{top + main_h / 2:.2f}" text-anchor="middle" '
               f'transform="rotate(-90 14 {top + main_h / 2:.2f})">accuracy</text>')
    out.append(f'<text x="14" y="{dens_top + dens_h / 2:.2f}" text-anchor="middle" '
               f'transform="rotate(-90 14 {dens_top + dens_h / 2:.2f})">density</text>')
    out.append(f'<line x1="{_f(px(0))}" y1="{_f(py(0))}" x2="{_f(px(1))}" y2="{_f(py(1))}" '
               'stroke="gray" stroke-dasharray="4 3"/>')

    for r in rows:
        x0 = px(r["lo"])
        w = max(px(r["hi"]) - x0, min_w)
        acc, conf = r["empirical_accuracy"], r["mean_confidence"]
        out.append(f'<rect class="accuracy" x="{_f(x0)}" y="{_f(py(acc))}" width="{_f(w)}" '
                   f'height="{_f(py(0) - py(acc))}" fill="#4c72b0" fill-opacity="0.8" '
                   'stroke="#1f3a68" stroke-width="0.5"/>')
        g_lo, g_hi = min(acc, conf), max(acc, conf)
        colour = "#d62728" if r["gap"] > 0 else "#1f77b4"
        out.append(f'<rect class="gap" x="{_f(x0)}" y="{_f(py(g_hi))}" width="{_f(w)}" '
                   f'height="{_f(py(g_lo) - py(g_hi))}" fill="{colour}" fill-opacity="0.35" '
                   f'stroke="{colour}" stroke-width="0.5"/>')
        dh = dens_h * r["density"] / max_density
        out.append(f'<rect class="density" x="{_f(x0)}" y="{_f(dens_bottom - dh)}" '
                   f'width="{_f(w)}" height="{_f(dh)}" fill="#7f7f7f"/>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def _esc(text: str) -> str:
    return (text.replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;")
            .replace('"', "&quot;"))
