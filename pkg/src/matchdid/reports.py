"""Deterministic report rendering.

Every artifact the pipeline writes goes through these helpers so that a
fixed seed and config produce byte-identical output: floats are emitted
with ``repr`` (shortest round-trip form) in tabular files and with fixed
decimals in the human-readable summary, and nothing here reads clocks,
paths, or environment state.
"""

from __future__ import annotations

import math
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .effects import DidEstimate
from .synthetic import MonteCarloReport


def stars(p_value: float) -> str:
    """Significance markers: *** p<0.01, ** p<0.05, * p<0.10."""
    if p_value is None or math.isnan(p_value):
        return ""
    if p_value < 0.01:
        return "***"
    if p_value < 0.05:
        return "**"
    if p_value < 0.10:
        return "*"
    return ""


def format_cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, (bool, np.bool_)):
        return "yes" if bool(value) else "no"
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    if isinstance(value, np.integer):
        return str(int(value))
    return str(value)


def format_tsv(headers: Sequence[str], rows: Iterable[Sequence]) -> str:
    lines = ["\t".join(headers)]
    for row in rows:
        lines.append("\t".join(format_cell(v) for v in row))
    return "\n".join(lines) + "\n"


def write_tsv(path: str | Path, headers: Sequence[str], rows: Iterable[Sequence]) -> None:
    Path(path).write_text(format_tsv(headers, rows), encoding="utf-8")


def _fixed(value, decimals=4) -> str:
    if value is None:
        return "—"
    if isinstance(value, float):
        if math.isnan(value):
            return "—"
        return f"{value:.{decimals}f}"
    return str(value)


#: Keys a per-wave summary mapping must provide, with their display labels.
_WAVE_ROWS = (
    ("treated_mean", "Treated mean"),
    ("control_mean", "Untreated mean"),
    ("att", "ATT"),
    ("se", "SE"),
    ("on_support_treated", "On support Treated"),
    ("on_support_untreated", "On support Untreated"),
    ("mean_bias", "Mean Bias"),
    ("rubin_b", "Rubin's B"),
    ("rubin_r", "Rubin's R"),
)


def summary_block(
    outcome: str,
    pre_summary: Mapping[str, object],
    post_summary: Mapping[str, object],
    did: DidEstimate,
) -> str:
    """The headline human-readable block: matched ATT and diagnostics per
    wave side by side, then the difference-in-differences effect."""
    title = f"Matched treatment-effect summary — outcome: {outcome}"
    lines = [title, "=" * len(title), ""]
    label_w = max(len(label) for _, label in _WAVE_ROWS)
    col_w = 16
    header = f"{'':<{label_w}}{'Pre-treatment':>{col_w}}{'Post-treatment':>{col_w}}"
    lines.append(header)
    for key, label in _WAVE_ROWS:
        pre_v = _fixed(pre_summary.get(key))
        post_v = _fixed(post_summary.get(key))
        lines.append(f"{label:<{label_w}}{pre_v:>{col_w}}{post_v:>{col_w}}")
    lines.append("")
    mark = stars(did.p_value)
    lines.append(
        "Treatment Effect (post ATT - pre ATT): "
        f"{_fixed(did.effect)}{mark} (SE {_fixed(did.se)})"
    )
    lines.append("Stars: *** p<0.01, ** p<0.05, * p<0.10.")
    return "\n".join(lines) + "\n"


def mc_report_table(report: MonteCarloReport) -> tuple[list[str], list[tuple]]:
    """Monte-Carlo report as (headers, rows) for TSV output."""
    headers = [
        "estimator",
        "mean_estimate",
        "bias",
        "rmse",
        "empirical_se",
        "coverage95",
        "n_replications",
        "true_att",
        "n_per_wave",
        "seed",
    ]
    rows = [
        (
            r.estimator,
            r.mean_estimate,
            r.bias,
            r.rmse,
            r.empirical_se,
            r.coverage95,
            r.n_replications,
            report.true_att,
            report.n_per_wave,
            report.seed,
        )
        for r in report.rows
    ]
    return headers, rows
