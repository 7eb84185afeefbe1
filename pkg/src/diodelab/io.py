"""CSV and JSON emission.

Every file starts with ``#`` lines echoing the configuration (in file
units) and the run parameters, so any output can be traced back to its
inputs.  Numbers are written with 12 significant digits.
"""
from __future__ import annotations

import csv
import io
import json
import math
import platform
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .physics import MICRON, DiodeConfig

PRECISION = 12


def fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        value = float(value) + 0.0  # folds -0.0 into 0.0
        if math.isnan(value):
            return "nan"
        return f"{value:.{PRECISION}g}"
    if hasattr(value, "value"):  # enums
        return str(value.value)
    return str(value)


def header_lines(cfg: DiodeConfig, **extra) -> list[str]:
    lines = ["# config: " + json.dumps(cfg.to_units(), sort_keys=True)]
    for key, value in extra.items():
        lines.append(f"# {key}: " + json.dumps(value, sort_keys=True))
    return lines


def render_csv(header: list[str], columns: list[str], rows) -> str:
    buf = io.StringIO()
    for line in header:
        buf.write(line + "\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([fmt(v) for v in row])
    return buf.getvalue()


def scatter_columns(channel: int, with_error: bool) -> list[str]:
    a = channel
    cols = ["w_m_per_s", f"R1{a}", f"R2{a}", f"T1{a}", f"T2{a}"]
    return cols + ["error"] if with_error else cols


def scatter_csv(cfg: DiodeConfig, channel: int, rows, **extra) -> str:
    """``rows``: (w, p1, p2, p3, p4, error-or-None)."""
    rows = list(rows)
    with_error = any(r[5] is not None for r in rows)
    body = [r[:5] + ((r[5] or "",) if with_error else ()) for r in rows]
    return render_csv(header_lines(cfg, channel=channel, **extra), scatter_columns(channel, with_error), body)


SCAN_COLUMNS = ["v_min", "v_max", "cause_vmax", "v_lambda_min", "v_lambda_max", "v_ad_max"]


def scan_csv(table, **extra) -> str:
    name = {"d": "d_um", "delta": "delta_um"}[table.parameter]
    with_error = any(r.error for r in table.rows)
    cols = [name] + SCAN_COLUMNS + (["error"] if with_error else [])
    body = []
    for r in table.rows:
        row = [r.value / MICRON, r.v_min, r.v_max, r.cause_at_vmax, r.v_lambda_min, r.v_lambda_max, r.v_ad_max]
        if with_error:
            row.append(r.error or "")
        body.append(row)
    grid = asdict(table.vgrid)
    return render_csv(header_lines(table.template, epsilon=table.epsilon, velocity_grid=grid, **extra), cols, body)


WINDOW_COLUMNS = ["v_min", "v_max", "cause_vmin", "cause_vmax", "v_lambda_min", "v_lambda_max", "v_ad_max"]


def window_csv(cfg: DiodeConfig, window, limits, vgrid, **extra) -> str:
    others = [list(o) for o in window.others]
    row = [window.v_min, window.v_max, window.cause_at_vmin, window.cause_at_vmax,
           limits.v_lambda_min, limits.v_lambda_max, limits.v_ad_max]
    header = header_lines(cfg, epsilon=window.epsilon, velocity_grid=asdict(vgrid), other_windows=others, **extra)
    return render_csv(header, WINDOW_COLUMNS, [row])


ADIABATIC_COLUMNS = ["x_um", "lambda_minus_J", "lambda_plus_J", "p1_minus", "p2_minus", "A", "B"]


def adiabatic_csv(cfg: DiodeConfig, profile, **extra) -> str:
    p1, p2 = profile.overlaps
    body = zip(profile.x / MICRON, profile.lambda_minus, profile.lambda_plus, p1, p2,
               profile.a_coupling, profile.b_coupling)
    return render_csv(header_lines(cfg, **extra), ADIABATIC_COLUMNS, body)


def q_csv(cfg: DiodeConfig, velocities, qs, **extra) -> str:
    return render_csv(header_lines(cfg, **extra), ["v_m_per_s", "q"], zip(velocities, qs))


def parse_csv(text: str) -> tuple[list[str], list[dict]]:
    """(comment lines, rows as dicts of strings)."""
    comments = [ln for ln in text.splitlines() if ln.startswith("#")]
    body = [ln for ln in text.splitlines() if not ln.startswith("#")]
    return comments, list(csv.DictReader(body))


@dataclass
class RunManifest:
    """Everything needed to regenerate an output file."""

    subcommand: str
    config: dict
    arguments: dict
    outputs: list = field(default_factory=list)
    version: str = ""
    duration_s: float = 0.0
    python: str = field(default_factory=platform.python_version)
    created: str = field(default_factory=lambda: time.strftime("%Y-%m-%dT%H:%M:%S%z"))

    def write(self, path) -> Path:
        path = Path(path)
        path.write_text(json.dumps(asdict(self), indent=2, sort_keys=True) + "\n")
        return path

    @classmethod
    def read(cls, path) -> "RunManifest":
        data = json.loads(Path(path).read_text())
        return cls(**data)


def manifest_path(out_path) -> Path:
    out_path = Path(out_path)
    return out_path.with_name(out_path.name + ".manifest.json")


def write_text(path, text: str) -> None:
    Path(path).write_text(text)
