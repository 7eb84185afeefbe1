"""Diodic-window search and parameter scans.

The failure measure adds up every ground-state probability that a perfect
diode would suppress, plus the two deficits of the wanted processes:
left-incident atoms should all leave on the right in the excited state, and
right-incident atoms should all bounce back in the ground state.
"""
from __future__ import annotations

import dataclasses
import enum
import functools
import math
from dataclasses import dataclass, field

import numpy as np

from .adiabatic import AdiabaticityMeasure, lambda_limits, v_ad_max
from .parallel import ordered_map
from .physics import DiodeConfig
from .solver import DEFAULT_GRID, ConvergenceError, GridSpec, Side, scattering_amplitudes

DEFAULT_EPSILON = 0.01

TERM_NAMES = (
    "R_l_11",
    "R_l_21",
    "T_r_11",
    "T_r_21",
    "R_r_21",
    "T_l_11",
    "transmission_deficit",
    "reflection_deficit",
)


@dataclass(frozen=True)
class FailureBreakdown:
    v: float
    terms: dict

    @property
    def total(self) -> float:
        return float(sum(self.terms.values()))


def failure_measure(cfg: DiodeConfig, v: float, grid: GridSpec = DEFAULT_GRID) -> FailureBreakdown:
    """All eight contributions for ground-state incidence at speed ``v``."""
    r_l, t_l = scattering_amplitudes(cfg, Side.LEFT, v, grid)
    r_r, t_r = scattering_amplitudes(cfg, Side.RIGHT, v, grid)

    def p(z):
        return min(max(float(abs(z) ** 2), 0.0), 1.0)

    terms = {
        "R_l_11": p(r_l[0, 0]),
        "R_l_21": p(r_l[1, 0]),
        "T_r_11": p(t_r[0, 0]),
        "T_r_21": p(t_r[1, 0]),
        "R_r_21": p(r_r[1, 0]),
        "T_l_11": p(t_l[0, 0]),
        "transmission_deficit": 1.0 - p(t_l[1, 0]),
        "reflection_deficit": 1.0 - p(r_r[0, 0]),
    }
    return FailureBreakdown(float(v), terms)


@dataclass(frozen=True)
class VelocityGrid:
    v_from: float = 0.005
    v_to: float = 1.2
    points: int = 200
    scale: str = "log"

    def __post_init__(self):
        if self.points < 1:
            raise ValueError("velocity grid needs at least one point")
        if not (self.v_from > 0 and self.v_to >= self.v_from):
            raise ValueError("velocity grid needs 0 < v_from <= v_to")
        if self.scale not in ("log", "linear"):
            raise ValueError("scale must be 'log' or 'linear'")

    def values(self) -> np.ndarray:
        if self.scale == "log":
            return np.geomspace(self.v_from, self.v_to, self.points)
        return np.linspace(self.v_from, self.v_to, self.points)


class Cause(enum.Enum):
    TRANSMISSION = "TransmissionFailure"
    REFLECTION = "ReflectionFailure"


def classify(breakdown: FailureBreakdown) -> Cause:
    """Whichever wanted process falls further short; ties count as transmission."""
    t = breakdown.terms["transmission_deficit"]
    r = breakdown.terms["reflection_deficit"]
    return Cause.REFLECTION if r > t else Cause.TRANSMISSION


@dataclass(frozen=True)
class DiodicWindow:
    """Widest velocity interval with failure measure below ``epsilon``.

    A boundary that coincides with the end of the search grid carries no
    cause: the window was cut by the grid, not by a failure.
    """

    v_min: float
    v_max: float
    cause_at_vmin: Cause | None
    cause_at_vmax: Cause | None
    epsilon: float
    empty: bool = False
    others: tuple = ()

    @classmethod
    def none(cls, epsilon: float) -> "DiodicWindow":
        return cls(math.nan, math.nan, None, None, epsilon, empty=True)

    @property
    def width(self) -> float:
        return 0.0 if self.empty else self.v_max - self.v_min


def _total(cfg: DiodeConfig, grid: GridSpec, v: float) -> FailureBreakdown:
    return failure_measure(cfg, v, grid)


def _bisect_edge(cfg, grid, epsilon, good: float, bad: float, rtol: float):
    """Shrink a good/bad bracket; returns (edge estimate, breakdown on the bad side)."""
    bad_fb = failure_measure(cfg, bad, grid)
    while abs(bad - good) > rtol * max(good, bad):
        mid = math.sqrt(good * bad)
        fb = failure_measure(cfg, mid, grid)
        if fb.total < epsilon:
            good = mid
        else:
            bad, bad_fb = mid, fb
    return 0.5 * (good + bad), bad_fb


def good_runs(totals, epsilon: float) -> list[tuple[int, int]]:
    """Index ranges [i, j] of consecutive samples below ``epsilon``."""
    runs, start = [], None
    for i, t in enumerate(totals):
        if t < epsilon:
            if start is None:
                start = i
        elif start is not None:
            runs.append((start, i - 1))
            start = None
    if start is not None:
        runs.append((start, len(totals) - 1))
    return runs


def find_window(
    cfg: DiodeConfig,
    epsilon: float = DEFAULT_EPSILON,
    vgrid: VelocityGrid = VelocityGrid(),
    grid: GridSpec = DEFAULT_GRID,
    rtol: float = 1e-3,
    workers: int = 1,
) -> DiodicWindow:
    """Sample the failure measure, keep the widest good run, refine its edges.

    Other good runs are listed in ``others`` at grid resolution.
    """
    if not epsilon > 0:
        raise ValueError("epsilon must be positive")
    vs = vgrid.values()
    samples = ordered_map(functools.partial(_total, cfg, grid), vs.tolist(), workers)
    totals = [s.total for s in samples]
    runs = good_runs(totals, epsilon)
    if not runs:
        return DiodicWindow.none(epsilon)
    widest = max(runs, key=lambda r: (vs[r[1]] - vs[r[0]], -r[0]))
    i, j = widest
    if i == 0:
        v_min, cause_min = float(vs[0]), None
    else:
        v_min, fb = _bisect_edge(cfg, grid, epsilon, float(vs[i]), float(vs[i - 1]), rtol)
        cause_min = classify(fb)
    if j == len(vs) - 1:
        v_max, cause_max = float(vs[-1]), None
    else:
        v_max, fb = _bisect_edge(cfg, grid, epsilon, float(vs[j]), float(vs[j + 1]), rtol)
        cause_max = classify(fb)
    others = tuple((float(vs[a]), float(vs[b])) for a, b in runs if (a, b) != widest)
    return DiodicWindow(v_min, v_max, cause_min, cause_max, epsilon, False, others)


@dataclass(frozen=True)
class ScanRow:
    value: float
    window: DiodicWindow
    v_lambda_min: float
    v_lambda_max: float
    v_ad_max: float
    error: str | None = None

    @property
    def v_min(self) -> float:
        return self.window.v_min

    @property
    def v_max(self) -> float:
        return self.window.v_max

    @property
    def cause_at_vmax(self) -> Cause | None:
        return self.window.cause_at_vmax


@dataclass(frozen=True)
class ScanTable:
    parameter: str  # "d" or "delta"
    rows: tuple
    epsilon: float
    template: DiodeConfig
    vgrid: VelocityGrid = field(default_factory=VelocityGrid)

    def __post_init__(self):
        values = [r.value for r in self.rows]
        if any(b <= a for a, b in zip(values, values[1:])):
            raise ValueError("scan parameter must be strictly increasing")

    def nonempty(self) -> list[ScanRow]:
        return [r for r in self.rows if not r.window.empty and r.error is None]


def _scan_row(template: DiodeConfig, parameter: str, epsilon: float, vgrid: VelocityGrid, grid: GridSpec, value: float) -> ScanRow:
    cfg = dataclasses.replace(template, **{parameter: value})
    nan = math.nan
    try:
        vl_min, vl_max = lambda_limits(cfg, grid.margin)
        vad = v_ad_max(cfg, epsilon, vgrid.v_from, vgrid.v_to, vgrid.points, measure=AdiabaticityMeasure(cfg))
    except (ValueError, ConvergenceError) as exc:
        return ScanRow(value, DiodicWindow.none(epsilon), nan, nan, nan, error=str(exc))
    try:
        window = find_window(cfg, epsilon, vgrid, grid)
    except ConvergenceError as exc:
        return ScanRow(value, DiodicWindow.none(epsilon), vl_min, vl_max, vad, error=str(exc))
    return ScanRow(value, window, vl_min, vl_max, vad)


def _scan(template, parameter, values, epsilon, vgrid, grid, workers) -> ScanTable:
    values = [float(v) for v in values]
    if any(b <= a for a, b in zip(values, values[1:])):
        raise ValueError(f"{parameter} values must be strictly increasing")
    task = functools.partial(_scan_row, template, parameter, epsilon, vgrid, grid)
    rows = ordered_map(task, values, workers)
    return ScanTable(parameter, tuple(rows), epsilon, template, vgrid)


def scan_d(
    template: DiodeConfig,
    d_values,
    epsilon: float = DEFAULT_EPSILON,
    vgrid: VelocityGrid = VelocityGrid(),
    grid: GridSpec = DEFAULT_GRID,
    workers: int = 1,
) -> ScanTable:
    """Window and adiabatic limits for each mirror half-separation (metres)."""
    if any(d <= 0 for d in d_values):
        raise ValueError("d values must be positive")
    return _scan(template, "d", d_values, epsilon, vgrid, grid, workers)


def scan_shift(
    template: DiodeConfig,
    delta_values,
    epsilon: float = DEFAULT_EPSILON,
    vgrid: VelocityGrid = VelocityGrid(),
    grid: GridSpec = DEFAULT_GRID,
    workers: int = 1,
) -> ScanTable:
    """Window and adiabatic limits for each pump displacement (metres)."""
    return _scan(template, "delta", delta_values, epsilon, vgrid, grid, workers)
