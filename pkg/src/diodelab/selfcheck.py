"""Quick invariant suite run by ``diodelab selfcheck``."""
from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass

import numpy as np

from . import adiabatic
from .physics import HBAR, NEON_MASS, DiodeConfig
from .solver import GridSpec, s_matrix, scattering_amplitudes

R = 1.0 / math.sqrt(2.0)

# (case strengths W1, W2 in Msi) -> side -> (c_-, c_+, R11, R21, T11, T21) for ground-state incidence
ADIABATIC_AMPLITUDES = {
    (0.0, 0.0): {
        "right": (-R, R, -0.5, -0.5, 0.5, -0.5),
        "left": (-R, R, -0.5, -0.5, 0.5, -0.5),
    },
    (100.0, 0.0): {
        "right": (0.0, 1.0, -1.0, 0.0, 0.0, 0.0),
        "left": (-R, R, -0.5, -0.5, 0.0, -R),
    },
    (0.0, 100.0): {
        "right": (-R, R, -0.5, -0.5, R, 0.0),
        "left": (-1.0, 0.0, 0.0, 0.0, R, -R),
    },
    (100.0, 100.0): {
        "right": (0.0, 1.0, -1.0, 0.0, 0.0, 0.0),
        "left": (-1.0, 0.0, 0.0, 0.0, 0.0, -1.0),
    },
}

# configurations and speeds whose probabilities must be step-converged
CONVERGENCE_POINTS = (
    ((1.0, 0.0, 0.0, 50.0), 0.1),
    ((0.2, 100.0, 100.0, 50.0), 0.1),
    ((1.0, 100.0, 100.0, 50.0), 0.2),
)


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    measured: float
    limit: float

    def line(self) -> str:
        flag = "PASS" if self.passed else "FAIL"
        return f"{flag} {self.name}: measured {self.measured:.3e} (limit {self.limit:.1e})"


def check_unitarity(grid: GridSpec, samples: int = 6, seed: int = 0) -> list[CheckResult]:
    rng = np.random.default_rng(seed)
    unit, sym = 0.0, 0.0
    for _ in range(samples):
        cfg = DiodeConfig.from_units(rng.uniform(0, 1), rng.uniform(0, 100), rng.uniform(0, 100), rng.uniform(30, 80))
        s = s_matrix(cfg, rng.uniform(0.02, 0.8), grid)
        unit = max(unit, s.unitarity_defect)
        sym = max(sym, s.symmetry_defect)
    return [
        CheckResult("max unitarity defect", unit <= 1e-6, unit, 1e-6),
        CheckResult("max reciprocity defect", sym <= 1e-6, sym, 1e-6),
    ]


def check_convergence(grid: GridSpec) -> CheckResult:
    change = 0.0
    for units, v in CONVERGENCE_POINTS:
        cfg = DiodeConfig.from_units(*units)
        coarse = np.abs(np.concatenate(scattering_amplitudes(cfg, "left", v, grid))) ** 2
        fine = np.abs(np.concatenate(scattering_amplitudes(cfg, "left", v, grid.refined()))) ** 2
        change = max(change, float(np.max(np.abs(coarse - fine))))
    return CheckResult("step-halving probability change", change <= 1e-7, change, 1e-7)


def check_adiabatic_amplitudes() -> CheckResult:
    worst = 0.0
    for (w1, w2), sides in ADIABATIC_AMPLITUDES.items():
        cfg = DiodeConfig.from_units(1.0, w1, w2, 50.0)
        for side, expected in sides.items():
            p = adiabatic.adiabatic_prediction(cfg, side, 1)
            got = (p.c_minus, p.c_plus, p.r1, p.r2, p.t1, p.t2)
            worst = max(worst, max(abs(a - b) for a, b in zip(got, expected)))
    return CheckResult("adiabatic amplitude table deviation", worst <= 1e-15, worst, 1e-15)


def check_decoupling() -> CheckResult:
    cfg = DiodeConfig.from_units(1.0, 0.0, 0.0, 50.0)
    x = np.linspace(-300e-6, 300e-6, 2001)
    prof = adiabatic.adiabatic_frame(x, cfg)
    gap = float(np.max(prof.lambda_plus - prof.lambda_minus))
    # off-diagonal size A - iBp at a 1 m/s momentum
    worst = float(np.max(np.hypot(prof.a_coupling, prof.b_coupling * cfg.mass * 1.0))) / gap
    return CheckResult("pump-only coupling (relative to gap)", worst <= 1e-10, worst, 1e-10)


def check_admixture(seed: int = 0) -> CheckResult:
    rng = np.random.default_rng(seed)
    gap = HBAR * 1e6
    e = rng.uniform(0.2, 0.8)
    a = rng.uniform(-1, 1) * gap
    b = rng.uniform(-1, 1) * gap / math.sqrt(2 * NEON_MASS * gap)
    first = adiabatic.first_order_admixture(e * gap, 0.0, gap, a, b, NEON_MASS)
    eps = np.array([0.02, 0.01, 0.005])
    rel = [abs(adiabatic.admixture_oracle(e * gap, 0.0, gap, a, b, x, NEON_MASS) / (x * first) - 1) for x in eps]
    slope = float(np.polyfit(np.log(eps), np.log(rel), 1)[0])
    return CheckResult("admixture residual exponent minus 2", abs(slope - 2.0) <= 0.3, abs(slope - 2.0), 0.3)


def run(step_factor: float = 1.0, seed: int = 0) -> list[CheckResult]:
    if not step_factor > 0:
        raise ValueError("step factor must be positive")
    base = GridSpec()
    grid = dataclasses.replace(
        base,
        wavelength_fraction=base.wavelength_fraction / step_factor,
        width_fraction=base.width_fraction / step_factor,
    )
    return [
        *check_unitarity(grid, seed=seed),
        check_convergence(grid),
        check_adiabatic_amplitudes(),
        check_decoupling(),
        check_admixture(seed),
    ]
