"""Two-channel stationary scattering off the three-laser potential.

Amplitudes are defined against plane waves referenced to absolute position:
for incidence from the left in channel a,

    psi(x) = e_a exp(ikx) + R[:, a] exp(-ikx)     (x left of the lasers)
    psi(x) = T[:, a] exp(ikx)                     (x right of the lasers)

and for incidence from the right the same with k -> -k and the sides
exchanged.  Right incidence is computed as left incidence on the mirrored
potential M(-x), which leaves the amplitudes unchanged.
"""
from __future__ import annotations

import dataclasses
import enum
import math
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .physics import DiodeConfig, kinematics, laser_profiles, simulation_domain

UNITARITY_TOL = 1e-6
CONVERGENCE_TOL = 1e-7


class ConvergenceError(RuntimeError):
    """The solver could not produce trustworthy amplitudes."""

    def __init__(self, message: str, residual: float | None = None):
        super().__init__(message)
        self.residual = residual


class Side(enum.Enum):
    LEFT = "left"
    RIGHT = "right"

    @classmethod
    def parse(cls, value) -> "Side":
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).lower())
        except ValueError:
            raise ValueError(f"side must be 'left' or 'right', got {value!r}") from None


@dataclass(frozen=True)
class Incidence:
    side: Side
    channel: int
    v: float

    def __post_init__(self):
        object.__setattr__(self, "side", Side.parse(self.side))
        if self.channel not in (1, 2):
            raise ValueError(f"channel must be 1 or 2, got {self.channel!r}")
        if not (math.isfinite(self.v) and self.v > 0):
            raise ValueError(f"velocity must be positive, got {self.v!r}")


@dataclass(frozen=True)
class AmplitudeSet:
    """Reflection and transmission amplitudes for one incidence."""

    r1: complex
    r2: complex
    t1: complex
    t2: complex

    @property
    def probabilities(self) -> tuple[float, float, float, float]:
        return tuple(abs(a) ** 2 for a in (self.r1, self.r2, self.t1, self.t2))

    @property
    def total(self) -> float:
        return sum(self.probabilities)


@dataclass(frozen=True)
class GridSpec:
    """Truncation and step-size rules.

    The step is the smaller of ``1/wavelength_fraction`` of the shortest local
    de Broglie wavelength and ``1/width_fraction`` of the Gaussian width.
    """

    margin: float = 10.0
    wavelength_fraction: float = 40.0
    width_fraction: float = 100.0

    def __post_init__(self):
        if self.margin < 5:
            raise ValueError("margin must be at least 5 widths")
        if self.wavelength_fraction <= 0 or self.width_fraction <= 0:
            raise ValueError("step fractions must be positive")

    def refined(self, factor: float = 2.0) -> "GridSpec":
        return dataclasses.replace(
            self,
            wavelength_fraction=self.wavelength_fraction * factor,
            width_fraction=self.width_fraction * factor,
        )

    def local_wavenumber(self, cfg: DiodeConfig, k: float) -> float:
        # the lower adiabatic potential never drops below -hbar*Omega_hat/2
        return math.sqrt(k * k + cfg.mass * cfg.omega_hat / cfg.hbar)

    def sectors(self, cfg: DiodeConfig, k: float) -> tuple[float, float, int]:
        """(x_left, x_right, number of sectors)."""
        x_left, x_right = simulation_domain(cfg, self.margin)
        k_loc = self.local_wavenumber(cfg, k)
        h_max = min(2.0 * math.pi / k_loc / self.wavelength_fraction, cfg.delta_x / self.width_fraction)
        n = int(math.ceil((x_right - x_left) / h_max))
        return x_left, x_right, n


DEFAULT_GRID = GridSpec()


def _sector_potential(cfg: DiodeConfig, x_left: float, x_right: float, n: int):
    """(2m/hbar^2) M at the sector midpoints, plus the width and midpoints.

    Midpoints are laid out symmetrically about the domain centre so that a
    parity-symmetric configuration gives an exactly mirrored array.
    """
    h = (x_right - x_left) / n
    centre = 0.5 * (x_left + x_right)
    mid = centre + (np.arange(n) + (0.5 - 0.5 * n)) * h
    w1, w2, omega = laser_profiles(mid, cfg)
    scale = cfg.mass / cfg.hbar
    return scale * w1, scale * omega, scale * w2, h, mid


@dataclass
class _SideSolution:
    reflection: np.ndarray
    transmission: np.ndarray
    k: float
    h: float
    x_left: float
    x_right: float
    props: np.ndarray | None = None
    psi_left: np.ndarray | None = None


def _solve_left(w11, w12, w22, h, k, x_left, x_right, store=False) -> _SideSolution:
    y, kmat, props = kernels.sweep(w11, w12, w22, h, k, store=store)
    ymat = np.array([[y[0], y[1]], [y[1], y[2]]])
    eye = np.eye(2)
    refl = np.exp(2j * k * x_left) * np.linalg.solve(ymat + 1j * k * eye, 1j * k * eye - ymat)
    psi_left = np.exp(1j * k * x_left) * eye + np.exp(-1j * k * x_left) * refl
    trans = np.exp(-1j * k * x_right) * (kmat @ psi_left)
    return _SideSolution(refl, trans, k, h, x_left, x_right, props if store else None, psi_left)


def _check(sol: _SideSolution, v: float, side: Side, tol: float = UNITARITY_TOL) -> None:
    if not (np.all(np.isfinite(sol.reflection)) and np.all(np.isfinite(sol.transmission))):
        raise ConvergenceError(f"non-finite amplitudes for {side.value} incidence at v={v:g} m/s")
    flux = np.sum(np.abs(sol.reflection) ** 2 + np.abs(sol.transmission) ** 2, axis=0)
    defect = float(np.max(np.abs(flux - 1.0)))
    if defect > tol:
        raise ConvergenceError(
            f"flux not conserved for {side.value} incidence at v={v:g} m/s: defect {defect:.3e}",
            residual=defect,
        )


def _solve(cfg: DiodeConfig, side: Side, v: float, grid: GridSpec, store: bool = False) -> _SideSolution:
    _, k = kinematics(v, cfg)
    x_left, x_right, n = grid.sectors(cfg, k)
    w11, w12, w22, h, _ = _sector_potential(cfg, x_left, x_right, n)
    if side is Side.LEFT:
        sol = _solve_left(w11, w12, w22, h, k, x_left, x_right, store)
    else:
        sol = _solve_left(w11[::-1], w12[::-1], w22[::-1], h, k, -x_right, -x_left, store)
    _check(sol, v, side)
    return sol


def scattering_amplitudes(
    cfg: DiodeConfig,
    side,
    v: float,
    grid: GridSpec = DEFAULT_GRID,
    refine: bool = False,
    max_refinements: int = 3,
) -> tuple[np.ndarray, np.ndarray]:
    """Reflection and transmission matrices for incidence from one side.

    Column ``a`` holds the amplitudes for incidence in channel ``a+1``; row
    ``b`` the outgoing channel ``b+1``.  With ``refine`` the step is halved
    until probabilities move by less than ``CONVERGENCE_TOL``.
    """
    side = Side.parse(side)
    if not (math.isfinite(v) and v > 0):
        raise ValueError(f"velocity must be positive, got {v!r}")
    sol = _solve(cfg, side, v, grid)
    if not refine:
        return sol.reflection, sol.transmission
    change = math.inf
    for _ in range(max_refinements):
        grid = grid.refined()
        finer = _solve(cfg, side, v, grid)
        change = max(
            float(np.max(np.abs(np.abs(finer.reflection) ** 2 - np.abs(sol.reflection) ** 2))),
            float(np.max(np.abs(np.abs(finer.transmission) ** 2 - np.abs(sol.transmission) ** 2))),
        )
        sol = finer
        if change <= CONVERGENCE_TOL:
            return sol.reflection, sol.transmission
    raise ConvergenceError(
        f"probabilities still changing by {change:.3e} after {max_refinements} refinements at v={v:g} m/s",
        residual=change,
    )


def solve_scattering(cfg: DiodeConfig, inc: Incidence, grid: GridSpec = DEFAULT_GRID, refine: bool = False) -> AmplitudeSet:
    """Amplitudes (r1, r2, t1, t2) for a single incidence."""
    refl, trans = scattering_amplitudes(cfg, inc.side, inc.v, grid, refine=refine)
    a = inc.channel - 1
    return AmplitudeSet(complex(refl[0, a]), complex(refl[1, a]), complex(trans[0, a]), complex(trans[1, a]))


@dataclass(frozen=True)
class SMatrix:
    """Scattering matrix over (left-ch1, left-ch2, right-ch1, right-ch2).

    ``matrix[out, in]``; the zero-potential limit is the side-exchange
    permutation because transmitted waves leave through the opposite side.
    """

    matrix: np.ndarray
    v: float

    @property
    def unitarity_defect(self) -> float:
        s = self.matrix
        return float(np.max(np.abs(s.conj().T @ s - np.eye(4))))

    @property
    def symmetry_defect(self) -> float:
        return float(np.max(np.abs(self.matrix - self.matrix.T)))

    @property
    def probabilities(self) -> np.ndarray:
        return np.abs(self.matrix) ** 2


def s_matrix(cfg: DiodeConfig, v: float, grid: GridSpec = DEFAULT_GRID) -> SMatrix:
    r_left, t_left = scattering_amplitudes(cfg, Side.LEFT, v, grid)
    r_right, t_right = scattering_amplitudes(cfg, Side.RIGHT, v, grid)
    s = np.block([[r_left, t_right], [t_left, r_right]])
    return SMatrix(s, v)


def probabilities_signed(cfg: DiodeConfig, w: float, channel: int = 1, grid: GridSpec = DEFAULT_GRID):
    """(|R_1a|^2, |R_2a|^2, |T_1a|^2, |T_2a|^2) with the side encoded in the sign of ``w``."""
    if not math.isfinite(w) or w == 0:
        raise ValueError("signed velocity must be non-zero")
    if channel not in (1, 2):
        raise ValueError(f"channel must be 1 or 2, got {channel!r}")
    side = Side.LEFT if w > 0 else Side.RIGHT
    refl, trans = scattering_amplitudes(cfg, side, abs(w), grid)
    a = channel - 1
    return tuple(float(abs(z) ** 2) for z in (refl[0, a], refl[1, a], trans[0, a], trans[1, a]))


@dataclass
class SolutionField:
    """Wavefunction of one scattering solution on the sector nodes."""

    cfg: DiodeConfig
    incidence: Incidence
    x: np.ndarray
    psi: np.ndarray
    amplitudes: AmplitudeSet
    k: float
    grid: GridSpec = field(default=DEFAULT_GRID)

    @property
    def h(self) -> float:
        return float(self.x[1] - self.x[0])

    def adiabatic_components(self) -> np.ndarray:
        """(phi_minus, phi_plus) = U(x) psi(x) on the nodes."""
        from .adiabatic import transformation_matrix

        u = transformation_matrix(self.x, self.cfg)
        return np.einsum("nij,nj->ni", u, self.psi)

    def residual(self) -> float:
        """Largest relative defect of the nodal three-point relation.

        At each interior node the derivative reached from the left sector
        must equal the one leaving into the right sector.
        """
        n = self.x.size - 1
        x_left, x_right = float(self.x[0]), float(self.x[-1])
        w11, w12, w22, h, _ = _sector_potential(self.cfg, x_left, x_right, n)
        ct, st, a1, a2, b1, b2 = kernels.sector_coefficients(w11, w12, w22, h, self.k)
        psi = self.psi
        # eigenbasis components psi~ = T^T psi at both ends of every sector
        lo = psi[:-1]
        hi = psi[1:]
        lo_u = ct * lo[:, 0] + st * lo[:, 1]
        lo_l = -st * lo[:, 0] + ct * lo[:, 1]
        hi_u = ct * hi[:, 0] + st * hi[:, 1]
        hi_l = -st * hi[:, 0] + ct * hi[:, 1]
        # derivative at the sector's right and left ends, eigenbasis
        dr_u = -a2 * lo_u + a1 * hi_u
        dr_l = -b2 * lo_l + b1 * hi_l
        dl_u = -a1 * lo_u + a2 * hi_u
        dl_l = -b1 * lo_l + b2 * hi_l
        right_end = np.stack([ct * dr_u - st * dr_l, st * dr_u + ct * dr_l], axis=1)
        left_end = np.stack([ct * dl_u - st * dl_l, st * dl_u + ct * dl_l], axis=1)
        mismatch = np.linalg.norm(right_end[:-1] - left_end[1:], axis=1)
        scale = (
            (np.abs(a1[:-1]) + np.abs(b1[:-1]) + np.abs(a1[1:]) + np.abs(b1[1:])) * np.linalg.norm(psi[1:-1], axis=1)
            + (np.abs(a2[:-1]) + np.abs(b2[:-1])) * np.linalg.norm(psi[:-2], axis=1)
            + (np.abs(a2[1:]) + np.abs(b2[1:])) * np.linalg.norm(psi[2:], axis=1)
        )
        keep = scale > 1e-12 * scale.max()
        return float(np.max(mismatch[keep] / scale[keep]))


def solution_field(cfg: DiodeConfig, inc: Incidence, grid: GridSpec = DEFAULT_GRID) -> SolutionField:
    sol = _solve(cfg, inc.side, inc.v, grid, store=True)
    a = inc.channel - 1
    psi = kernels.forward_fill(sol.props, sol.psi_left[:, a])
    n = sol.props.shape[0]
    x = sol.x_left + np.arange(n + 1) * sol.h
    if inc.side is Side.RIGHT:
        # mirrored frame back to the lab: psi_lab(x) = psi_mirror(-x)
        x = -x[::-1]
        psi = psi[::-1].copy()
    amps = AmplitudeSet(
        complex(sol.reflection[0, a]), complex(sol.reflection[1, a]),
        complex(sol.transmission[0, a]), complex(sol.transmission[1, a]),
    )
    return SolutionField(cfg, inc, x, psi, amps, sol.k, grid)
