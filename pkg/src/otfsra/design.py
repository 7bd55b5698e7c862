"""Parameter selection: (M, T, N) from the time/bandwidth budget, N1 sizing,
RA load model and SNR/energy conversion."""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import BudgetInfeasible, DopplerInfeasible, InvalidParameter
from .grid import OtfsGrid

SPEED_OF_LIGHT = 3e8

# relative tolerance for treating a float product as an exact integer
_INT_RTOL = 1e-9


def _near_int(x: float) -> int | None:
    r = round(x)
    if abs(x - r) <= _INT_RTOL * max(1.0, abs(x)):
        return int(r)
    return None


def exact_ceil(x: float) -> int:
    r = _near_int(x)
    return r if r is not None else math.ceil(x)


def exact_floor(x: float) -> int:
    r = _near_int(x)
    return r if r is not None else math.floor(x)


@dataclass(frozen=True)
class SystemBudget:
    """Bandwidth B_c (Hz), preamble time T_c (s, guards excluded), max
    round-trip delay G (s) and max Doppler nu_max (Hz)."""

    B_c: float
    T_c: float
    G: float
    nu_max: float = 0.0

    def __post_init__(self):
        if not self.B_c > 0 or not self.T_c > 0:
            raise InvalidParameter("B_c and T_c must be positive")
        if self.G < 0 or self.nu_max < 0:
            raise InvalidParameter("G and nu_max must be non-negative")
        if not self.T_c > self.G:
            raise InvalidParameter(f"T_c={self.T_c} must exceed G={self.G}")

    @property
    def guard_bins(self) -> int:
        """ceil(G * B_c), i.e. M - 1."""
        return exact_ceil(self.G * self.B_c)


@dataclass(frozen=True)
class RaLoadModel:
    lam: float  # calls / s / km^2
    T_a: float  # s
    r_c: float  # m
    r_a: float = 0.0  # m

    def __post_init__(self):
        if not self.lam > 0 or not self.T_a > 0:
            raise InvalidParameter("lambda and T_a must be positive")
        if not self.r_c > self.r_a >= 0:
            raise InvalidParameter(f"need r_c > r_a >= 0, got r_c={self.r_c}, r_a={self.r_a}")

    @property
    def mu_Q(self) -> float:
        rc_km, ra_km = self.r_c / 1e3, self.r_a / 1e3
        return math.pi * (rc_km**2 - ra_km**2) * self.lam * self.T_a


def derive_grid(budget: SystemBudget) -> OtfsGrid:
    """Smallest-PAPR grid resolving every delay up to G within B_c and T_c."""
    M = 1 + budget.guard_bins
    N = exact_floor(budget.B_c * budget.T_c / M)
    if N < 1:
        raise BudgetInfeasible(
            f"N = floor(B_c*T_c/M) = 0 (B_c*T_c={budget.B_c * budget.T_c:.4g}, M={M})"
        )
    return OtfsGrid(M=M, N=N, T=M / budget.B_c)


def min_doppler_width(grid: OtfsGrid, nu_max: float) -> int:
    """Smallest DDRE group width N1 = 2*ceil(nu_max*N*T) + 3 (1 when nu_max = 0)."""
    if nu_max < 0:
        raise InvalidParameter("nu_max must be non-negative")
    if nu_max == 0:
        return 1
    n1 = 2 * exact_ceil(nu_max * grid.N * grid.T) + 3
    if n1 > grid.N:
        raise DopplerInfeasible(f"required N1={n1} exceeds N={grid.N} at nu_max={nu_max} Hz")
    return n1


def policy_width(grid: OtfsGrid, nu_max: float, r_c: float) -> tuple[str, int]:
    """Window and N1 for a cell of radius r_c (m): Hamming with the minimal
    width up to 1500 m, 3-term Blackman-Harris with two extra rows beyond."""
    n1 = min_doppler_width(grid, nu_max)
    if r_c <= 1500:
        return "hamming", n1
    n1 = 2 * exact_ceil(nu_max * grid.N * grid.T) + 5
    if n1 > grid.N:
        raise DopplerInfeasible(f"required N1={n1} exceeds N={grid.N}")
    return "blackman_harris_3", n1


def load_model(lam: float, T_a: float, r_c: float, r_a: float = 0.0) -> RaLoadModel:
    return RaLoadModel(lam, T_a, r_c, r_a)


def _guard_term(G: float, B_c: float) -> float:
    return 2 * G * B_c / (1 + exact_ceil(G * B_c))


def snr_to_energy(grid: OtfsGrid, G: float, B_c: float, rho: float, N_o: float) -> float:
    """Preamble energy E giving transmit SNR rho for noise density N_o."""
    return rho * N_o * grid.M * (grid.N + _guard_term(G, B_c))


def energy_to_snr(grid: OtfsGrid, G: float, B_c: float, E: float, N_o: float) -> float:
    return E / (N_o * grid.M * (grid.N + _guard_term(G, B_c)))


def doppler_from_speed(speed_kmh: float, f_c: float) -> float:
    return speed_kmh / 3.6 * f_c / SPEED_OF_LIGHT
