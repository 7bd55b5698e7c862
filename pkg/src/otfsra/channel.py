"""Multi-UT delay-Doppler channel realizations.

UTs are placed uniformly over an annulus, see an ETU tapped delay line with
Rayleigh taps and Jakes-style per-tap Doppler nu_max*cos(theta), and pick a
preamble uniformly at random. Random streams are derived from
(master_seed, frame_index, ut_index) so frames can be generated in any order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .design import SPEED_OF_LIGHT, RaLoadModel
from .errors import InvalidParameter, ScenarioInfeasible
from .grid import OtfsGrid

ETU_DELAYS_NS = (0.0, 50.0, 120.0, 200.0, 230.0, 500.0, 1600.0, 2300.0, 5000.0)
ETU_POWERS_DB = (-1.0, -1.0, -1.0, 0.0, 0.0, 0.0, -3.0, -5.0, -7.0)


@dataclass(frozen=True)
class ChannelProfile:
    """Tapped delay line: relative delays (s) and powers normalized to sum 1."""

    delays: np.ndarray
    powers: np.ndarray

    @classmethod
    def from_db(cls, delays_ns: Sequence[float], powers_db: Sequence[float]) -> "ChannelProfile":
        d = np.asarray(delays_ns, dtype=float) * 1e-9
        p = 10.0 ** (np.asarray(powers_db, dtype=float) / 10.0)
        if d.ndim != 1 or d.shape != p.shape or d.size == 0:
            raise InvalidParameter("profile needs matching non-empty delay/power lists")
        if np.any(d < 0) or np.any(np.diff(d) < 0):
            raise InvalidParameter("profile delays must be non-negative and sorted")
        return cls(d, p / p.sum())

    @property
    def spread(self) -> float:
        return float(self.delays[-1] - self.delays[0])

    @property
    def L(self) -> int:
        return len(self.delays)


ETU = ChannelProfile.from_db(ETU_DELAYS_NS, ETU_POWERS_DB)


def load_profile(path) -> ChannelProfile:
    """Read ``delay_ns power_db`` pairs, one per line; '#' starts a comment.
    Whitespace or commas may separate the two columns."""
    delays, powers = [], []
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.replace(",", " ").split()
        if len(parts) != 2:
            raise InvalidParameter(f"{path}:{lineno}: expected 'delay_ns power_db'")
        delays.append(float(parts[0]))
        powers.append(float(parts[1]))
    return ChannelProfile.from_db(delays, powers)


@dataclass(frozen=True)
class PathTap:
    gain: complex
    delay: float
    doppler: float


@dataclass(frozen=True)
class ChannelRealization:
    """Taps stored column-wise; ``taps`` gives the per-path view."""

    gains: np.ndarray
    delays: np.ndarray
    dopplers: np.ndarray
    beta: float = 1.0
    distance: float = float("nan")

    def __post_init__(self):
        if np.any(np.diff(self.delays) < 0):
            raise InvalidParameter("tap delays must be non-decreasing")

    @classmethod
    def from_taps(cls, taps: Sequence[PathTap], beta: float = 1.0, distance: float = float("nan")):
        taps = sorted(taps, key=lambda p: p.delay)
        return cls(
            np.array([p.gain for p in taps], dtype=complex),
            np.array([p.delay for p in taps], dtype=float),
            np.array([p.doppler for p in taps], dtype=float),
            beta,
            distance,
        )

    @property
    def taps(self) -> tuple[PathTap, ...]:
        return tuple(
            PathTap(complex(h), float(t), float(v))
            for h, t, v in zip(self.gains, self.delays, self.dopplers)
        )

    @property
    def L(self) -> int:
        return len(self.delays)

    @property
    def tau_first(self) -> float:
        return float(self.delays[0])

    @property
    def tau_last(self) -> float:
        return float(self.delays[-1])


@dataclass(frozen=True)
class UtTransmission:
    channel: ChannelRealization
    preamble: int


@dataclass(frozen=True)
class FrameScenario:
    """Active UTs of one frame; UT 0 is the tagged UT in TEP runs."""

    uts: tuple[UtTransmission, ...]

    def __post_init__(self):
        if len(self.uts) < 1:
            raise InvalidParameter("a frame scenario needs at least one active UT")

    @property
    def Q(self) -> int:
        return len(self.uts)

    @property
    def preambles(self) -> list[int]:
        return [u.preamble for u in self.uts]


def frame_stream(master_seed: int, frame_index: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(master_seed, spawn_key=(0, frame_index)))


def ut_stream(master_seed: int, frame_index: int, ut_index: int) -> np.random.Generator:
    return np.random.default_rng(
        np.random.SeedSequence(master_seed, spawn_key=(0, frame_index, ut_index + 1))
    )


def draw_geometry(rng: np.random.Generator, r_a: float, r_c: float, pathloss_exp: float = 3.0):
    """Distance uniform over the annulus area and path-loss gain (r_c/d)^exp."""
    if not r_c > r_a > 0:
        raise InvalidParameter(f"need r_c > r_a > 0, got r_c={r_c}, r_a={r_a}")
    u = rng.random()
    d = math.sqrt(r_a**2 + u * (r_c**2 - r_a**2))
    return d, pathloss_gain(d, r_c, pathloss_exp)


def pathloss_gain(d: float, r_c: float, pathloss_exp: float = 3.0) -> float:
    return (r_c / d) ** pathloss_exp


def draw_etu_channel(
    rng: np.random.Generator,
    distance: float,
    beta: float,
    nu_max: float,
    profile: ChannelProfile = ETU,
    grid: OtfsGrid | None = None,
) -> ChannelRealization:
    """First path at the round-trip delay 2d/c, profile offsets after it.

    With ``grid`` given, the delay and Doppler feasibility limits
    (tau_last < T, 2*nu_max < delta_f) are enforced.
    """
    tau0 = 2.0 * distance / SPEED_OF_LIGHT
    delays = tau0 + profile.delays
    if grid is not None:
        if not delays[-1] < grid.T:
            raise ScenarioInfeasible(
                f"greatest path delay {delays[-1]:.3e} s is not below T={grid.T:.3e} s"
            )
        if not 2 * nu_max < grid.delta_f:
            raise ScenarioInfeasible(f"2*nu_max={2 * nu_max} Hz is not below delta_f")
    L = profile.L
    var = profile.powers * beta
    h = np.sqrt(var / 2) * (rng.standard_normal(L) + 1j * rng.standard_normal(L))
    theta = rng.uniform(0.0, 2 * np.pi, L)
    nu = nu_max * np.cos(theta)
    return ChannelRealization(h, delays, nu, beta, distance)


def conditional_poisson_pmf(k: int, mu: float) -> float:
    """Pr(Q = k | Q >= 1) for Q ~ Poisson(mu)."""
    if k < 1:
        return 0.0
    return math.exp(-mu + k * math.log(mu) - math.lgamma(k + 1)) / -math.expm1(-mu)


def draw_active_count(rng: np.random.Generator, mu: float) -> int:
    """Q ~ Poisson(mu) conditioned on Q >= 1, by inverse CDF."""
    u = rng.random()
    k, cdf = 1, 0.0
    while True:
        cdf += conditional_poisson_pmf(k, mu)
        if u < cdf or k > 10 * mu + 200:
            return k
        k += 1


def draw_frame_scenario(
    rng: np.random.Generator,
    load: RaLoadModel | None,
    R: int,
    nu_max: float = 0.0,
    *,
    pathloss_exp: float = 3.0,
    profile: ChannelProfile = ETU,
    grid: OtfsGrid | None = None,
    ut_rng: Callable[[int], np.random.Generator] | None = None,
    r_a: float | None = None,
    r_c: float | None = None,
) -> FrameScenario:
    """Draw Q | Q >= 1, then independent geometry, channel and preamble per UT.

    ``load=None`` forces a single UT (placed with radii r_a, r_c). ``ut_rng``
    maps a UT index to its own stream; by default all draws use ``rng``.
    """
    if R < 1:
        raise InvalidParameter("R must be >= 1")
    if load is None:
        Q = 1
        if r_a is None or r_c is None:
            raise InvalidParameter("single-UT scenarios need r_a and r_c")
    else:
        Q = draw_active_count(rng, load.mu_Q)
        r_a = load.r_a if r_a is None else r_a
        r_c = load.r_c if r_c is None else r_c
    uts = []
    for i in range(Q):
        g = ut_rng(i) if ut_rng is not None else rng
        d, beta = draw_geometry(g, r_a, r_c, pathloss_exp)
        ch = draw_etu_channel(g, d, beta, nu_max, profile, grid)
        uts.append(UtTransmission(ch, int(g.integers(R))))
    return FrameScenario(tuple(uts))
