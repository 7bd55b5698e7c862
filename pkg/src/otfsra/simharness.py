"""Monte Carlo timing-error-probability engine and design searches.

Every frame draws from its own stream derived from (master_seed, frame),
and every UT of that frame from (master_seed, frame, ut). Results are plain
integer counters, so splitting the frame range across processes in any way
gives identical totals.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from functools import lru_cache

import numpy as np
from scipy import stats

from .analysis import collision_lower_bound
from .channel import ETU, ChannelProfile, draw_frame_scenario, frame_stream, ut_stream
from .design import (
    SPEED_OF_LIGHT,
    RaLoadModel,
    SystemBudget,
    derive_grid,
    min_doppler_width,
    snr_to_energy,
)
from .detector import Threshold, analytic_threshold, empirical_threshold, group_peaks
from .errors import Infeasible, InvalidParameter, ScenarioInfeasible
from .grid import OtfsGrid, PreambleAllocation, build_allocation
from .receiver import check_model_domain, deterministic_tf_batch, make_window, tf_noise
from .waveform import sfft

SERIAL_ENV = "OTFSRA_SERIAL"
BATCH = 1000


@dataclass(frozen=True)
class ScenarioConfig:
    """One simulated operating point.

    ``load=None`` forces exactly one UT per frame, placed over the annulus
    (r_a, r_c). ``N1=None`` uses the minimal Doppler width for the budget's
    nu_max. ``rho_db=None`` runs noise-free (N_o = 0, mu = 0).
    """

    budget: SystemBudget
    load: RaLoadModel | None = None
    window: str = "hamming"
    N1: int | None = None
    rho_db: float | None = -5.0
    p_fa: float = 1e-2
    n_frames: int = 10_000
    master_seed: int = 0
    l_anchor: int = 0
    r_a: float = 100.0
    r_c: float = 1500.0
    pathloss_exp: float = 3.0
    profile: ChannelProfile = field(default=ETU, compare=False)
    calib_frames: int | None = None

    def __post_init__(self):
        if int(self.n_frames) != self.n_frames or self.n_frames < 1:
            raise InvalidParameter(f"n_frames must be a positive integer, got {self.n_frames}")
        if not 0 < self.p_fa <= 1:
            raise InvalidParameter(f"p_fa must lie in (0, 1], got {self.p_fa}")
        if self.load is not None:
            object.__setattr__(self, "r_a", self.load.r_a)
            object.__setattr__(self, "r_c", self.load.r_c)

    @property
    def nu_max(self) -> float:
        return self.budget.nu_max

    @property
    def grid(self) -> OtfsGrid:
        return derive_grid(self.budget)

    @property
    def n1(self) -> int:
        return self.N1 if self.N1 is not None else min_doppler_width(self.grid, self.nu_max)

    @property
    def allocation(self) -> PreambleAllocation:
        return build_allocation(self.grid, self.n1, self.l_anchor)

    @property
    def noise_free(self) -> bool:
        return self.rho_db is None

    @property
    def N_o(self) -> float:
        return 0.0 if self.noise_free else 1.0

    @property
    def energy(self) -> float:
        """Preamble energy; noise level is fixed at N_o = 1 so rho sets E."""
        if self.noise_free:
            return 1.0
        rho = 10.0 ** (self.rho_db / 10.0)
        return snr_to_energy(self.grid, self.budget.G, self.budget.B_c, rho, 1.0)

    @property
    def calibration_frames(self) -> int:
        if self.calib_frames is not None:
            return self.calib_frames
        return max(10_000, math.ceil(100 / self.p_fa))

    def validate(self) -> None:
        """Raise early for scenarios whose delays or Dopplers leave the model domain."""
        g = self.grid
        tau_max = 2 * self.r_c / SPEED_OF_LIGHT + self.profile.spread
        if not tau_max < g.T:
            raise ScenarioInfeasible(
                f"greatest path delay {tau_max:.4e} s is not below T={g.T:.4e} s"
            )
        if not 2 * self.nu_max < g.delta_f:
            raise ScenarioInfeasible(f"2*nu_max={2 * self.nu_max} Hz is not below delta_f")
        if not self.r_c > self.r_a > 0:
            raise InvalidParameter(f"need r_c > r_a > 0, got r_c={self.r_c}, r_a={self.r_a}")
        self.allocation  # noqa: B018  (validates N1)
        make_window(self.window, g.N)


@dataclass
class TepResult:
    frames: int = 0
    errors: int = 0
    frames_q1: int = 0
    errors_q1: int = 0
    errors_qge2: int = 0
    collisions: int = 0
    errors_collision: int = 0
    fa_hits: int = 0
    fa_trials: int = 0
    mu: float = 0.0

    COUNTERS = (
        "frames",
        "errors",
        "frames_q1",
        "errors_q1",
        "errors_qge2",
        "collisions",
        "errors_collision",
        "fa_hits",
        "fa_trials",
    )

    def merge(self, other: "TepResult") -> "TepResult":
        for c in self.COUNTERS:
            setattr(self, c, getattr(self, c) + getattr(other, c))
        return self

    def counters(self) -> tuple[int, ...]:
        return tuple(getattr(self, c) for c in self.COUNTERS)

    @property
    def tep(self) -> float:
        return self.errors / self.frames if self.frames else float("nan")

    @property
    def fa_rate(self) -> float:
        return self.fa_hits / self.fa_trials if self.fa_trials else float("nan")

    def ci(self, level: float = 0.95) -> tuple[float, float]:
        """Normal-approximation interval, or Clopper-Pearson below 30 errors."""
        n, k = self.frames, self.errors
        if n == 0:
            return (0.0, 1.0)
        alpha = 1 - level
        if k < 30:
            lo = 0.0 if k == 0 else float(stats.beta.ppf(alpha / 2, k, n - k + 1))
            hi = 1.0 if k == n else float(stats.beta.ppf(1 - alpha / 2, k + 1, n - k))
            return lo, hi
        p = k / n
        half = stats.norm.ppf(1 - alpha / 2) * math.sqrt(p * (1 - p) / n)
        return max(0.0, p - half), min(1.0, p + half)


@lru_cache(maxsize=32)
def _calibrated_threshold(cfg: ScenarioConfig) -> Threshold:
    g, alloc = cfg.grid, cfg.allocation
    window = make_window(cfg.window, g.N)
    rng = np.random.default_rng(np.random.SeedSequence(cfg.master_seed, spawn_key=(1,)))
    return empirical_threshold(g, alloc, window, cfg.N_o, cfg.p_fa, rng, cfg.calibration_frames)


def detection_threshold(cfg: ScenarioConfig) -> Threshold:
    """Noise-free: 0. Rectangular window: closed form. Otherwise an empirical
    quantile from a calibration stream seeded by master_seed alone."""
    if cfg.noise_free:
        return Threshold(0.0, cfg.p_fa, "noise-free")
    if cfg.p_fa >= 1:
        return Threshold(0.0, cfg.p_fa, "trivial")
    if cfg.window == "rectangular":
        return analytic_threshold(cfg.grid, cfg.n1, cfg.N_o, cfg.p_fa)
    return _calibrated_threshold(replace(cfg, n_frames=1, rho_db=0.0))


def _run_range(cfg: ScenarioConfig, mu: float, start: int, stop: int) -> TepResult:
    g, alloc = cfg.grid, cfg.allocation
    R, M = alloc.R, g.M
    window = make_window(cfg.window, g.N)
    E, N_o = cfg.energy, cfg.N_o
    out = TepResult(mu=mu)
    for b0 in range(start, stop, BATCH):
        b1 = min(stop, b0 + BATCH)
        F = b1 - b0
        fid, gains, delays, dops, kr, lr = [], [], [], [], [], []
        tagged = np.empty(F, dtype=int)
        lo = np.empty(F, dtype=int)
        hi = np.empty(F, dtype=int)
        Q = np.empty(F, dtype=int)
        collided = np.zeros(F, dtype=bool)
        used = np.zeros((F, R), dtype=bool)
        noise = np.zeros((F, g.N, M), dtype=complex) if N_o > 0 else None
        for i, f in enumerate(range(b0, b1)):
            rng = frame_stream(cfg.master_seed, f)
            sc = draw_frame_scenario(
                rng,
                cfg.load,
                R,
                cfg.nu_max,
                pathloss_exp=cfg.pathloss_exp,
                profile=cfg.profile,
                grid=g,
                ut_rng=lambda u, f=f: ut_stream(cfg.master_seed, f, u),
                r_a=cfg.r_a,
                r_c=cfg.r_c,
            )
            if noise is not None:
                noise[i] = tf_noise(rng, window.samples, M, N_o)
            Q[i] = sc.Q
            pre = sc.preambles
            tagged[i] = pre[0]
            collided[i] = pre.count(pre[0]) > 1
            used[i, pre] = True
            ch0 = sc.uts[0].channel
            lo[i] = math.floor(M * ch0.tau_first / g.T)
            hi[i] = math.ceil(M * ch0.tau_last / g.T)
            for ut in sc.uts:
                ch = ut.channel
                a = alloc.anchors[ut.preamble]
                fid.append(np.full(ch.L, i))
                gains.append(ch.gains)
                delays.append(ch.delays)
                dops.append(ch.dopplers)
                kr.append(np.full(ch.L, a.k))
                lr.append(np.full(ch.L, a.l))
        cat = np.concatenate
        delays_a, dops_a = cat(delays), cat(dops)
        check_model_domain(g, delays_a, dops_a)
        Y = deterministic_tf_batch(
            g, window.samples, E, cat(fid), cat(gains), delays_a, dops_a, cat(kr), cat(lr), F
        )
        if noise is not None:
            Y += noise
        z, l_peak = group_peaks(sfft(Y), alloc)
        rows = np.arange(F)
        zt = z[rows, tagged]
        ta = (l_peak[rows, tagged] - alloc.l_anchor) % M
        miss = (ta < lo) | (ta > hi) | (zt < mu)
        out.frames += F
        out.errors += int(miss.sum())
        out.frames_q1 += int((Q == 1).sum())
        out.errors_q1 += int((miss & (Q == 1)).sum())
        out.errors_qge2 += int((miss & (Q >= 2)).sum())
        out.collisions += int(collided.sum())
        out.errors_collision += int((miss & collided).sum())
        if N_o > 0:
            idle = ~used
            out.fa_hits += int((z[idle] >= mu).sum())
            out.fa_trials += int(idle.sum())
    return out


def _chunks(n: int, workers: int) -> list[tuple[int, int]]:
    edges = np.linspace(0, n, workers + 1).astype(int)
    return [(int(a), int(b)) for a, b in zip(edges[:-1], edges[1:]) if b > a]


def resolve_workers(workers: int | None) -> int:
    if os.environ.get(SERIAL_ENV, "") not in ("", "0"):
        return 1
    if workers is None:
        return 1
    if workers < 1:
        raise InvalidParameter("workers must be >= 1")
    return workers


def run_tep(cfg: ScenarioConfig, workers: int | None = None) -> TepResult:
    """Tagged-UT timing error probability over cfg.n_frames frames.

    UT 0 of each frame is the tagged UT; its preamble group is searched and
    its TA checked against its own path-delay interval. Groups no UT picked
    feed the false-alarm counters.
    """
    cfg.validate()
    mu = detection_threshold(cfg).mu
    workers = resolve_workers(workers)
    parts = _chunks(cfg.n_frames, workers)
    if workers == 1 or len(parts) == 1:
        return _run_range(cfg, mu, 0, cfg.n_frames)
    total = TepResult(mu=mu)
    with ProcessPoolExecutor(max_workers=workers) as ex:
        for r in ex.map(_run_range, [cfg] * len(parts), [mu] * len(parts), *zip(*parts)):
            total.merge(r)
    return total


def collision_floor(cfg: ScenarioConfig) -> float:
    if cfg.load is None:
        return 0.0
    return collision_lower_bound(cfg.allocation.R, cfg.load.mu_Q).value


def search_n1(cfg: ScenarioConfig, target_pe: float, workers: int | None = None) -> int:
    """Smallest N1 whose noise-free TEP is at most target_pe / 2."""
    if not 0 < target_pe <= 1:
        raise InvalidParameter("target_pe must lie in (0, 1]")
    base = replace(cfg, rho_db=None)
    for n1 in range(1, base.grid.N + 1):
        if run_tep(replace(base, N1=n1), workers).tep <= target_pe / 2:
            return n1
    raise Infeasible(f"no N1 <= N={base.grid.N} reaches TEP <= {target_pe / 2:g} without noise")


@dataclass(frozen=True)
class RhoSearchResult:
    rho_db: float
    tep: float
    evaluations: int
    bound: float


def search_rho(
    cfg: ScenarioConfig,
    target_pe: float,
    rho_lo: float = -20.0,
    rho_hi: float = 10.0,
    tol_db: float = 0.25,
    workers: int | None = None,
) -> RhoSearchResult:
    """Smallest rho (dB, within tol_db) in [rho_lo, rho_hi] whose simulated
    TEP meets target_pe. All candidates share master_seed, so the TEP curve
    being bisected is a fixed realization."""
    floor = collision_floor(cfg)
    if not target_pe > floor:
        raise Infeasible(f"target TEP {target_pe:g} is not above the collision floor {floor:.4g}")
    if rho_lo >= rho_hi:
        raise InvalidParameter("need rho_lo < rho_hi")
    evals = 0

    def tep_at(rho):
        nonlocal evals
        evals += 1
        return run_tep(replace(cfg, rho_db=rho), workers).tep

    t_lo = tep_at(rho_lo)
    if t_lo <= target_pe:
        return RhoSearchResult(rho_lo, t_lo, evals, floor)
    t_hi = tep_at(rho_hi)
    if t_hi > target_pe:
        raise Infeasible(f"TEP {t_hi:.4g} at rho={rho_hi} dB still exceeds target {target_pe:g}")
    lo, hi = rho_lo, rho_hi
    while hi - lo > tol_db:
        mid = 0.5 * (lo + hi)
        t = tep_at(mid)
        if t <= target_pe:
            hi, t_hi = mid, t
        else:
            lo = mid
    return RhoSearchResult(hi, t_hi, evals, floor)


RESULT_COLUMNS = (
    "scenario_id",
    "rho_db",
    "nu_max_hz",
    "lambda",
    "N1",
    "window",
    "p_fa_target",
    "frames",
    "tep",
    "tep_ci_lo",
    "tep_ci_hi",
    "fa_rate",
    "bound",
    "seed",
)


def result_row(scenario_id: str, cfg: ScenarioConfig, res: TepResult) -> dict:
    lo, hi = res.ci()
    return {
        "scenario_id": scenario_id,
        "rho_db": "inf" if cfg.rho_db is None else cfg.rho_db,
        "nu_max_hz": cfg.nu_max,
        "lambda": cfg.load.lam if cfg.load is not None else 0.0,
        "N1": cfg.n1,
        "window": cfg.window,
        "p_fa_target": cfg.p_fa,
        "frames": res.frames,
        "tep": res.tep,
        "tep_ci_lo": lo,
        "tep_ci_hi": hi,
        "fa_rate": res.fa_rate,
        "bound": collision_floor(cfg),
        "seed": cfg.master_seed,
    }


def reference_budget(nu_max: float = 300.0, r_c: float = 1500.0) -> SystemBudget:
    """1.08 MHz x 1.6 ms budget with G = 2 r_c / c plus the 5 us ETU spread."""
    return SystemBudget(1.08e6, 1.6e-3, 2 * r_c / SPEED_OF_LIGHT + 5e-6, nu_max)
