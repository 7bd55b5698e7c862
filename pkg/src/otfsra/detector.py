"""Peak-energy preamble detection, TA estimation and false-alarm thresholds."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .channel import ChannelRealization
from .design import exact_ceil, exact_floor
from .errors import InsufficientFrames, InvalidParameter
from .grid import OtfsGrid, PreambleAllocation
from .receiver import DdFrame, ReceiveWindow, tf_noise
from .waveform import sfft


@dataclass(frozen=True)
class DetectionOutcome:
    q: int
    z: float
    k_peak: int
    l_peak: int
    ta_hat: int
    above_threshold: bool


@dataclass(frozen=True)
class Threshold:
    mu: float
    target_pfa: float
    calibration: str  # "analytic" | "empirical" | "noise-free"
    frames: int = 0


def _frame_array(frame) -> np.ndarray:
    return frame.data if isinstance(frame, DdFrame) else np.asarray(frame)


def detect_preamble(frame, alloc: PreambleAllocation, q: int, mu: float) -> DetectionOutcome:
    """Joint argmax of |x_hat|^2 over group q; ties go to the smallest l, then k."""
    if not 0 <= q < alloc.R:
        raise InvalidParameter(f"preamble id {q} outside [0, {alloc.R})")
    x = _frame_array(frame)
    rows = alloc.groups[q]
    energy = np.abs(x[rows.start : rows.stop, :]) ** 2
    # C-order argmax over (l, k) picks the smallest l first
    flat = int(np.argmax(energy.T))
    l_star, dk = divmod(flat, alloc.N1)
    z = float(energy[dk, l_star])
    return DetectionOutcome(
        q=q,
        z=z,
        k_peak=rows.start + dk,
        l_peak=l_star,
        ta_hat=(l_star - alloc.anchors[q].l) % alloc.grid.M,
        above_threshold=z >= mu,
    )


def group_peaks(frames: np.ndarray, alloc: PreambleAllocation):
    """Per-group peak energy and peak delay index for a batch (F, N, M).

    Returns (z, l_peak), each shape (F, R), with the same tie rule as
    detect_preamble.
    """
    F = frames.shape[0]
    R, N1, M = alloc.R, alloc.N1, alloc.grid.M
    energy = np.abs(frames[:, : R * N1, :]) ** 2
    # (F, R, M, N1): C-order flatten of the last two axes is (l, k)
    blocks = energy.reshape(F, R, N1, M).transpose(0, 1, 3, 2).reshape(F, R, M * N1)
    flat = np.argmax(blocks, axis=-1)
    z = np.take_along_axis(blocks, flat[..., None], axis=-1)[..., 0]
    return z, flat // N1


def ta_interval(ch: ChannelRealization, grid: OtfsGrid) -> tuple[int, int]:
    """[floor(M*tau_first/T), ceil(M*tau_last/T)]."""
    return (
        exact_floor(grid.M * ch.tau_first / grid.T),
        exact_ceil(grid.M * ch.tau_last / grid.T),
    )


def classify_miss(outcome: DetectionOutcome, ch: ChannelRealization, grid: OtfsGrid) -> bool:
    """True on a timing error: TA outside the path-delay interval or z below mu."""
    lo, hi = ta_interval(ch, grid)
    return not (lo <= outcome.ta_hat <= hi) or not outcome.above_threshold


def analytic_threshold(grid: OtfsGrid, N1: int, N_o: float, p_fa: float) -> Threshold:
    """Threshold for i.i.d. CN(0, MN N_o) noise over the N1*M cells of a group
    (rectangular window)."""
    if not 0 < p_fa < 1:
        raise InvalidParameter(f"p_fa must lie in (0, 1), got {p_fa}")
    cells = N1 * grid.M
    # 1 - (1 - p)^(1/cells), computed without cancellation
    per_cell = -math.expm1(math.log1p(-p_fa) / cells)
    mu = -N_o * grid.M * grid.N * math.log(per_cell)
    return Threshold(mu, p_fa, "analytic")


def threshold_from_budget(B_c: float, T_c: float, G: float, N1: int, N_o: float, p_fa: float) -> float:
    """Closed form written directly in terms of (B_c, T_c, G)."""
    if not 0 < p_fa < 1:
        raise InvalidParameter(f"p_fa must lie in (0, 1), got {p_fa}")
    c = 1 + exact_ceil(G * B_c)
    N = exact_floor(B_c * T_c / c)
    return -N_o * c * N * math.log(1 - (1 - p_fa) ** (1 / (N1 * c)))


def false_alarm_probability(mu: float, grid: OtfsGrid, N1: int, N_o: float) -> float:
    """1 - (1 - exp(-mu/(MN N_o)))^(N1 M)."""
    x = mu / (grid.M * grid.N * N_o)
    return -math.expm1(N1 * grid.M * math.log1p(-math.exp(-x)))


def noise_dd_frames(
    rng: np.random.Generator, grid: OtfsGrid, window: ReceiveWindow, N_o: float, n: int
) -> np.ndarray:
    return sfft(tf_noise(rng, window.samples, grid.M, N_o, size=n))


def empirical_threshold(
    grid: OtfsGrid,
    alloc: PreambleAllocation,
    window: ReceiveWindow,
    N_o: float,
    p_fa: float,
    rng: np.random.Generator,
    n_frames: int,
    chunk: int = 2000,
) -> Threshold:
    """Empirical (1 - p_fa) quantile of noise-only group peak energies.

    Peaks from every group of every frame are pooled (the DD noise is
    circularly stationary along Doppler, so all groups share one law).
    """
    if not 0 < p_fa <= 1:
        raise InvalidParameter(f"p_fa must lie in (0, 1], got {p_fa}")
    if n_frames < 100 / p_fa:
        raise InsufficientFrames(f"need at least {math.ceil(100 / p_fa)} frames, got {n_frames}")
    if p_fa == 1:
        return Threshold(0.0, p_fa, "empirical", n_frames)
    peaks = []
    done = 0
    while done < n_frames:
        b = min(chunk, n_frames - done)
        z, _ = group_peaks(noise_dd_frames(rng, grid, window, N_o, b), alloc)
        peaks.append(z.ravel())
        done += b
    z = np.sort(np.concatenate(peaks))
    # smallest mu with empirical Pr(z >= mu) <= p_fa
    idx = min(len(z) - 1, int(math.ceil((1 - p_fa) * len(z))))
    return Threshold(float(z[idx]), p_fa, "empirical", n_frames)


def empirical_false_alarm_rate(
    grid: OtfsGrid,
    alloc: PreambleAllocation,
    window: ReceiveWindow,
    N_o: float,
    mu: float,
    rng: np.random.Generator,
    n_frames: int,
    group: int | None = 0,
    chunk: int = 2000,
) -> tuple[int, int]:
    """Count (exceedances, trials) of z >= mu on noise-only frames, for one
    group per frame or every group when ``group`` is None."""
    hits = trials = 0
    done = 0
    while done < n_frames:
        b = min(chunk, n_frames - done)
        z, _ = group_peaks(noise_dd_frames(rng, grid, window, N_o, b), alloc)
        if group is not None:
            z = z[:, group]
        hits += int(np.count_nonzero(z >= mu))
        trials += z.size
        done += b
    return hits, trials
