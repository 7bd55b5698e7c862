"""Received TF signal in closed form, receive windowing, AWGN and SFFT.

The received TF sample of one path is a sum over transmitted subcarriers m'
of two interval integrals of exp(j2*pi*alpha*t), alpha = nu + (m' - m)*delta_f:
one over the part of symbol n carrying symbol n, one over the first tau
seconds carrying symbol n-1. Both are evaluated in closed form. Because
delta_f*T = 1 the integrals over symbol n equal exp(j2*pi*nu*n*T) times the
symbol-0 integrals, so each path contributes a rank-one N x M term
a[n] * c[m]; only 2M - 1 integral values per path are needed.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np
from scipy import integrate

from .channel import ChannelRealization, FrameScenario, PathTap
from .errors import InvalidParameter, ModelDomainError, NumericError
from .grid import DdIndex, OtfsGrid, PreambleAllocation
from .waveform import sfft as sfft_array

WINDOW_KINDS = ("rectangular", "hamming", "blackman_harris_3", "blackman_harris_4")

_COSINE_COEFFS = {
    "rectangular": (1.0,),
    "hamming": (0.54, -0.46),
    "blackman_harris_3": (0.42323, -0.49755, 0.07922),
    "blackman_harris_4": (0.35875, -0.48829, 0.14128, -0.01168),
}

# main-lobe half width in Doppler bins
MAINLOBE_HALF_WIDTH = {
    "rectangular": 1,
    "hamming": 2,
    "blackman_harris_3": 3,
    "blackman_harris_4": 4,
}


@dataclass(frozen=True)
class ReceiveWindow:
    kind: str
    samples: np.ndarray
    alpha: float

    @property
    def N(self) -> int:
        return len(self.samples)


def make_window(kind: str, N: int) -> ReceiveWindow:
    """Periodic cosine-sum window scaled so that sum(W**2) = N."""
    if kind not in _COSINE_COEFFS:
        raise InvalidParameter(f"unknown window kind {kind!r}; choose from {WINDOW_KINDS}")
    if N < 1:
        raise InvalidParameter("N must be >= 1")
    n = np.arange(N)
    raw = sum(a * np.cos(2 * np.pi * i * n / N) for i, a in enumerate(_COSINE_COEFFS[kind]))
    raw = np.broadcast_to(np.asarray(raw, dtype=float), (N,))
    alpha = float(np.sqrt(N / np.sum(raw**2)))
    return ReceiveWindow(kind, raw * alpha, alpha)


@dataclass
class TfFrame:
    """Y[n, m]; ``data`` has shape (N, M) or (F, N, M) for a batch."""

    data: np.ndarray
    grid: OtfsGrid
    window: str = "rectangular"
    N_o: float = 0.0


@dataclass
class DdFrame:
    """x_hat[k, l]; ``data`` has shape (N, M) or (F, N, M) for a batch."""

    data: np.ndarray
    grid: OtfsGrid
    window: str = "rectangular"
    N_o: float = 0.0
    meta: dict = field(default_factory=dict)


def exp_integral(alpha, a, b):
    """integral_a^b exp(j2*pi*alpha*t) dt, stable at alpha = 0."""
    alpha, a, b = np.asarray(alpha, float), np.asarray(a, float), np.asarray(b, float)
    w = b - a
    return w * np.exp(1j * np.pi * alpha * (a + b)) * np.sinc(alpha * w)


def check_model_domain(grid: OtfsGrid, delays, dopplers) -> None:
    delays = np.asarray(delays)
    dopplers = np.asarray(dopplers)
    if delays.size and (np.any(delays < 0) or np.any(delays >= grid.T)):
        raise ModelDomainError(f"path delays must lie in [0, T={grid.T:.4e})")
    if dopplers.size and np.any(2 * np.abs(dopplers) >= grid.delta_f):
        raise ModelDomainError(f"|nu| must stay below delta_f/2 = {grid.delta_f / 2:.4g} Hz")


def path_tf_factors(
    grid: OtfsGrid,
    window: np.ndarray,
    E: float,
    gains,
    delays,
    dopplers,
    k_r,
    l_r,
) -> tuple[np.ndarray, np.ndarray]:
    """Rank-one factors (a, c) of each path's noise-free Y, shapes (P, N), (P, M)."""
    M, N, T = grid.M, grid.N, grid.T
    df = grid.delta_f
    h = np.atleast_1d(np.asarray(gains, dtype=complex))
    tau = np.atleast_1d(np.asarray(delays, dtype=float))
    nu = np.atleast_1d(np.asarray(dopplers, dtype=float))
    k_r = np.broadcast_to(np.asarray(k_r), h.shape)
    l_r = np.broadcast_to(np.asarray(l_r), h.shape)

    d = np.arange(-(M - 1), M)
    alpha = nu[:, None] + d[None, :] * df
    late = exp_integral(alpha, tau[:, None], T) / T  # carries symbol n
    early = exp_integral(alpha, 0.0, tau[:, None]) / T  # carries symbol n - 1
    kernel = late + np.exp(-2j * np.pi * k_r / N)[:, None] * early

    m = np.arange(M)
    g = np.exp(-2j * np.pi * m[None, :] * (df * tau[:, None] + l_r[:, None] / M))
    idx = m[:, None] - m[None, :] + (M - 1)  # [m', m] -> m' - m
    c = np.einsum("pi,pij->pj", g, kernel[:, idx])

    n = np.arange(N)
    scale = np.sqrt(E / (M * N)) * h * np.exp(-2j * np.pi * nu * tau)
    a = (
        scale[:, None]
        * np.asarray(window)[None, :]
        * np.exp(2j * np.pi * n[None, :] * (k_r[:, None] / N + nu[:, None] * T))
    )
    return a, c


def tf_response_reference(grid: OtfsGrid, window: np.ndarray, E: float, path: PathTap, k_r: int, l_r: int):
    """Noise-free Y[n, m] of a single path with the interval integrals taken
    separately for every (n, m' - m). Slow; used to check the factored form."""
    M, N, T, df = grid.M, grid.N, grid.T, grid.delta_f
    tau, nu = path.delay, path.doppler
    Y = np.zeros((N, M), dtype=complex)
    mp = np.arange(M)
    for n in range(N):
        for m in range(M):
            alpha = nu + (mp - m) * df
            late = exp_integral(alpha, n * T + tau, (n + 1) * T) / T
            early = exp_integral(alpha, n * T, n * T + tau) / T
            terms = (
                np.exp(-2j * np.pi * mp * df * tau)
                * np.exp(-2j * np.pi * mp * l_r / M)
                * (late + np.exp(-2j * np.pi * k_r / N) * early)
            )
            Y[n, m] = (
                np.sqrt(E / (M * N))
                * window[n]
                * path.gain
                * np.exp(-2j * np.pi * nu * tau)
                * np.exp(2j * np.pi * n * k_r / N)
                * terms.sum()
            )
    return Y


def deterministic_tf_batch(
    grid: OtfsGrid,
    window: np.ndarray,
    E: float,
    frame_ids: np.ndarray,
    gains: np.ndarray,
    delays: np.ndarray,
    dopplers: np.ndarray,
    k_r: np.ndarray,
    l_r: np.ndarray,
    n_frames: int,
) -> np.ndarray:
    """Sum of path contributions per frame, shape (n_frames, N, M).

    ``frame_ids`` must be sorted; paths of a frame are contiguous.
    """
    M, N = grid.M, grid.N
    Y = np.zeros((n_frames, N, M), dtype=complex)
    if len(frame_ids) == 0:
        return Y
    a, c = path_tf_factors(grid, window, E, gains, delays, dopplers, k_r, l_r)
    counts = np.bincount(frame_ids, minlength=n_frames)
    starts = np.concatenate([[0], np.cumsum(counts)[:-1]])
    slot = np.arange(len(frame_ids)) - starts[frame_ids]
    P = int(counts.max())
    A = np.zeros((n_frames, P, N), dtype=complex)
    C = np.zeros((n_frames, P, M), dtype=complex)
    A[frame_ids, slot] = a
    C[frame_ids, slot] = c
    return np.matmul(A.transpose(0, 2, 1), C)


def tf_noise(rng: np.random.Generator, window: np.ndarray, M: int, N_o: float, size=()) -> np.ndarray:
    """W[n, m] ~ CN(0, W_rx[n]^2 N_o), shape size + (N, M)."""
    N = len(window)
    shape = tuple(np.atleast_1d(size)) if size != () else ()
    z = rng.standard_normal(shape + (N, M, 2))
    w = (z[..., 0] + 1j * z[..., 1]) * np.sqrt(N_o / 2)
    return w * np.asarray(window)[:, None]


def _scenario_paths(scenario: FrameScenario, alloc: PreambleAllocation):
    gains, delays, dopplers, k_r, l_r = [], [], [], [], []
    for ut in scenario.uts:
        ch = ut.channel
        anchor = alloc.anchors[ut.preamble]
        gains.append(ch.gains)
        delays.append(ch.delays)
        dopplers.append(ch.dopplers)
        k_r.append(np.full(ch.L, anchor.k))
        l_r.append(np.full(ch.L, anchor.l))
    cat = np.concatenate
    return cat(gains), cat(delays), cat(dopplers), cat(k_r), cat(l_r)


def receive_tf(
    scenario: FrameScenario | None,
    alloc: PreambleAllocation,
    grid: OtfsGrid,
    E: float,
    window: ReceiveWindow,
    rng: np.random.Generator | None = None,
    N_o: float = 0.0,
) -> TfFrame:
    """Windowed TF frame for all active UTs plus AWGN (skipped when N_o = 0)."""
    if window.N != grid.N:
        raise InvalidParameter("window length must equal N")
    Y = np.zeros(grid.shape, dtype=complex)
    if scenario is not None:
        for ut in scenario.uts:
            if not 0 <= ut.preamble < alloc.R:
                raise InvalidParameter(f"preamble {ut.preamble} outside [0, {alloc.R})")
        gains, delays, dopplers, k_r, l_r = _scenario_paths(scenario, alloc)
        check_model_domain(grid, delays, dopplers)
        a, c = path_tf_factors(grid, window.samples, E, gains, delays, dopplers, k_r, l_r)
        Y = a.T @ c
    if N_o > 0:
        if rng is None:
            raise InvalidParameter("an rng is required when N_o > 0")
        Y = Y + tf_noise(rng, window.samples, grid.M, N_o)
    return TfFrame(Y, grid, window.kind, N_o)


def sfft(tf: TfFrame) -> DdFrame:
    return DdFrame(sfft_array(tf.data), tf.grid, tf.window, tf.N_o)


def receive_dd(scenario, alloc, grid, E, window, rng=None, N_o=0.0) -> DdFrame:
    return sfft(receive_tf(scenario, alloc, grid, E, window, rng, N_o))


def dirichlet_ratio(x, M: int):
    """sin(pi*M*x) / sin(pi*x), i.e. M*sinc(M*x)/sinc(x), with its limits at integers."""
    x = np.asarray(x, dtype=float)
    num = np.sin(np.pi * M * x)
    den = np.sin(np.pi * x)
    near = np.abs(den) < 1e-9
    safe = np.where(near, 1.0, den)
    lim = M * np.cos(np.pi * M * x) / np.cos(np.pi * x)
    return np.where(near, lim, num / safe)


def doppler_factor(path: PathTap, k_r: int, grid: OtfsGrid, window: np.ndarray) -> np.ndarray:
    """U[k] = 1/N sum_n W[n] exp(j2pi n((k_r - k)/N + nu/delta_f)), all k."""
    N = grid.N
    n = np.arange(N)
    k = np.arange(N)
    ph = np.exp(2j * np.pi * np.outer((k_r - k) / N, n)) * np.exp(2j * np.pi * n * path.doppler * grid.T)
    return (ph * np.asarray(window)[None, :]).sum(axis=1) / N


def _cquad(f, a, b, points, tol):
    if b <= a:
        return 0j
    pts = [p for p in points if a < p < b] or None
    out = []
    for part in (lambda t: f(t).real, lambda t: f(t).imag):
        res = integrate.quad(part, a, b, points=pts, epsabs=tol, epsrel=tol, limit=400, full_output=1)
        if len(res) > 3:
            raise NumericError(f"quadrature did not converge: {res[3]}")
        out.append(res[0])
    return complex(out[0], out[1])


def delay_factor(path: PathTap, k_r: int, l_r: int, l: int, grid: OtfsGrid, tol: float = 1e-11) -> complex:
    """V[l] by adaptive quadrature of the two Dirichlet-kernel integrals,
    split at t = tau/T where the carried symbol changes."""
    M, N = grid.M, grid.N
    s = path.delay / grid.T
    v = path.doppler * grid.T
    shift = l_r / M + s

    def f(t):
        return (
            np.exp(2j * np.pi * v * t)
            * dirichlet_ratio(t - shift, M)
            * dirichlet_ratio(t - l / M, M)
            / M
        )

    peaks = [shift, shift - 1, l / M]
    late = _cquad(f, s, 1.0, peaks, tol)
    early = _cquad(f, 0.0, s, peaks, tol)
    pre = np.exp(1j * np.pi * (M - 1) * ((l - l_r) / M - s))
    return complex(pre * (late + np.exp(-2j * np.pi * k_r / N) * early))


def analytic_dd_response(
    path: PathTap,
    anchor: DdIndex,
    grid: OtfsGrid,
    window: ReceiveWindow,
    E: float = 1.0,
) -> Callable[[int, int], complex]:
    """Noise-free x_hat[k, l] of one path as sqrt(EMN) h exp(-j2pi nu tau) U[k] V[l].

    U is summed directly; V is integrated numerically (cached per l). Test
    oracle only; the detection pipeline never calls this.
    """
    U = doppler_factor(path, anchor.k, grid, window.samples)
    pre = np.sqrt(E * grid.M * grid.N) * path.gain * np.exp(-2j * np.pi * path.doppler * path.delay)
    cache: dict[int, complex] = {}

    def response(k: int, l: int) -> complex:
        if l not in cache:
            cache[l] = delay_factor(path, anchor.k, anchor.l, l, grid)
        return complex(pre * U[k] * cache[l])

    return response


def doppler_leakage_profile(
    grid: OtfsGrid,
    window: ReceiveWindow,
    nu: float,
    anchor: DdIndex,
    tau: float,
    l_row: int | None = None,
) -> tuple[np.ndarray, int]:
    """Normalized |x_hat[k, l_row]|^2 in dB over k for a noise-free unit-gain
    single path. Returns (profile_db, l_row); l_row defaults to the peak row."""
    ch = ChannelRealization(np.array([1.0 + 0j]), np.array([tau]), np.array([nu]))
    check_model_domain(grid, ch.delays, ch.dopplers)
    a, c = path_tf_factors(grid, window.samples, 1.0, ch.gains, ch.delays, ch.dopplers, anchor.k, anchor.l)
    x = sfft_array(a.T @ c)
    energy = np.abs(x) ** 2
    if l_row is None:
        l_row = int(np.unravel_index(np.argmax(energy), energy.shape)[1])
    row = energy[:, l_row]
    with np.errstate(divide="ignore"):
        return 10 * np.log10(row / row.max()), l_row


def sidelobe_level_db(profile_db: np.ndarray, center: float, kind: str) -> float:
    """Highest level outside the main lobe |k - center| <= half width."""
    k = np.arange(len(profile_db))
    outside = np.abs(k - center) > MAINLOBE_HALF_WIDTH[kind]
    return float(np.max(profile_db[outside]))


def dump_dd_frame(frame: DdFrame, path, binary: bool = False) -> None:
    """Row-major N x M export. Text: one row per line as 're,im' pairs;
    binary: little-endian complex128 preceded by int32 (N, M)."""
    data = np.asarray(frame.data)
    if data.ndim != 2:
        raise InvalidParameter("dump expects a single (N, M) frame")
    p = Path(path)
    if binary:
        header = np.array(data.shape, dtype="<i4").tobytes()
        p.write_bytes(header + data.astype("<c16").tobytes())
        return
    lines = [f"# N={data.shape[0]} M={data.shape[1]} window={frame.window} N_o={frame.N_o}"]
    for row in data:
        lines.append(" ".join(f"{z.real:.17g},{z.imag:.17g}" for z in row))
    p.write_text("\n".join(lines) + "\n")


def load_dd_frame(path, binary: bool = False) -> np.ndarray:
    p = Path(path)
    if binary:
        raw = p.read_bytes()
        N, M = np.frombuffer(raw[:8], dtype="<i4")
        return np.frombuffer(raw[8:], dtype="<c16").reshape(N, M).copy()
    rows = []
    for line in p.read_text().splitlines():
        if line.startswith("#") or not line.strip():
            continue
        rows.append([complex(*map(float, tok.split(","))) for tok in line.split()])
    return np.array(rows, dtype=complex)
