"""RA preamble synthesis in the delay-Doppler and time domains."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import InvalidParameter, ModelDomainError
from .grid import DdIndex, OtfsGrid


def isfft(x: np.ndarray) -> np.ndarray:
    """DD symbols x[k, l] (shape (..., N, M)) to TF symbols X[n, m].

    X[n,m] = 1/(MN) sum_k sum_l x[k,l] exp(-j2pi(ml/M - nk/N)).
    """
    M = x.shape[-1]
    return np.fft.fft(np.fft.ifft(x, axis=-2), axis=-1) / M


def sfft(Y: np.ndarray) -> np.ndarray:
    """TF samples Y[n, m] to DD samples, x[k,l] = sum_n sum_m Y[n,m] exp(j2pi(ml/M - nk/N))."""
    M = Y.shape[-1]
    return np.fft.ifft(np.fft.fft(Y, axis=-2), axis=-1) * M


@dataclass(frozen=True)
class PreambleSymbolGrid:
    grid: OtfsGrid
    anchor: DdIndex
    E: float

    def __post_init__(self):
        self.anchor.check(self.grid)
        if self.E < 0:
            raise InvalidParameter("E must be non-negative")

    @property
    def amplitude(self) -> float:
        return float(np.sqrt(self.grid.M * self.grid.N * self.E))

    def symbols(self) -> np.ndarray:
        x = np.zeros(self.grid.shape, dtype=complex)
        x[self.anchor.k, self.anchor.l] = self.amplitude
        return x

    def tf_symbols(self) -> np.ndarray:
        return isfft(self.symbols())


@dataclass(frozen=True)
class TimeWaveformSpec:
    """Analytic preamble s_q(t) on [-G, NT + G) with guard blocks of G seconds."""

    grid: OtfsGrid
    anchor: DdIndex
    E: float
    G: float = 0.0

    def __post_init__(self):
        self.anchor.check(self.grid)
        if self.E < 0 or self.G < 0:
            raise InvalidParameter("E and G must be non-negative")

    @property
    def support(self) -> tuple[float, float]:
        return (-self.G, self.grid.frame_duration + self.G)

    @property
    def average_power(self) -> float:
        return self.E / self.grid.frame_duration


def eval_waveform(spec: TimeWaveformSpec, t) -> np.ndarray | complex:
    """Evaluate s_q(t); ``t`` may be a scalar or array of seconds."""
    g = spec.grid
    t_arr = np.asarray(t, dtype=float)
    lo, hi = spec.support
    if np.any(t_arr < lo) or np.any(t_arr >= hi):
        raise ModelDomainError(f"t outside [{lo}, {hi})")
    n = np.floor(t_arr / g.T)
    active = (t_arr >= 0) & (t_arr < g.frame_duration)
    m = np.arange(g.M)
    phase = np.multiply.outer(t_arr * g.delta_f - spec.anchor.l / g.M, m)
    tones = np.exp(2j * np.pi * phase).sum(axis=-1)
    s = np.sqrt(spec.E / (g.M * g.N * g.T)) * np.exp(2j * np.pi * n * spec.anchor.k / g.N) * tones
    s = np.where(active, s, 0.0)
    if np.ndim(t) == 0:
        return complex(s)
    return s


def preamble_energy(spec: TimeWaveformSpec, samples_per_symbol: int = 64) -> float:
    """Midpoint-rule integral of |s_q(t)|^2 over [0, NT].

    Within a symbol |s|^2 is a trigonometric polynomial of degree M-1 in
    t/T, so any rule with more than M-1 uniform points per symbol is exact.
    """
    g = spec.grid
    K = max(samples_per_symbol, 2 * g.M)
    t = (np.arange(g.N * K) + 0.5) * (g.T / K)
    s = eval_waveform(spec, t)
    return float(np.sum(np.abs(s) ** 2) * g.T / K)


def papr(spec: TimeWaveformSpec, points_per_symbol: int = 256) -> float:
    """Peak |s(t)|^2 over [0, NT) on a dense grid, relative to E/(NT).

    The known peak location l_q*T/M in every symbol is always sampled.
    """
    g = spec.grid
    if spec.E == 0:
        raise InvalidParameter("PAPR undefined for E = 0")
    K = points_per_symbol
    t = np.arange(g.N * K) * (g.T / K)
    peaks = (np.arange(g.N) + spec.anchor.l / g.M) * g.T
    s = eval_waveform(spec, np.concatenate([t, peaks]))
    return float(np.max(np.abs(s) ** 2) / spec.average_power)


def export_samples(spec: TimeWaveformSpec, rate: float, path) -> int:
    """Write s_q(t) sampled at ``rate`` over the full support (guards included)
    as little-endian interleaved complex64. Returns the sample count."""
    if not rate > 0:
        raise InvalidParameter("rate must be positive")
    lo, hi = spec.support
    n = int(np.floor((hi - lo) * rate - 1e-9)) + 1
    t = lo + np.arange(n) / rate
    t = t[t < hi]
    s = eval_waveform(spec, t).astype("<c8")
    Path(path).write_bytes(s.tobytes())
    return len(s)


def read_samples(path) -> np.ndarray:
    return np.frombuffer(Path(path).read_bytes(), dtype="<c8")
