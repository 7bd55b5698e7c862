"""Delay-Doppler grid, DDRE indexing and RA preamble allocation."""

from __future__ import annotations

from dataclasses import dataclass, field

from .errors import InvalidParameter


@dataclass(frozen=True)
class OtfsGrid:
    """M delay bins of T/M seconds by N Doppler bins of delta_f/N Hz."""

    M: int
    N: int
    T: float

    def __post_init__(self):
        if int(self.M) != self.M or self.M < 1:
            raise InvalidParameter(f"M must be a positive integer, got {self.M}")
        if int(self.N) != self.N or self.N < 1:
            raise InvalidParameter(f"N must be a positive integer, got {self.N}")
        if not self.T > 0:
            raise InvalidParameter(f"T must be positive, got {self.T}")

    @property
    def delta_f(self) -> float:
        return 1.0 / self.T

    @property
    def bandwidth(self) -> float:
        return self.M / self.T

    @property
    def frame_duration(self) -> float:
        return self.N * self.T

    @property
    def delay_resolution(self) -> float:
        return self.T / self.M

    @property
    def doppler_resolution(self) -> float:
        return self.delta_f / self.N

    @property
    def shape(self) -> tuple[int, int]:
        """Array shape used for DD and TF frames: (N, M), Doppler/time rows."""
        return (self.N, self.M)


@dataclass(frozen=True)
class DdIndex:
    k: int
    l: int

    def check(self, grid: OtfsGrid) -> None:
        if not (0 <= self.k < grid.N and 0 <= self.l < grid.M):
            raise InvalidParameter(f"{self} outside {grid.N}x{grid.M} grid")


@dataclass(frozen=True)
class PreambleAllocation:
    """R groups of N1 Doppler rows each, spanning the whole delay axis.

    Group q covers rows q*N1 <= k < (q+1)*N1. Rows k >= R*N1 (when N1 does
    not divide N) belong to no group.
    """

    grid: OtfsGrid
    N1: int
    l_anchor: int = 0
    anchors: tuple[DdIndex, ...] = field(init=False)
    groups: tuple[range, ...] = field(init=False)

    def __post_init__(self):
        N1 = self.N1
        if int(N1) != N1 or not 1 <= N1 <= self.grid.N:
            raise InvalidParameter(f"N1 must satisfy 1 <= N1 <= N={self.grid.N}, got {N1}")
        if not 0 <= self.l_anchor < self.grid.M:
            raise InvalidParameter(f"l_anchor must lie in [0, {self.grid.M}), got {self.l_anchor}")
        R = self.grid.N // N1
        k0 = N1 // 2
        object.__setattr__(
            self, "anchors", tuple(DdIndex(k0 + q * N1, self.l_anchor) for q in range(R))
        )
        object.__setattr__(
            self, "groups", tuple(range(q * N1, (q + 1) * N1) for q in range(R))
        )

    @property
    def R(self) -> int:
        return len(self.groups)

    def group_of(self, idx: DdIndex) -> int | None:
        return group_of(self, idx)


def build_allocation(grid: OtfsGrid, N1: int, l_anchor: int = 0) -> PreambleAllocation:
    return PreambleAllocation(grid, int(N1), int(l_anchor))


def group_of(alloc: PreambleAllocation, idx: DdIndex) -> int | None:
    """Preamble id whose group contains ``idx``, or None for leftover rows."""
    q = idx.k // alloc.N1
    if q < alloc.R:
        return q
    return None
