"""Collision lower bound on the timing error probability and bound sweeps."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Iterable, Sequence

from scipy import stats

from .channel import conditional_poisson_pmf
from .design import (
    SPEED_OF_LIGHT,
    SystemBudget,
    derive_grid,
    doppler_from_speed,
    load_model,
    policy_width,
)
from .errors import InvalidParameter

TAIL_RTOL = 1e-12


@dataclass(frozen=True)
class CollisionBound:
    R: int
    mu_Q: float
    truncation_K: int
    value: float


def collision_term_exact(k: int, R: int) -> float:
    """1 - (R^k - (R-1)^k) / (k R^(k-1)): chance the given UT loses a
    collision among k active UTs over R preambles."""
    if k < 2 or R < 1:
        raise InvalidParameter("need k >= 2 and R >= 1")
    if R == 1:
        return 1.0 - 1.0 / k
    # 1 - ((R-1)/R)^k without cancellation for large R
    miss_all = -math.expm1(k * math.log1p(-1.0 / R))
    return 1.0 - R * miss_all / k


def collision_sum_term(k: int, R: int) -> float:
    """B_k(R) = (R^k - (R-1)^k) / R^(k-1)."""
    return R * -math.expm1(k * math.log1p(-1.0 / R)) if R > 1 else 1.0


def collision_lower_bound(R: int, mu_Q: float) -> CollisionBound:
    """Sum over k >= 2 of Pr(Q=k | Q>=1) times the collision-loss term.

    The series stops once the conditional Poisson tail beyond K falls below
    1e-12 of the accumulated value, so further terms cannot move it by more.
    """
    if R < 1:
        raise InvalidParameter("R must be >= 1")
    if not mu_Q > 0:
        raise InvalidParameter("mu_Q must be positive")
    norm = -math.expm1(-mu_Q)
    value = 0.0
    k = 1
    while True:
        k += 1
        value += conditional_poisson_pmf(k, mu_Q) * collision_term_exact(k, R)
        tail = stats.poisson.sf(k, mu_Q) / norm
        if tail <= TAIL_RTOL * value or tail == 0.0:
            return CollisionBound(R, mu_Q, k, value)


SWEEP_COLUMNS = ("r_c_m", "speed_kmh", "lambda", "mu_q", "M", "N", "N1", "R", "bound")


def bound_sweep(
    B_c: float,
    T_c: float,
    radii: Iterable[float],
    speeds_kmh: Sequence[float],
    lambdas: Sequence[float],
    T_a: float = 1e-2,
    f_c: float = 4e9,
    r_a: float = 100.0,
) -> list[dict]:
    """Collision bound versus cell radius, mobile speed and call density.

    Per radius: G = 2 r_c / c, grid from (B_c, T_c, G), window and N1 from
    the radius policy at nu_max = v f_c / c.
    """
    rows = []
    for r_c in radii:
        G = 2 * r_c / SPEED_OF_LIGHT
        grid = derive_grid(SystemBudget(B_c, T_c, G))
        for v in speeds_kmh:
            nu_max = doppler_from_speed(v, f_c)
            _, N1 = policy_width(grid, nu_max, r_c)
            R = grid.N // N1
            for lam in lambdas:
                mu_q = load_model(lam, T_a, r_c, r_a).mu_Q
                rows.append(
                    {
                        "r_c_m": r_c,
                        "speed_kmh": v,
                        "lambda": lam,
                        "mu_q": mu_q,
                        "M": grid.M,
                        "N": grid.N,
                        "N1": N1,
                        "R": R,
                        "bound": collision_lower_bound(R, mu_q).value,
                    }
                )
    return rows


def write_rows(rows: list[dict], fh, columns: Sequence[str]) -> None:
    w = csv.DictWriter(fh, fieldnames=list(columns), lineterminator="\n", extrasaction="ignore")
    w.writeheader()
    for r in rows:
        w.writerow({c: _fmt(r.get(c, "")) for c in columns})


def _fmt(v):
    if isinstance(v, float):
        return f"{v:.10g}"
    return v
