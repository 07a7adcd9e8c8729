"""Interpolation ladder, the log-Sobolev constant built from inf_M J, and the classical oracle.

All field arguments must be L2-normalised (|u|_2^2 = 1 within NORM_TOL).
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .nonlinearity import _xlogx2, critical_exponent
from .radial import RadialField, integrate, l2_norm_sq, polyharmonic_seminorm_sq

NORM_TOL = 1e-8


class NotNormalizedError(ValueError):
    pass


def _check_normalized(u: RadialField) -> None:
    mass = l2_norm_sq(u)
    if abs(mass - 1.0) > NORM_TOL:
        raise NotNormalizedError(f"field must have unit L2 norm, got |u|^2 = {mass:.12g}")


def normalize(u: RadialField) -> RadialField:
    mass = l2_norm_sq(u)
    if not mass > 0:
        raise ValueError("cannot normalise the zero field")
    return u * (1.0 / math.sqrt(mass))


def entropy(u: RadialField) -> float:
    """int u^2 log|u| dx, with the integrand taken as 0 at u = 0."""
    return integrate(u, _xlogx2)


@dataclass(frozen=True)
class InterpolationReport:
    lhs: float
    rhs: float
    holds: bool


def interpolation_gap(u: RadialField, m: int) -> InterpolationReport:
    """(|u|_m^2)^(1/m) against (|u|_{m+1}^2)^(1/(m+1)); strict inequality expected."""
    _check_normalized(u)
    u.grid.check_order(m + 1)
    lhs = polyharmonic_seminorm_sq(u, m) ** (1.0 / m)
    rhs = polyharmonic_seminorm_sq(u, m + 1) ** (1.0 / (m + 1))
    return InterpolationReport(lhs, rhs, bool(lhs < rhs))


def seminorm_ladder(u: RadialField, top: int) -> list[float]:
    """a_k = (|u|_k^2)^(1/k) for k = 1..top."""
    _check_normalized(u)
    u.grid.check_order(top)
    return [polyharmonic_seminorm_sq(u, k) ** (1.0 / k) for k in range(1, top + 1)]


def c_nlog(inf_J: float, N: int, m: int) -> float:
    """C_{N,log} = 2* (1/2 - 1/2*)^(-2m/(N-2m)) (inf_M J)^(2m/(N-2m))."""
    if not inf_J > 0:
        raise ValueError(f"inf_J must be positive, got {inf_J}")
    ts = critical_exponent(N, m).two_star
    e = 2.0 * m / (N - 2 * m)
    return ts * (0.5 - 1.0 / ts) ** (-e) * inf_J**e


def classical_constant(N: int, m: int) -> float:
    """The C at which the generic bound value equals (2/(pi e N))^m.

    For m = 1 this turns the polyharmonic inequality into the classical one.
    """
    critical_exponent(N, m)
    target = (2.0 / (math.pi * math.e * N)) ** m
    return 4.0 * m * math.e / (N - 2 * m) * target ** (-N / (N - 2 * m))


def _bound_lhs(C: float, N: int, m: int) -> float:
    return (4.0 * m * math.e / (C * (N - 2 * m))) ** ((N - 2 * m) / N)


@dataclass(frozen=True)
class BoundCheck:
    lhs: float
    rhs: float
    holds: bool
    note: str = "necessary, not sufficient: an overestimate of inf J also passes"


def bound_constant_check(C: float, N: int, m: int) -> BoundCheck:
    if not C > 0:
        raise ValueError(f"C must be positive, got {C}")
    critical_exponent(N, m)
    lhs = _bound_lhs(C, N, m)
    rhs = (2.0 / (math.pi * math.e * N)) ** m
    return BoundCheck(lhs, rhs, bool(lhs < rhs))


@dataclass(frozen=True)
class LogSobolevReport:
    C_estimate: float
    lhs: float
    rhs: float
    gap: float
    bound_lhs: float
    bound_rhs: float
    bound_holds: bool

    def to_dict(self) -> dict:
        return asdict(self)


def log_sobolev_sides(u: RadialField, C: float, N: int, m: int) -> LogSobolevReport:
    """(N/4m) log(B |u|_m^2) against int u^2 log|u|, B = (4me/(C(N-2m)))^((N-2m)/N)."""
    if not C > 0:
        raise ValueError(f"C must be positive, got {C}")
    _check_normalized(u)
    if u.dim != N:
        raise ValueError(f"field lives in dimension {u.dim}, not {N}")
    B = _bound_lhs(C, N, m)
    K = polyharmonic_seminorm_sq(u, m)
    lhs = N / (4.0 * m) * math.log(B * K)
    rhs = entropy(u)
    bc = bound_constant_check(C, N, m)
    return LogSobolevReport(C, lhs, rhs, lhs - rhs, bc.lhs, bc.rhs, bc.holds)


def shift_objective(alpha, ent: float, N: int, m: int):
    """alpha -> exp((2 - 2*) alpha) (alpha + int u^2 log|u|)."""
    ts = critical_exponent(N, m).two_star
    alpha = np.asarray(alpha, dtype=float)
    return np.exp((2.0 - ts) * alpha) * (alpha + ent)


def optimal_alpha(u: RadialField, N: int, m: int) -> float:
    """Maximiser (N-2m)/(4m) - int u^2 log|u| of shift_objective."""
    _check_normalized(u)
    critical_exponent(N, m)
    return (N - 2 * m) / (4.0 * m) - entropy(u)


def classical_ls_gap(u: RadialField, N: int) -> float:
    """(N/4) log((2/(pi e N)) |grad u|^2) - int u^2 log|u|; nonnegative, 0 at Gaussians."""
    _check_normalized(u)
    K1 = polyharmonic_seminorm_sq(u, 1)
    return N / 4.0 * math.log(2.0 / (math.pi * math.e * N) * K1) - entropy(u)


@dataclass
class ChainReport:
    ladder: list
    ladder_slacks: list
    classical_slack: float
    combined_slack: float
    bound_slack: float
    holds: bool
    links: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return asdict(self)


def chain_lemma_bound(u: RadialField, N: int, m: int, C: float, tol: float = 1e-6) -> ChainReport:
    """Each link of: a_1 <= ... <= a_m, classical log-Sobolev, and the bound on C.

    Combining the ladder with the classical inequality gives
    int u^2 log|u| <= (N/4m) log((2/(pi e N))^m |u|_m^2), which the
    ``combined`` slack measures directly.
    """
    _check_normalized(u)
    if u.dim != N:
        raise ValueError(f"field lives in dimension {u.dim}, not {N}")
    ladder = seminorm_ladder(u, m)
    slacks = [b - a for a, b in zip(ladder, ladder[1:])]
    classical = classical_ls_gap(u, N)
    Km = polyharmonic_seminorm_sq(u, m)
    combined = N / (4.0 * m) * math.log((2.0 / (math.pi * math.e * N)) ** m * Km) - entropy(u)
    bc = bound_constant_check(C, N, m)
    bound = bc.rhs - bc.lhs
    links = {
        "ladder": all(s >= -tol for s in slacks),
        "classical": classical >= -tol,
        "combined": combined >= -tol,
        "bound": bc.holds,
    }
    return ChainReport(ladder, slacks, classical, combined, bound, all(links.values()), links)
