"""Action, Pohozaev deficit, manifold projection and the Sobolev gradient.

Functions taking ``spec`` accept either a NonlinearitySpec (unregularised G) or a
RegularizedSpec (G_eps); both expose ``G`` and ``g`` maps, so the same code
serves M and M_eps.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass
from typing import Union

import numpy as np

from .nonlinearity import NonlinearitySpec, RegularizedSpec, critical_exponent
from .radial import (
    RadialField,
    apply_polyharmonic,
    dilate,
    integrate,
    l2_norm_sq,
    polyharmonic_seminorm_sq,
    solve_polyharmonic,
    solve_polyharmonic_conforming,
)

AnySpec = Union[NonlinearitySpec, RegularizedSpec]

MEMBERSHIP_TOL = 1e-10


class NotInPError(ValueError):
    """The field has nonpositive potential, so no dilation puts it on the manifold."""


def two_star(u: RadialField, m: int) -> float:
    return critical_exponent(u.dim, m).two_star


def kinetic(u: RadialField, m: int) -> float:
    return polyharmonic_seminorm_sq(u, m)


def potential(u: RadialField, spec: AnySpec) -> float:
    return integrate(u, spec.G)


def action(u: RadialField, spec: NonlinearitySpec, m: int) -> float:
    return 0.5 * kinetic(u, m) - potential(u, spec)


def action_eps(u: RadialField, reg: RegularizedSpec, m: int) -> float:
    # J_eps = K/2 + int G_minus^eps - int G_plus
    return 0.5 * kinetic(u, m) - potential(u, reg)


def pohozaev_deficit(u: RadialField, spec: AnySpec, m: int) -> float:
    return kinetic(u, m) - two_star(u, m) * potential(u, spec)


def scaling_radius(u: RadialField, spec: AnySpec, m: int) -> float:
    """r with dilate(u, r) on the manifold: r^(2m) = 2* int G(u) / K."""
    K = kinetic(u, m)
    P = potential(u, spec)
    if not P > 0:
        raise NotInPError(f"not in P_eps: potential integral is {P:.6g} <= 0")
    if not K > 0:
        raise NotInPError("zero kinetic term, field is trivial")
    return float((two_star(u, m) * P / K) ** (1.0 / (2 * m)))


def project_to_manifold(u: RadialField, spec: AnySpec, m: int) -> RadialField:
    return dilate(u, scaling_radius(u, spec, m))


@dataclass(frozen=True)
class ManifoldReport:
    member: bool
    relative_deficit: float
    scaling_radius: float

    def to_dict(self) -> dict:
        return asdict(self)


def manifold_report(u: RadialField, spec: AnySpec, m: int,
                    tol: float = MEMBERSHIP_TOL) -> ManifoldReport:
    K = kinetic(u, m)
    d = pohozaev_deficit(u, spec, m)
    rel = d / K if K > 0 else float("inf")
    try:
        r = scaling_radius(u, spec, m)
    except NotInPError:
        r = float("nan")
    return ManifoldReport(bool(K > 0 and abs(rel) <= tol), float(rel), r)


def quotient(u: RadialField, spec: AnySpec, m: int) -> float:
    """Dilation-invariant Q(u) = (1/2 - 1/2*) K^(N/2m) (2* int G)^(-(N-2m)/2m).

    Equals the action of the projected field.
    """
    N = u.dim
    ts = two_star(u, m)
    K = kinetic(u, m)
    P = potential(u, spec)
    if not P > 0:
        raise NotInPError(f"not in P_eps: potential integral is {P:.6g} <= 0")
    if not K > 0:
        raise NotInPError("zero kinetic term, field is trivial")
    # in log form to avoid overflow of K^(N/2m) for large amplitudes
    logq = (N / (2 * m)) * np.log(K) - ((N - 2 * m) / (2 * m)) * np.log(ts * P)
    return float((0.5 - 1.0 / ts) * np.exp(logq))


@dataclass(frozen=True)
class Residual:
    field: RadialField
    rel_norm: float


def pde_residual(u: RadialField, spec: AnySpec, m: int) -> Residual:
    gu = np.asarray(spec.g(u.values), dtype=float)
    res = apply_polyharmonic(u, m).values - gu
    num = float(np.sum(u.grid.weights * res**2))
    den = float(np.sum(u.grid.weights * gu**2))
    if den == 0.0:
        rel = 0.0 if num == 0.0 else float("inf")
    else:
        rel = float(np.sqrt(num / den))
    return Residual(u.with_values(res), rel)


def sobolev_gradient(u: RadialField, spec: AnySpec, m: int) -> RadialField:
    """Gradient of J_eps in the D^{m,2} inner product: u - (-Delta)^-m g_eps(u)."""
    forcing = u.with_values(spec.g(u.values))
    return u - solve_polyharmonic(forcing, m)


def conforming_gradient(u: RadialField, spec: AnySpec, m: int) -> RadialField:
    """Sobolev gradient within fields vanishing on the outer m//2 nodes.

    u must itself vanish there.  Unlike sobolev_gradient this imposes no
    Navier condition at R, so descent cannot exploit the truncation boundary.
    """
    forcing = u.with_values(spec.g(u.values))
    return u - solve_polyharmonic_conforming(forcing, m)


@dataclass(frozen=True)
class EnergyReport:
    kinetic: float
    potential: float
    potential_eps: float
    action: float
    action_eps: float
    deficit: float
    deficit_eps: float
    mass: float

    def to_dict(self) -> dict:
        return asdict(self)


def energy_report(u: RadialField, reg: RegularizedSpec, m: int) -> EnergyReport:
    ts = two_star(u, m)
    K = kinetic(u, m)
    P = potential(u, reg.base)
    Pe = potential(u, reg)
    return EnergyReport(
        kinetic=K,
        potential=P,
        potential_eps=Pe,
        action=0.5 * K - P,
        action_eps=0.5 * K - Pe,
        deficit=K - ts * P,
        deficit_eps=K - ts * Pe,
        mass=l2_norm_sq(u),
    )
