"""Epsilon-continuation minimisation of the scale-invariant quotient.

For each eps in a geometric schedule the field is kept on M_eps by exact
dilation and moved along the Sobolev gradient of J_eps.  On M_eps the
differential of the quotient Q_eps coincides with that of J_eps, so this is
gradient descent for Q_eps with a halving line search.  The warm start carries
over from one eps to the next, and the last field is projected onto the
unregularised manifold M.
"""

from __future__ import annotations

import logging
import math
from dataclasses import asdict, dataclass, field, fields
from typing import Any, Optional

import numpy as np
from scipy.interpolate import CubicSpline
from scipy.sparse import diags
from scipy.sparse.linalg import spsolve

from .nonlinearity import (
    NonlinearitySpec,
    RegularizedSpec,
    critical_exponent,
    from_label,
    regularize,
)
from .radial import (
    RadialField,
    RadialGrid,
    conforming_padding,
    energy_matrix,
    l2_norm_sq,
    make_grid,
    polyharmonic_inner,
)
from .variational import (
    EnergyReport,
    NotInPError,
    energy_report,
    kinetic,
    pde_residual,
    pohozaev_deficit,
    potential,
    project_to_manifold,
    quotient,
    conforming_gradient,
)

log = logging.getLogger(__name__)


class InitError(RuntimeError):
    """The default initial guess never reached P_eps."""


@dataclass(frozen=True)
class SolverConfig:
    N: int
    m: int
    R: float = 20.0
    n: int = 1024
    nonlinearity: str = "log"
    eps_start: float = 0.5
    eps_factor: float = 0.5
    eps_min: float = 1e-4
    step: float = 1.0
    step_min: float = 1e-8
    tol_q: float = 1e-8
    tol_grad: float = 1e-6
    max_iters: int = 5000
    seed: int = 0
    # "weighted" adds the int mu v^2 term to the descent metric, "sobolev" is the plain D^{m,2} one
    preconditioner: str = "weighted"
    # m = 1 is only meaningful as a comparison against the classical case
    oracle_mode: bool = False

    def __post_init__(self):
        for name in ("N", "m", "n", "max_iters", "seed"):
            v = getattr(self, name)
            if isinstance(v, bool) or int(v) != v:
                raise ValueError(f"{name} must be an integer, got {v!r}")
        if self.N <= 2 * self.m:
            raise ValueError(f"N must exceed 2m, got N={self.N}, m={self.m}")
        if self.m < 2 and not self.oracle_mode:
            raise ValueError("m must be at least 2 (m = 1 requires oracle_mode)")
        if self.m < 1:
            raise ValueError(f"m must be positive, got {self.m}")
        if not 0.0 < self.eps_min <= self.eps_start < 1.0:
            raise ValueError(
                f"need 0 < eps_min <= eps_start < 1, got {self.eps_min}, {self.eps_start}")
        if not 0.0 < self.eps_factor < 1.0:
            raise ValueError(f"eps_factor must lie in (0, 1), got {self.eps_factor}")
        if not self.step > 0 or not 0 < self.step_min <= self.step:
            raise ValueError("need 0 < step_min <= step")
        if not self.tol_q > 0 or not self.tol_grad > 0:
            raise ValueError("tolerances must be positive")
        if self.max_iters < 1:
            raise ValueError("max_iters must be positive")
        if self.preconditioner not in ("weighted", "sobolev"):
            raise ValueError(f"preconditioner must be 'weighted' or 'sobolev', got {self.preconditioner!r}")
        if not self.R > 0 or self.n < 8:
            raise ValueError(f"bad grid R={self.R}, n={self.n}")

    @classmethod
    def from_dict(cls, d: dict) -> "SolverConfig":
        d = dict(d)
        d.pop("schema_version", None)
        grid = d.pop("grid", None)
        if grid is not None:
            if not isinstance(grid, dict):
                raise ValueError("grid: expected an object with keys R and n")
            unknown = set(grid) - {"R", "n"}
            if unknown:
                raise ValueError(f"grid: unknown key {sorted(unknown)[0]!r}")
            d.update(grid)
        known = {f.name for f in fields(cls)}
        for k in d:
            if k not in known:
                raise ValueError(f"{k}: unknown config key")
        for k in ("N", "m"):
            if k not in d:
                raise ValueError(f"{k}: required config key missing")
        return cls(**d)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["grid"] = {"R": d.pop("R"), "n": d.pop("n")}
        return d

    def eps_schedule(self) -> list[float]:
        out = []
        eps = self.eps_start
        while eps > self.eps_min * (1 + 1e-12):
            out.append(eps)
            eps *= self.eps_factor
        out.append(self.eps_min)
        return out


@dataclass
class GroundStateResult:
    field: RadialField
    energy: EnergyReport
    c_eps_history: list
    residual: float
    inf_J_estimate: float
    converged: bool
    iterations: int
    gradient_norm: float = math.nan
    relative_deficit: float = math.nan
    message: str = ""
    label: str = ""
    m: int = 0

    def summary(self) -> dict[str, Any]:
        return {
            "converged": self.converged,
            "iterations": self.iterations,
            "inf_J_estimate": self.inf_J_estimate,
            "inf_J_kind": "estimate (upper bound)",
            "residual": self.residual,
            "gradient_norm": self.gradient_norm,
            "relative_deficit": self.relative_deficit,
            "c_eps_history": [[e, c] for e, c in self.c_eps_history],
            "energy": self.energy.to_dict(),
            "grid": {"dim": self.field.dim, "radius": self.field.grid.radius,
                     "n": self.field.grid.n},
            "nonlinearity": self.label,
            "m": self.m,
            "message": self.message,
        }


def _bump(r: np.ndarray, a: float) -> np.ndarray:
    x = np.clip(r / a, 0.0, 1.0)
    out = np.zeros_like(r)
    inside = x < 1.0
    out[inside] = np.exp(1.0 - 1.0 / (1.0 - x[inside] ** 2))
    return out


def default_init(grid: RadialGrid, spec: NonlinearitySpec, seed: int,
                 reg: Optional[RegularizedSpec] = None, m: int = 2) -> RadialField:
    """Smooth bump of height 2*xi0 and support R/3 with a seeded 1% perturbation."""
    rng = np.random.default_rng(seed)
    a = grid.radius / 3.0
    r = grid.nodes
    coef = rng.standard_normal(4)
    modes = sum(c * np.cos((k + 1) * np.pi * r / a) for k, c in enumerate(coef))
    modes = modes / max(np.max(np.abs(modes)), 1e-300)
    shape = _bump(r, a) * (1.0 + 0.01 * modes)
    target = reg if reg is not None else spec
    amp = 2.0 * spec.xi0
    for _ in range(9):
        u = RadialField(grid, amp * shape)
        if potential(u, target) > 0:
            return u
        amp *= 2.0
    raise InitError(f"initial bump not in P_eps after 8 doublings (amplitude {amp / 2:g})")


def reembed(u: RadialField, radius: float, m: int) -> RadialField:
    """Resample u onto a grid of the given physical radius (zero outside its support)."""
    old = u.grid
    if old.radius == radius:
        return u
    r = np.append(old.nodes, old.radius)
    spline = CubicSpline(r, np.append(u.values, 0.0), bc_type=((1, 0.0), (1, 0.0)))
    grid = RadialGrid(old.dim, float(radius), old.n)
    x = grid.nodes
    v = np.where(x < old.radius, spline(np.minimum(x, old.radius)), 0.0)
    p = conforming_padding(m)
    if p:
        v[-p:] = 0.0
    return RadialField(grid, v)


def _dnorm(v: RadialField, m: int) -> float:
    return math.sqrt(max(polyharmonic_inner(v, v, m), 0.0))


REEMBED_BAND = 1.25
CALM_STEPS = 3


def _slope(f, s: np.ndarray) -> np.ndarray:
    d = 1e-6 * np.maximum(np.abs(s), 1e-8)
    return (np.asarray(f(s + d)) - np.asarray(f(s - d))) / (2.0 * d)


def _descent_direction(u: RadialField, grad: RadialField, reg: RegularizedSpec,
                       m: int, weighted: bool) -> RadialField:
    """Gradient of J_eps in the metric |v|_m^2 + int mu v^2, mu = max(-g_eps'(u), 0).

    With mu = 0 this is the conforming Sobolev gradient itself.  The weight
    removes the stiffness from the steep slope of g_eps where |u| is close to
    eps.  Only the direction depends on this solve, so its accuracy is not
    critical.
    """
    if not weighted:
        return grad
    grid = u.grid
    mu = np.maximum(-_slope(reg.g, u.values), 0.0)
    if not mu.any():
        return grad
    p = conforming_padding(m)
    act = slice(0, grid.n - p)
    A = energy_matrix(grid, m)
    # J_eps'(u) as a covector, A @ grad = A u - W g_eps(u) on the active block
    rhs = (A @ grad.values)[act]
    P = (A[act, act] + diags(grid.weights[act] * mu[act])).tocsc()
    d = np.zeros(grid.n)
    d[act] = spsolve(P, rhs)
    return u.with_values(d)


def _settle(u: RadialField, reg: RegularizedSpec, cfg: SolverConfig) -> RadialField:
    """Project onto M_eps; zero-pad back to the configured radius if the grid shrank.

    Expansion is left alone, since cutting the field at R would discard part of it.
    """
    u = project_to_manifold(u, reg, cfg.m)
    if u.grid.radius * REEMBED_BAND < cfg.R:
        u = project_to_manifold(reembed(u, cfg.R, cfg.m), reg, cfg.m)
    return u


def _into_P(u: RadialField, reg: RegularizedSpec) -> RadialField:
    """Warm start for a smaller eps: double the amplitude (at most 8 times) until int G_eps > 0."""
    for _ in range(9):
        if potential(u, reg) > 0:
            return u
        u = 2.0 * u
    raise NotInPError(f"warm start not in P_eps at eps={reg.eps:g} after 8 doublings")


def _descend(u: RadialField, reg: RegularizedSpec, cfg: SolverConfig, final: bool):
    """Inner loop at fixed eps; u must lie on M_eps.

    Returns (u, q, iters, gnorm, ok, msg).  Intermediate levels accept
    max_iters as a stopping rule; the final level must meet a tolerance.
    """
    m = cfg.m
    q = quotient(u, reg, m)
    step = cfg.step
    gnorm = math.inf
    calm = 0
    for it in range(1, cfg.max_iters + 1):
        grad = conforming_gradient(u, reg, m)
        gnorm = _dnorm(grad, m) / math.sqrt(kinetic(u, m))
        if gnorm <= cfg.tol_grad:
            return u, q, it - 1, gnorm, True, "gradient tolerance reached"
        direction = _descent_direction(u, grad, reg, m, cfg.preconditioner == "weighted")
        while True:
            trial = u - step * direction
            try:
                qt = quotient(trial, reg, m)
            except NotInPError:
                qt = math.inf
            if qt < q:
                break
            step *= 0.5
            if step < cfg.step_min:
                return (u, q, it, gnorm, False,
                        f"step underflow below {cfg.step_min:g} at eps={reg.eps:g}")
        dq = (q - qt) / abs(q)
        u = _settle(trial, reg, cfg)
        q = quotient(u, reg, m)
        step = min(2.0 * step, cfg.step)
        log.debug("it=%d q=%.12g step=%.3g grad=%.3g R=%.4g", it, q, step, gnorm, u.grid.radius)
        # a single small change can come from a halved step, so ask for a run of them
        calm = calm + 1 if dq <= cfg.tol_q else 0
        if calm >= CALM_STEPS:
            return u, q, it, gnorm, True, "relative quotient change below tolerance"
    if final:
        return u, q, cfg.max_iters, gnorm, False, f"max_iters reached at eps={reg.eps:g}"
    return u, q, cfg.max_iters, gnorm, True, f"max_iters reached at eps={reg.eps:g}"


def minimize(cfg: SolverConfig, init: Optional[RadialField] = None) -> GroundStateResult:
    spec = from_label(cfg.nonlinearity)
    exp = critical_exponent(cfg.N, cfg.m)
    ts = exp.two_star
    grid = make_grid(cfg.N, cfg.R, cfg.n)
    schedule = cfg.eps_schedule()
    reg = regularize(spec, schedule[0], exp)
    u = init if init is not None else default_init(grid, spec, cfg.seed, reg, cfg.m)

    history = []
    total = 0
    ok = False
    msg = ""
    gnorm = math.nan
    for k, eps in enumerate(schedule):
        reg = regularize(spec, eps, exp)
        last = k == len(schedule) - 1
        try:
            u = _settle(_into_P(u, reg), reg, cfg)
        except NotInPError as exc:
            ok, msg = False, f"warm start left P_eps at eps={eps:g}: {exc}"
            break
        u, q, iters, gnorm, ok, msg = _descend(u, reg, cfg, final=last)
        total += iters
        history.append((eps, q))
        log.info("eps=%g  c_eps~%.10g  iters=%d  grad=%.3g  %s", eps, q, iters, gnorm, msg)
        if not ok:
            break

    # final candidate on the unregularised manifold
    try:
        u = project_to_manifold(u, spec, cfg.m)
    except NotInPError as exc:
        ok, msg = False, f"final field not in P: {exc}"
    K = kinetic(u, cfg.m)
    final_reg = regularize(spec, cfg.eps_min, exp)
    return GroundStateResult(
        field=u,
        energy=energy_report(u, final_reg, cfg.m),
        c_eps_history=history,
        residual=pde_residual(u, spec, cfg.m).rel_norm,
        inf_J_estimate=(0.5 - 1.0 / ts) * K,
        converged=bool(ok),
        iterations=total,
        gradient_norm=float(gnorm),
        relative_deficit=pohozaev_deficit(u, spec, cfg.m) / K,
        message=msg,
        label=spec.label,
        m=cfg.m,
    )


@dataclass
class VerificationReport:
    applicable: bool
    relative_deficit: float = math.nan
    residual: float = math.nan
    sharpness_ratio: Optional[float] = None
    sharpness_ratio_unsquared: Optional[float] = None
    sharpness_target: Optional[float] = None
    passed: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return asdict(self)


def verify_result(res: GroundStateResult, spec: NonlinearitySpec, m: int,
                  deficit_tol: float = 1e-8, residual_tol: float = 5e-2,
                  ratio_tol: float = 2e-2) -> VerificationReport:
    """Pohozaev deficit against G, PDE residual and, for the log case, K/|u|^2 vs N/2m."""
    if not res.converged:
        return VerificationReport(applicable=False)
    u = res.field
    K = kinetic(u, m)
    rel = pohozaev_deficit(u, spec, m) / K
    resid = pde_residual(u, spec, m).rel_norm
    rep = VerificationReport(True, float(rel), float(resid))
    rep.passed["deficit"] = bool(abs(rel) <= deficit_tol)
    rep.passed["residual"] = bool(resid <= residual_tol)
    if spec.label == "log":
        mass = l2_norm_sq(u)
        target = u.dim / (2.0 * m)
        rep.sharpness_target = target
        rep.sharpness_ratio = K / mass
        rep.sharpness_ratio_unsquared = K / math.sqrt(mass)
        rep.passed["sharpness"] = bool(abs(rep.sharpness_ratio / target - 1.0) <= ratio_tol)
    return rep
