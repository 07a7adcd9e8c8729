"""Nonlinearities g = G' with their positive/negative split and the epsilon cutoff.

For s >= 0, G_plus integrates max(g, 0) and G_minus integrates max(-g, 0), with the
mirrored definitions for s < 0, so that G = G_plus - G_minus, both parts are
nonnegative, and g_minus = g_plus - g.  The regularised problem replaces g_minus
by phi_eps * g_minus, where phi_eps(s) = (|s|/eps)^(2*-1) below eps and 1 above.

All maps are vectorised over numpy arrays.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy import integrate as _quad

Map = Callable[[np.ndarray], np.ndarray]

HALF_E = 1.0 / (2.0 * np.e)
LOG_KINK = np.exp(-0.5)


class QuadratureError(RuntimeError):
    pass


@dataclass(frozen=True)
class CriticalExponent:
    N: int
    m: int
    two_star: float


def critical_exponent(N: int, m: int) -> CriticalExponent:
    if m < 1 or N <= 2 * m:
        raise ValueError(f"need N > 2m, got N={N}, m={m}")
    return CriticalExponent(N, m, 2.0 * N / (N - 2 * m))


@dataclass(frozen=True)
class NonlinearitySpec:
    G: Map
    g: Map
    G_plus: Map
    G_minus: Map
    g_plus: Map
    g_minus: Map
    growth_constant: float
    xi0: float
    label: str
    # closed form of the regularised negative part, (s, eps, two_star) -> G_minus^eps(s)
    G_minus_eps: Optional[Callable[[np.ndarray, float, float], np.ndarray]] = field(
        default=None, compare=False
    )


def _xlogx2(s):
    """s^2 log|s| with the continuous value 0 at s = 0."""
    s = np.asarray(s, dtype=float)
    a = np.abs(s)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = s * s * np.log(a)
    return np.where(a > 1e-300, out, 0.0)


def _log_g(s):
    s = np.asarray(s, dtype=float)
    a = np.abs(s)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = 2.0 * s * np.log(a) + s
    return np.where(a > 1e-300, out, 0.0)


def _log_G_minus(s):
    s = np.asarray(s, dtype=float)
    return np.where(np.abs(s) <= LOG_KINK, -_xlogx2(s), HALF_E)


def _log_g_minus(s):
    s = np.asarray(s, dtype=float)
    return np.where(np.abs(s) < LOG_KINK, -_log_g(s), 0.0)


def _log_G_minus_eps(s, eps, two_star):
    p = two_star - 1.0
    k = p + 2.0

    def below(a):
        # integral over [0, a] of (t/eps)^p * (-2 t log t - t), valid for a <= eps
        with np.errstate(divide="ignore", invalid="ignore"):
            val = -(a * a) * (a / eps) ** p * (2.0 * np.log(a) / k - 2.0 / k**2 + 1.0 / k)
        return np.where(a > 1e-300, val, 0.0)

    a = np.minimum(np.abs(np.asarray(s, dtype=float)), LOG_KINK)
    e = min(eps, LOG_KINK)
    return np.where(a <= eps, below(a), below(e) + _log_G_minus(a) - _log_G_minus(e))


def log_nonlinearity() -> NonlinearitySpec:
    """G(s) = s^2 log|s|, g(s) = 2 s log|s| + s; g changes sign at |s| = e^(-1/2)."""
    return NonlinearitySpec(
        G=_xlogx2,
        g=_log_g,
        G_plus=lambda s: _xlogx2(s) + _log_G_minus(s),
        G_minus=_log_G_minus,
        g_plus=lambda s: _log_g(s) + _log_g_minus(s),
        g_minus=_log_g_minus,
        growth_constant=3.0,
        xi0=float(np.e),
        label="log",
        G_minus_eps=_log_G_minus_eps,
    )


def power_nonlinearity(p: float, mu: float = 0.0, q: Optional[float] = None,
                       two_star: Optional[float] = None) -> NonlinearitySpec:
    """G(s) = |s|^p/p - mu |s|^q/q.

    Requires 2 < q < p (q only matters for mu > 0) and, when ``two_star`` is
    given, p < 2*.
    """
    if mu < 0:
        raise ValueError(f"mu must be nonnegative, got {mu}")
    if mu > 0:
        if q is None or not (2.0 < q < p):
            raise ValueError(f"need 2 < q < p, got q={q}, p={p}")
    elif not p > 2.0:
        raise ValueError(f"need p > 2, got p={p}")
    if two_star is not None and not p < two_star:
        raise ValueError(f"need p < 2* = {two_star}, got p={p}")
    q = float(q) if q is not None else 0.5 * (2.0 + p)
    # g < 0 exactly on 0 < |s| < s_star
    s_star = mu ** (1.0 / (p - q)) if mu > 0 else 0.0

    def G(s):
        a = np.abs(np.asarray(s, dtype=float))
        return a**p / p - mu * a**q / q

    def g(s):
        s = np.asarray(s, dtype=float)
        a = np.abs(s)
        return np.sign(s) * (a ** (p - 1) - mu * a ** (q - 1))

    def G_minus(s):
        a = np.minimum(np.abs(np.asarray(s, dtype=float)), s_star)
        return mu * a**q / q - a**p / p

    def g_minus(s):
        s = np.asarray(s, dtype=float)
        a = np.abs(s)
        return np.where(a < s_star, np.sign(s) * (mu * a ** (q - 1) - a ** (p - 1)), 0.0)

    def G_minus_eps(s, eps, ts):
        P = ts - 1.0

        def below(a):
            return (a / eps) ** P * (mu * a**q / (P + q) - a**p / (P + p))

        a = np.minimum(np.abs(np.asarray(s, dtype=float)), s_star)
        e = min(eps, s_star)
        return np.where(a <= eps, below(a), below(e) + G_minus(a) - G_minus(e))

    xi0 = 1.5 * (p * mu / q) ** (1.0 / (p - q)) if mu > 0 else 1.0
    label = f"power:{p:g},{mu:g},{q:g}" if mu > 0 else f"power:{p:g},0"
    return NonlinearitySpec(
        G=G, g=g,
        G_plus=lambda s: G(s) + G_minus(s),
        G_minus=G_minus,
        g_plus=lambda s: g(s) + g_minus(s),
        g_minus=g_minus,
        growth_constant=1.0 + mu,
        xi0=float(xi0),
        label=label,
        G_minus_eps=G_minus_eps,
    )


def from_label(label: str, two_star: Optional[float] = None) -> NonlinearitySpec:
    """Parse "log" or "power:p,mu,q" (q may be omitted when mu = 0)."""
    label = label.strip()
    if label == "log":
        return log_nonlinearity()
    if label.startswith("power:"):
        try:
            parts = [float(x) for x in label[len("power:"):].split(",")]
        except ValueError as exc:
            raise ValueError(f"malformed nonlinearity label {label!r}") from exc
        if len(parts) not in (1, 2, 3):
            raise ValueError(f"malformed nonlinearity label {label!r}")
        p = parts[0]
        mu = parts[1] if len(parts) > 1 else 0.0
        q = parts[2] if len(parts) > 2 else None
        return power_nonlinearity(p, mu, q, two_star=two_star)
    raise ValueError(f"unknown nonlinearity {label!r} (expected 'log' or 'power:p,mu,q')")


def phi_eps(s, eps: float, two_star: float):
    a = np.abs(np.asarray(s, dtype=float))
    return np.where(a <= eps, np.minimum(a / eps, 1.0) ** (two_star - 1.0), 1.0)


@dataclass(frozen=True)
class RegularizedSpec:
    """The cutoff problem at level eps; G and g here are G_eps and g_eps."""

    base: NonlinearitySpec
    eps: float
    two_star: float

    def __post_init__(self):
        if not 0.0 < self.eps < 1.0:
            raise ValueError(f"eps must lie in (0, 1), got {self.eps}")
        if not self.two_star > 2.0:
            raise ValueError(f"2* must exceed 2, got {self.two_star}")

    @property
    def label(self) -> str:
        return self.base.label

    @property
    def xi0(self) -> float:
        return self.base.xi0

    def phi(self, s):
        return phi_eps(s, self.eps, self.two_star)

    def G_minus_eps(self, s):
        if self.base.G_minus_eps is not None:
            return self.base.G_minus_eps(s, self.eps, self.two_star)
        return _quadrature_G_minus_eps(self, s)

    def G(self, s):
        return self.base.G_plus(s) - self.G_minus_eps(s)

    def g(self, s):
        return self.base.g_plus(s) - self.phi(s) * self.base.g_minus(s)


def regularize(spec: NonlinearitySpec, eps: float, exp: CriticalExponent) -> RegularizedSpec:
    return RegularizedSpec(spec, float(eps), exp.two_star)


def _quadrature_G_minus_eps(reg: RegularizedSpec, s) -> np.ndarray:
    s = np.asarray(s, dtype=float)
    base = reg.base

    def integrand(t):
        return float(reg.phi(t) * base.g_minus(t))

    def one(x):
        if x == 0.0:
            return 0.0
        lo, hi = sorted((0.0, x))
        pts = [p for p in (-reg.eps, reg.eps) if lo < p < hi]
        val, err, info = _quad.quad(integrand, lo, hi, points=pts or None,
                                    epsabs=1e-12, epsrel=1e-12, limit=200, full_output=1)[:3]
        if err > 1e-10 + 1e-8 * abs(val):
            raise QuadratureError(
                f"G_minus_eps quadrature on [{lo:g}, {hi:g}] did not converge "
                f"(estimate {val:g}, error {err:g}, {info['neval']} evaluations)")
        return val if x > 0 else -val

    flat = s.ravel()
    uniq, inv = np.unique(flat, return_inverse=True)
    vals = np.array([one(x) for x in uniq])
    return vals[inv].reshape(s.shape)


def regularized_parts(s, reg: RegularizedSpec) -> tuple[np.ndarray, np.ndarray]:
    """(G_minus^eps(s), g_eps(s))."""
    return reg.G_minus_eps(s), reg.g(s)


def cutoff_constant(reg: RegularizedSpec) -> float:
    """A valid c(eps) with |phi_eps g_minus| <= c(eps) |s|^(2*-1), from the growth bound on g."""
    return reg.base.growth_constant * (1.0 + reg.eps ** (1.0 - reg.two_star))


@dataclass
class GrowthReport:
    holds: bool
    g0_holds: bool
    g1_holds: bool
    g3_holds: bool
    ratio_small: float
    ratio_large: float
    ratio_max: float
    g0_worst: float
    violations: list = field(default_factory=list)


def validate_growth(spec: NonlinearitySpec, exp: CriticalExponent, samples: int = 1000) -> GrowthReport:
    """Sampling certificate for (g0), (g1), (g3) on |s| in [1e-8, 1e8]."""
    if samples < 100:
        raise ValueError("need at least 100 samples")
    a = np.logspace(-8, 8, samples)
    ts = exp.two_star
    ratios = []
    for s in (a, -a):
        Gp = np.asarray(spec.G_plus(s), dtype=float)
        with np.errstate(divide="ignore"):
            r = np.where(Gp > 0, np.exp(np.log(np.maximum(Gp, 1e-300)) - ts * np.log(a)), 0.0)
        ratios.append(r)
    ratio = np.maximum(*ratios)
    ratio_max = float(ratio.max())
    k = max(samples // 20, 1)
    small, large = float(ratio[:k].max()), float(ratio[-k:].max())
    g1 = small <= 1e-6 * ratio_max if ratio_max > 0 else True
    g3 = large <= 1e-6 * ratio_max if ratio_max > 0 else True

    c = spec.growth_constant
    worst = 0.0
    for s in (a, -a):
        bound = np.exp(np.logaddexp(0.0, (ts - 1.0) * np.log(a)))
        worst = max(worst, float(np.max(np.abs(spec.g(s)) / (c * bound))))
    g0 = worst <= 1.0 + 1e-9

    violations = []
    if not g0:
        violations.append(f"(g0): sup |g|/(c(1+|s|^(2*-1))) = {worst:.3g} > 1")
    if not g1:
        violations.append(f"(g1): G_plus/|s|^2* = {small:.3g} near 0, max {ratio_max:.3g}")
    if not g3:
        violations.append(f"(g3): G_plus/|s|^2* = {large:.3g} at large |s|, max {ratio_max:.3g}")
    return GrowthReport(g0 and g1 and g3, g0, g1, g3, small, large, ratio_max, worst, violations)
