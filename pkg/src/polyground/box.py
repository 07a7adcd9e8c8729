"""Fourier-multiplier norms on the periodic box [0, 2pi)^d.

The transform is normalised so that Plancherel reads
sum_x |u|^2 (2pi/n)^d = sum_xi |u_hat(xi)|^2, with integer frequencies xi.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

SIZES = (8, 16, 32, 64)


@dataclass(frozen=True)
class BoxField:
    dim_box: int
    size: int
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        if self.dim_box not in (1, 2, 3):
            raise ValueError(f"dim_box must be 1, 2 or 3, got {self.dim_box}")
        if self.size not in SIZES:
            raise ValueError(f"size must be one of {SIZES}, got {self.size}")
        v = np.array(self.values, dtype=float)
        if v.shape != (self.size,) * self.dim_box:
            raise ValueError(f"values must have shape {(self.size,) * self.dim_box}, got {v.shape}")
        if not np.all(np.isfinite(v)):
            raise ValueError("values must be finite")
        v.flags.writeable = False
        object.__setattr__(self, "values", v)


def box_coordinates(d: int, n: int) -> list[np.ndarray]:
    x = 2.0 * np.pi * np.arange(n) / n
    return list(np.meshgrid(*([x] * d), indexing="ij"))


def box_from_function(d: int, n: int, f) -> BoxField:
    return BoxField(d, n, f(*box_coordinates(d, n)))


def _frequencies(u: BoxField) -> list[np.ndarray]:
    k = np.fft.fftfreq(u.size, 1.0 / u.size)
    return list(np.meshgrid(*([k] * u.dim_box), indexing="ij"))


def spectrum(u: BoxField) -> np.ndarray:
    d, n = u.dim_box, u.size
    return np.fft.fftn(u.values) * (2.0 * np.pi) ** (d / 2) / n**d


def _power(u: BoxField) -> np.ndarray:
    return np.abs(spectrum(u)) ** 2


def plancherel_sides(u: BoxField) -> tuple[float, float]:
    cell = (2.0 * np.pi / u.size) ** u.dim_box
    return float(np.sum(u.values**2) * cell), float(np.sum(_power(u)))


def box_seminorm_sq(u: BoxField, m: int) -> float:
    """sum_xi |xi|^(2m) |u_hat|^2."""
    if m < 1:
        raise ValueError(f"m must be positive, got {m}")
    xi2 = sum(k**2 for k in _frequencies(u))
    return float(np.sum(xi2**m * _power(u)))


def mixed_derivative_norm_sq(u: BoxField, indices) -> float:
    """sum_xi |xi_i1 ... xi_im|^2 |u_hat|^2 for distinct axes i1..im."""
    indices = list(indices)
    if not indices:
        raise ValueError("need at least one axis index")
    if len(set(indices)) != len(indices):
        raise ValueError(f"axis indices must be distinct, got {indices}")
    for i in indices:
        if not 0 <= i < u.dim_box:
            raise ValueError(f"axis index {i} out of range for dim_box={u.dim_box}")
    ks = _frequencies(u)
    prod = np.ones_like(ks[0])
    for i in indices:
        prod = prod * ks[i] ** 2
    return float(np.sum(prod * _power(u)))


@dataclass
class AmGmReport:
    lhs: float
    middle: float
    rhs: float
    holds: bool
    worst_ratio: float
    tuples: list = field(default_factory=list)


def check_am_gm_chain(u: BoxField, m: int, rtol: float = 1e-12) -> AmGmReport:
    """For every distinct m-tuple of axes:

        |d_i1..im u|^2 <= m^-m sum (xi_i1^2 + ... + xi_im^2)^m |u_hat|^2 <= m^-m |u|_m^2.

    lhs and middle in the report come from the tuple with the largest ratio
    lhs * m^m / |u|_m^2.
    """
    if not 1 <= m <= u.dim_box:
        raise ValueError(f"need 1 <= m <= dim_box={u.dim_box}, got m={m}")
    ks = _frequencies(u)
    power = _power(u)
    full = box_seminorm_sq(u, m)
    rhs = full / m**m
    holds = True
    worst = (-1.0, 0.0, 0.0)
    rows = []
    for tup in itertools.combinations(range(u.dim_box), m):
        lhs_t = mixed_derivative_norm_sq(u, tup)
        partial = sum(ks[i] ** 2 for i in tup)
        mid_t = float(np.sum(partial**m * power)) / m**m
        ok = lhs_t <= mid_t * (1 + rtol) + 1e-300 and mid_t <= rhs * (1 + rtol) + 1e-300
        holds = holds and ok
        ratio = lhs_t * m**m / full if full > 0 else 0.0
        rows.append({"indices": list(tup), "lhs": lhs_t, "middle": mid_t, "ratio": ratio, "holds": ok})
        if ratio > worst[0]:
            worst = (ratio, lhs_t, mid_t)
    return AmGmReport(worst[1], worst[2], rhs, bool(holds), max(worst[0], 0.0), rows)


def random_band_limited(d: int, n: int, band: int, rng: np.random.Generator) -> BoxField:
    """Real field with Gaussian random coefficients on frequencies |xi_i| <= band."""
    if not 1 <= band < n // 2:
        raise ValueError(f"band must lie in [1, n/2), got {band}")
    shape = (n,) * d
    coef = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
    k = np.fft.fftfreq(n, 1.0 / n)
    mask = np.ones(shape, dtype=bool)
    for K in np.meshgrid(*([k] * d), indexing="ij"):
        mask &= np.abs(K) <= band
    vals = np.fft.ifftn(np.where(mask, coef, 0.0)).real * n**d
    return BoxField(d, n, vals)
