import math

import numpy as np
import pytest

from polyground.nonlinearity import (
    LOG_KINK,
    critical_exponent,
    log_nonlinearity,
    power_nonlinearity,
    regularize,
)
from polyground.radial import (
    RadialField,
    apply_polyharmonic,
    dilate,
    make_grid,
    polyharmonic_inner,
    solve_polyharmonic,
)
from polyground.variational import (
    NotInPError,
    action,
    action_eps,
    conforming_gradient,
    energy_report,
    kinetic,
    manifold_report,
    pde_residual,
    pohozaev_deficit,
    potential,
    project_to_manifold,
    quotient,
    scaling_radius,
    sobolev_gradient,
)

from conftest import gaussian, smooth_field

E52 = critical_exponent(5, 2)
LOG = log_nonlinearity()


@pytest.fixture(scope="module")
def grid():
    return make_grid(5, 12.0, 512)


def in_P(grid, rng, reg):
    while True:
        u = smooth_field(grid, rng, amp=(2.0, 6.0))
        if potential(u, reg) > 0:
            return u


def test_action_zero_and_pure_kinetic(grid, rng):
    z = RadialField(grid, np.zeros(grid.n))
    assert action(z, LOG, 2) == 0.0
    assert action_eps(z, regularize(LOG, 0.3, E52), 2) == 0.0
    # G(0) = G(1) = 0 for the log case, so only the kinetic term remains
    vals = (grid.nodes < 3.0).astype(float)
    u = RadialField(grid, vals)
    assert potential(u, LOG) == 0.0
    assert action(u, LOG, 2) == pytest.approx(0.5 * kinetic(u, 2), rel=1e-15)


def test_on_manifold_action_identity(grid, rng):
    u = project_to_manifold(in_P(grid, rng, LOG), LOG, 2)
    assert action(u, LOG, 2) == pytest.approx(0.4 * kinetic(u, 2), rel=1e-9)


def test_action_eps_equals_action_without_negative_part(grid, rng):
    spec = power_nonlinearity(4, 0)
    reg = regularize(spec, 0.2, E52)
    u = smooth_field(grid, rng)
    assert action_eps(u, reg, 2) == action(u, spec, 2)


def test_action_eps_strictly_below_on_plateau(grid):
    r = grid.nodes
    x = np.clip((r - 2.0) / 1.5, 0.0, 1.0)
    vals = np.where(r < 2.0, 1.0, np.cos(0.5 * np.pi * x) ** 2)
    u = RadialField(grid, vals)
    reg = regularize(LOG, 0.25, E52)
    assert action_eps(u, reg, 2) < action(u, LOG, 2)


def test_action_eps_ordering_and_monotonicity(grid, rng):
    for _ in range(10):
        u = smooth_field(grid, rng, amp=(0.2, 4.0))
        J = action(u, LOG, 2)
        prev = -math.inf
        for eps in (0.5, 0.25, 0.1, 0.01, 1e-4):
            Je = action_eps(u, regularize(LOG, eps, E52), 2)
            assert Je <= J + 1e-12 * abs(J)
            # G_minus^eps grows as eps shrinks, so J_eps increases towards J
            assert Je >= prev - 1e-12 * abs(J)
            prev = Je


def test_pohozaev_deficit_definition(grid, rng):
    u = smooth_field(grid, rng)
    assert pohozaev_deficit(u, LOG, 2) == pytest.approx(kinetic(u, 2) - 10.0 * potential(u, LOG))
    z = RadialField(grid, np.zeros(grid.n))
    assert pohozaev_deficit(z, LOG, 2) == 0.0


def test_scaling_radius_examples(grid, rng):
    reg = regularize(LOG, 0.25, E52)
    u = project_to_manifold(in_P(grid, rng, reg), reg, 2)
    assert scaling_radius(u, reg, 2) == pytest.approx(1.0, rel=1e-12)
    # halving the argument scale multiplies 2* int G / K by 2^(2m)
    assert scaling_radius(dilate(u, 0.5), reg, 2) == pytest.approx(2.0, rel=1e-12)


def test_scaling_radius_errors(grid):
    reg = regularize(LOG, 0.25, E52)
    small = gaussian(grid, amp=0.3)
    assert potential(small, reg) < 0
    with pytest.raises(NotInPError, match="not in P"):
        scaling_radius(small, reg, 2)
    flat = RadialField(grid, np.zeros(grid.n))
    with pytest.raises(NotInPError):
        project_to_manifold(flat, power_nonlinearity(4, 0), 2)


@pytest.mark.parametrize("N,m", [(5, 2), (7, 3)])
def test_projection_exact_and_idempotent(rng, N, m):
    grid = make_grid(N, 12.0, 256)
    exp = critical_exponent(N, m)
    for spec in (LOG, power_nonlinearity(4, 1, 3)):
        reg = regularize(spec, 0.25, exp)
        for _ in range(5):
            u = in_P(grid, rng, reg)
            r = scaling_radius(u, reg, m)
            v = project_to_manifold(u, reg, m)
            K = kinetic(v, m)
            assert abs(pohozaev_deficit(v, reg, m)) / K <= 1e-10
            assert manifold_report(v, reg, m).member
            w = project_to_manifold(v, reg, m)
            assert w.grid.radius == pytest.approx(v.grid.radius, rel=1e-12)
            np.testing.assert_array_equal(w.values, v.values)
            ts = exp.two_star
            assert action_eps(v, reg, m) == pytest.approx(
                (0.5 - 1 / ts) * r ** (2 * m - N) * kinetic(u, m), rel=1e-9)


def test_manifold_report_nonmember(grid, rng):
    u = in_P(grid, rng, LOG)
    rep = manifold_report(u, LOG, 2)
    assert not rep.member
    assert rep.relative_deficit == pytest.approx(pohozaev_deficit(u, LOG, 2) / kinetic(u, 2))
    assert rep.scaling_radius > 0
    assert math.isnan(manifold_report(gaussian(grid, amp=0.3), LOG, 2).scaling_radius)
    d = rep.to_dict()
    assert set(d) == {"member", "relative_deficit", "scaling_radius"}


def test_quotient_on_manifold_and_dilation(grid, rng):
    reg = regularize(LOG, 0.1, E52)
    u = in_P(grid, rng, reg)
    q = quotient(u, reg, 2)
    v = project_to_manifold(u, reg, 2)
    assert quotient(v, reg, 2) == pytest.approx(action_eps(v, reg, 2), rel=1e-9)
    assert q == pytest.approx(action_eps(v, reg, 2), rel=1e-9)
    for r in (0.5, 2.0):
        assert quotient(dilate(u, r), reg, 2) == pytest.approx(q, rel=1e-12)


def test_quotient_amplitude_scaling(grid, rng):
    spec = power_nonlinearity(4, 0)
    u = smooth_field(grid, rng)
    # K picks up 4 and int G picks up 16: Q scales by 4^(5/4) 16^(-1/4) = 2 sqrt 2
    assert quotient(2.0 * u, spec, 2) / quotient(u, spec, 2) == pytest.approx(2 * math.sqrt(2), rel=1e-12)


def test_pde_residual_zero_field(grid):
    z = RadialField(grid, np.zeros(grid.n))
    assert pde_residual(z, LOG, 2).rel_norm == 0.0


def test_pde_residual_of_linear_solve(grid, rng):
    v = smooth_field(grid, rng)
    frozen = power_nonlinearity(4, 0)
    forcing = v.with_values(frozen.g(v.values))
    u = solve_polyharmonic(forcing, 1)
    res = apply_polyharmonic(u, 1).values - forcing.values
    assert np.sqrt(np.sum(grid.weights * res**2) / np.sum(grid.weights * forcing.values**2)) <= 1e-10
    # pde_residual against the frozen forcing is the same quantity
    class Frozen:
        g = staticmethod(lambda s: forcing.values)
    assert pde_residual(u, Frozen, 1).rel_norm <= 1e-10


def test_pde_residual_field_matches_definition(grid, rng):
    u = smooth_field(grid, rng)
    res = pde_residual(u, LOG, 2)
    np.testing.assert_allclose(res.field.values, apply_polyharmonic(u, 2).values - LOG.g(u.values))


def test_sobolev_gradient_of_zero(grid):
    z = RadialField(grid, np.zeros(grid.n))
    reg = regularize(LOG, 0.3, E52)
    assert not sobolev_gradient(z, reg, 2).values.any()
    assert not conforming_gradient(z, reg, 2).values.any()


def _fd_errors(J, u, v, pairing, ts=(1e-3, 5e-4)):
    # v should be O(1) in sup norm: for tiny perturbations the h^-4 stencil's
    # roundoff in K (about 1e-13 relative) swamps the t^2 truncation term
    errs = []
    for t in ts:
        fd = (J(u + t * v) - J(u - t * v)) / (2 * t)
        errs.append(abs(fd - pairing))
    return errs


@pytest.mark.parametrize("spec,eps", [(LOG, float(LOG_KINK)), (power_nonlinearity(4, 0.5, 3), 0.5)],
                         ids=["log", "power"])
def test_gradient_directional_derivative(spec, eps):
    grid = make_grid(5, 12.0, 256)
    reg = regularize(spec, eps, E52)
    rng = np.random.default_rng(7)
    for _ in range(4):
        u = smooth_field(grid, rng, amp=(1.0, 3.0))
        v = smooth_field(grid, rng)
        v = v * (4.0 / np.max(np.abs(v.values)))
        pairing = polyharmonic_inner(sobolev_gradient(u, reg, 2), v, 2)
        e1, e2 = _fd_errors(lambda w: action_eps(w, reg, 2), u, v, pairing)
        assert e1 < 1e-4 * abs(pairing)
        assert 3.5 <= e1 / e2 <= 4.5


def test_conforming_gradient_pairing(grid, rng):
    reg = regularize(LOG, float(LOG_KINK), E52)
    vals = smooth_field(grid, rng).values.copy()
    vals[-1] = 0.0
    u = RadialField(grid, vals)
    vals = smooth_field(grid, rng).values.copy()
    vals[-1] = 0.0
    v = RadialField(grid, vals)
    pairing = polyharmonic_inner(conforming_gradient(u, reg, 2), v, 2)
    t = 1e-4
    fd = (action_eps(u + t * v, reg, 2) - action_eps(u - t * v, reg, 2)) / (2 * t)
    assert fd == pytest.approx(pairing, rel=1e-6)


def test_energy_report_invariants(grid, rng):
    reg = regularize(LOG, 0.1, E52)
    u = smooth_field(grid, rng)
    e = energy_report(u, reg, 2)
    assert e.action == pytest.approx(e.kinetic / 2 - e.potential)
    assert e.action_eps == pytest.approx(e.kinetic / 2 - e.potential_eps)
    assert e.deficit == pytest.approx(e.kinetic - 10 * e.potential)
    assert e.deficit_eps == pytest.approx(e.kinetic - 10 * e.potential_eps)
    assert e.potential_eps >= e.potential
    assert set(e.to_dict()) >= {"kinetic", "potential", "action", "deficit", "mass"}
