import logging
import math
import re

import numpy as np
import pytest

from polyground.ground_state import (
    GroundStateResult,
    InitError,
    SolverConfig,
    default_init,
    minimize,
    reembed,
    verify_result,
)
from polyground.nonlinearity import (
    NonlinearitySpec,
    critical_exponent,
    from_label,
    log_nonlinearity,
    power_nonlinearity,
    regularize,
)
from polyground.radial import make_grid
from polyground.variational import action, potential, project_to_manifold

from conftest import gaussian

POWER = "power:4,1,3"


@pytest.fixture(scope="module")
def power_run():
    records = []

    class Grab(logging.Handler):
        def emit(self, record):
            records.append(record.getMessage())

    logger = logging.getLogger("polyground.ground_state")
    h = Grab()
    old = logger.level
    logger.addHandler(h)
    logger.setLevel(logging.DEBUG)
    try:
        res = minimize(SolverConfig(N=5, m=2, n=256, nonlinearity=POWER))
    finally:
        logger.removeHandler(h)
        logger.setLevel(old)
    return res, records


@pytest.mark.parametrize("kw", [dict(N=4, m=2), dict(N=5, m=1), dict(N=5, m=2, eps_start=1.0),
                                dict(N=5, m=2, eps_min=0.6), dict(N=5, m=2, eps_factor=1.0),
                                dict(N=5, m=2, step=0.0), dict(N=5, m=2, tol_q=0.0),
                                dict(N=5, m=2, n=4), dict(N=5, m=2, preconditioner="newton"),
                                dict(N=5.5, m=2)])
def test_config_rejects(kw):
    with pytest.raises(ValueError):
        SolverConfig(**kw)


def test_config_invalid_before_iterating(monkeypatch):
    import polyground.ground_state as gs

    called = []
    monkeypatch.setattr(gs, "_descend", lambda *a, **k: called.append(1))
    with pytest.raises(ValueError):
        gs.minimize(SolverConfig.from_dict({"N": 4, "m": 2}))
    assert not called


def test_config_oracle_mode_allows_m1():
    assert SolverConfig(N=5, m=1, oracle_mode=True).m == 1


def test_config_dict_round_trip():
    cfg = SolverConfig.from_dict({"schema_version": 1, "N": 7, "m": 3, "grid": {"R": 15, "n": 300},
                                  "nonlinearity": POWER, "seed": 4})
    assert cfg.R == 15 and cfg.n == 300 and cfg.seed == 4
    d = cfg.to_dict()
    assert d["grid"] == {"R": 15, "n": 300}
    assert SolverConfig.from_dict(d) == cfg


@pytest.mark.parametrize("doc,key", [({"N": 5, "m": 2, "tolerance": 1}, "tolerance"),
                                     ({"m": 2}, "N"),
                                     ({"N": 5, "m": 2, "grid": {"R": 1, "h": 2}}, "h")])
def test_config_errors_name_key(doc, key):
    with pytest.raises(ValueError, match=key):
        SolverConfig.from_dict(doc)


def test_eps_schedule():
    s = SolverConfig(N=5, m=2).eps_schedule()
    assert s[0] == 0.5 and s[-1] == 1e-4
    assert len(s) == 14
    assert all(b < a for a, b in zip(s, s[1:]))
    assert SolverConfig(N=5, m=2, eps_start=0.1, eps_min=0.1).eps_schedule() == [0.1]


def test_default_init_log():
    grid = make_grid(5, 20.0, 512)
    spec = log_nonlinearity()
    u = default_init(grid, spec, seed=3)
    assert u.values[0] == pytest.approx(2 * math.e, rel=0.011)
    assert potential(u, spec) > 0
    assert not u.values[grid.nodes >= 20.0 / 3].any()
    reg = regularize(spec, 0.5, critical_exponent(5, 2))
    assert potential(default_init(grid, spec, 3, reg), reg) > 0


def test_default_init_power_and_determinism():
    grid = make_grid(5, 20.0, 256)
    spec = power_nonlinearity(4, 0)
    a = default_init(grid, spec, seed=9)
    b = default_init(grid, spec, seed=9)
    np.testing.assert_array_equal(a.values, b.values)
    assert a.values[0] == pytest.approx(2.0, rel=0.011)
    assert potential(a, spec) > 0
    c = default_init(grid, spec, seed=10)
    assert not np.array_equal(a.values, c.values)


def test_default_init_failure():
    neg = lambda s: -np.asarray(s, dtype=float) ** 2
    spec = NonlinearitySpec(G=neg, g=lambda s: -2 * np.asarray(s), G_plus=lambda s: 0 * s,
                            G_minus=lambda s: -neg(s), g_plus=lambda s: 0 * s,
                            g_minus=lambda s: 2 * np.asarray(s), growth_constant=2.0, xi0=1.0,
                            label="neg")
    with pytest.raises(InitError):
        default_init(make_grid(5, 20.0, 64), spec, seed=0)


def test_reembed_zero_pads():
    g = make_grid(5, 10.0, 400)
    u = gaussian(g)
    v = reembed(u, 20.0, 2)
    assert v.grid.radius == 20.0 and v.grid.n == 400
    assert not v.values[v.grid.nodes >= 10.0].any()
    inside = v.grid.nodes < 8.0
    np.testing.assert_allclose(v.values[inside], np.exp(-v.grid.nodes[inside] ** 2 / 2), atol=1e-6)
    assert reembed(u, 10.0, 2) is u


def test_power_run_converges(power_run):
    res, _ = power_run
    assert isinstance(res, GroundStateResult)
    assert res.converged, res.message
    assert res.inf_J_estimate > 0
    assert abs(res.relative_deficit) <= 1e-10
    assert res.residual <= 5e-2
    assert res.iterations > 0
    assert res.field.dim == 5
    assert res.energy.kinetic == pytest.approx(res.inf_J_estimate / 0.4, rel=1e-12)


def test_power_run_history(power_run):
    res, _ = power_run
    eps = [e for e, _ in res.c_eps_history]
    c = [q for _, q in res.c_eps_history]
    assert eps == SolverConfig(N=5, m=2).eps_schedule()
    assert all(np.isfinite(c)) and min(c) > 0
    assert res.inf_J_estimate >= c[-1] * (1 - 1e-8)


def test_quotient_nonincreasing_on_accepted_steps(power_run):
    _, records = power_run
    levels, cur = [], None
    for msg in records:
        m = re.match(r"it=\d+ q=(\S+)", msg)
        if m:
            if cur is None:
                cur = []
                levels.append(cur)
            cur.append(float(m.group(1)))
        elif msg.startswith("eps="):
            cur = None
    assert levels
    for qs in levels:
        assert all(b <= a for a, b in zip(qs, qs[1:]))


def test_probe_upper_bounds(power_run):
    res, _ = power_run
    spec = from_label(POWER)
    grid = make_grid(5, 20.0, 256)
    for sigma in (0.5, 1.0, 2.0, 3.0):
        for amp in (2.0, 3.0, 5.0):
            probe = gaussian(grid, sigma, amp)
            if potential(probe, spec) <= 0:
                continue
            J = action(project_to_manifold(probe, spec, 2), spec, 2)
            assert res.inf_J_estimate <= J


def test_determinism(power_run):
    res, _ = power_run
    again = minimize(SolverConfig(N=5, m=2, n=256, nonlinearity=POWER))
    np.testing.assert_array_equal(again.field.values, res.field.values)
    assert again.field.grid == res.field.grid
    assert again.c_eps_history == res.c_eps_history
    assert again.summary() == res.summary()


def test_verify_power_has_no_sharpness(power_run):
    res, _ = power_run
    rep = verify_result(res, from_label(POWER), 2)
    assert rep.applicable
    assert rep.sharpness_ratio is None and "sharpness" not in rep.passed
    assert rep.passed["deficit"] and rep.passed["residual"]


def test_verify_not_applicable(power_run):
    res, _ = power_run
    failed = GroundStateResult(res.field, res.energy, [], math.nan, math.nan, False, 0)
    rep = verify_result(failed, log_nonlinearity(), 2)
    assert not rep.applicable and rep.passed == {}


def test_step_underflow_reports_failure(monkeypatch):
    import polyground.ground_state as gs

    # an ascent direction can never pass the line search
    real = gs._descent_direction
    monkeypatch.setattr(gs, "_descent_direction", lambda *a: real(*a) * -1.0)
    cfg = SolverConfig(N=5, m=2, n=128, nonlinearity=POWER, eps_start=0.5, eps_min=0.5)
    res = gs.minimize(cfg)
    assert not res.converged
    assert "step underflow" in res.message


def test_summary_is_plain(power_run):
    s = power_run[0].summary()
    assert s["inf_J_kind"] == "estimate (upper bound)"
    assert s["grid"]["n"] == 256
