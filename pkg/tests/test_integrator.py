"""Time stepping: IMEX scheme, diagnostics, invariants, relaxation."""

import math

import numpy as np
import pytest

from sirblab.grid import CoefficientField, Grid, neumann_modes, project_mode
from sirblab.integrator import (
    BumpInit,
    ConstantInit,
    ModeInit,
    PositivityError,
    RandomInit,
    SimConfig,
    StateField,
    relax_to_steady,
    simulate,
    stability_dt,
    step,
)
from sirblab.model import ModelParams, reaction_rhs
from sirblab.steady import solve_endemic, trivial_states

from common import make_params, make_damped

GRID = Grid((2.0,), (32,))
COEFFS = tuple(CoefficientField.constant(a) for a in (0.05, 0.05, 0.05, 0.01))

# A regime where the disease-free state is the attractor: bacteria are
# washed out (g0 < d4) and transmission is too weak for endemicity.
STABLE_Z2 = dict(b0=2.0, k1=10.0, beta1=0.1, beta2=0.1, k2=1.0, g0=0.5, k3=6.0,
                 d1=1.0, d2=0.5, d3=0.5, d4=1.0, sigma=0.5, gamma=0.5, xi=0.2)


def _cfg(p, initial, t_end, **kw):
    return SimConfig(GRID, p, COEFFS, initial, t_end, **kw)


# ---------------------------------------------------------------------------
# Config validation
# ---------------------------------------------------------------------------

def test_config_validation():
    p = make_params()
    init = ConstantInit((1.0, 0.0, 0.0, 0.0))
    with pytest.raises(ValueError):
        _cfg(p, init, t_end=0.0)
    with pytest.raises(ValueError):
        _cfg(p, init, t_end=1.0, dt=2.0)          # dt beyond t_end
    with pytest.raises(ValueError):
        _cfg(p, init, t_end=1.0, adaptive=False)  # fixed step needs dt
    with pytest.raises(ValueError):
        _cfg(p, init, t_end=1.0, record_every=0)
    with pytest.raises(ValueError):
        _cfg(p, init, t_end=1.0, snapshot_times=(2.0,))


def test_initial_profiles_reject_negative_data():
    with pytest.raises(ValueError):
        ConstantInit((1.0, -0.1, 0.0, 0.0)).build(GRID)
    with pytest.raises(ValueError):
        BumpInit(base=(0.1, 0.0, 0.0, 0.0),
                 amplitude=(-0.5, 0.0, 0.0, 0.0)).build(GRID)
    with pytest.raises(ValueError):
        RandomInit(low=(0.5,) * 4, high=(0.1,) * 4).build(GRID)


def test_random_initial_is_seed_deterministic():
    a = RandomInit((0.0,) * 4, (1.0,) * 4, seed=9).build(GRID)
    b = RandomInit((0.0,) * 4, (1.0,) * 4, seed=9).build(GRID)
    c = RandomInit((0.0,) * 4, (1.0,) * 4, seed=10).build(GRID)
    np.testing.assert_array_equal(a.values, b.values)
    assert np.any(a.values != c.values)


# ---------------------------------------------------------------------------
# Single steps
# ---------------------------------------------------------------------------

def test_step_dt_bound_scales_with_state():
    p = make_params()
    small = StateField.constant(GRID, [1.0, 0.1, 0.1, 0.1])
    large = StateField.constant(GRID, [50.0, 10.0, 10.0, 30.0])
    assert stability_dt(small, p) > stability_dt(large, p) > 0.0


def test_step_keeps_zero_state_exactly():
    p = make_params()
    state = StateField.constant(GRID, [0.0, 0.0, 0.0, 0.0])
    out = step(state, 0.01, _cfg(p, None, t_end=1.0))
    np.testing.assert_array_equal(out.values, state.values)
    assert out.t == 0.01


def test_step_constant_state_reduces_to_explicit_euler():
    # With no gradients the implicit solve is the identity and a step
    # is exactly one explicit update of the reaction system.
    p = make_params()
    u0 = np.array([1.2, 0.8, 0.4, 2.0])
    state = StateField.constant(GRID, u0)
    dt = 0.02
    out = step(state, dt, _cfg(p, None, t_end=1.0))
    f = reaction_rhs(u0, p)
    expect = u0 + dt * np.array([f.f1, f.f2, f.f3, f.f4])
    for k in range(4):
        np.testing.assert_allclose(out.values[k], expect[k], rtol=1e-14)


def test_step_holds_equilibrium():
    p = make_params()
    z2 = [z for z in trivial_states(p) if z.tag == "Z2"][0]
    state = StateField.constant(GRID, z2.value)
    out = step(state, 0.05, _cfg(p, None, t_end=1.0))
    assert np.max(np.abs(out.values - state.values)) < 1e-12


def test_step_rejects_bad_dt():
    p = make_params()
    state = StateField.constant(GRID, [1.0, 0.0, 0.0, 0.0])
    cfg = _cfg(p, None, t_end=1.0)
    for dt in (0.0, -0.1, float("nan")):
        with pytest.raises(ValueError):
            step(state, dt, cfg)


def test_oversized_fixed_step_reports_positivity_failure():
    p = make_params()
    state = StateField.constant(GRID, [0.5, 2.0, 0.2, 1.0])
    dt = 100.0 * stability_dt(state, p)
    cfg = _cfg(p, None, t_end=1000.0)
    with pytest.raises(PositivityError) as err:
        step(state, dt, cfg)
    assert err.value.species in ("S", "I", "R", "B")
    assert err.value.value < 0.0
    assert err.value.time > 0.0


# ---------------------------------------------------------------------------
# Full runs
# ---------------------------------------------------------------------------

def test_equilibrium_run_has_flat_diagnostics():
    p = make_params()
    z3 = [z for z in trivial_states(p) if z.tag == "Z3"][0]
    cfg = _cfg(p, ConstantInit(tuple(z3.value)), t_end=2.0, record_every=3)
    traj = simulate(cfg)
    for series in (traj.sup["B"], traj.l1["B"], traj.mass):
        arr = np.array(series)
        assert np.max(np.abs(arr - arr[0])) < 1e-12 * (1.0 + abs(arr[0]))
    assert traj.violations == []


def test_zero_amplitude_perturbation_stays_put():
    p = make_params()
    z4 = solve_endemic(p)[0]
    cfg = _cfg(p, ModeInit(tuple(z4.value), epsilon=0.0, mode=1), t_end=1.0)
    traj = simulate(cfg)
    dev = np.max(np.abs(traj.final.values - z4.value[:, None]))
    assert dev < 1e-10


def test_trajectory_bookkeeping():
    p = make_params()
    cfg = _cfg(p, ConstantInit((1.0, 0.5, 0.2, 0.5)), t_end=0.5,
               record_every=4, record_modes=(0, 1),
               snapshot_times=(0.25, 0.5))
    traj = simulate(cfg)
    times = np.array(traj.times)
    assert np.all(np.diff(times) > 0.0)
    assert times[0] == 0.0
    assert times[-1] == pytest.approx(0.5, abs=1e-12)
    assert traj.steps >= len(times) - 1

    # every recorded series has one entry per sample
    for s in "SIRB":
        assert len(traj.sup[s]) == len(times)
        assert len(traj.amplitudes[(s, 1)]) == len(times)

    # snapshots land at (or just past) the requested times
    assert len(traj.snapshots) == 2
    for want, (got, state) in zip((0.25, 0.5), traj.snapshots):
        assert got >= want * (1.0 - 1e-12)
        assert got - want < 0.2
        assert state.values.shape == (4,) + GRID.shape

    header = traj.to_csv().splitlines()[0].split(",")
    assert header[0] == "time"
    assert "amp_S_m1" in header and "mass_sir" in header


def test_recorded_amplitudes_match_direct_projection():
    p = make_params()
    z4 = solve_endemic(p)[0]
    cfg = _cfg(p, ModeInit(tuple(z4.value), epsilon=1e-3, mode=2),
               t_end=0.3, record_modes=(0, 2))
    traj = simulate(cfg)
    spectrum = neumann_modes(GRID, 3)
    for k, s in enumerate("SIRB"):
        direct = project_mode(traj.final.component(k), 2, spectrum)
        assert traj.amplitudes[(s, 2)][-1] == direct


def test_damped_regime_decays_monotonically():
    cfg = _cfg(make_damped(), BumpInit(base=(1.0, 0.5, 0.2, 0.5),
                                       amplitude=(0.5, 0.3, 0.1, 0.4)),
               t_end=30.0, record_every=5)
    traj = simulate(cfg)
    assert traj.violations == []
    for s in "SIRB":
        sup = np.array(traj.sup[s])
        k0 = max(1, int(0.01 * len(sup)))
        assert np.all(np.diff(sup[k0:]) <= 1e-10 * sup[0])
    mass = np.array(traj.mass)
    assert np.all(np.diff(mass) <= 1e-10 * mass[0])


def test_adaptive_driver_recovers_from_large_cap():
    # A dt cap far above the stability bound must not abort the run;
    # the driver halves its way down instead.
    p = make_params()
    state0 = [0.5, 2.0, 0.2, 1.0]
    assert stability_dt(StateField.constant(GRID, state0), p) < 0.1
    cfg = _cfg(p, ConstantInit(tuple(state0)), t_end=0.5, dt=0.5, adaptive=True)
    traj = simulate(cfg)
    assert traj.final.t == pytest.approx(0.5, abs=1e-12)
    assert np.min(traj.final.values) >= 0.0


def test_fixed_oversized_step_aborts_run():
    p = make_params()
    cfg = _cfg(p, ConstantInit((0.5, 2.0, 0.2, 1.0)), t_end=10.0,
               dt=2.0, adaptive=False)
    with pytest.raises(PositivityError):
        simulate(cfg)


# ---------------------------------------------------------------------------
# Relaxation to steady states
# ---------------------------------------------------------------------------

def test_relax_converges_to_stable_disease_free_state():
    p = ModelParams(**STABLE_Z2)
    init = BumpInit(base=(5.0, 0.0, 0.0, 0.0), amplitude=(1e-3,) * 4)
    res = relax_to_steady(_cfg(p, init, t_end=60.0), tol=1e-7)
    assert res.converged
    dev = np.max(np.abs(res.state.values - np.array([5.0, 0.0, 0.0, 0.0])[:, None]))
    assert dev < 1e-6


def test_relax_detects_exact_equilibrium_immediately():
    p = make_params()
    z4 = solve_endemic(p)[0]
    res = relax_to_steady(_cfg(p, ConstantInit(tuple(z4.value)), t_end=50.0),
                          tol=1e-6)
    assert res.converged
    assert res.state.t < 1.0  # no need to integrate the full window


def test_relax_reports_failure_near_unstable_state():
    # Near the disease-free state of the baseline regime the flow moves
    # away, so the change rate cannot fall below a tight tolerance.
    p = make_params()
    init = BumpInit(base=(5.0, 0.0, 0.0, 0.0), amplitude=(0.0, 1e-3, 0.0, 1e-3))
    res = relax_to_steady(_cfg(p, init, t_end=3.0), tol=1e-9)
    assert not res.converged
    assert res.rate > 1e-9


# ---------------------------------------------------------------------------
# Reduction to the well-mixed system
# ---------------------------------------------------------------------------

def _rk4(u0, p, t_end, dt):
    def f(u):
        r = reaction_rhs(u, p)
        return np.array([r.f1, r.f2, r.f3, r.f4])

    u = np.asarray(u0, dtype=float).copy()
    steps = int(round(t_end / dt))
    for _ in range(steps):
        k1 = f(u)
        k2 = f(np.clip(u + 0.5 * dt * k1, 0.0, None))
        k3 = f(np.clip(u + 0.5 * dt * k2, 0.0, None))
        k4 = f(np.clip(u + dt * k3, 0.0, None))
        u = u + dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
    return u


def test_uniform_run_matches_ode_oracle():
    p = make_params()
    u0 = (1.2, 0.8, 0.4, 2.0)
    small = Grid((1.0,), (8,))
    cfg = SimConfig(small, p, COEFFS, ConstantInit(u0), t_end=1.0,
                    dt=2e-5, adaptive=False, record_every=10 ** 6)
    traj = simulate(cfg)
    got = traj.final.values[:, 0]
    want = _rk4(u0, p, 1.0, 1e-3)
    np.testing.assert_allclose(got, want, rtol=1e-4)
