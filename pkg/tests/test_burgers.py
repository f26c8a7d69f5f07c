import math

import numpy as np
import pytest

from turbcloud.burgers import (BurgersConfig, BurgersState, EnsembleCurves, EnsembleResult, deposit_drag,
                               ensemble_experiment, equispaced_positions, eulerian_consistency, fit_effective_tau,
                               fit_tau_single, godunov_flux, histogram_state, homogeneous_curve,
                               homogeneous_discrete, homogeneous_solution, initial_state, relative_l2, run_ensemble,
                               run_lagrangian, step_eulerian_empirical, step_lagrangian, uniform_moment_state)
from turbcloud.burgers.core import EulerianMomentState, gas_flux_divergence, wrap
from turbcloud.errors import FitFailure, InvalidParameter, PositivityError, StabilityError

SMALL = BurgersConfig(n_cells=16, n_particles=16, dt=1e-3, t_end=0.5, record_every=5)


def _godunov_oracle(ul, ur):
    """Min of f over [ul, ur] when ul <= ur, max over [ur, ul] otherwise, on a dense grid plus endpoints."""
    lo, hi = min(ul, ur), max(ul, ur)
    grid = np.append(np.linspace(lo, hi, 20001), [0.0] if lo <= 0.0 <= hi else [])
    f = 0.5 * grid**2
    return f.min() if ul <= ur else f.max()


# -- homogeneous limit -------------------------------------------------------

def test_homogeneous_initial_and_limit():
    assert homogeneous_solution(0.0) == (1.0, 0.0)
    u, ul = homogeneous_solution(100.0, 1.0, 0.0, 1.0, 0.1)
    assert u == pytest.approx(0.5, abs=1e-15) and ul == pytest.approx(0.5, abs=1e-15)


def test_homogeneous_one_way_limit():
    t = np.linspace(0.0, 1.0, 11)
    u, ul = homogeneous_solution(t, 2.0, 0.0, 0.0, 0.25)
    assert np.all(u == 2.0)
    assert np.allclose(ul, 2.0 * (1 - np.exp(-t / 0.25)), rtol=0, atol=1e-15)


def test_homogeneous_validation():
    with pytest.raises(InvalidParameter):
        homogeneous_solution(0.0, kappa=-1.0)
    with pytest.raises(InvalidParameter):
        homogeneous_solution(0.0, tau_p=0.0)


def test_discrete_model_converges_to_closed_form():
    t = np.linspace(0.0, 0.5, 51)
    ref = homogeneous_solution(t)[0]
    e1 = np.abs(homogeneous_discrete(t, dt=1e-3)[0] - ref).max()
    e2 = np.abs(homogeneous_discrete(t, dt=5e-4)[0] - ref).max()
    assert e1 / e2 == pytest.approx(2.0, rel=0.05)


# -- flux and sources ----------------------------------------------------------

@pytest.mark.parametrize("ul,ur,want", [(0.7, 0.7, 0.245), (1.0, -1.0, 0.5), (-1.0, 1.0, 0.0),
                                        (2.0, 1.0, 2.0), (-1.0, -2.0, 2.0), (-2.0, 0.5, 0.0), (0.5, 2.0, 0.125)])
def test_godunov_flux_cases(ul, ur, want):
    assert godunov_flux(ul, ur) == pytest.approx(want, abs=1e-15)
    assert godunov_flux(ul, ur) == pytest.approx(_godunov_oracle(ul, ur), abs=1e-8)


def test_flux_divergence_telescopes():
    u = np.sin(np.linspace(0, 2 * np.pi, 32, endpoint=False)) + 0.3
    assert abs(gas_flux_divergence(u, 1.0 / 32).sum()) < 1e-12


def test_deposit_zero_at_equilibrium():
    cfg = SMALL
    st = initial_state(cfg, np.linspace(0.01, 0.99, cfg.n_particles))
    st.v[:] = cfg.u0_gas
    assert np.all(deposit_drag(st, cfg) == 0.0)


def test_deposit_single_particle():
    cfg = BurgersConfig(n_cells=8, n_particles=1, rho_f=2.0, tau_p=0.5)
    st = BurgersState(np.zeros((1, 8)), np.array([[0.3]]), np.array([[1.0]]))
    src = deposit_drag(st, cfg)
    j = int(0.3 / cfg.dx)
    assert src[0, j] == pytest.approx(cfg.m_p / (cfg.rho_f * cfg.dx * cfg.tau_p), rel=1e-15)
    assert np.count_nonzero(src) == 1


def test_deposit_uniform_matches_homogeneous_rhs():
    cfg = BurgersConfig(n_cells=16, n_particles=16, kappa_m=1.7)
    st = initial_state(cfg, equispaced_positions(cfg))
    src = deposit_drag(st, cfg)
    kappa = cfg.m_p * cfg.n_particles / (cfg.rho_f * cfg.length)
    assert np.allclose(src, kappa * (cfg.u0_particles - cfg.u0_gas) / cfg.tau_p, rtol=1e-14, atol=0)


def test_wrap_into_period():
    assert np.all(wrap(np.array([-1e-300, 1.0, 2.5, -0.25]), 1.0) == np.array([0.0, 0.0, 0.5, 0.75]))


# -- Lagrangian stepping -------------------------------------------------------

def test_global_equilibrium_is_fixed_point():
    cfg = BurgersConfig(n_cells=16, n_particles=10, u0_gas=0.4, u0_particles=0.4, dt=1e-3, t_end=0.1)
    st = initial_state(cfg, np.linspace(0.0, 0.9, 10))
    u0 = st.u.copy()
    for _ in range(100):
        st = step_lagrangian(st, cfg)
    assert np.array_equal(st.u, u0) and np.all(st.v == 0.4)


def test_cell_centres_follow_homogeneous_solution():
    cfg = BurgersConfig(n_cells=32, n_particles=32, dt=1e-4, t_end=0.5, record_every=10)
    t, gas, part = run_lagrangian(cfg, equispaced_positions(cfg)[None, :])
    assert np.abs(gas[0] - homogeneous_solution(t)[0]).max() < 1e-3
    assert np.abs(part[0] - homogeneous_solution(t)[1]).max() < 1e-3


def test_momentum_exchange_cancels_per_step():
    # both sides use the old cell velocity, so the exchange cancels to rounding
    cfg = SMALL
    st = initial_state(cfg, np.random.default_rng(0).uniform(size=(1, 16)))
    st.u[:] = 1.0 + 0.3 * np.cos(2 * np.pi * (np.arange(16) + 0.5) / 16)
    p0 = st.momentum(cfg)[0]
    for dt in (1e-3, 5e-4):
        assert abs(step_lagrangian(st, cfg, dt).momentum(cfg)[0] - p0) <= 1e-14


def test_momentum_exact_without_transport():
    cfg = BurgersConfig(n_cells=16, n_particles=16, u0_gas=0.0, u0_particles=1.0, dt=1e-3, t_end=0.1)
    st = initial_state(cfg, np.random.default_rng(1).uniform(size=(1, 16)))
    nxt = step_lagrangian(st, cfg)
    assert nxt.momentum(cfg)[0] == pytest.approx(st.momentum(cfg)[0], abs=1e-13)


def test_gas_integral_conserved_without_particles():
    cfg = BurgersConfig(n_cells=32, n_particles=4, kappa_m=0.0, dt=1e-3, t_end=0.1)
    st = initial_state(cfg, np.zeros((1, 4)))
    st.u[:] = 1.0 + 0.5 * np.sin(2 * np.pi * (np.arange(32) + 0.5) / 32)
    total = st.u.sum()
    for _ in range(100):
        st = step_lagrangian(st, cfg)
    assert abs(st.u.sum() - total) < 1e-12


def test_cfl_violation_names_admissible_dt():
    with pytest.raises(StabilityError) as exc:
        step_lagrangian(initial_state(SMALL, equispaced_positions(SMALL)), SMALL, dt=0.1)
    assert exc.value.admissible_dt == pytest.approx(0.5 * SMALL.dx / 1.0)


def test_integer_cell_shift_invariance():
    cfg = SMALL
    x = np.random.default_rng(2).uniform(size=16)
    _, g1, _ = run_lagrangian(cfg, x[None, :])
    _, g2, _ = run_lagrangian(cfg, wrap(x + 3 * cfg.dx, 1.0)[None, :])
    assert np.allclose(g1, g2, rtol=0, atol=1e-14)


def test_batched_rows_are_independent():
    cfg = SMALL
    x = np.random.default_rng(3).uniform(size=(3, 16))
    _, g, _ = run_lagrangian(cfg, x)
    _, g1, _ = run_lagrangian(cfg, x[1:2])
    assert np.array_equal(g[1], g1[0])


# -- Eulerian moments ------------------------------------------------------------

def test_uniform_moments_follow_homogeneous_solution():
    cfg = BurgersConfig(n_cells=32, n_particles=32, dt=1e-4, t_end=0.5)
    st = uniform_moment_state(cfg, n_density=cfg.n_particles / cfg.length)
    for _ in range(cfg.steps):
        st = step_eulerian_empirical(st, cfg)
    u_ref, ul_ref = homogeneous_solution(0.5)
    assert abs(st.u.mean() - u_ref) < 1e-3 and abs(st.velocity().mean() - ul_ref) < 1e-3


def test_vacuum_leaves_pure_burgers():
    cfg = BurgersConfig(n_cells=32, n_particles=4, dt=1e-3, t_end=0.1)
    u = 1.0 + 0.5 * np.sin(2 * np.pi * (np.arange(32) + 0.5) / 32)
    st = EulerianMomentState(np.zeros((1, 32)), np.zeros((1, 32)), u[None, :].copy())
    ref = u.copy()
    for _ in range(100):
        st = step_eulerian_empirical(st, cfg)
        ref = ref - cfg.dt * gas_flux_divergence(ref, cfg.dx)
    assert np.array_equal(st.u[0], ref) and np.all(st.n == 0.0)


def test_eulerian_rest_state_is_fixed_point():
    cfg = BurgersConfig(n_cells=16, n_particles=16, u0_gas=0.0, u0_particles=0.0, dt=1e-3, t_end=0.1)
    st = histogram_state(cfg, np.random.default_rng(4).uniform(size=(1, 16)))
    n0 = st.n.copy()
    for _ in range(50):
        st = step_eulerian_empirical(st, cfg)
    assert np.array_equal(st.n, n0) and np.all(st.u == 0.0) and np.all(st.q == 0.0)


def test_histogram_counts_particles():
    cfg = SMALL
    st = histogram_state(cfg, np.random.default_rng(5).uniform(size=(2, 16)))
    assert np.allclose(st.n.sum(axis=1) * cfg.dx, 16.0)


def _overdriven_state():
    n = np.zeros((1, 8))
    n[0, 3] = 1.0
    q = np.zeros((1, 8))
    q[0, 3] = 3.0
    return EulerianMomentState(n, q, np.zeros((1, 8)))


def test_negative_density_raises_when_configured():
    # disperse Courant number 2.4: the donor cell empties past zero
    cfg = BurgersConfig(n_cells=8, n_particles=8, dt=0.1, t_end=0.1, tau_p=1.0, on_negative_density="raise")
    with pytest.raises(PositivityError):
        step_eulerian_empirical(_overdriven_state(), cfg, check=False)
    with pytest.raises(StabilityError):
        step_eulerian_empirical(_overdriven_state(), cfg)


def test_negative_density_clipped_and_counted():
    cfg = BurgersConfig(n_cells=8, n_particles=8, dt=0.1, t_end=0.1, tau_p=1.0)
    st = step_eulerian_empirical(_overdriven_state(), cfg, check=False)
    assert st.clips == 1 and len(st.clip_log) == 1 and np.all(st.n >= 0.0)


def test_lagrangian_and_eulerian_agree_at_cell_centres():
    cfg = BurgersConfig(n_cells=32, n_particles=32, dt=1e-4, t_end=0.5, record_every=10)
    pos = equispaced_positions(cfg)[None, :]
    _, g_lag, _ = run_lagrangian(cfg, pos)
    st = histogram_state(cfg, pos)
    g_eul = [st.u.mean()]
    for s in range(cfg.steps):
        st = step_eulerian_empirical(st, cfg)
        if (s + 1) % 10 == 0:
            g_eul.append(st.u.mean())
    l1 = np.abs(np.array(g_eul) - g_lag[0]).mean() * cfg.t_end
    assert l1 <= cfg.dx


# -- ensembles ---------------------------------------------------------------------

def test_ensemble_independent_of_workers():
    a = run_ensemble(SMALL, 8, 60, rng=1, workers=1)
    b = run_ensemble(SMALL, 8, 60, rng=1, workers=2)
    assert np.array_equal(a.gas, b.gas)


def test_stderr_shrinks_with_reps():
    se1 = run_ensemble(SMALL, 4, 50, rng=2, workers=1).stderr_gas[-1]
    se4 = run_ensemble(SMALL, 4, 200, rng=3, workers=1).stderr_gas[-1]
    assert 0.35 <= se4 / se1 <= 0.65


def test_ensemble_experiment_table():
    res = ensemble_experiment(SMALL, [2, 4, 8], reps=20, rng=4, workers=1)
    names, rows = res.curve_columns()
    assert names[:2] == ["t", "homogeneous_gas_velocity"] and rows.shape[1] == 2 + 3 * 3
    assert res.fit is not None and math.isfinite(res.fit.slope)
    with pytest.raises(InvalidParameter):
        ensemble_experiment(SMALL, [0, 4], reps=2)


def test_tau_fit_recovers_homogeneous_tau():
    cfg = SMALL
    t = cfg.record_times()
    curve = homogeneous_curve(cfg, t, discrete=True)
    assert abs(fit_tau_single(cfg, t, curve) - cfg.tau_p) <= 1e-6 * cfg.tau_p


def test_tau_fit_line_through_homogeneous_curves():
    cfg = SMALL
    t = cfg.record_times()
    curve = homogeneous_curve(cfg, t, discrete=True)
    curves = [EnsembleCurves(n, t, curve[None, :], curve[None, :]) for n in (8, 16, 32, 64)]
    fit = fit_effective_tau(EnsembleResult(cfg, curves, np.zeros(4), None))
    assert fit.intercept == pytest.approx(cfg.tau_p, abs=2e-6 * cfg.tau_p)
    assert abs(fit.alpha) <= 1e-4


def test_tau_fit_reports_unbracketed_minimum():
    cfg = SMALL
    t = cfg.record_times()
    with pytest.raises(FitFailure) as exc:
        fit_tau_single(cfg, t, np.full(t.shape, cfg.u0_gas))
    assert exc.value.interval[1] > exc.value.interval[0]


def test_tau_fit_needs_four_counts():
    cfg = SMALL
    t = cfg.record_times()
    c = EnsembleCurves(4, t, np.ones((1, t.size)), np.ones((1, t.size)))
    with pytest.raises(InvalidParameter):
        fit_effective_tau(EnsembleResult(cfg, [c, c, c], np.zeros(3), None))


def test_relative_l2():
    t = np.linspace(0, 1, 11)
    assert relative_l2(t, np.full(11, 1.1), np.ones(11)) == pytest.approx(0.1)


def test_eulerian_consistency_small():
    res = eulerian_consistency(SMALL, np_list=(4, 16), reps=20, rng=5, workers=1)
    names, rows = res.columns()
    assert names == ["Np", "rel_l2", "density_clips"] and len(rows) == 2
    assert np.all(res.rel_l2 < 0.1)


def test_config_validation():
    with pytest.raises(InvalidParameter):
        BurgersConfig(n_cells=3)
    with pytest.raises(InvalidParameter):
        BurgersConfig(length=0.0)
    with pytest.raises(InvalidParameter):
        BurgersConfig(t_end=0.5, dt=0.3).steps
    assert BurgersConfig(kappa_m=2.0, n_particles=4).m_p == pytest.approx(0.5)
