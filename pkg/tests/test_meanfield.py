import math

import numpy as np
import pytest

from oracles import brute_force_w2
from turbcloud.errors import CouplingOrderError, InvalidInput, InvalidParameter, SizeError, UnsupportedConfiguration
from turbcloud.meanfield import (ChaosConfig, ExternalFieldSpec, GaussianLaw, KernelSpec, MeanFieldSystem,
                                 chaos_convergence_experiment, convolve_law, em_step_fictive, em_step_interacting,
                                 evolve_gaussian_law, law_trajectory)
from turbcloud.rng import RngStream
from turbcloud.turbulence import SpectrumParams, sample_field
from turbcloud.wasserstein import wasserstein2_1d, wasserstein2_exact_small


def _system(n=6, d=1, sigma=0.0, lam=1.0, field=None, seed=1):
    s = RngStream(seed)
    return MeanFieldSystem.from_initial(s.standard_normal((n, d)), s.standard_normal((n, d)), sigma,
                                        KernelSpec(lam=lam), field)


# -- wasserstein ------------------------------------------------------------

def test_w2_1d_identity_and_atoms():
    a = RngStream(1).standard_normal(20)
    assert wasserstein2_1d(a, a) == 0.0
    assert wasserstein2_1d([0.0], [1.0]) == 1.0
    assert wasserstein2_1d([0.0, 2.0], [1.0, 3.0]) == 1.0


def test_w2_1d_unequal_counts():
    with pytest.raises(InvalidInput):
        wasserstein2_1d([0.0, 1.0], [0.0])


def test_w2_exact_permutation_and_translation():
    a = RngStream(2).standard_normal((10, 2))
    assert wasserstein2_exact_small(a, a[::-1]) == 0.0
    v = np.array([3.0, -4.0])
    assert wasserstein2_exact_small(a, a + v) == pytest.approx(5.0, rel=1e-14)


def test_w2_exact_size_cap():
    with pytest.raises(SizeError):
        wasserstein2_exact_small(np.zeros((5, 1)), np.zeros((5, 1)), max_size=4)


def test_w2_exact_matches_brute_force():
    s = RngStream(3)
    for _ in range(10):
        a, b = s.standard_normal((8, 2)), s.standard_normal((8, 2))
        assert wasserstein2_exact_small(a, b) == brute_force_w2(a, b)


def test_w2_1d_matches_assignment():
    s = RngStream(4)
    for _ in range(20):
        a, b = s.standard_normal(30), s.standard_normal(30)
        assert wasserstein2_1d(a, b) == pytest.approx(wasserstein2_exact_small(a, b), rel=1e-13)


# -- kernels and fields -----------------------------------------------------

def test_kernel_is_odd():
    z = RngStream(5).standard_normal((10**4, 4))
    for k in (KernelSpec(lam=1.7), KernelSpec("custom_coefficients", coef_x=(1, 2, 3, 4), coef_c=(0, -1, 2, 0.5))):
        x, c = z[:, :2], z[:, 2:]
        assert np.abs(k(x, c) + k(-x, -c)).max() <= 1e-12
        assert np.all(k(np.zeros(2), np.zeros(2)) == 0.0)


def test_kernel_validation():
    with pytest.raises(InvalidParameter):
        KernelSpec(kind="quadratic")
    with pytest.raises(InvalidParameter):
        KernelSpec(kind="custom_coefficients")


def test_field_lipschitz_constants():
    assert ExternalFieldSpec().lipschitz() == 0.0
    assert ExternalFieldSpec("uniform_drag_to", u_const=2.0, tau=0.5).lipschitz() == 2.0
    f = sample_field(SpectrumParams(n_modes=4, dim=2), RngStream(1))
    g = ExternalFieldSpec("synthetic_field_drag", tau=0.5, field=f)
    assert math.isfinite(g.lipschitz()) and g.lipschitz() >= 2.0
    with pytest.raises(UnsupportedConfiguration):
        g.affine(2)


def test_gaussian_law_validation():
    with pytest.raises(InvalidParameter):
        GaussianLaw(np.zeros(2), np.array([[1.0, 0.5], [0.0, 1.0]]))
    with pytest.raises(InvalidParameter):
        GaussianLaw(np.zeros(2), -np.eye(2))


# -- interacting step -------------------------------------------------------

def test_free_streaming_is_ballistic():
    sys = _system(lam=0.0)
    x0, c0 = sys.x.copy(), sys.c.copy()
    for k in range(10):
        em_step_interacting(sys, k * 0.1, 0.1, rng=RngStream(1))
    assert np.allclose(sys.x, x0 + 1.0 * c0, rtol=0, atol=1e-14)
    assert np.array_equal(sys.c, c0)


def test_single_particle_has_no_self_interaction():
    a = MeanFieldSystem.from_initial([0.3], [1.2], 0.4, KernelSpec(lam=5.0))
    b = MeanFieldSystem.from_initial([0.3], [1.2], 0.4, KernelSpec(lam=0.0))
    em_step_interacting(a, 0.0, 0.01, noise=[[0.7]])
    em_step_interacting(b, 0.0, 0.01, noise=[[0.7]])
    assert a.c[0, 0] == b.c[0, 0]


def test_alignment_conserves_mean_velocity():
    sys = _system(n=50, d=2)
    m0 = sys.c.mean(axis=0)
    for k in range(200):
        em_step_interacting(sys, k * 0.01, 0.01)
    assert np.abs(sys.c.mean(axis=0) - m0).max() < 1e-13


def test_dt_must_be_positive():
    with pytest.raises(InvalidParameter):
        em_step_interacting(_system(), 0.0, 0.0)


# -- fictive step -----------------------------------------------------------

def test_fictive_step_needs_noise():
    with pytest.raises(CouplingOrderError):
        em_step_fictive(_system(), GaussianLaw.standard(), 0.0, 0.01)


def test_point_mass_convolution():
    law = GaussianLaw.point_mass([0.5], [2.0])
    assert convolve_law(KernelSpec(lam=3.0), law, np.array([[1.0]]), np.array([[1.5]]))[0, 0] == 1.5


def test_gaussian_convolution_matches_monte_carlo():
    law = GaussianLaw([0.2, -0.7], [[1.0, 0.3], [0.3, 0.5]])
    k = KernelSpec(lam=1.3)
    x, c = np.array([[0.4]]), np.array([[1.1]])
    z = law.sample(10**6, RngStream(6))
    mc = k(x - z[:, :1], c - z[:, 1:]).mean()
    assert mc == pytest.approx(convolve_law(k, law, x, c)[0, 0], rel=1e-3)


def test_zero_coupling_systems_coincide_bitwise():
    sys = _system(n=20, d=2, sigma=0.5, lam=0.0)
    laws = law_trajectory(GaussianLaw.standard(2), sys.field, sys.kernel, 0.5, 0.01, 50)
    rng = RngStream(7)
    for k in range(50):
        em_step_interacting(sys, k * 0.01, 0.01, rng=rng)
        em_step_fictive(sys, laws[k], k * 0.01, 0.01)
        assert np.array_equal(sys.x, sys.xbar) and np.array_equal(sys.c, sys.cbar)


def test_exchangeability():
    s = RngStream(8)
    x0, c0, xi = s.standard_normal((5, 1)), s.standard_normal((5, 1)), s.standard_normal((30, 5, 1))
    perm = np.array([3, 0, 4, 1, 2])
    a = MeanFieldSystem.from_initial(x0, c0, 0.5)
    b = MeanFieldSystem.from_initial(x0[perm], c0[perm], 0.5)
    for k in range(30):
        em_step_interacting(a, k * 0.01, 0.01, noise=xi[k])
        em_step_interacting(b, k * 0.01, 0.01, noise=xi[k][perm])
    assert np.allclose(a.x[perm], b.x, rtol=0, atol=1e-14)


# -- Gaussian law -----------------------------------------------------------

def test_point_mass_at_rest_stays_put():
    law = GaussianLaw.point_mass([1.0], [0.0])
    out = evolve_gaussian_law(law, ExternalFieldSpec(), KernelSpec(lam=2.0), 0.0, 1.0, substeps=10)
    assert np.all(out.cov == 0.0) and np.array_equal(out.mean, law.mean)


def test_alignment_keeps_mean_velocity():
    law = GaussianLaw([0.0, 0.8], np.eye(2))
    out = law_trajectory(law, ExternalFieldSpec(), KernelSpec(lam=1.0), 0.5, 0.01, 100)[-1]
    assert out.mean_c[0] == pytest.approx(0.8, abs=1e-14)
    assert out.mean_x[0] == pytest.approx(0.8, abs=1e-12)


def test_ou_stationary_variance():
    sigma, tau = 0.6, 0.5
    field = ExternalFieldSpec("uniform_drag_to", u_const=0.0, tau=tau)
    out = evolve_gaussian_law(GaussianLaw.standard(1), field, KernelSpec(lam=0.0), sigma, 20.0, substeps=2000)
    assert out.cov[1, 1] == pytest.approx(sigma**2 * tau, rel=1e-10)
    # long-run Monte Carlo of the same OU velocity
    s = RngStream(9)
    c = s.standard_normal(20000)
    dt = 0.005
    for _ in range(2000):
        c = c - dt * c / tau + math.sqrt(2 * dt) * sigma * s.standard_normal(20000)
    assert c.var() == pytest.approx(sigma**2 * tau, rel=0.05)


def test_nonaffine_law_rejected():
    f = sample_field(SpectrumParams(n_modes=2, dim=1), RngStream(1))
    with pytest.raises(UnsupportedConfiguration):
        evolve_gaussian_law(GaussianLaw.standard(1), ExternalFieldSpec("synthetic_field_drag", field=f),
                            KernelSpec(), 0.5, 0.1)


def test_fictive_ensemble_tracks_gaussian_law():
    n, dt, steps, sigma = 10**5, 1e-3, 500, 0.5
    field = ExternalFieldSpec("uniform_drag_to", u_const=0.3, tau=0.7)
    kernel = KernelSpec(lam=1.0)
    laws = law_trajectory(GaussianLaw.standard(1), field, kernel, sigma, dt, steps)
    s = RngStream(10)
    z = s.standard_normal((n, 2))
    sys = MeanFieldSystem.from_initial(z[:, 0], z[:, 1], sigma, kernel, field)
    for k in range(steps):
        sys.noise = s.standard_normal((n, 1))
        em_step_fictive(sys, laws[k], k * dt, dt)
        if (k + 1) % 100 == 0:
            zz = np.concatenate([sys.xbar, sys.cbar], axis=1)
            law = laws[k + 1]
            mean_se = np.sqrt(np.diag(law.cov) / n)
            assert np.all(np.abs(zz.mean(axis=0) - law.mean) < 5 * mean_se)
            cov = np.cov(zz.T)
            var_se = np.sqrt((law.cov**2 + np.outer(np.diag(law.cov), np.diag(law.cov))) / n)
            assert np.all(np.abs(cov - law.cov) < 5 * var_se)


# -- experiment -------------------------------------------------------------

def test_chaos_without_interaction_is_degenerate():
    res = chaos_convergence_experiment(ChaosConfig(ns=(4, 8), reps=3, lam=0.0, t_end=0.05, dt=0.01), rng=1,
                                       workers=1)
    assert np.all(res.per_rep["mean_sq_coupling_dist"] == 0.0)
    assert res.footer()["mean_sq_coupling_dist_slope"] == "degenerate"
    assert res.footer()["w2sq_onepoint_slope"] == "insufficient"
    # fresh samples of f_t still differ from the particles
    assert np.all(res.means("w2sq_onepoint") > 0)


def test_chaos_columns_and_validation():
    res = chaos_convergence_experiment(ChaosConfig(ns=(4, 8, 16), reps=4, t_end=0.1, dt=0.01), rng=2, workers=1)
    names, rows = res.columns()
    assert names[:5] == ["N", "mean_sq_coupling_dist", "w2sq_onepoint", "w2sq_pairs", "w2sq_bias"]
    assert [r[0] for r in rows] == [4, 8, 16]
    assert np.all(np.isfinite(np.asarray(rows, dtype=float)))
    with pytest.raises(InvalidParameter):
        chaos_convergence_experiment(ChaosConfig(ns=(8,), reps=2, t_end=0.1, dt=0.01))
    with pytest.raises(InvalidParameter):
        ChaosConfig(t_end=0.105, dt=0.01).steps


def test_chaos_independent_of_workers():
    cfg = ChaosConfig(ns=(4, 8), reps=5, t_end=0.05, dt=0.01)
    a = chaos_convergence_experiment(cfg, rng=3, workers=1)
    b = chaos_convergence_experiment(cfg, rng=3, workers=2)
    for name in a.per_rep:
        assert np.array_equal(a.per_rep[name], b.per_rep[name])
