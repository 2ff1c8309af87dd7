import math

import numpy as np
import pytest

from fracou import kernels as K
from fracou import sampling as S
from fracou import subord
from fracou.errors import NumericalError, ValidationError
from fracou.fracops import TimeGrid

LATTICE = np.array([0.25, 0.5, 1.0, 1.5, 2.0, 3.0, 4.0, 5.0])


def test_normals_are_per_path_streams():
    a = S.normals(11, 6, 20)
    b = S.normals(11, 3, 20, start=3)
    np.testing.assert_array_equal(a[3:], b)
    assert not np.array_equal(S.normals(12, 1, 20), a[:1])


def test_normals_independent_of_workers():
    np.testing.assert_array_equal(S.normals(5, 40, 16, workers=1), S.normals(5, 40, 16, workers=4))


def test_normals_moments():
    z = S.normals(1, 200, 500).ravel()
    assert abs(z.mean()) < 4 / math.sqrt(z.size)
    assert abs(z.var() - 1) < 4 * math.sqrt(2 / z.size)


def test_seed_validation():
    with pytest.raises(ValidationError):
        S.normals(-1, 2, 2)
    with pytest.raises(ValidationError):
        S.normals(2**64, 2, 2)


def test_sample_gaussian_deterministic(backend):
    k = K.KernelSpec("stationary", K.ProcessParams(0.5))
    a = S.sample_gaussian(k, LATTICE, 50, seed=3, workers=1)
    b = S.sample_gaussian(k, LATTICE, 50, seed=3, workers=3)
    np.testing.assert_array_equal(a.paths, b.paths)
    # a path does not depend on how many others were drawn with it
    c = S.sample_gaussian(k, LATTICE, 10, seed=3)
    np.testing.assert_allclose(a.paths[:10], c.paths, rtol=0, atol=1e-14)


def test_backends_agree_on_paths():
    from fracou import _accel

    k = K.KernelSpec("fractional_ou", K.ProcessParams(0.7))
    with _accel.use_numba(True):
        a = S.sample_gaussian(k, LATTICE, 30, seed=9).paths
    with _accel.use_numba(False):
        b = S.sample_gaussian(k, LATTICE, 30, seed=9).paths
    np.testing.assert_allclose(a, b, rtol=0, atol=1e-12)


def test_factorize_pins_zero_variance_rows():
    G = np.diag([0.0, 1.0, 2.0])
    L, eps, active = S.factorize(G)
    assert eps == 0.0
    assert active.tolist() == [False, True, True]
    np.testing.assert_allclose(L @ L.T, np.diag([1.0, 2.0]))


def test_factorize_uses_jitter_then_fails():
    v = np.array([1.0, 1.0, 1.0])
    G = np.outer(v, v)  # rank one
    L, eps, _ = S.factorize(G)
    assert eps > 0
    with pytest.raises(NumericalError):
        S.factorize(np.array([[1.0, 2.0], [2.0, 1.0]]))
    with pytest.raises(NumericalError):
        S.factorize(np.diag([1.0, -1.0]))


def test_time_changed_ou_pins_t0():
    k = K.KernelSpec("time_changed_ou", K.ProcessParams(0.5))
    sp = S.sample_gaussian(k, np.array([0.0, 1.0, 2.0]), 20, seed=1)
    assert np.all(sp.paths[:, 0] == 0.0)
    assert sp.meta["pinned_nodes"] == 1


@pytest.mark.parametrize("model", ["stationary", "fractional_ou", "time_changed_ou"])
def test_small_mc_covariance(model):
    k = K.KernelSpec(model, K.ProcessParams(0.6, 1.0, 2.0))
    sp = S.sample_gaussian(k, LATTICE, 4000, seed=17)
    rep = S.empirical_cov(sp)
    # 36 entries at 4 s.e. keeps the false-failure rate negligible
    assert np.all(S.within_se(rep.estimate, k.gram(LATTICE), rep.std_error, k=4.0))


def test_brownian_rep_matches_factorization():
    p = K.ProcessParams(0.5)
    a = S.sample_gaussian(K.KernelSpec("time_changed_ou", p), LATTICE, 4000, seed=2)
    b = S.sample_brownian_rep(p, LATTICE, 4000, seed=3)
    res = S.compare_estimates(S.empirical_cov(a), S.empirical_cov(b), k=4.0)
    assert res["passed"], res


def test_brownian_rep_generalized():
    spec = subord.GeneralizedKernelSpec("X_g", subord.BernsteinSpec.cpe(1.0), gamma=1.0, theta=1.0)
    x = np.array([0.5, 1.0, 2.0, 4.0])
    sp = S.sample_brownian_rep(spec, x, 4000, seed=4)
    rep = S.empirical_cov(sp)
    assert np.all(S.within_se(rep.estimate, spec.gram(x), rep.std_error, k=4.0))


def test_brownian_rep_unsorted_grid():
    p = K.ProcessParams(0.5)
    x = np.array([2.0, 0.5, 1.0])
    a = S.sample_brownian_rep(p, x, 5, seed=1).paths
    b = S.sample_brownian_rep(p, np.sort(x), 5, seed=1).paths
    np.testing.assert_allclose(a[:, [1, 2, 0]], b)


def test_time_changed_bm_rejects_decreasing_clock():
    with pytest.raises(NumericalError):
        S.sample_time_changed_bm(np.array([1.0, 0.5]), np.ones(2), np.array([0.0, 1.0]), 2, seed=0)


def test_jackknife_se_matches_normal_theory():
    # for Gaussian data Var(sample variance) = 2 sigma^4 / (n - 1)
    X = S.normals(21, 20000, 1) * 2.0
    rep = S.empirical_cov(X)
    assert rep.std_error[0, 0] == pytest.approx(math.sqrt(2 * 16 / (20000 - 1)), rel=0.05)
    np.testing.assert_allclose(rep.estimate, np.cov(X.T, ddof=1).reshape(1, 1))


def test_empirical_cov_pairs_and_mean():
    X = S.normals(3, 100, 4)
    full = S.empirical_cov(X)
    part = S.empirical_cov(X, [(0, 1), (2, 3)])
    np.testing.assert_allclose(part.estimate, [full.estimate[0, 1], full.estimate[2, 3]])
    np.testing.assert_allclose(part.std_error, [full.std_error[0, 1], full.std_error[2, 3]])
    m = S.empirical_mean(X)
    np.testing.assert_allclose(m.estimate, X.mean(axis=0))
    with pytest.raises(ValidationError):
        S.empirical_cov(X[:1])


def test_memory_exponent_exact_power():
    s = np.logspace(2, 4, 30)
    rep = S.memory_exponent(3 * s**-0.4, s)
    assert rep.estimate == pytest.approx(-0.4, abs=1e-12)
    assert not rep.extra["curvature_flag"]


def test_memory_exponent_flags_curvature():
    s = np.logspace(0, 3, 30)
    rep = S.memory_exponent(np.exp(-s / 200), s)
    assert rep.extra["curvature_flag"]


def test_memory_exponent_validation():
    s = np.logspace(0, 1, 20)
    with pytest.raises(ValidationError):
        S.memory_exponent(s**-1, s)
    s = np.logspace(0, 3, 20)
    with pytest.raises(ValidationError):
        S.memory_exponent(-(s**-1), s)


@pytest.mark.parametrize("alpha", [0.3, 0.5, 0.8])
def test_psd_check_passes(alpha):
    pts = np.sort(np.random.default_rng(0).uniform(0, 10, 64))
    for model in ("stationary", "fractional_ou"):
        rep = S.psd_check(K.KernelSpec(model, K.ProcessParams(alpha)), pts)
        assert rep.passed, rep


def test_psd_check_rejects_non_psd():
    rep = S.psd_check(lambda s, t: np.cos(3 * (s - t)) - 0.5, np.linspace(0, 5, 20))
    assert not rep.passed


def test_scaled_bm_variance_and_increments():
    alpha = 0.5
    grid = TimeGrid(0.0, 10.0, 100)
    sp = S.sample_scaled_bm(alpha, grid.nodes[1:], 4000, seed=8)
    v = S.empirical_cov(sp, [(i, i) for i in range(sp.n_nodes)])
    assert np.all(S.within_se(v.estimate, sp.times**alpha, v.std_error, k=4.0))
    # equal-length increments early and late have different variances
    inc = np.diff(sp.paths, axis=1)
    early = S.empirical_cov(inc[:, :1], [(0, 0)])
    late = S.empirical_cov(inc[:, -1:], [(0, 0)])
    gap = early.estimate[0] - late.estimate[0]
    assert gap > 5 * math.hypot(early.std_error[0], late.std_error[0])
    with pytest.raises(ValidationError):
        S.sample_scaled_bm(1.5, grid, 2, seed=0)
