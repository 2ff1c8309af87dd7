import math

import numpy as np
import pytest

from fracou import _accel
from fracou import shotnoise as SN
from fracou.errors import ValidationError
from fracou.sampling import empirical_cov, within_se

SPEC = SN.ShotNoiseSpec(lambda0=1.0, alpha=0.5, gamma=1.0, xi0=0.1)

# alpha = 1/2, gamma = 1, xi0 = 0.1; erfcx closed forms evaluated in mpmath
H0_SQ = {0.25: 0.11814731896484133, 1.0: 0.2258774396211804, 3.0: 0.30563589635875876}
H0_INT = {0.25: 0.16960101682634332, 1.0: 0.44924518454331175, 3.0: 0.8415648022814546}
COV_05_1 = 0.09625071687499208


def test_spec_validation():
    for kw in ({"lambda0": 0}, {"alpha": 1.2}, {"gamma": -1}, {"xi0": -0.1}, {"n": 0}, {"n": 1.5}):
        args = {"lambda0": 1.0, "alpha": 0.5} | kw
        with pytest.raises(ValidationError):
            SN.ShotNoiseSpec(**args)
    assert SPEC.with_n(10).rate == 10.0
    assert SPEC.k == pytest.approx(math.sqrt(2))


@pytest.mark.parametrize("t", sorted(H0_SQ))
def test_h0_squared_integral_oracle(t):
    assert SN.h0_squared_integral(t, SPEC) == pytest.approx(H0_SQ[t], rel=1e-12)
    assert SN.variance_theory(t, SPEC.with_n(7)) == pytest.approx(H0_SQ[t], rel=1e-12)


def test_h0_integral_oracle():
    t = np.array(sorted(H0_INT))
    np.testing.assert_allclose(SN.h0_integral(t, SPEC), [H0_INT[x] for x in t], rtol=1e-11)
    np.testing.assert_allclose(SN.mu_n(t, SPEC.with_n(3)), [3 * H0_INT[x] for x in t], rtol=1e-11)


def test_h0_integral_unsorted_and_zero():
    t = np.array([3.0, 0.0, 1.0])
    out = SN.h0_integral(t, SPEC)
    assert out[1] == 0.0
    assert out[0] == pytest.approx(H0_INT[3.0], rel=1e-11)


def test_covariance_oracle():
    assert SN.covariance_theory(0.5, 1.0, SPEC) == pytest.approx(COV_05_1, rel=1e-10)
    assert SN.covariance_theory(1.0, 0.5, SPEC) == pytest.approx(COV_05_1, rel=1e-10)
    assert SN.covariance_theory(1.0, 1.0, SPEC) == pytest.approx(H0_SQ[1.0], rel=1e-10)
    assert SN.covariance_theory(0.0, 1.0, SPEC) == 0.0


def test_response_h0_alpha_one_is_exponential():
    spec = SN.ShotNoiseSpec(1.0, 1.0, gamma=0.7, xi0=0.2)
    u = np.array([-1.0, 0.0, 0.5, 2.0])
    expect = np.where(u > 0, np.exp(-0.7 * 2 * (u + 0.2) / 2), 0.0)
    np.testing.assert_allclose(SN.response_h0(u, spec), expect, rtol=1e-14)


def test_response_h0_singular_without_offset():
    spec = SN.ShotNoiseSpec(1.0, 0.5, xi0=0.0)
    with pytest.raises(ValidationError):
        SN.response_h0(np.array([1e-14]), spec)
    assert SN.response_h0(1.0, spec) > 0


def test_simulation_deterministic(backend):
    grid = np.linspace(0.0, 2.0, 9)
    a = SN.simulate_un(SPEC.with_n(5), grid, 20, seed=4)
    b = SN.simulate_un(SPEC.with_n(5), grid, 20, seed=4)
    np.testing.assert_array_equal(a.paths, b.paths)
    assert a.meta["events"] > 0
    assert np.all(a.paths[:, 0] == 0.0)


def test_backends_agree():
    grid = np.linspace(0.0, 3.0, 13)
    with _accel.use_numba(True):
        a = SN.simulate_un(SPEC.with_n(10), grid, 50, seed=1).paths
    with _accel.use_numba(False):
        b = SN.simulate_un(SPEC.with_n(10), grid, 50, seed=1).paths
    np.testing.assert_allclose(a, b, rtol=0, atol=1e-11)


def test_uncentered_mean_and_variance():
    grid = np.array([0.25, 1.0, 3.0])
    spec = SPEC.with_n(4)
    sp = SN.simulate_un(spec, grid, 4000, seed=11, centered=False)
    mean = sp.paths.mean(axis=0)
    se = sp.paths.std(axis=0, ddof=1) / math.sqrt(sp.n_paths)
    assert np.all(within_se(mean, SN.mu_n(grid, spec) / 2.0, se, k=4.0))
    v = empirical_cov(sp, [(0, 0), (1, 1), (2, 2), (0, 1)])
    target = [H0_SQ[0.25], H0_SQ[1.0], H0_SQ[3.0], SN.covariance_theory(0.25, 1.0, spec)]
    assert np.all(within_se(v.estimate, target, v.std_error, k=4.0))


def test_event_budget():
    with pytest.raises(ValidationError):
        SN.simulate_un(SPEC.with_n(10**9), np.array([0.0, 2.0]), 1, seed=0)


def test_simulation_validation():
    with pytest.raises(ValidationError):
        SN.simulate_un(SN.ShotNoiseSpec(1.0, 0.5, xi0=0.0), np.array([1.0]), 2, seed=0)
    with pytest.raises(ValidationError):
        SN.simulate_un(SPEC, np.array([1.0]), 2, seed=-1)
    with pytest.raises(ValidationError):
        SN.simulate_un(SPEC, np.array([-1.0, 1.0]), 2, seed=0)


def test_w_moment_normalizations():
    spec = SPEC.with_n(16)
    p2 = SN.w_moment(spec, 1.0, 0.5, 2, "printed")
    c2 = SN.w_moment(spec, 1.0, 0.5, 2, "cumulant")
    assert p2 == pytest.approx(4 * c2, rel=1e-12)
    one = SPEC.with_n(1)
    assert SN.w_moment(one, 1.0, 0.5, 4, "printed") == pytest.approx(SN.w_moment(one, 1.0, 0.5, 4, "cumulant"), rel=1e-12)
    assert SN.w_moment(spec, 1.0, 0.0, 2) == 0.0
    with pytest.raises(ValidationError):
        SN.w_moment(spec, 1.0, 0.5, 3)
    with pytest.raises(ValidationError):
        SN.w_moment(spec, 1.0, 0.5, 2, "other")


def test_w_moment_cumulant_matches_direct_sum():
    # second moment of a compound Poisson sum is rate * int f^2
    spec = SPEC.with_n(1)
    s, rho = 1.0, 0.5
    y = np.linspace(0.0, s, 200001)
    d = SN.response_h0(s - y, spec) - SN.response_h0(s + rho - y, spec)
    ref = np.trapezoid(d**2, y)
    assert SN.w_moment(spec, s, rho, 2, "cumulant") == pytest.approx(ref, rel=1e-3)


def test_cgf_small_theta_gives_variance():
    theta = 1e-3
    c = SN.cgf_theory(SPEC.with_n(5), 1.0, theta)
    assert c / (theta**2 / 2) == pytest.approx(H0_SQ[1.0], rel=1e-3)


def test_cgf_approaches_gaussian_with_n():
    t, theta = 1.0, 1.0
    gauss = theta**2 / 2 * H0_SQ[t]
    gaps = [abs(SN.cgf_theory(SPEC.with_n(n), t, theta) - gauss) for n in (1, 10, 100, 1000)]
    assert all(b < a for a, b in zip(gaps, gaps[1:]))
    assert gaps[-1] < 0.05 * gauss


def test_cgf_matches_simulation():
    spec = SPEC.with_n(2)
    sp = SN.simulate_un(spec, np.array([1.0]), 20000, seed=6)
    e = np.exp(0.8 * sp.paths[:, 0])
    emp = math.log(e.mean())
    se = e.std(ddof=1) / math.sqrt(e.size) / e.mean()
    assert abs(emp - SN.cgf_theory(spec, 1.0, 0.8)) < 4 * se


def test_convergence_report_small():
    grid = np.linspace(0.0, 2.0, 5)
    rep = SN.convergence_report([SPEC.with_n(1), SPEC.with_n(50)], grid, 400, seed=3)
    assert rep["schema_version"] == 1
    assert [r["n"] for r in rep["rows"]] == [1, 50]
    with pytest.raises(ValidationError):
        SN.convergence_report([SPEC.with_n(5), SPEC.with_n(5)], grid, 10, seed=0)


def test_ks_at_n1_has_an_atom():
    # with rate*t = 2, a path has no event before t with probability e^-2 and
    # its centered value sits exactly at -mu; the empirical cdf is 0 below that
    # atom, so the KS distance is Phi(-mu/sigma) whatever the seed
    grid = np.array([0.0, 2.0])
    spec = SPEC.with_n(1)
    stats = []
    for seed in range(3):
        sp = SN.simulate_un(spec, grid, 2000, seed=seed)
        stats.append(SN.ks_against_limit(sp, 1, spec).statistic)
    from scipy.stats import norm

    mu = float(SN.mu_n(np.array([2.0]), spec)[0])
    expect = norm.cdf(-mu / math.sqrt(SN.variance_theory(2.0, spec)))
    np.testing.assert_allclose(stats, expect, rtol=1e-12)
