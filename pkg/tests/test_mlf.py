import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate, special

from fracou import mlf
from fracou.errors import AccuracyError, ValidationError

# (beta, gam, x, E_{beta,gam}(x)) from mpmath: direct summation at 40+ digits
# working precision (grown with |x|), and for the last twelve rows the
# completely-monotone integral representation of E_{beta,1}(-x).
ORACLE = [
    (0.3, 1.0, 0.5, 2.0620157899559994),
    (0.3, 1.0, -0.5, 0.6326490059435991),
    (0.3, 1.0, -2.0, 0.29023222616787536),
    (0.3, 0.3, 0.5, 1.1694769581219358),
    (0.3, 0.3, -0.5, 0.14375650014722127),
    (0.3, 0.3, -2.0, 0.032062399218847494),
    (0.3, 0.5, 0.5, 1.5196111396142773),
    (0.3, 0.5, -0.5, 0.30363310176042707),
    (0.3, 0.5, -2.0, 0.11108548030647704),
    (0.3, 2.0, 0.5, 1.712064634648325),
    (0.3, 2.0, -0.5, 0.696763977597299),
    (0.3, 2.0, -2.0, 0.3603766435540464),
    (0.5, 1.0, 0.5, 1.952360489182557),
    (0.5, 1.0, -0.5, 0.6156903441929259),
    (0.5, 1.0, -2.0, 0.25539567631050575),
    (0.5, 1.0, -8.0, 0.06998516620088092),
    (0.5, 1.0, -20.0, 0.02817434874105132),
    (0.5, 0.5, 0.5, 1.5403698281390348),
    (0.5, 0.5, -0.5, 0.25634441145129333),
    (0.5, 0.5, -2.0, 0.0533982309267448),
    (0.5, 0.5, -8.0, 0.004308253940708866),
    (0.5, 0.5, -20.0, 0.0007026087267299006),
    (0.5, 0.5, 0.5, 1.5403698281390348),
    (0.5, 0.5, -0.5, 0.25634441145129333),
    (0.5, 0.5, -2.0, 0.0533982309267448),
    (0.5, 0.5, -8.0, 0.004308253940708866),
    (0.5, 0.5, -20.0, 0.0007026087267299006),
    (0.5, 2.0, 0.5, 1.5526836225392033),
    (0.5, 2.0, -0.5, 0.7195197109627286),
    (0.5, 2.0, -2.0, 0.37803850262538274),
    (0.5, 2.0, -8.0, 0.12651591410882784),
    (0.5, 2.0, -20.0, 0.053989394226628254),
    (0.7, 1.0, 0.5, 1.8249850568512025),
    (0.7, 1.0, -0.5, 0.6051475920595643),
    (0.7, 1.0, -2.0, 0.21378672701529727),
    (0.7, 1.0, -8.0, 0.04606999238536238),
    (0.7, 1.0, -20.0, 0.017395698291603978),
    (0.7, 1.0, -60.0, 0.00564627516688042),
    (0.7, 0.7, 0.5, 1.6711092247431754),
    (0.7, 0.7, -0.5, 0.38661080082252713),
    (0.7, 0.7, -2.0, 0.07735822433852123),
    (0.7, 0.7, -8.0, 0.004401065643100335),
    (0.7, 0.7, -20.0, 0.0006329972460096978),
    (0.7, 0.7, -60.0, 6.675388694509115e-05),
    (0.7, 0.5, 0.5, 1.485844893721836),
    (0.7, 0.5, -0.5, 0.2110743773652226),
    (0.7, 0.5, -2.0, -0.014883236157535467),
    (0.7, 0.5, -8.0, -0.019002424510624585),
    (0.7, 0.5, -20.0, -0.008294519443159709),
    (0.7, 0.5, -60.0, -0.0028347880787224686),
    (0.7, 2.0, 0.5, 1.430105447512201),
    (0.7, 2.0, -0.5, 0.7448074057489266),
    (0.7, 2.0, -2.0, 0.3968382796510441),
    (0.7, 2.0, -8.0, 0.1286619213824388),
    (0.7, 2.0, -20.0, 0.054022893620845815),
    (0.7, 2.0, -60.0, 0.018383760085541396),
    (0.9, 1.0, 0.5, 1.704308722099399),
    (0.9, 1.0, -0.5, 0.603405498695861),
    (0.9, 1.0, -2.0, 0.16352830001693006),
    (0.9, 1.0, -8.0, 0.01709514458079681),
    (0.9, 1.0, -20.0, 0.0057495078161091135),
    (0.9, 1.0, -60.0, 0.001802234031284615),
    (0.9, 0.9, 0.5, 1.6742480910659137),
    (0.9, 0.9, -0.5, 0.5319023515684373),
    (0.9, 0.9, -2.0, 0.11059802429320847),
    (0.9, 0.9, -8.0, 0.0025808143045736157),
    (0.9, 0.9, -20.0, 0.00028402595741192646),
    (0.9, 0.9, -60.0, 2.781905760817737e-05),
    (0.9, 0.5, 0.5, 1.4042134129976267),
    (0.9, 0.5, -0.5, 0.1713802754676761),
    (0.9, 0.5, -2.0, -0.10282482036797025),
    (0.9, 0.5, -8.0, -0.03912629892556175),
    (0.9, 0.5, -20.0, -0.01424182912702877),
    (0.9, 0.5, -60.0, -0.0045623090729313065),
    (0.9, 2.0, 0.5, 1.336112340231969),
    (0.9, 2.0, -0.5, 0.7724538082977406),
    (0.9, 2.0, -2.0, 0.4189605644650877),
    (0.9, 2.0, -8.0, 0.12737741429596877),
    (0.9, 2.0, -20.0, 0.05197994672988064),
    (0.9, 2.0, -60.0, 0.017457325073989487),
    (1.5, 1.0, 0.5, 1.4202702357049506),
    (1.5, 1.0, -0.5, 0.6632367948724279),
    (1.5, 1.0, -2.0, 0.02943068560282647),
    (1.5, 1.0, -8.0, -0.20287153923872817),
    (1.5, 1.0, -20.0, 0.019595747930187507),
    (1.5, 1.0, -60.0, -0.004208591617740957),
    (1.5, 1.5, 0.5, 1.4009479593700924),
    (1.5, 1.5, -0.5, 0.8988630755460688),
    (1.5, 1.5, -2.0, 0.4134096590549082),
    (1.5, 1.5, -8.0, -0.07265782357841406),
    (1.5, 1.5, -20.0, 0.006198501246861342),
    (1.5, 1.5, -60.0, 3.4491066810954635e-05),
    (1.5, 0.5, 0.5, 1.1448466286155243),
    (1.5, 0.5, -0.5, 0.13441755684874837),
    (1.5, 0.5, -2.0, -0.5158078020855824),
    (1.5, 0.5, -8.0, -0.06171355323705529),
    (1.5, 0.5, -20.0, 0.039853399472427005),
    (1.5, 0.5, -60.0, -0.00015864841046706423),
    (1.5, 2.0, 0.5, 1.161314090135536),
    (1.5, 2.0, -0.5, 0.8595440533980158),
    (1.5, 2.0, -2.0, 0.5399986928166693),
    (1.5, 2.0, -8.0, 0.07823789209810145),
    (1.5, 2.0, -20.0, 0.026216809203766463),
    (1.5, 2.0, -60.0, 0.00940580386597039),
    (0.3, 1.0, -50.0, 0.01522820150181382),
    (0.3, 1.0, -300.0, 0.002562938702645409),
    (0.3, 1.0, -5000.0, 0.00015405860464652105),
    (0.5, 1.0, -50.0, 0.011281536265323773),
    (0.5, 1.0, -300.0, 0.0018806214973780646),
    (0.5, 1.0, -5000.0, 0.00011283791445279306),
    (0.7, 1.0, -50.0, 0.006793665670383093),
    (0.7, 1.0, -300.0, 0.0011172307483615783),
    (0.7, 1.0, -5000.0, 6.686529541538025e-05),
    (0.9, 1.0, -50.0, 0.0021753530768569766),
    (0.9, 1.0, -300.0, 0.00035233009645537275),
    (0.9, 1.0, -5000.0, 2.1029713702608533e-05),
]


def test_oracle_table(backend):
    refused = 0
    for b, g, x, v in ORACLE:
        try:
            rep = mlf.mittag_leffler(mlf.MLSpec(b, g, x))
        except AccuracyError:
            # only the beta > 1 alternating series may refuse, and only far out
            assert b > 1 and x <= -20
            refused += 1
            continue
        assert abs(rep.value - v) <= max(rep.est_error, 1e-13 * abs(v)), (b, g, x)
        assert abs(rep.value - v) <= 1e-10 * max(1.0, abs(v)), (b, g, x)
    assert refused <= 8


def test_vectorised_matches_scalar(backend):
    x = -np.geomspace(1e-3, 1e4, 200)
    for b, g in [(0.3, 1.0), (0.5, 0.5), (0.8, 1.8), (0.95, 1.0)]:
        vec = mlf.ml(b, g, x)
        sc = np.array([mlf.mittag_leffler(mlf.MLSpec(b, g, xi)).value for xi in x])
        np.testing.assert_allclose(vec, sc, rtol=1e-11, atol=1e-15)


def test_backends_agree():
    from fracou import _accel

    x = np.concatenate([-np.geomspace(1e-4, 1e5, 300), np.linspace(0, 5, 20)])
    for b, g in [(0.2, 1.0), (0.5, 0.5), (0.7, 1.7), (1.0, 1.0), (1.0, 2.0), (1.6, 1.0)]:
        if b > 1:
            x = x[x > -20]
        with _accel.use_numba(True):
            a = mlf.ml(b, g, x)
        with _accel.use_numba(False):
            c = mlf.ml(b, g, x)
        np.testing.assert_allclose(a, c, rtol=1e-12, atol=1e-14)


def test_spec_examples():
    assert mlf.ml(1, 1, -1.0) == pytest.approx(math.exp(-1), rel=1e-15)
    for a in (0.2, 0.5, 0.9):
        assert mlf.ml(a, 1, 0.0) == 1.0
    # E_{1/2}(-1) = erfcx(1)
    assert mlf.ml(0.5, 1, -1.0) == pytest.approx(0.42758357615580700442, rel=1e-14)


def test_half_order_erfcx(backend):
    x = np.linspace(0, 200, 4001)
    np.testing.assert_allclose(mlf.ml(0.5, 1.0, -x), special.erfcx(x), rtol=1e-11)


def test_exp_and_cos_identities(backend):
    x = np.linspace(-20, 5, 501)
    np.testing.assert_allclose(mlf.ml(1, 1, x), np.exp(x), rtol=1e-10)
    y = np.linspace(0, 10, 201)
    np.testing.assert_allclose(mlf.ml(2, 1, -(y**2)), np.cos(y), atol=1e-10)


def test_cancellation_refused_for_large_beta():
    with pytest.raises(AccuracyError):
        mlf.ml(1.5, 1.0, np.array([-1.0, -100.0]))
    with pytest.raises(AccuracyError):
        mlf.mittag_leffler(mlf.MLSpec(1.5, 1.0, -100.0))
    assert mlf.ml(1.5, 1.0, -8.0) == pytest.approx(-0.20287153923872817, rel=1e-12)


def test_beta_one_second_parameter_two():
    # E_{1,2}(x) = (e^x - 1)/x
    x = np.array([-30.0, -3.0, -0.2, 0.7, 4.0])
    np.testing.assert_allclose(mlf.ml(1, 2, x), np.expm1(x) / x, rtol=1e-12)


@pytest.mark.parametrize("a", [0.3, 0.5, 0.8])
def test_cm_consequences_on_grid(a, backend):
    x = np.linspace(0, 100, 2001)
    e = mlf.ml(a, 1.0, -x)
    assert np.all(e > 0)
    assert np.all(np.diff(e) < 0)
    assert np.all(np.diff(e, 2) > -1e-15)


@pytest.mark.parametrize("a", [0.3, 0.6, 0.9])
def test_asymptotic_one_term_rate(a):
    # |E(-x) - 1/(x Gamma(1-a))| <= C x^-2: fit C on [100, 1000], validate on [1000, 1e4]
    def resid(x):
        return np.abs(mlf.ml(a, 1.0, -x) - 1.0 / (x * math.gamma(1 - a)))

    fit = np.geomspace(100, 1000, 20)
    C = float(np.max(resid(fit) * fit**2))
    val = np.geomspace(1000, 1e4, 20)
    assert np.all(resid(val) <= 1.01 * C * val**-2)


def test_report_fields():
    r = mlf.mittag_leffler(mlf.MLSpec(0.5, 1.0, -1e4))
    assert r.method == "asymptotic" and r.terms_used >= 1 and r.est_error >= 0
    assert r.x_switch == mlf.x_switch(0.5, 1.0)
    r = mlf.mittag_leffler(mlf.MLSpec(0.5, 1.0, -0.5))
    assert r.method == "series"
    assert mlf.mittag_leffler(mlf.MLSpec(1.0, 1.0, 2.0)).method == "exact"
    assert set(r.to_dict()) == {"value", "method", "terms_used", "est_error", "x_switch"}


def test_x_switch_inf_at_and_above_one():
    assert mlf.x_switch(1.0, 1.0) == math.inf
    assert mlf.x_switch(1.5, 1.0) == math.inf
    assert 0 < mlf.x_switch(0.5, 1.0) < 1e3


@pytest.mark.parametrize("bad", [dict(beta=0.0, gam=1.0, x=1.0), dict(beta=0.5, gam=-1.0, x=1.0), dict(beta=0.5, gam=1.0, x=math.nan)])
def test_validation(bad):
    with pytest.raises(ValidationError):
        mlf.mittag_leffler(mlf.MLSpec(**bad))


def test_one_minus_small_argument():
    x = np.array([1e-14, 1e-9, 1e-5, 1e-3, 0.3])
    for a in (0.3, 0.7):
        exact = x * np.array([float(mlf.ml(a, a + 1, -xi)) for xi in x])
        np.testing.assert_allclose(mlf.one_minus_ml(a, x), exact, rtol=1e-10)
    assert mlf.one_minus_ml(0.5, 1e-12) == pytest.approx(1e-12 / math.gamma(1.5), rel=1e-9)


def test_kernel_derivative_examples():
    t = np.array([0.1, 1.0, 3.0])
    np.testing.assert_allclose(mlf.mlf_kernel_derivative(1.0, 2.0, t), -2.0 * np.exp(-2.0 * t), rtol=1e-13)
    assert mlf.mlf_kernel_derivative(0.5, 0.0, 1.0) == 0.0
    h = 1e-6
    fd = (mlf.ml(0.5, 1, -((1 + h) ** 0.5)) - mlf.ml(0.5, 1, -((1 - h) ** 0.5))) / (2 * h)
    assert mlf.mlf_kernel_derivative(0.5, 1.0, 1.0) == pytest.approx(fd, rel=1e-6)
    with pytest.raises(ValidationError):
        mlf.mlf_kernel_derivative(0.5, 1.0, 0.0)


@pytest.mark.parametrize("a", [0.3, 0.6, 0.9])
def test_kernel_derivative_log_grid(a):
    w = np.geomspace(1e-2, 1e2, 25)
    k = 1.3
    h = 1e-5 * w
    fd = (mlf.ml(a, 1, -k * (w + h) ** a) - mlf.ml(a, 1, -k * (w - h) ** a)) / (2 * h)
    np.testing.assert_allclose(mlf.mlf_kernel_derivative(a, k, w), fd, rtol=1e-6)


@settings(max_examples=60, deadline=None)
@given(a=st.floats(0.05, 0.99), y=st.floats(0.0, 1e4))
def test_property_bounds(a, y):
    # 0 < E_a(-y) <= 1 and E_a(-y) <= 1/(1 + y/Gamma(1+a)) (a standard CM bound)
    e = float(mlf.ml(a, 1.0, -y))
    assert 0 < e <= 1.0
    assert e <= 1.0 / (1.0 + y / math.gamma(1 + a)) * (1 + 1e-10)


@settings(max_examples=40, deadline=None)
@given(a=st.floats(0.1, 1.0), x=st.floats(0.0, 50.0))
def test_property_recurrence(a, x):
    # E_{a,1}(z) = 1 + z E_{a,a+1}(z) checks the two-parameter machinery against itself
    z = -x
    lhs = float(mlf.ml(a, 1.0, z))
    rhs = 1.0 + z * float(mlf.ml(a, a + 1.0, z))
    assert lhs == pytest.approx(rhs, abs=1e-10)


def test_wright_examples():
    assert mlf.wright(1, 1, 0.0) == 1.0
    # sum 1/(j!)^2 = I0(2)
    assert mlf.wright(1, 1, 1.0) == pytest.approx(2.2795853023360672674, rel=1e-14)
    for z in (0.25, 2.0, 10.0):
        assert mlf.wright(1, 1, z) == pytest.approx(float(special.i0(2 * math.sqrt(z))), rel=1e-13)


@pytest.mark.parametrize("x", [0.5, 2.0])
def test_wright_density_normalisation(x):
    # int_0^inf e^{-y - a t} W_{1,1}(y a t) dy ... checked at a = t = 1 for the CPE density form
    def f(y):
        return math.exp(-y - 1.0) * mlf.wright(1, 1, y)

    total = integrate.quad(f, 0, np.inf, limit=200)[0]
    # int e^{-y} I0(2 sqrt y) dy = e
    assert total == pytest.approx(1.0, rel=1e-10)
    assert mlf.wright(1, 1, x) > 0


def test_wright_nonconvergence():
    with pytest.raises(AccuracyError) as exc:
        mlf.wright(0.5, 1.0, 1e6, max_terms=20)
    assert exc.value.partial is not None


def test_cm_spot_check_examples():
    pts = [0.5, 1.0, 2.0]
    assert mlf.cm_spot_check(lambda x: np.exp(-x), pts, 4)
    assert mlf.cm_spot_check(lambda x: mlf.ml(0.6, 1.0, -np.asarray(x)), pts, 4)
    assert not mlf.cm_spot_check(np.cos, pts, 2)


@pytest.mark.parametrize("a", [0.3, 0.5, 0.8])
def test_sqrt_of_cm_is_cm(a):
    pts = [0.5, 1.0, 2.0, 4.0]
    assert mlf.cm_spot_check(lambda x: np.sqrt(mlf.ml(a, 1.0, -np.asarray(x))), pts, 4)


def test_cm_spot_check_spacing():
    with pytest.raises(ValidationError):
        mlf.cm_spot_check(np.exp, [1.0, 1.001], 6)
    with pytest.raises(ValidationError):
        mlf.cm_spot_check(np.exp, [1.0, 2.0], 7)
