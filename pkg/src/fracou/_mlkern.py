"""Inner loops for Mittag-Leffler evaluation, numba and numpy flavours.

Evaluation of E_{b,g}(x) for real x splits into regimes:

* ``x >= 0`` or small ``|x|``: power series (no cancellation for x >= 0; for
  x < 0 only while ``|x|**(1/b) <= SERIES_LIMIT`` so that the alternating sum
  stays within ~1e3 of the result).
* ``-x_switch < x < -SERIES_LIMIT**b`` (0 < b <= 1): trapezoidal rule on the
  parabolic Bromwich contour ``s = mu (1 + iu)^2`` for the Laplace transform
  ``s**(b-g) / (s**b + |x|)``.
* ``x <= -x_switch`` (0 < b < 1): twelve-term power-law expansion.

Method codes returned by the scalar kernels: 0 series, 1 contour,
2 asymptotic, 3 exact (b == g == 1, exponential).
"""

from __future__ import annotations

import cmath
import math

import numpy as np
from scipy import special

from ._accel import njit

SERIES_LIMIT = 5.0
CONTOUR_N = 32
CONTOUR_MU = 0.15
CONTOUR_H = 3.0
ASY_TERMS = 12
MAX_TERMS = 10_000
N_COEFFS = 600
EPS = np.finfo(float).eps

SERIES, CONTOUR, ASYMPTOTIC, EXACT = 0, 1, 2, 3
METHOD_NAMES = ("series", "contour", "asymptotic", "exact")


@njit
def rgamma(x):
    """1/Gamma(x); exactly 0 at the poles x = 0, -1, -2, ..."""
    if x <= 0.0 and x == math.floor(x):
        return 0.0
    if x > 170.0:
        return math.exp(-math.lgamma(x))
    return 1.0 / math.gamma(x)


def series_coeffs(beta: float, gam: float, n: int = N_COEFFS) -> np.ndarray:
    j = np.arange(n, dtype=float)
    return special.rgamma(beta * j + gam)


# ---------------------------------------------------------------------------
# numba scalar kernels


@njit
def _series_coeff(coeffs, x):
    # Forward summation with precomputed 1/Gamma(b j + g).
    total = coeffs[0]
    abssum = abs(total)
    p = 1.0
    small = 0
    n = coeffs.shape[0]
    j = 1
    while j < n:
        p *= x
        term = p * coeffs[j]
        total += term
        abssum += abs(term)
        if abs(term) <= 1e-16 * abs(total):
            small += 1
            if small >= 2:
                break
        else:
            small = 0
        j += 1
    return total, j, abssum


@njit
def _series_generic(beta, gam, x, max_terms):
    """Series using lgamma per term; returns (value, terms, abssum, converged)."""
    if x == 0.0:
        return rgamma(gam), 1, abs(rgamma(gam)), True
    lx = math.log(abs(x))
    neg = x < 0.0
    total = 0.0
    abssum = 0.0
    small = 0
    for j in range(max_terms):
        a = beta * j + gam
        mag = math.exp(j * lx - math.lgamma(a))
        term = -mag if (neg and j % 2 == 1) else mag
        total += term
        abssum += mag
        if mag <= 1e-16 * abs(total):
            small += 1
            if small >= 2:
                return total, j + 1, abssum, True
        else:
            small = 0
    return total, max_terms, abssum, False


@njit
def _contour(beta, gam, y, n):
    """E_{b,g}(-y) by the parabolic contour with 2n+1 nodes (n by symmetry)."""
    h = CONTOUR_H / n
    mu = CONTOUR_MU * n
    p = beta - gam
    acc = 0.0
    for k in range(n + 1):
        u = k * h
        w = 1.0 + 1j * u
        s = mu * w * w
        ds = 2j * mu * w
        ls = cmath.log(s)
        f = cmath.exp(s + p * ls) / (cmath.exp(beta * ls) + y) * ds
        val = (f / (2j * math.pi)).real
        acc += val if k == 0 else 2.0 * val
    return h * acc


@njit
def _asymptotic(beta, gam, y, nterms):
    """Power-law expansion of E_{b,g}(-y); returns (value, remainder bound)."""
    total = 0.0
    iy = 1.0 / y
    pw = 1.0
    for k in range(1, nterms + 1):
        pw *= -iy
        total -= pw * rgamma(gam - beta * k)
    bound = 0.0
    for k in range(nterms + 1, nterms + 4):
        pw *= -iy
        c = abs(pw * rgamma(gam - beta * k))
        if c > 0.0:
            bound = c
            break
    return total, bound


@njit
def _ml_scalar(beta, gam, x, coeffs, x_switch):
    """Returns (value, method, terms, est_error)."""
    if beta == 1.0 and gam == 1.0:
        v = math.exp(x)
        return v, EXACT, 1, EPS * v
    if x >= 0.0 or beta > 1.0:
        v, n, a, ok = _series_generic(beta, gam, x, MAX_TERMS)
        err = 16.0 * EPS * a
        if not ok:
            err = math.inf
        return v, SERIES, n, err
    y = -x
    if y ** (1.0 / beta) <= SERIES_LIMIT:
        v, n, a = _series_coeff(coeffs, x)
        return v, SERIES, n, 16.0 * EPS * a
    if beta < 1.0 and y >= x_switch:
        v, b = _asymptotic(beta, gam, y, ASY_TERMS)
        # the first omitted term is not a strict bound for a divergent series
        return v, ASYMPTOTIC, ASY_TERMS, 2.0 * b + ASY_TERMS * EPS * abs(v)
    v = _contour(beta, gam, y, CONTOUR_N)
    v2 = _contour(beta, gam, y, (3 * CONTOUR_N) // 4)
    return v, CONTOUR, 2 * CONTOUR_N + 1, abs(v - v2) + 32.0 * EPS * max(1.0, abs(v))


@njit
def _ml_value(beta, gam, x, coeffs, x_switch):
    if beta == 1.0 and gam == 1.0:
        return math.exp(x)
    if x >= 0.0 or beta > 1.0:
        return _series_generic(beta, gam, x, MAX_TERMS)[0]
    y = -x
    if y ** (1.0 / beta) <= SERIES_LIMIT:
        return _series_coeff(coeffs, x)[0]
    if beta < 1.0 and y >= x_switch:
        return _asymptotic(beta, gam, y, ASY_TERMS)[0]
    return _contour(beta, gam, y, CONTOUR_N)


@njit
def _contour_nodes(beta, gam, n):
    # y-independent parts of the contour integrand, shared by every point
    h = CONTOUR_H / n
    mu = CONTOUR_MU * n
    sb = np.empty(n + 1, dtype=np.complex128)
    num = np.empty(n + 1, dtype=np.complex128)
    for k in range(n + 1):
        w = 1.0 + 1j * (k * h)
        s = mu * w * w
        ls = cmath.log(s)
        sb[k] = cmath.exp(beta * ls)
        num[k] = cmath.exp(s + (beta - gam) * ls) * (2j * mu * w) / (2j * math.pi) * (1.0 if k == 0 else 2.0)
    return sb, num, h


@njit
def ml_array_numba(beta, gam, x, coeffs, x_switch):
    out = np.empty(x.shape[0])
    sb, num, h = _contour_nodes(beta, gam, CONTOUR_N)
    for i in range(x.shape[0]):
        xi = x[i]
        if beta < 1.0 and xi < 0.0 and (-xi) ** (1.0 / beta) > SERIES_LIMIT and -xi < x_switch:
            acc = 0.0
            for k in range(sb.shape[0]):
                acc += (num[k] / (sb[k] - xi)).real
            out[i] = h * acc
        else:
            out[i] = _ml_value(beta, gam, xi, coeffs, x_switch)
    return out


# ---------------------------------------------------------------------------
# numpy versions


def _series_coeff_np(coeffs, x, beta, gam):
    xmax = max(float(np.abs(x).max()), 1e-300)
    j = np.arange(coeffs.size, dtype=float)
    logmag = j * math.log(xmax) - special.gammaln(beta * j + gam)
    # drop the tail once every term is below 1e-18 of unity
    keep = np.flatnonzero(logmag > -41.5)
    nterm = int(keep[-1]) + 1 if keep.size else 1
    # Horner: one multiply-add per term instead of a pow per term
    out = np.full_like(x, coeffs[nterm - 1])
    for cj in coeffs[: nterm - 1][::-1]:
        out *= x
        out += cj
    return out


def _contour_np(beta: float, gam: float, y: np.ndarray, n: int = CONTOUR_N) -> np.ndarray:
    h = CONTOUR_H / n
    mu = CONTOUR_MU * n
    u = h * np.arange(n + 1)
    w = 1.0 + 1j * u
    s = mu * w * w
    ds = 2j * mu * w
    num = np.exp(s) * s ** (beta - gam) * ds / (2j * np.pi)
    vals = (num[None, :] / (s[None, :] ** beta + y[:, None])).real
    wts = np.full(n + 1, 2.0)
    wts[0] = 1.0
    return h * (vals @ wts)


def _asymptotic_np(beta: float, gam: float, y: np.ndarray, nterms: int = ASY_TERMS) -> np.ndarray:
    k = np.arange(1, nterms + 1)
    c = special.rgamma(gam - beta * k)
    return -(np.power.outer(-1.0 / y, k) * c).sum(axis=1)


def ml_array_numpy(beta, gam, x, coeffs, x_switch):
    x = np.asarray(x, dtype=float)
    if beta == 1.0 and gam == 1.0:
        return np.exp(x)
    out = np.empty_like(x)
    generic = (x >= 0.0) | (beta > 1.0)
    for i in np.flatnonzero(generic):
        out[i] = _series_generic_py(beta, gam, float(x[i]))
    y = -x
    with np.errstate(invalid="ignore", divide="ignore"):
        ser = ~generic & (np.abs(y) ** (1.0 / beta) <= SERIES_LIMIT)
    asy = ~generic & ~ser & (beta < 1.0) & (y >= x_switch)
    con = ~generic & ~ser & ~asy
    if ser.any():
        out[ser] = _series_coeff_np(coeffs, x[ser], beta, gam)
    if asy.any():
        out[asy] = _asymptotic_np(beta, gam, y[asy])
    if con.any():
        out[con] = _contour_np(beta, gam, y[con])
    return out


def _series_generic_py(beta: float, gam: float, x: float) -> float:
    if x == 0.0:
        return float(special.rgamma(gam))
    lx = math.log(abs(x))
    n = 64
    while True:
        j = np.arange(n, dtype=float)
        logmag = j * lx - special.gammaln(beta * j + gam)
        # stop once the terms are past their peak and 1e-18 below it
        if n >= MAX_TERMS or (logmag[-1] < logmag[-2] and logmag[-1] < logmag.max() - 41.5):
            break
        n = min(2 * n, MAX_TERMS)
    # positive arguments may overflow to inf, exactly as the numba loop does
    with np.errstate(over="ignore", invalid="ignore"):
        mags = np.exp(logmag)
        if x < 0:
            mags[1::2] *= -1.0
        return float(mags.sum())


# ---------------------------------------------------------------------------
# asymptotic switch point


def _asy_bound_switch(beta: float, gam: float, tol: float) -> float:
    # where the first omitted term falls below tol relative to the leading one
    lead = None
    for k in range(1, ASY_TERMS + 1):
        c = abs(float(special.rgamma(gam - beta * k)))
        if c > 0.0:
            lead = (k, c)
            break
    if lead is None:
        return 1.0
    for k in range(ASY_TERMS + 1, ASY_TERMS + 4):
        c = abs(float(special.rgamma(gam - beta * k)))
        if c > 0.0:
            return (c / (tol * lead[1])) ** (1.0 / (k - lead[0]))
    return 1.0


_SWITCH_CACHE: dict[tuple[float, float], float] = {}


def x_switch(beta: float, gam: float, tol: float = 1e-11) -> float:
    """Smallest |x| beyond which the power-law expansion is used for E_{b,g}(x).

    Starts from the point where the first omitted term drops below ``tol``
    relative to the leading term, then grows it until the expansion agrees
    with the contour quadrature to ``tol`` (relative, with a 1e-16 absolute
    floor for the fast-decaying b == g case) over a decade. Returns
    ``inf`` when no switch is safe (b >= 1).
    """
    key = (float(beta), float(gam))
    if key in _SWITCH_CACHE:
        return _SWITCH_CACHE[key]
    if beta >= 1.0:
        _SWITCH_CACHE[key] = math.inf
        return math.inf
    x0 = max(_asy_bound_switch(beta, gam, tol), SERIES_LIMIT**beta)
    result = math.inf
    while x0 < 1e12:
        probe = x0 * np.array([1.0, 1.5, 2.0, 3.0, 5.0, 10.0])
        asy = _asymptotic_np(beta, gam, probe)
        ref = _contour_np(beta, gam, probe)
        if np.all(np.abs(asy - ref) <= tol * np.abs(ref) + 1e-16):
            result = float(x0)
            break
        x0 *= 1.25
    _SWITCH_CACHE[key] = result
    return result
