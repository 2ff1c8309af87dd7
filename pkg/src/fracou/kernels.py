"""Time changes, covariances, characteristic functions and spectra of the
fractional Ornstein-Uhlenbeck family.

Throughout, ``E(x)`` is the one-parameter Mittag-Leffler function
``E_{alpha,1}(x)``. The non-stationary kernels use the doubled clock
``gamma (2t)^alpha``; the stationary kernel uses ``gamma |s|^alpha``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate

from .errors import NumericalError, ValidationError, require
from .mlf import ml, one_minus_ml

MODULE = "kernels"

MODELS = ("time_changed_ou", "time_changed_stationary_ou", "stationary", "fractional_ou")
MODEL_ALIASES = {
    "xa": "time_changed_ou",
    "tcou": "time_changed_ou",
    "xbar": "time_changed_stationary_ou",
    "ybar": "stationary",
    "y": "fractional_ou",
    "fractional": "fractional_ou",
}


@dataclass(frozen=True)
class ProcessParams:
    alpha: float
    gamma: float = 1.0
    theta: float = 1.0

    def __post_init__(self):
        require(math.isfinite(self.alpha) and 0 < self.alpha <= 1, MODULE, "alpha", "0 < alpha <= 1", self.alpha)
        require(math.isfinite(self.gamma) and self.gamma > 0, MODULE, "gamma", "gamma > 0", self.gamma)
        require(math.isfinite(self.theta) and self.theta > 0, MODULE, "theta", "theta > 0", self.theta)

    @property
    def fp_drift(self) -> float:
        return self.gamma / 2 ** (1 - self.alpha)

    @property
    def fp_diff(self) -> float:
        return self.theta / 2 ** (1 - self.alpha)

    @property
    def sill(self) -> float:
        """theta / gamma, the stationary variance."""
        return self.theta / self.gamma


@dataclass(frozen=True)
class KernelSpec:
    model: str
    params: ProcessParams

    def __post_init__(self):
        m = MODEL_ALIASES.get(self.model, self.model)
        require(m in MODELS, MODULE, "model", f"one of {MODELS}", self.model)
        object.__setattr__(self, "model", m)

    @property
    def stationary(self) -> bool:
        return self.model == "stationary"

    def __call__(self, s, t):
        """Covariance between times ``s`` and ``t``."""
        p = self.params
        if self.model == "time_changed_ou":
            return cov_time_changed_ou(s, t, p)
        if self.model == "time_changed_stationary_ou":
            return cov_time_changed_stationary_ou(s, t, p)
        if self.model == "fractional_ou":
            return cov_fractional_ou(s, t, p)
        return cov_stationary(np.subtract(t, s), p)

    def gram(self, nodes) -> np.ndarray:
        x = np.asarray(nodes, dtype=float)
        return np.asarray(self(x[:, None], x[None, :]), dtype=float)

    def describe(self) -> dict:
        p = self.params
        return {"model": self.model, "alpha": p.alpha, "gamma": p.gamma, "theta": p.theta}


def _times(t, name="t"):
    t = np.asarray(t, dtype=float)
    if np.any(~np.isfinite(t)) or np.any(t < 0):
        raise ValidationError(f"{name} must be finite and >= 0", MODULE, parameter=name)
    return t


def _out(v, *args):
    return float(v) if all(np.ndim(a) == 0 for a in args) else v


def _E2(t, p: ProcessParams):
    # E(-gamma (2t)^alpha)
    return np.asarray(ml(p.alpha, 1.0, -p.gamma * (2.0 * t) ** p.alpha))


def _one_minus_E2(t, p: ProcessParams):
    return np.asarray(one_minus_ml(p.alpha, p.gamma * (2.0 * t) ** p.alpha))


def time_change_alpha(t, params: ProcessParams):
    """-(1/(2 gamma)) log E(-gamma (2t)^alpha); equals t when alpha = 1."""
    t = _times(t)
    if params.alpha == 1.0:
        return _out(t.copy(), t)
    v = -np.log1p(-_one_minus_E2(t, params)) / (2.0 * params.gamma)
    return _out(v, t)


def cov_time_changed_ou(s, t, params: ProcessParams):
    s, t = _times(s, "s"), _times(t, "t")
    lo, hi = np.minimum(s, t), np.maximum(s, t)
    e_lo, e_hi = _E2(lo, params), _E2(hi, params)
    v = params.sill * np.sqrt(e_hi / e_lo) * _one_minus_E2(lo, params)
    return _out(v, s, t)


def cov_time_changed_stationary_ou(s, t, params: ProcessParams):
    s, t = _times(s, "s"), _times(t, "t")
    lo, hi = np.minimum(s, t), np.maximum(s, t)
    v = params.sill * np.sqrt(_E2(hi, params) / _E2(lo, params))
    v = np.where(lo == hi, params.sill, v)
    return _out(v, s, t)


def cov_stationary(s, params: ProcessParams):
    """r(s) = (theta/gamma) E(-gamma |s|^alpha)."""
    s = np.asarray(s, dtype=float)
    if np.any(~np.isfinite(s)):
        raise ValidationError("lag must be finite", MODULE, parameter="s")
    v = params.sill * np.asarray(ml(params.alpha, 1.0, -params.gamma * np.abs(s) ** params.alpha))
    return _out(v, s)


def cov_fractional_ou(s, t, params: ProcessParams):
    """(theta/gamma) [E(-gamma|t-s|^a) - sqrt(E(-gamma(2t)^a) E(-gamma(2s)^a))]."""
    s, t = _times(s, "s"), _times(t, "t")
    a, g = params.alpha, params.gamma
    d = np.abs(t - s)
    geo = np.sqrt(_E2(s, params) * _E2(t, params))
    v = params.sill * (np.asarray(ml(a, 1.0, -g * d**a)) - geo)
    # diagonal through the cancellation-free form
    v = np.where(d == 0, params.sill * _one_minus_E2(np.minimum(s, t), params), v)
    return _out(v, s, t)


def variance(t, params: ProcessParams):
    """Var Y(t) = (theta/gamma)[1 - E(-gamma (2t)^alpha)]."""
    t = _times(t)
    return _out(params.sill * _one_minus_E2(t, params), t)


def char_function(xi, t, params: ProcessParams):
    """exp{-(theta xi^2 / 2 gamma) [1 - E(-gamma (2t)^alpha)]}."""
    t = _times(t)
    xi = np.asarray(xi, dtype=float)
    v = np.exp(-0.5 * xi**2 * params.sill * _one_minus_E2(t, params))
    return _out(v, xi, t)


def cgf(eta, t, params: ProcessParams):
    """(eta^2 theta / 2 gamma) [1 - E(-gamma (2t)^alpha)] = eta^2 Var(t) / 2."""
    t = _times(t)
    eta = np.asarray(eta, dtype=float)
    v = 0.5 * eta**2 * params.sill * _one_minus_E2(t, params)
    return _out(v, eta, t)


def variogram_small_lag(tau, params: ProcessParams):
    """E[Y(t + tau) - Y(t)]^2 = 2 (theta/gamma) [1 - E(-gamma tau^alpha)]."""
    tau = np.asarray(tau, dtype=float)
    require(bool(np.all(tau > 0)), MODULE, "tau", "tau > 0", tau.min() if tau.size else tau)
    v = 2.0 * params.sill * np.asarray(one_minus_ml(params.alpha, params.gamma * tau**params.alpha))
    return _out(v, tau)


def covariance(kspec: KernelSpec, s, t):
    return kspec(s, t)


# ---------------------------------------------------------------------------
# spectral density


def _spectral_laplace(w: float, p: ProcessParams) -> float:
    # cosine transform as the boundary value of the Laplace transform
    # s^(a-1) / (s^a + gamma) on the imaginary axis
    z = 1j * w
    return p.sill / math.pi * float((z ** (p.alpha - 1) / (z**p.alpha + p.gamma)).real)


def spectral_density(omega: float, params: ProcessParams, quad: str = "oscillatory", tol: float = 1e-8) -> float:
    """S(omega) = (theta / pi gamma) int_0^inf cos(|omega| s) E(-gamma s^alpha) ds.

    ``quad="oscillatory"`` integrates over a finite head with a cosine-weighted
    rule, then over the tail with cycle-by-cycle integration and epsilon
    extrapolation of the partial sums. ``quad="laplace"`` evaluates the
    Laplace transform of the kernel on the imaginary axis instead.
    """
    p = params
    w = abs(float(omega))
    require(math.isfinite(w), MODULE, "omega", "finite", omega)
    require(quad in ("oscillatory", "laplace"), MODULE, "quad", "'oscillatory' or 'laplace'", quad)
    if w == 0.0:
        if p.alpha == 1.0:
            return p.sill / (math.pi * p.gamma)  # theta / (pi gamma^2)
        raise ValidationError(
            "omega must be nonzero when alpha < 1 (the spectral density diverges at 0)",
            MODULE,
            parameter="omega",
            bound="omega != 0",
            value=0.0,
        )
    if quad == "laplace":
        return _spectral_laplace(w, p)

    def f(s):
        return float(ml(p.alpha, 1.0, -p.gamma * s**p.alpha))

    # the head carries the bulk of the mass; its length is a few decay scales
    head = 30.0 * p.gamma ** (-1.0 / p.alpha)
    v1, e1 = integrate.quad(f, 0.0, head, weight="cos", wvar=w, limit=400)
    v2, e2, info = integrate.quad(f, head, np.inf, weight="cos", wvar=w, limlst=200, full_output=1)[:3]
    err = e1 + e2
    total = v1 + v2
    if not math.isfinite(total) or err > max(tol, tol * abs(total)) * 1e3:
        raise NumericalError(
            f"spectral quadrature did not converge at omega={omega} (error estimate {err:.3g})",
            MODULE,
            omega=omega,
            error=err,
        )
    return p.sill / math.pi * total


def spectral_density_ou(omega, params: ProcessParams):
    """Closed form at alpha = 1: theta / (pi (gamma^2 + omega^2)).

    This is the cosine transform of (theta/gamma) exp(-gamma |s|); it agrees
    with the often-quoted theta gamma / (pi (gamma^2 + omega^2)) only at
    gamma = 1.
    """
    w = np.asarray(omega, dtype=float)
    g = params.gamma
    return _out(params.theta / (math.pi * (g * g + w * w)), w)
