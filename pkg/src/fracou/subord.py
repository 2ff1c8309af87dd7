"""Bernstein functions, inverse subordinators and the generalized kernels.

``ltilde(gamma, t, spec)`` is E exp(-gamma L(t)) for the inverse ``L`` of the
subordinator with Laplace exponent ``g``. Its Laplace transform in ``t`` is
``g(s) / (s (gamma + g(s)))``. The stable and compound-Poisson-exponential
(CPE) families have closed forms. Custom triplets are inverted numerically:
fixed Talbot when the tail's Laplace transform is supplied in closed form,
Euler summation on a vertical line when it has to come from quadrature
(quadrature only converges for Re s > 0, and the Talbot contour leaves that
half-plane).

Time-scale convention: the section-3 kernels run the clock at ``2t``. The
generalized time change and ``X_g`` covariance take ``time_scale`` (default
2.0, matching :mod:`fracou.kernels`); use ``time_scale=1.0`` for the plain
``l(gamma, t)`` clock. For the stable family, scale ``c`` is the same as
replacing ``gamma`` by ``gamma c^alpha``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy import integrate, special

from ._fit import LogLogFit, loglog_fit
from .errors import AccuracyError, NumericalError, ValidationError, require
from .fracops import ExponentialTail, LevyTail, PowerTail
from .mlf import ml, wright

MODULE = "subord"

FAMILIES = ("stable", "cpe", "custom")
TALBOT_M = 32


@dataclass(frozen=True)
class BernsteinSpec:
    """A Bernstein function ``g``.

    family ``stable``: g(s) = s^alpha. family ``cpe``: g(s) = s / (s + a).
    family ``custom``: g(s) = kill + drift s + s L[nu](s), where ``nu`` is
    the Levy tail and ``L[nu]`` its Laplace transform (``tail_laplace``;
    computed by quadrature when not supplied).
    """

    family: str
    alpha: float = 1.0
    a: float = 1.0
    kill: float = 0.0
    drift: float = 0.0
    levy_tail: Callable | None = field(default=None, compare=False)
    tail_laplace: Callable | None = field(default=None, compare=False)
    name: str = ""

    def __post_init__(self):
        require(self.family in FAMILIES, MODULE, "family", f"one of {FAMILIES}", self.family)
        if self.family == "stable":
            require(0 < self.alpha <= 1, MODULE, "alpha", "0 < alpha <= 1", self.alpha)
        elif self.family == "cpe":
            require(math.isfinite(self.a) and self.a > 0, MODULE, "a", "a > 0", self.a)
        else:
            require(self.kill >= 0, MODULE, "kill", "kill >= 0", self.kill)
            require(self.drift >= 0, MODULE, "drift", "drift >= 0", self.drift)
            require(
                self.levy_tail is not None or self.drift > 0 or self.kill > 0,
                MODULE,
                "levy_tail",
                "a tail, a drift or a killing rate",
                None,
            )

    @classmethod
    def stable(cls, alpha: float) -> "BernsteinSpec":
        return cls("stable", alpha=alpha)

    @classmethod
    def cpe(cls, a: float) -> "BernsteinSpec":
        return cls("cpe", a=a)

    @classmethod
    def custom(cls, kill=0.0, drift=0.0, levy_tail=None, tail_laplace=None, name="custom") -> "BernsteinSpec":
        return cls("custom", kill=kill, drift=drift, levy_tail=levy_tail, tail_laplace=tail_laplace, name=name)

    def g(self, s):
        """Evaluate g at real or complex ``s``."""
        s = np.asarray(s)
        if self.family == "stable":
            return s**self.alpha
        if self.family == "cpe":
            return s / (s + self.a)
        out = self.kill + self.drift * s
        if self.levy_tail is not None:
            out = out + s * self._tail_laplace(s)
        return out

    @property
    def analytic(self) -> bool:
        """True when g can be evaluated off the right half-plane (Talbot usable)."""
        return self.family != "custom" or self.levy_tail is None or self.tail_laplace is not None

    def _tail_laplace(self, s):
        if self.tail_laplace is not None:
            return self.tail_laplace(s)
        # quadrature; only valid for Re s > 0
        s = np.asarray(s)
        out = np.empty(s.shape, dtype=complex)
        for i, z in enumerate(np.atleast_1d(s).flat):
            out.flat[i] = _laplace_quad(self.levy_tail, complex(z))
        return out if s.ndim else out.reshape(())

    def tail(self) -> LevyTail:
        """The Levy tail as seen by :func:`fracou.fracops.convolution_derivative`."""
        if self.family == "stable":
            return PowerTail(self.alpha)
        if self.family == "cpe":
            return ExponentialTail(self.a)
        if self.levy_tail is None:
            raise ValidationError("custom family has no Levy tail", MODULE, parameter="levy_tail")
        return LevyTail(self.levy_tail, self.name or "custom")

    def check_shape(self, s_values=None) -> bool:
        """Spot check g(0+) >= 0, g increasing and concave on a positive grid."""
        s = np.logspace(-3, 3, 61) if s_values is None else np.asarray(s_values, dtype=float)
        v = np.real(self.g(s))
        d1 = np.diff(v) / np.diff(s)
        tol = 1e-9 * max(1.0, float(np.abs(v).max()))
        return bool(v[0] >= -tol and np.all(d1 >= -tol) and np.all(np.diff(d1) <= tol))

    def describe(self) -> dict:
        if self.family == "stable":
            return {"family": "stable", "alpha": self.alpha}
        if self.family == "cpe":
            return {"family": "cpe", "a": self.a}
        return {"family": "custom", "name": self.name, "kill": self.kill, "drift": self.drift}


def _laplace_quad(nu, z: complex) -> complex:
    sig, w = z.real, z.imag
    if sig <= 0:
        raise ValidationError("quadrature Laplace transform needs Re s > 0", MODULE, parameter="s")

    def f(x):
        return math.exp(-sig * x) * float(nu(x))

    if w == 0:
        return complex(integrate.quad(f, 0, np.inf, limit=400)[0])
    c = integrate.quad(f, 0, np.inf, weight="cos", wvar=abs(w))[0]
    sn = integrate.quad(f, 0, np.inf, weight="sin", wvar=abs(w))[0]
    return complex(c, -math.copysign(sn, w))


# named custom triplets for the CLI (no expression parser)
def builtin_custom(name: str, alpha: float = 0.5, a: float = 1.0) -> BernsteinSpec:
    """``stable-custom``, ``cpe-custom`` or ``gamma`` as custom triplets."""
    if name == "stable-custom":
        require(0 < alpha < 1, MODULE, "alpha", "0 < alpha < 1", alpha)
        c = math.gamma(1 - alpha)
        return BernsteinSpec.custom(
            levy_tail=lambda x: np.asarray(x, dtype=float) ** (-alpha) / c,
            tail_laplace=lambda s: np.asarray(s) ** (alpha - 1),
            name=name,
        )
    if name == "cpe-custom":
        require(a > 0, MODULE, "a", "a > 0", a)
        return BernsteinSpec.custom(
            levy_tail=lambda x: np.exp(-a * np.asarray(x, dtype=float)),
            tail_laplace=lambda s: 1.0 / (np.asarray(s) + a),
            name=name,
        )
    if name == "gamma":
        # Levy measure e^{-a x}/x dx, tail E1(a x), g(s) = log(1 + s/a)
        require(a > 0, MODULE, "a", "a > 0", a)
        return BernsteinSpec.custom(
            levy_tail=lambda x: special.exp1(a * np.asarray(x, dtype=float)),
            tail_laplace=lambda s: np.log1p(np.asarray(s) / a) / np.asarray(s),
            name=name,
        )
    raise ValidationError(
        f"unknown custom family {name!r}; expected stable-custom, cpe-custom or gamma",
        MODULE,
        parameter="family",
    )


# ---------------------------------------------------------------------------
# Laplace inversion


@dataclass(frozen=True)
class InversionResult:
    value: float
    est_error: float
    nodes: int


def talbot(F: Callable[[np.ndarray], np.ndarray], t: float, M: int = TALBOT_M) -> float:
    """Fixed Talbot inversion of ``F`` at ``t > 0`` with ``M`` nodes."""
    r = 2.0 * M / (5.0 * t)
    th = np.arange(1, M) * (math.pi / M)
    cot = 1.0 / np.tan(th)
    s = r * th * (cot + 1j)
    sig = th + (th * cot - 1.0) * cot
    head = 0.5 * (np.asarray(F(np.array([r + 0j])))[0] * math.exp(r * t)).real
    body = np.sum((np.exp(t * s) * np.asarray(F(s)) * (1.0 + 1j * sig)).real)
    return float(r / M * (head + body))


EULER_M = 18


def euler_invert(F, t: float, M: int = EULER_M) -> float:
    """Euler-summation inversion on a vertical line (only needs Re s > 0)."""
    k = np.arange(2 * M + 1)
    xi = np.ones(2 * M + 1)
    xi[0] = 0.5
    xi[2 * M] = 2.0**-M
    for j in range(1, M):
        xi[2 * M - j] = xi[2 * M - j + 1] + 2.0**-M * special.comb(M, j)
    eta = (-1.0) ** k * xi
    beta = M * math.log(10.0) / 3.0 + 1j * math.pi * k
    vals = np.array([complex(np.asarray(F(np.asarray(b / t)))) for b in beta])
    return float(10 ** (M / 3.0) / t * np.sum(eta * vals.real))


def invert_laplace(F, t: float, M: int = TALBOT_M, tol: float = 1e-6, method: str = "talbot") -> InversionResult:
    """Numerical inversion with an error estimate from a coarser rule.

    ``talbot``: fixed Talbot with ``M`` nodes, compared with ``M/2`` nodes.
    ``euler``: Euler summation (18 vs 14 terms), for transforms that can
    only be evaluated in the right half-plane.
    """
    require(t > 0 and math.isfinite(t), MODULE, "t", "t > 0", t)
    if method == "euler":
        v, v2, M = euler_invert(F, t), euler_invert(F, t, EULER_M - 4), 2 * EULER_M + 1
    else:
        v, v2 = talbot(F, t, M), talbot(F, t, M // 2)
    err = abs(v - v2)
    if not math.isfinite(v) or err > tol * max(1.0, abs(v)):
        raise AccuracyError(
            f"Laplace inversion did not converge at t={t} (estimate {err:.3g})", MODULE, partial=v, error=err
        )
    return InversionResult(v, err, M)


def _ltilde_transform(gamma: float, spec: BernsteinSpec):
    def F(s):
        gs = spec.g(s)
        return gs / (s * (gamma + gs))

    return F


def ltilde(gamma: float, t, spec: BernsteinSpec, method: str = "auto"):
    """E exp(-gamma L(t)).

    Closed forms: stable E_{alpha,1}(-gamma t^alpha); CPE
    exp(-a gamma t / (gamma + 1)) / (gamma + 1), which is the right limit at
    ``t = 0`` (so ``ltilde(g, 0, cpe) = 1/(g + 1)``). ``method="talbot"``
    forces numerical inversion for any family.
    """
    require(math.isfinite(gamma) and gamma > 0, MODULE, "gamma", "gamma > 0", gamma)
    require(method in ("auto", "closed", "talbot"), MODULE, "method", "auto, closed or talbot", method)
    t_arr = np.asarray(t, dtype=float)
    if np.any(~np.isfinite(t_arr)) or np.any(t_arr < 0):
        raise ValidationError("t must be finite and >= 0", MODULE, parameter="t", bound="t >= 0")
    closed = spec.family in ("stable", "cpe") and method != "talbot"
    if method == "closed" and not closed:
        raise ValidationError("no closed form for custom families", MODULE, parameter="method")
    if closed and spec.family == "stable":
        v = np.asarray(ml(spec.alpha, 1.0, -gamma * t_arr**spec.alpha))
    elif closed:
        v = np.exp(-spec.a * gamma * t_arr / (gamma + 1.0)) / (gamma + 1.0)
    else:
        F = _ltilde_transform(gamma, spec)
        flat = t_arr.reshape(-1)
        out = np.empty(flat.shape)
        for i, ti in enumerate(flat):
            if ti == 0:
                out[i] = _ltilde_zero(gamma, spec)
            else:
                meth = "talbot" if spec.analytic else "euler"
                out[i] = invert_laplace(F, float(ti), method=meth).value
        v = out.reshape(t_arr.shape)
    return float(v) if t_arr.ndim == 0 else v


def _ltilde_zero(gamma, spec):
    # initial value theorem: lim_{s->inf} s F(s) = g(inf) / (gamma + g(inf)),
    # which is 1 when g is unbounded (drift or an infinite Levy measure)
    g12 = float(np.real(spec.g(np.asarray(1e12 + 0j))))
    g14 = float(np.real(spec.g(np.asarray(1e14 + 0j))))
    if g14 > g12 * (1.0 + 1e-6):
        return 1.0
    return g14 / (gamma + g14)


def inverse_subordinator_density_cpe(x, t, a: float):
    """l(x, t) = exp(-x - a t) W_{1,1}(x a t) for the CPE subordinator.

    W_{1,1}(z) = I_0(2 sqrt z), evaluated through the scaled Bessel function
    so large arguments do not overflow.
    """
    require(a > 0, MODULE, "a", "a > 0", a)
    x = np.asarray(x, dtype=float)
    t = np.asarray(t, dtype=float)
    if np.any(x < 0) or np.any(t < 0):
        raise ValidationError("x and t must be >= 0", MODULE, parameter="x,t")
    z = 2.0 * np.sqrt(x * a * t)
    v = special.i0e(z) * np.exp(z - x - a * t)
    return float(v) if v.ndim == 0 else v


def wright_density_cpe(x: float, t: float, a: float) -> float:
    """Same density through the Wright series (slow; used as a cross-check)."""
    return math.exp(-x - a * t) * wright(1.0, 1.0, x * a * t)


def time_change_g(t, gamma: float, spec: BernsteinSpec, time_scale: float = 2.0):
    """-(1/(2 gamma)) log ltilde(gamma, time_scale * t)."""
    require(time_scale > 0, MODULE, "time_scale", "time_scale > 0", time_scale)
    t = np.asarray(t, dtype=float)
    if spec.family == "cpe":
        # exact log, avoids underflow of ltilde at large t
        v = (spec.a * gamma * time_scale * t / (gamma + 1.0) + math.log(gamma + 1.0)) / (2.0 * gamma)
        if np.any(t < 0):
            raise ValidationError("t must be >= 0", MODULE, parameter="t")
    else:
        v = -np.log(np.asarray(ltilde(gamma, time_scale * t, spec))) / (2.0 * gamma)
    return float(v) if np.ndim(v) == 0 else v


# ---------------------------------------------------------------------------
# generalized kernels

G_MODELS = ("X_g", "Ybar_g", "Y_g")
_G_ALIASES = {"xg": "X_g", "ybarg": "Ybar_g", "yg": "Y_g"}
PSD_GATE_POINTS = 32


@dataclass(frozen=True)
class GeneralizedKernelSpec:
    model: str
    bernstein: BernsteinSpec
    gamma: float = 1.0
    theta: float = 1.0
    time_scale: float = 2.0

    def __post_init__(self):
        m = _G_ALIASES.get(self.model, self.model)
        require(m in G_MODELS, MODULE, "model", f"one of {G_MODELS}", self.model)
        object.__setattr__(self, "model", m)
        require(self.gamma > 0, MODULE, "gamma", "gamma > 0", self.gamma)
        require(self.theta > 0, MODULE, "theta", "theta > 0", self.theta)
        require(self.time_scale > 0, MODULE, "time_scale", "time_scale > 0", self.time_scale)
        if m in ("Ybar_g", "Y_g") and self.bernstein.family == "custom":
            _psd_gate(self)

    @property
    def sill(self) -> float:
        return self.theta / self.gamma

    @property
    def stationary(self) -> bool:
        return self.model == "Ybar_g"

    def __call__(self, s, t):
        if self.model == "X_g":
            return cov_X_g(s, t, self)
        if self.model == "Ybar_g":
            return cov_Ybar_g(np.subtract(t, s), self)
        return cov_Y_g(s, t, self)

    def gram(self, nodes) -> np.ndarray:
        x = np.asarray(nodes, dtype=float)
        return np.asarray(self(x[:, None], x[None, :]), dtype=float)

    def describe(self) -> dict:
        d = {"model": self.model, "gamma": self.gamma, "theta": self.theta, "time_scale": self.time_scale}
        d.update(self.bernstein.describe())
        return d


def _psd_gate(k: GeneralizedKernelSpec):
    nodes = np.linspace(0.0, 8.0, PSD_GATE_POINTS)
    if k.model == "Y_g":
        nodes = nodes[1:]
    G = k.gram(nodes)
    lam = float(np.linalg.eigvalsh(0.5 * (G + G.T)).min())
    thr = -1e-8 * float(np.trace(G)) / G.shape[0]
    if lam < thr:
        raise ValidationError(
            f"custom family fails the positive-definiteness gate (min eigenvalue {lam:.3g} < {thr:.3g})",
            MODULE,
            parameter="bernstein",
            bound="Gram min eigenvalue >= -1e-8 trace/size",
            value=lam,
        )


def _lt(k: GeneralizedKernelSpec, t):
    return np.asarray(ltilde(k.gamma, t, k.bernstein))


def cov_X_g(s, t, kspec: GeneralizedKernelSpec):
    """(theta/gamma) sqrt(l(c t_hi) / l(c t_lo)) [1 - l(c t_lo)], c = time_scale."""
    s, t = np.asarray(s, dtype=float), np.asarray(t, dtype=float)
    if np.any(s < 0) or np.any(t < 0):
        raise ValidationError("times must be >= 0", MODULE, parameter="s,t")
    c = kspec.time_scale
    lo, hi = np.minimum(s, t), np.maximum(s, t)
    l_lo, l_hi = _lt(kspec, c * lo), _lt(kspec, c * hi)
    v = kspec.sill * np.sqrt(l_hi / l_lo) * (1.0 - l_lo)
    return float(v) if v.ndim == 0 else v


def cov_Ybar_g(s, kspec: GeneralizedKernelSpec):
    """(theta/gamma) l(gamma, |s|)."""
    s = np.asarray(s, dtype=float)
    v = kspec.sill * _lt(kspec, np.abs(s))
    return float(v) if v.ndim == 0 else v


def cov_Y_g(s, t, kspec: GeneralizedKernelSpec):
    """(theta/gamma) [l(|t - s|) - sqrt(l(2t) l(2s))]."""
    s, t = np.asarray(s, dtype=float), np.asarray(t, dtype=float)
    if np.any(s < 0) or np.any(t < 0):
        raise ValidationError("times must be >= 0", MODULE, parameter="s,t")
    v = kspec.sill * (_lt(kspec, np.abs(t - s)) - np.sqrt(_lt(kspec, 2 * s) * _lt(kspec, 2 * t)))
    return float(v) if v.ndim == 0 else v


# ---------------------------------------------------------------------------
# long-range dependence


@dataclass(frozen=True)
class LRDReport:
    slope: float
    half_width: float
    power_law: bool
    implied_H: float
    consistent: bool
    fit: LogLogFit

    def to_dict(self) -> dict:
        d = {k: getattr(self, k) for k in ("slope", "half_width", "power_law", "implied_H", "consistent")}
        d["fit"] = self.fit.to_dict()
        return d


def lrd_tail_check(spec: BernsteinSpec, gamma: float, H: float, s_range=(1e2, 1e4), n_points: int = 41) -> LRDReport:
    """Fit log r(s) against log s for r(s) = ltilde(gamma, s).

    The slope is reported raw. ``implied_H = 1 + slope`` follows the
    ``r(s) ~ s^(H - 1)`` reading; ``consistent`` compares it with ``H`` at
    the fit's 95% half-width (floored at 0.05). Curved log-log profiles are
    reported as not power-law.
    """
    require(0 < H < 1, MODULE, "H", "0 < H < 1", H)
    lo, hi = float(s_range[0]), float(s_range[1])
    require(lo > 0 and hi / lo >= 100 * (1 - 1e-12), MODULE, "s_range", "spans >= 2 decades", s_range)
    s = np.logspace(math.log10(lo), math.log10(hi), n_points)
    r = np.asarray(ltilde(gamma, s, spec))
    if np.any(r <= 0):
        raise NumericalError("non-positive covariance values in range; cannot fit a power law", MODULE)
    fit = loglog_fit(s, r)
    half = 1.96 * fit.std_error
    implied = 1.0 + fit.slope
    power = not fit.curvature_flag
    return LRDReport(fit.slope, half, power, implied, bool(power and abs(implied - H) <= max(half, 0.05)), fit)
