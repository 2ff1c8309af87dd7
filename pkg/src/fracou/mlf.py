"""Mittag-Leffler and Wright functions for real arguments.

``mittag_leffler`` is the audited scalar entry point (returns an
:class:`EvalReport`); ``ml`` is the vectorised workhorse used by every kernel
in the package.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import Callable, Sequence

import numpy as np
from scipy import special

from . import _accel, _mlkern
from .errors import AccuracyError, ValidationError, require

MODULE = "mlf"
TARGET_ERROR = 1e-10


@dataclass(frozen=True)
class MLSpec:
    beta: float
    gam: float
    x: float

    def __post_init__(self):
        require(math.isfinite(self.beta) and self.beta > 0, MODULE, "beta", "beta > 0", self.beta)
        require(math.isfinite(self.gam) and self.gam > 0, MODULE, "gam", "gam > 0", self.gam)
        require(math.isfinite(self.x), MODULE, "x", "finite", self.x)


@dataclass(frozen=True)
class EvalReport:
    value: float
    method: str
    terms_used: int
    est_error: float
    x_switch: float = math.inf

    def to_dict(self) -> dict:
        return asdict(self)


_COEFFS: dict[tuple[float, float], np.ndarray] = {}


def _coeffs(beta: float, gam: float) -> np.ndarray:
    key = (beta, gam)
    c = _COEFFS.get(key)
    if c is None:
        c = _COEFFS[key] = _mlkern.series_coeffs(beta, gam)
    return c


def x_switch(beta: float, gam: float = 1.0) -> float:
    """Argument magnitude beyond which the power-law expansion takes over."""
    return _mlkern.x_switch(float(beta), float(gam))


def mittag_leffler(spec: MLSpec) -> EvalReport:
    """E_{beta,gam}(x) with method and error estimate.

    Raises :class:`AccuracyError` (carrying the partial sum) when the series
    fails to converge within 10^4 terms.
    """
    beta, gam, x = float(spec.beta), float(spec.gam), float(spec.x)
    xs = x_switch(beta, gam) if beta < 1.0 else math.inf
    v, code, n, err = _mlkern._ml_scalar(beta, gam, x, _coeffs(beta, gam), xs)
    if not math.isfinite(err) or not math.isfinite(v):
        raise AccuracyError(
            f"Mittag-Leffler series did not converge for beta={beta}, gam={gam}, x={x}",
            MODULE,
            partial=v,
        )
    if beta > 1.0 and err > TARGET_ERROR * max(1.0, abs(v)):
        raise AccuracyError(
            f"cancellation in the series limits accuracy to {err:.1e} for beta={beta}, x={x}",
            MODULE,
            partial=v,
            est_error=err,
        )
    return EvalReport(float(v), _mlkern.METHOD_NAMES[code], int(n), float(err), xs)


def ml(beta: float, gam: float, x) -> np.ndarray | float:
    """Vectorised E_{beta,gam}(x); scalar in, scalar out."""
    beta, gam = float(beta), float(gam)
    if not (beta > 0 and gam > 0):
        raise ValidationError(f"beta and gam must be > 0 (got {beta}, {gam})", MODULE)
    arr = np.asarray(x, dtype=float)
    flat = np.ascontiguousarray(arr.reshape(-1))
    if not np.all(np.isfinite(flat)):
        raise ValidationError("Mittag-Leffler argument must be finite", MODULE, parameter="x")
    xs = x_switch(beta, gam) if beta < 1.0 else math.inf
    if beta > 1.0 and flat.size and flat.min() < 0:
        _check_cancellation(beta, gam, float(flat.min()))
    coeffs = _coeffs(beta, gam)
    if _accel.enabled():
        out = _mlkern.ml_array_numba(beta, gam, flat, coeffs, xs)
    else:
        out = _mlkern.ml_array_numpy(beta, gam, flat, coeffs, xs)
    out = out.reshape(arr.shape)
    return float(out) if arr.ndim == 0 else out


def _check_cancellation(beta: float, gam: float, xmin: float) -> None:
    # for beta > 1 only the alternating series is available; its rounding
    # error is about eps times the largest term
    lx = math.log(-xmin)
    j = np.arange(int(4 * (-xmin) ** (1.0 / beta)) + 16, dtype=float)
    big = float(np.max(j * lx - special.gammaln(beta * j + gam)))
    if big + math.log(16 * np.finfo(float).eps) > math.log(TARGET_ERROR):
        raise AccuracyError(
            f"cancellation in the series limits accuracy to ~{16 * np.finfo(float).eps * math.exp(min(big, 700)):.1e} "
            f"for beta={beta}, x={xmin}",
            MODULE,
            partial=None,
        )


def ml_neg_power(alpha: float, k: float, w, gam: float = 1.0):
    """E_{alpha,gam}(-k w**alpha) for w >= 0, the form every kernel uses."""
    w = np.asarray(w, dtype=float)
    return ml(alpha, gam, -k * np.abs(w) ** alpha) if w.ndim else ml(alpha, gam, -k * abs(float(w)) ** alpha)


def one_minus_ml(alpha: float, x):
    """1 - E_{alpha,1}(-x) for x >= 0 without cancellation near 0.

    Below x = 1e-4 this uses the identity 1 - E_{a,1}(-x) = x E_{a,a+1}(-x),
    i.e. the series started at its j = 1 term.
    """
    x = np.asarray(x, dtype=float)
    small = x < 1e-4
    out = 1.0 - np.asarray(ml(alpha, 1.0, -x))
    if np.any(small):
        xs = x[small] if x.ndim else x
        tail = xs * np.asarray(ml(alpha, alpha + 1.0, -xs))
        if x.ndim:
            out = np.array(out, dtype=float)
            out[small] = tail
        else:
            out = tail
    return float(out) if x.ndim == 0 else out


def mlf_kernel_derivative(alpha: float, k: float, w):
    """d/dw E_{alpha,1}(-k w^alpha) = -k w^(alpha-1) E_{alpha,alpha}(-k w^alpha)."""
    require(0 < alpha <= 1, MODULE, "alpha", "0 < alpha <= 1", alpha)
    require(k >= 0, MODULE, "k", "k >= 0", k)
    w = np.asarray(w, dtype=float)
    require(bool(np.all(w > 0)), MODULE, "w", "w > 0", w.min() if w.size else w)
    val = -k * w ** (alpha - 1.0) * np.asarray(ml(alpha, alpha, -k * w**alpha))
    return float(val) if w.ndim == 0 else val


def wright(beta: float, gam: float, x: float, max_terms: int = 10_000) -> float:
    """Wright function sum_j x^j / (j! Gamma(beta j + gam)).

    Stops once two consecutive terms fall below 1e-16 of the partial sum.
    """
    require(beta > 0, MODULE, "beta", "beta > 0", beta)
    require(gam > 0, MODULE, "gam", "gam > 0", gam)
    x = float(x)
    if x == 0.0:
        return float(special.rgamma(gam))
    total, small = 0.0, 0
    lx = math.log(abs(x))
    for j in range(max_terms):
        mag = math.exp(j * lx - math.lgamma(j + 1.0) - math.lgamma(beta * j + gam))
        total += -mag if (x < 0 and j % 2) else mag
        if mag <= 1e-16 * abs(total):
            small += 1
            if small == 2:
                return total
        else:
            small = 0
    raise AccuracyError(f"Wright series did not converge for x={x}", MODULE, partial=total)


def cm_spot_check(
    f: Callable[[np.ndarray], np.ndarray],
    points: Sequence[float],
    max_order: int,
    step: float | None = None,
) -> bool:
    """Finite-difference test of (-1)^n f^(n)(x) >= 0 for n <= max_order.

    Uses forward differences of step ``h`` (default: a tenth of the smallest
    point, capped at 0.05). A sign violation counts only when it exceeds three
    times the stencil's truncation estimate, taken from the same difference at
    step ``2h``.
    """
    pts = np.asarray(points, dtype=float)
    require(pts.size > 0 and bool(np.all(pts > 0)), MODULE, "points", "points > 0", pts.tolist())
    require(bool(np.all(np.diff(pts) > 0)), MODULE, "points", "strictly increasing", pts.tolist())
    require(1 <= max_order <= 6, MODULE, "max_order", "1 <= max_order <= 6", max_order)
    h = step if step is not None else min(0.05, 0.1 * pts[0])
    # the widest stencil (step 2h) must not reach the next point
    gap = np.diff(pts).min() if pts.size > 1 else np.inf
    if h <= 1e-6 or 2 * max_order * h > gap:
        raise ValidationError(
            f"point spacing too small for order {max_order} differences", MODULE, parameter="points"
        )
    for n in range(max_order + 1):
        d1 = _fwd_diff(f, pts, n, h)
        d2 = _fwd_diff(f, pts, n, 2 * h)
        trunc = np.abs(d2 - d1) + 1e-12 * np.abs(np.asarray(f(pts)))
        signed = (-1) ** n * d1
        if np.any(signed < -3.0 * trunc):
            return False
    return True


def _fwd_diff(f, x, n, h):
    if n == 0:
        return np.asarray(f(x), dtype=float)
    k = np.arange(n + 1)
    coef = (-1.0) ** (n - k) * special.comb(n, k)
    vals = np.stack([np.asarray(f(x + kk * h), dtype=float) for kk in k])
    return coef @ vals / h**n
