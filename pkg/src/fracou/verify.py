"""Residual and identity checks shared by the CLI ``verify`` command and the
acceptance tests. Every suite returns a JSON-ready dict."""

from __future__ import annotations

import math
import time
from typing import Callable

import numpy as np
from scipy import special

from . import kernels as K
from . import mlf, subord
from .errors import ValidationError, require
from .fracops import (
    ExponentialTail,
    GridFunction,
    TimeGrid,
    caputo_derivative,
    convolution_derivative,
    log_operator,
    log_operator_g,
)
from .sampling import psd_check

SCHEMA_VERSION = 1


def _refine_study(residual: Callable[[int], float], steps: int) -> dict:
    r1 = residual(steps)
    r2 = residual(2 * steps)
    order = math.log2(r1 / r2) if r1 > 0 and r2 > 0 else math.inf
    return {"steps": steps, "residual": r1, "residual_refined": r2, "ratio": r1 / r2 if r2 > 0 else math.inf, "order": order}


def fp_residual(
    alpha: float, xi: float, steps: int = 256, gamma: float = 1.0, theta: float = 1.0, t_max: float = 1.0, scheme: str = "l1-2"
) -> dict:
    """max |L^a u + drift xi du/dxi + diff xi^2 u| for the characteristic function u."""
    p = K.ProcessParams(alpha, gamma, theta)

    def residual(n):
        g = TimeGrid(0.0, t_max, n)
        t = g.nodes
        u = np.asarray(K.char_function(xi, t, p))
        var = np.asarray(K.variance(t, p))
        xi_du = -(xi**2) * var * u  # xi * d/dxi of exp(-xi^2 var / 2)
        lhs = log_operator(GridFunction(g, u), alpha, scheme=scheme).values
        r = lhs + p.fp_drift * xi_du + p.fp_diff * xi**2 * u
        return float(np.abs(r[1:]).max())

    out = _refine_study(residual, steps)
    out.update(suite="fp-residual", alpha=alpha, xi=xi, gamma=gamma, theta=theta, t_max=t_max, scheme=scheme)
    return out


def cgf_residual(
    alpha: float, eta: float, steps: int = 256, gamma: float = 1.0, theta: float = 1.0, t_max: float = 1.0, scheme: str = "l1-2"
) -> dict:
    """max |D^a C + 2^a gamma C - 2^(a-1) eta^2 theta| for the cumulant function C."""
    p = K.ProcessParams(alpha, gamma, theta)

    def residual(n):
        g = TimeGrid(0.0, t_max, n)
        c = np.asarray(K.cgf(eta, g.nodes, p))
        d = caputo_derivative(GridFunction(g, c), alpha, scheme=scheme).values
        r = d + 2**alpha * gamma * c - 2 ** (alpha - 1) * eta**2 * theta
        return float(np.abs(r[1:]).max())

    out = _refine_study(residual, steps)
    out.update(suite="cgf-residual", alpha=alpha, eta=eta, gamma=gamma, theta=theta, t_max=t_max, scheme=scheme)
    return out


def gfp_residual(
    family: str = "cpe",
    xi: float = 1.0,
    steps: int = 256,
    gamma: float = 1.0,
    theta: float = 1.0,
    a: float = 1.0,
    alpha: float = 0.5,
    t_max: float = 1.0,
    explicit_jump: bool = True,
    scheme: str = "l1-2",
) -> dict:
    """Generalized FP residual for u = exp{-(theta xi^2 / 2 gamma)(1 - l(gamma, t))}.

    The right-hand side is -(gamma/2) xi du/dxi - (theta/2) xi^2 u. For the
    CPE family ``l`` jumps from 1 at t = 0 to 1/(gamma+1) at 0+; with
    ``explicit_jump`` the jump enters the convolution exactly, otherwise it
    is smeared over the first cell.
    """
    spec = subord.BernsteinSpec.cpe(a) if family == "cpe" else subord.BernsteinSpec.stable(alpha)
    require(family in ("cpe", "stable"), "verify", "family", "cpe or stable", family)
    tail = spec.tail()
    c = theta * xi**2 / (2 * gamma)

    def residual(n):
        g = TimeGrid(0.0, t_max, n)
        lt = np.asarray(subord.ltilde(gamma, g.nodes, spec), dtype=float).copy()
        lt0 = float(lt[0])
        lt[0] = 1.0  # L(0) = 0
        u = np.exp(-c * (1.0 - lt))
        u_plus = math.exp(-c * (1.0 - lt0)) if (explicit_jump and lt0 != 1.0) else None
        lhs = log_operator_g(GridFunction(g, u), tail, u0_plus=u_plus, scheme=scheme).values
        xi_du = -2.0 * c * (1.0 - lt) * u
        r = lhs + 0.5 * gamma * xi_du + 0.5 * theta * xi**2 * u
        return float(np.abs(r[1:]).max())

    out = _refine_study(residual, steps)
    out.update(suite="gfp-residual", family=family, xi=xi, gamma=gamma, theta=theta, a=a, t_max=t_max, explicit_jump=explicit_jump, scheme=scheme)
    if family == "stable":
        out["alpha"] = alpha
    return out


def ivp_residual(a: float = 1.0, gamma: float = 1.0, steps: int = 256, t_max: float = 1.0, scheme: str = "l1-2") -> dict:
    """max |D^g l + gamma l| for the CPE inverse-subordinator transform."""
    spec = subord.BernsteinSpec.cpe(a)

    def residual(n):
        g = TimeGrid(0.0, t_max, n)
        lt = np.asarray(subord.ltilde(gamma, g.nodes, spec), dtype=float).copy()
        l0p = float(lt[0])
        lt[0] = 1.0
        d = convolution_derivative(GridFunction(g, lt), ExponentialTail(a), u0_plus=l0p, scheme=scheme).values
        return float(np.abs(d[1:] + gamma * lt[1:]).max())

    out = _refine_study(residual, steps)
    out.update(suite="ivp-residual", a=a, gamma=gamma, t_max=t_max, scheme=scheme)
    return out


def special_functions() -> dict:
    x = np.linspace(-20, 5, 501)
    e11 = float(np.max(np.abs(np.asarray(mlf.ml(1, 1, x)) / np.exp(x) - 1)))
    y = np.linspace(0, 10, 401)
    e21 = float(np.max(np.abs(np.asarray(mlf.ml(2, 1, -(y**2))) - np.cos(y))))
    zs = [0.0, 0.25, 1.0, 2.0, 5.0, 10.0]
    wb = max(abs(mlf.wright(1, 1, z) - float(special.i0(2 * math.sqrt(z)))) / max(1.0, float(special.i0(2 * math.sqrt(z)))) for z in zs)
    ok = e11 <= 1e-10 and e21 <= 1e-10 and wb <= 1e-10
    return {
        "suite": "special-functions",
        "exp_identity_max_rel": e11,
        "cos_identity_max_abs": e21,
        "wright_bessel_max_rel": wb,
        "passed": bool(ok),
    }


def laplace_inversion(t_values=None, gamma: float = 1.0, alphas=(0.3, 0.5, 0.8), a: float = 1.0) -> dict:
    t = np.linspace(0.1, 10.0, 50) if t_values is None else np.asarray(t_values, dtype=float)
    rows = {}
    for al in alphas:
        spec = subord.BernsteinSpec.stable(al)
        num = subord.ltilde(gamma, t, spec, method="talbot")
        ref = mlf.ml(al, 1.0, -gamma * t**al)
        rows[f"stable_{al}"] = float(np.max(np.abs(num - ref)))
    spec = subord.BernsteinSpec.cpe(a)
    rows["cpe"] = float(np.max(np.abs(subord.ltilde(gamma, t, spec, method="talbot") - subord.ltilde(gamma, t, spec))))
    return {"suite": "laplace-inversion", "max_abs_error": rows, "passed": bool(max(rows.values()) <= 1e-8)}


def markov(alpha: float = 0.5, gamma: float = 1.0, theta: float = 1.0, lattice=None) -> dict:
    """Factorization of the autocorrelation over all lattice triples s < h < t."""
    p = K.ProcessParams(alpha, gamma, theta)
    pts = np.array([0.25, 0.5, 1.0, 1.5, 2.0, 3.0, 5.0]) if lattice is None else np.asarray(lattice, dtype=float)

    def rho(cov, s, t):
        return cov(s, t, p) / math.sqrt(cov(s, s, p) * cov(t, t, p))

    worst = 0.0
    for i in range(len(pts)):
        for j in range(i + 1, len(pts)):
            for k in range(j + 1, len(pts)):
                s, h, t = pts[i], pts[j], pts[k]
                lhs = rho(K.cov_time_changed_ou, s, t)
                rhs = rho(K.cov_time_changed_ou, s, h) * rho(K.cov_time_changed_ou, h, t)
                worst = max(worst, abs(lhs - rhs) / abs(lhs))
    wp = p
    lhs = rho_y = K.cov_fractional_ou(1, 3, wp) / math.sqrt(K.cov_fractional_ou(1, 1, wp) * K.cov_fractional_ou(3, 3, wp))
    r12 = K.cov_fractional_ou(1, 2, wp) / math.sqrt(K.cov_fractional_ou(1, 1, wp) * K.cov_fractional_ou(2, 2, wp))
    r23 = K.cov_fractional_ou(2, 3, wp) / math.sqrt(K.cov_fractional_ou(2, 2, wp) * K.cov_fractional_ou(3, 3, wp))
    gap = abs(lhs - r12 * r23)
    return {
        "suite": "markov",
        "alpha": alpha,
        "xa_max_rel_violation": worst,
        "ya_violation_123": gap,
        "ya_rho_13": rho_y,
        "ya_rho_12_rho_23": r12 * r23,
        "passed": bool(worst <= 1e-12 and gap > 1e-3),
    }


def psd(alphas=(0.3, 0.5, 0.8), n_points: int = 64, seed: int = 7, t_max: float = 10.0) -> dict:
    rng = np.random.Generator(np.random.Philox(key=seed))
    pts = np.sort(rng.uniform(0.0, t_max, n_points))
    rows = []
    for al in alphas:
        p = K.ProcessParams(al)
        for model in ("stationary", "fractional_ou"):
            rep = psd_check(K.KernelSpec(model, p), pts)
            rows.append({"alpha": al, "model": model, **rep.to_dict()})
    return {"suite": "psd", "rows": rows, "passed": all(r["passed"] for r in rows)}


SUITES = {
    "fp-residual": fp_residual,
    "cgf-residual": cgf_residual,
    "gfp-residual": gfp_residual,
    "ivp-residual": ivp_residual,
    "special-functions": special_functions,
    "laplace-inversion": laplace_inversion,
    "markov": markov,
    "psd": psd,
}


def run_suite(name: str, **kwargs) -> dict:
    if name not in SUITES:
        raise ValidationError(f"unknown suite {name!r}; expected one of {sorted(SUITES)}", "verify", parameter="suite")
    t0 = time.perf_counter()
    out = SUITES[name](**kwargs)
    out["schema_version"] = SCHEMA_VERSION
    out["elapsed_s"] = round(time.perf_counter() - t0, 6)
    return out
