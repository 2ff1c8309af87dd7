"""Power-law Poisson shot noise and its Gaussian limit.

Events arrive at rate ``n * lambda0``; each contributes ``h0(t - T_j)/sqrt(n)``
with ``h0(u) = sqrt(w^(alpha-1) E_{alpha,alpha}(-gamma 2^alpha w^alpha))``,
``w = u + xi0``. The centered process is

    U_n(t) = (sum_j h0(t - T_j) - mu_n(t)) / sqrt(n),  mu_n(t) = n lambda0 int_0^t h0.

By Campbell's theorem ``Var U_n(t) = lambda0 int_0^t h0^2`` for every ``n``,
which integrates in closed form to
``lambda0 / (gamma 2^alpha) [E(-gamma 2^alpha xi0^alpha) - E(-gamma 2^alpha (t + xi0)^alpha)]``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np
from scipy import integrate, stats

from . import _accel, _mlkern
from ._accel import njit
from .errors import NumericalError, ValidationError, require
from .fracops import TimeGrid
from .mlf import ml, x_switch
from .sampling import SamplePath, empirical_cov, path_stream

MODULE = "shotnoise"

MAX_EXPECTED_EVENTS = 1e9


@dataclass(frozen=True)
class ShotNoiseSpec:
    lambda0: float
    alpha: float
    gamma: float = 1.0
    xi0: float = 0.1
    n: int = 1

    def __post_init__(self):
        require(math.isfinite(self.lambda0) and self.lambda0 > 0, MODULE, "lambda0", "lambda0 > 0", self.lambda0)
        require(math.isfinite(self.alpha) and 0 < self.alpha <= 1, MODULE, "alpha", "0 < alpha <= 1", self.alpha)
        require(math.isfinite(self.gamma) and self.gamma > 0, MODULE, "gamma", "gamma > 0", self.gamma)
        require(math.isfinite(self.xi0) and self.xi0 >= 0, MODULE, "xi0", "xi0 >= 0", self.xi0)
        require(int(self.n) == self.n and self.n >= 1, MODULE, "n", "n >= 1 (integer)", self.n)

    @property
    def rate(self) -> float:
        return self.n * self.lambda0

    @property
    def k(self) -> float:
        """gamma 2^alpha, the Mittag-Leffler scale inside h0."""
        return self.gamma * 2.0**self.alpha

    def with_n(self, n: int) -> "ShotNoiseSpec":
        return replace(self, n=int(n))

    def describe(self) -> dict:
        return {"lambda0": self.lambda0, "alpha": self.alpha, "gamma": self.gamma, "xi0": self.xi0, "n": self.n}


# ---------------------------------------------------------------------------
# response


def response_h0(u, spec: ShotNoiseSpec):
    """h0(u); zero for u <= 0."""
    u = np.asarray(u, dtype=float)
    a = spec.alpha
    pos = u > 0
    if spec.xi0 == 0 and a < 1 and np.any(pos & (u < 1e-12)):
        raise ValidationError(
            "h0 is singular at u = 0+ when xi0 = 0 and alpha < 1",
            MODULE,
            parameter="u",
            bound="u >= 1e-12 or xi0 > 0",
        )
    w = u[pos] + spec.xi0
    e = np.asarray(ml(a, a, -spec.k * w**a))
    out = np.zeros(u.shape)
    out[pos] = np.sqrt(np.maximum(w ** (a - 1.0) * e, 0.0))
    return float(out) if out.ndim == 0 else out


def h0_squared_integral(t, spec: ShotNoiseSpec):
    """int_0^t h0(u)^2 du in closed form."""
    t = np.asarray(t, dtype=float)
    a, k = spec.alpha, spec.k
    v = (np.asarray(ml(a, 1.0, -k * spec.xi0**a)) - np.asarray(ml(a, 1.0, -k * (t + spec.xi0) ** a))) / k
    return float(v) if v.ndim == 0 else v


def variance_theory(t, spec: ShotNoiseSpec):
    """Var U_n(t) = lambda0 int_0^t h0^2 (exact for every n)."""
    return spec.lambda0 * h0_squared_integral(t, spec)


def covariance_theory(s: float, t: float, spec: ShotNoiseSpec) -> float:
    """Cov(U(s), U(t)) = lambda0 int_0^min(s,t) h0(s - u) h0(t - u) du."""
    lo, hi = min(s, t), max(s, t)
    if lo <= 0:
        return 0.0
    d = hi - lo
    # substitute v = lo - u, then v = w^2 to soften a possible endpoint singularity
    f = lambda w: 2 * w * response_h0(w * w, spec) * response_h0(w * w + d, spec)
    val, err = integrate.quad(f, 0.0, math.sqrt(lo), limit=200, epsabs=1e-13, epsrel=1e-11)
    return spec.lambda0 * val


_MU_CACHE: dict = {}


def h0_integral(nodes, spec: ShotNoiseSpec) -> np.ndarray:
    """int_0^t h0 at each node (adaptive quadrature in v = sqrt(u)), cached."""
    nodes = np.asarray(nodes, dtype=float)
    key = (spec.lambda0, spec.alpha, spec.gamma, spec.xi0, nodes.tobytes())
    hit = _MU_CACHE.get(key)
    if hit is not None:
        return hit
    order = np.argsort(nodes)
    srt = nodes[order]
    f = lambda v: 2.0 * v * response_h0(v * v, spec)
    acc, prev = 0.0, 0.0
    vals = np.empty_like(srt)
    for i, t in enumerate(srt):
        if t > prev:
            piece, _ = integrate.quad(f, math.sqrt(prev), math.sqrt(t), limit=200, epsabs=1e-13, epsrel=1e-12)
            acc += piece
            prev = t
        vals[i] = acc if t > 0 else 0.0
    out = np.empty_like(vals)
    out[order] = vals
    out.flags.writeable = False
    _MU_CACHE[key] = out
    return out


def mu_n(nodes, spec: ShotNoiseSpec) -> np.ndarray:
    """Mean of the uncentered sum: n lambda0 int_0^t h0."""
    return spec.rate * h0_integral(nodes, spec)


# ---------------------------------------------------------------------------
# simulation


@njit
def _accumulate_numba(times, offsets, nodes, alpha, k, xi0, coeffs, xs):
    n_paths = offsets.shape[0] - 1
    m = nodes.shape[0]
    out = np.zeros((n_paths, m))
    for p in range(n_paths):
        for e in range(offsets[p], offsets[p + 1]):
            tj = times[e]
            for i in range(m):
                u = nodes[i] - tj
                if u > 0.0:
                    w = u + xi0
                    v = w ** (alpha - 1.0) * _mlkern._ml_value(alpha, alpha, -k * w**alpha, coeffs, xs)
                    if v > 0.0:
                        out[p, i] += math.sqrt(v)
    return out


def _accumulate_numpy(times, offsets, nodes, spec):
    n_paths = offsets.size - 1
    out = np.zeros((n_paths, nodes.size))
    owner = np.repeat(np.arange(n_paths), np.diff(offsets))
    for i, t in enumerate(nodes):
        u = t - times
        live = u > 0
        if live.any():
            out[:, i] = np.bincount(owner[live], weights=response_h0(u[live], spec), minlength=n_paths)
    return out


def _events(spec: ShotNoiseSpec, t_max: float, seed: int, n_paths: int):
    lam = spec.rate * t_max
    if lam > MAX_EXPECTED_EVENTS:
        raise ValidationError(
            f"expected event count n*lambda0*t_max = {lam:.3g} exceeds {MAX_EXPECTED_EVENTS:.0e}",
            MODULE,
            parameter="n",
            bound="n*lambda0*t_max <= 1e9",
            value=lam,
        )
    chunks, counts = [], np.empty(n_paths, dtype=np.int64)
    for p in range(n_paths):
        rng = np.random.Generator(path_stream(seed, p))
        c = int(rng.poisson(lam))
        counts[p] = c
        chunks.append(np.sort(rng.uniform(0.0, t_max, c)))
    offsets = np.zeros(n_paths + 1, dtype=np.int64)
    np.cumsum(counts, out=offsets[1:])
    times = np.concatenate(chunks) if chunks else np.zeros(0)
    return times, offsets


def simulate_un(spec: ShotNoiseSpec, grid, n_paths: int, seed: int, centered: bool = True) -> SamplePath:
    """Centered, rescaled shot-noise paths U_n on the grid nodes."""
    require(spec.xi0 > 0, MODULE, "xi0", "xi0 > 0", spec.xi0)
    require(int(n_paths) == n_paths and n_paths >= 1, MODULE, "n_paths", "n_paths >= 1", n_paths)
    require(int(seed) == seed and 0 <= seed < 2**64, MODULE, "seed", "0 <= seed < 2^64", seed)
    nodes = grid.nodes if isinstance(grid, TimeGrid) else np.asarray(grid, dtype=float)
    require(bool(np.all(nodes >= 0)) and math.isfinite(float(nodes.max())), MODULE, "grid", "finite, >= 0", nodes.min())
    t_max = float(nodes.max())
    times, offsets = _events(spec, t_max, int(seed), int(n_paths))
    if _accel.enabled():
        a = spec.alpha
        from .mlf import _coeffs

        S = _accumulate_numba(
            times, offsets, np.ascontiguousarray(nodes), a, spec.k, spec.xi0, _coeffs(a, a), x_switch(a, a) if a < 1 else math.inf
        )
    else:
        S = _accumulate_numpy(times, offsets, nodes, spec)
    if centered:
        S = S - mu_n(nodes, spec)
    paths = S / math.sqrt(spec.n)
    meta = {"events": int(offsets[-1]), "centered": centered, "spec": spec.describe()}
    return SamplePath(nodes, paths, int(seed), spec, meta)


# ---------------------------------------------------------------------------
# moments of the increment functional


def w_moment(spec: ShotNoiseSpec, s: float, rho: float, order: int, normalization: str = "printed") -> float:
    """Second or fourth moment of W_n(s; rho) = sum_{T_j <= s}[h0(s-T_j) - h0(s+rho-T_j)]/sqrt(n).

    ``normalization="printed"`` uses the prefactors lambda/sqrt(n) (order 2)
    and lambda/n^2, 3 lambda^2/n (order 4) with lambda = n lambda0.
    ``"cumulant"`` uses the ones that follow from the cumulant expansion:
    lambda/n and lambda/n^2, 3 (lambda/n)^2.
    """
    require(s > 0, MODULE, "s", "s > 0", s)
    require(rho >= 0, MODULE, "rho", "rho >= 0", rho)
    require(order in (2, 4), MODULE, "order", "order in {2, 4}", order)
    require(normalization in ("printed", "cumulant"), MODULE, "normalization", "printed or cumulant", normalization)
    if rho == 0:
        return 0.0

    def diff(y):
        return response_h0(s - y, spec) - response_h0(s + rho - y, spec)

    def integral(p):
        val, err = integrate.quad(lambda y: diff(y) ** p, 0.0, s, limit=400, epsabs=1e-14, epsrel=1e-12)
        if not math.isfinite(val):
            raise NumericalError("quadrature failed in w_moment", MODULE)
        return val

    lam, n = spec.rate, spec.n
    i2 = integral(2)
    if order == 2:
        return (lam / math.sqrt(n) if normalization == "printed" else lam / n) * i2
    i4 = integral(4)
    if normalization == "printed":
        return lam / n**2 * i4 + 3 * lam**2 / n * i2**2
    return lam / n**2 * i4 + 3 * (lam / n) ** 2 * i2**2


def cgf_theory(spec: ShotNoiseSpec, t: float, theta: float, centered: bool = True) -> float:
    """log E exp(theta U_n(t)) = n lambda0 int_0^t (e^{theta h0/sqrt n} - 1) du - theta mu_n/sqrt n."""
    c = theta / math.sqrt(spec.n)
    f = lambda v: 2 * v * math.expm1(c * response_h0(v * v, spec))
    val, _ = integrate.quad(f, 0.0, math.sqrt(t), limit=200, epsabs=1e-14, epsrel=1e-12)
    out = spec.rate * val
    if centered:
        out -= c * float(mu_n(np.array([t]), spec)[0])
    return out


# ---------------------------------------------------------------------------
# convergence diagnostics


def ks_against_limit(sp: SamplePath, node: int, spec: ShotNoiseSpec):
    var = float(variance_theory(sp.times[node], spec))
    return stats.kstest(sp.paths[:, node], "norm", args=(0.0, math.sqrt(var)))


def convergence_report(
    specs: Sequence[ShotNoiseSpec],
    grid,
    n_paths: int,
    seed: int,
    ref_node: int | None = None,
    cov_pairs: Sequence[tuple[int, int]] | None = None,
) -> dict:
    """KS statistics and covariance checks for a sequence of rescalings."""
    require(len(specs) >= 1, MODULE, "specs", "non-empty", len(specs))
    ns = [s.n for s in specs]
    require(all(b > a for a, b in zip(ns, ns[1:])), MODULE, "specs", "n strictly increasing", ns)
    nodes = grid.nodes if isinstance(grid, TimeGrid) else np.asarray(grid, dtype=float)
    m = nodes.size
    ref = m - 1 if ref_node is None else int(ref_node)
    if cov_pairs is None:
        cov_pairs = [(m // 4, m // 2), (m // 2, m - 1), (m // 4, m - 1)]
    rows = []
    for spec in specs:
        sp = simulate_un(spec, nodes, n_paths, seed)
        ks = ks_against_limit(sp, ref, spec)
        var = empirical_cov(sp, [(i, i) for i in range(m)])
        theo_var = np.asarray(variance_theory(nodes, spec))
        cov = empirical_cov(sp, cov_pairs)
        theo_cov = np.array([covariance_theory(nodes[i], nodes[j], spec) for i, j in cov_pairs])
        mean = sp.paths.mean(axis=0)
        mean_se = sp.paths.std(axis=0, ddof=1) / math.sqrt(sp.n_paths)
        rows.append(
            {
                "n": spec.n,
                "ks_statistic": float(ks.statistic),
                "ks_pvalue": float(ks.pvalue),
                "ref_node": ref,
                "mean": mean.tolist(),
                "mean_se": mean_se.tolist(),
                "var": var.estimate.tolist(),
                "var_se": var.std_error.tolist(),
                "var_theory": theo_var.tolist(),
                "var_within_3se": bool(np.all(np.abs(var.estimate - theo_var) <= 3 * var.std_error)),
                "cov_pairs": [list(p) for p in cov_pairs],
                "cov": cov.estimate.tolist(),
                "cov_se": cov.std_error.tolist(),
                "cov_theory": theo_cov.tolist(),
                "cov_within_3se": bool(np.all(np.abs(cov.estimate - theo_cov) <= 3 * cov.std_error)),
                "events": sp.meta["events"],
            }
        )
    ks_vals = [r["ks_statistic"] for r in rows]
    # "non-increasing within noise": allow the KS critical band at n_paths
    band = 1.36 / math.sqrt(n_paths)
    monotone = all(b <= a + band for a, b in zip(ks_vals, ks_vals[1:]))
    return {"schema_version": 1, "rows": rows, "ks_nonincreasing": monotone, "n_paths": int(n_paths), "seed": int(seed)}


def ks_dominance(spec_small: ShotNoiseSpec, spec_large: ShotNoiseSpec, grid, n_paths: int, seeds: Sequence[int], ref_node: int | None = None) -> dict:
    """Count seeds where the KS distance at the smaller n exceeds the larger n's."""
    nodes = grid.nodes if isinstance(grid, TimeGrid) else np.asarray(grid, dtype=float)
    ref = nodes.size - 1 if ref_node is None else int(ref_node)
    small, large = [], []
    for sd in seeds:
        small.append(float(ks_against_limit(simulate_un(spec_small, nodes, n_paths, sd), ref, spec_small).statistic))
        large.append(float(ks_against_limit(simulate_un(spec_large, nodes, n_paths, sd), ref, spec_large).statistic))
    wins = sum(a > b for a, b in zip(small, large))
    return {"ks_small_n": small, "ks_large_n": large, "wins": int(wins), "replications": len(small)}
