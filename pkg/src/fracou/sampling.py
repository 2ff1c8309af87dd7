"""Exact Gaussian path sampling and the estimators used to check it.

Reproducibility: path ``i`` draws its normals from its own Philox stream,
keyed by ``(seed << 64) | i``, and turns 53-bit uniforms into normals by the
inverse CDF. The variates of a path therefore depend only on ``(seed, i)``,
not on how paths are split across worker threads.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Callable, Sequence

import numpy as np
from scipy import special

from . import _accel
from ._accel import njit
from ._fit import loglog_fit
from .errors import NumericalError, ValidationError, require
from .fracops import TimeGrid
from .kernels import KernelSpec, ProcessParams
from .mlf import ml
from .subord import GeneralizedKernelSpec, ltilde

MODULE = "sampling"

JITTER_LADDER = (0.0, 1e-12, 1e-10, 1e-8)
MAX_SEED = 2**64 - 1


@dataclass
class SamplePath:
    times: np.ndarray
    paths: np.ndarray
    seed: int
    kernel: Any = None
    meta: dict = field(default_factory=dict)

    @property
    def n_paths(self) -> int:
        return self.paths.shape[0]

    @property
    def n_nodes(self) -> int:
        return self.paths.shape[1]


@dataclass(frozen=True)
class EstimatorReport:
    estimate: Any
    std_error: Any
    n_samples: int
    extra: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        def conv(v):
            return v.tolist() if isinstance(v, np.ndarray) else v

        d = {"estimate": conv(self.estimate), "std_error": conv(self.std_error), "n_samples": self.n_samples}
        d.update({k: conv(v) for k, v in self.extra.items()})
        return d


@dataclass(frozen=True)
class PSDReport:
    min_eigenvalue: float
    threshold: float
    passed: bool
    size: int

    def to_dict(self) -> dict:
        return {"min_eigenvalue": self.min_eigenvalue, "threshold": self.threshold, "passed": self.passed, "size": self.size}


# ---------------------------------------------------------------------------
# random numbers


def _check_seed(seed) -> int:
    require(int(seed) == seed and 0 <= seed <= MAX_SEED, MODULE, "seed", "0 <= seed < 2^64", seed)
    return int(seed)


def path_stream(seed: int, index: int) -> np.random.Philox:
    """Counter-based stream of path ``index``: Philox keyed by (seed << 64) | index."""
    return np.random.Philox(key=(int(seed) << 64) | int(index))


def path_normals(seed: int, index: int, n: int) -> np.ndarray:
    raw = path_stream(seed, index).random_raw(n)
    u = ((raw >> np.uint64(11)).astype(np.float64) + 0.5) * 2.0**-53
    return special.ndtri(u)


def normals(seed: int, n_paths: int, n: int, start: int = 0, workers: int = 1) -> np.ndarray:
    """(n_paths, n) standard normals; row ``k`` belongs to path ``start + k``."""
    seed = _check_seed(seed)
    out = np.empty((n_paths, n))

    def fill(lo, hi):
        for k in range(lo, hi):
            out[k] = path_normals(seed, start + k, n)

    _parallel(fill, n_paths, workers)
    return out


def _parallel(fn: Callable[[int, int], None], n: int, workers: int):
    workers = max(1, int(workers))
    if workers == 1 or n < 2 * workers:
        fn(0, n)
        return
    edges = np.linspace(0, n, workers + 1).astype(int)
    with ThreadPoolExecutor(max_workers=workers) as ex:
        list(ex.map(lambda ab: fn(*ab), zip(edges[:-1], edges[1:])))


# ---------------------------------------------------------------------------
# factorization


def _nodes(grid) -> np.ndarray:
    if isinstance(grid, TimeGrid):
        return grid.nodes
    x = np.asarray(grid, dtype=float).reshape(-1)
    require(x.size >= 1 and bool(np.all(np.isfinite(x))), MODULE, "grid", "non-empty, finite", x.size)
    return x


def _gram(kernel, x: np.ndarray) -> np.ndarray:
    if hasattr(kernel, "gram"):
        G = kernel.gram(x)
    else:
        G = np.asarray(kernel(x[:, None], x[None, :]), dtype=float)
    return 0.5 * (G + G.T)


def factorize(G: np.ndarray) -> tuple[np.ndarray, float, np.ndarray]:
    """Cholesky factor with the jitter ladder.

    Rows with exactly zero variance (e.g. t = 0 for processes started at 0)
    are pinned to zero and left out of the factorization. Returns
    ``(L, eps_used, active)`` where ``L`` factors ``G[active][:, active]``.
    """
    diag = np.diag(G)
    if np.any(diag < 0):
        raise NumericalError("negative variance on the Gram diagonal", MODULE)
    active = diag > 0
    Ga = G[np.ix_(active, active)]
    if Ga.size == 0:
        return np.zeros((0, 0)), 0.0, active
    scale = float(np.trace(Ga)) / Ga.shape[0]
    for eps in JITTER_LADDER:
        try:
            L = np.linalg.cholesky(Ga + eps * scale * np.eye(Ga.shape[0]))
            return L, eps, active
        except np.linalg.LinAlgError:
            continue
    raise NumericalError(
        f"covariance factorization failed after jitter {JITTER_LADDER[-1]:g} * trace/size; "
        "the kernel is not positive semi-definite on this grid",
        MODULE,
        jitter=JITTER_LADDER[-1],
    )


@njit
def _lower_apply_numba(Z, L):
    n, m = Z.shape
    out = np.zeros((n, m))
    for p in range(n):
        for i in range(m):
            acc = 0.0
            for j in range(i + 1):
                acc += L[i, j] * Z[p, j]
            out[p, i] = acc
    return out


def _lower_apply(Z, L):
    if _accel.enabled():
        return _lower_apply_numba(np.ascontiguousarray(Z), np.ascontiguousarray(L))
    # row-by-row so each path's result does not depend on the batch shape
    return np.stack([L @ z for z in Z]) if Z.shape[0] else np.zeros_like(Z)


def sample_gaussian(kernel, grid, n_paths: int, seed: int, workers: int = 1) -> SamplePath:
    """Centered Gaussian paths with covariance ``kernel`` on ``grid``."""
    require(int(n_paths) == n_paths and n_paths >= 1, MODULE, "n_paths", "n_paths >= 1", n_paths)
    x = _nodes(grid)
    G = _gram(kernel, x)
    L, eps, active = factorize(G)
    Z = normals(seed, int(n_paths), L.shape[0], workers=workers)
    paths = np.zeros((int(n_paths), x.size))
    if L.size:
        paths[:, active] = _lower_apply(Z, L)
    meta = {"jitter": eps, "sampler": "cholesky", "pinned_nodes": int((~active).sum())}
    return SamplePath(x, paths, int(seed), kernel, meta)


# ---------------------------------------------------------------------------
# Brownian representations


def sample_time_changed_bm(clock, amplitude, times, n_paths: int, seed: int, workers: int = 1, kernel=None) -> SamplePath:
    """Paths ``amplitude(t) * W(clock(t))`` from independent increments of W.

    ``clock`` must be non-decreasing along ``times``; W has Var W(c) = c.
    """
    c = np.asarray(clock, dtype=float)
    amp = np.asarray(amplitude, dtype=float)
    if np.any(c < 0) or np.any(np.diff(c) < 0) or not np.all(np.isfinite(c)):
        raise NumericalError("Brownian clock must be finite, non-negative and non-decreasing", MODULE)
    inc = np.sqrt(np.diff(np.concatenate([[0.0], c])))
    Z = normals(seed, int(n_paths), c.size, workers=workers)
    W = np.cumsum(Z * inc, axis=1)
    return SamplePath(np.asarray(times, dtype=float), W * amp, int(seed), kernel, {"sampler": "brownian"})


def sample_brownian_rep(spec, grid, n_paths: int, seed: int, workers: int = 1) -> SamplePath:
    """X(t) = sqrt(sill l(t)) W(1/l(t) - 1) with l the clock's decay profile.

    ``spec`` is :class:`ProcessParams` (l = E(-gamma (2t)^alpha)), a
    ``KernelSpec`` of the time-changed OU model, or an ``X_g``
    :class:`GeneralizedKernelSpec` (l = ltilde at ``time_scale * t``).
    """
    x = _nodes(grid)
    require(bool(np.all(x >= 0)), MODULE, "grid", "t >= 0", x.min())
    if isinstance(spec, KernelSpec):
        require(spec.model == "time_changed_ou", MODULE, "kernel", "time_changed_ou", spec.model)
        spec = spec.params
    if isinstance(spec, ProcessParams):
        p = spec
        lt = np.asarray(ml(p.alpha, 1.0, -p.gamma * (2.0 * x) ** p.alpha))
        sill, kern = p.sill, KernelSpec("time_changed_ou", p)
    elif isinstance(spec, GeneralizedKernelSpec):
        require(spec.model == "X_g", MODULE, "kernel", "X_g", spec.model)
        lt = np.asarray(ltilde(spec.gamma, spec.time_scale * x, spec.bernstein))
        sill, kern = spec.sill, spec
    else:
        raise ValidationError("unsupported spec for the Brownian representation", MODULE, parameter="spec")
    if np.any(lt <= 0):
        raise NumericalError("decay profile underflowed to 0; shorten the grid", MODULE)
    order = np.argsort(x, kind="stable")
    clock = 1.0 / lt[order] - 1.0
    clock = np.maximum(clock, 0.0)
    sp = sample_time_changed_bm(clock, np.sqrt(sill * lt[order]), x[order], n_paths, seed, workers, kern)
    inv = np.empty_like(order)
    inv[order] = np.arange(order.size)
    sp.times, sp.paths = x, sp.paths[:, inv]
    return sp


def sample_scaled_bm(alpha: float, grid, n_paths: int, seed: int, workers: int = 1) -> SamplePath:
    """W(t^alpha): scaled Brownian motion, self-similar with index alpha/2."""
    require(0 < alpha <= 1, MODULE, "alpha", "0 < alpha <= 1", alpha)
    x = _nodes(grid)
    require(bool(np.all(np.diff(x) > 0)) and x[0] >= 0, MODULE, "grid", "increasing, t >= 0", x[0])
    return sample_time_changed_bm(x**alpha, np.ones_like(x), x, n_paths, seed, workers)


# ---------------------------------------------------------------------------
# estimators


def empirical_cov(sp: SamplePath | np.ndarray, pairs: Sequence[tuple[int, int]] | None = None) -> EstimatorReport:
    """Unbiased cross-moments with jackknife standard errors.

    ``pairs=None`` returns the full matrix. Standard errors use the exact
    leave-one-out update of the unbiased covariance.
    """
    X = sp.paths if isinstance(sp, SamplePath) else np.asarray(sp, dtype=float)
    n = X.shape[0]
    require(n >= 2, MODULE, "n_paths", "n_paths >= 2", n)
    D = X - X.mean(axis=0)
    if pairs is None:
        idx_i, idx_j = np.triu_indices(X.shape[1])
    else:
        pr = np.asarray(pairs, dtype=int).reshape(-1, 2)
        idx_i, idx_j = pr[:, 0], pr[:, 1]
    est = np.empty(idx_i.size)
    se = np.empty(idx_i.size)
    for k, (i, j) in enumerate(zip(idx_i, idx_j)):
        prod = D[:, i] * D[:, j]
        S = prod.sum() / (n - 1)
        est[k] = S
        if n < 3:
            se[k] = math.inf
            continue
        loo = ((n - 1) * S - n / (n - 1) * prod) / (n - 2)
        se[k] = math.sqrt((n - 1) / n * float(((loo - loo.mean()) ** 2).sum()))
    if pairs is None:
        m = X.shape[1]
        E, SE = np.zeros((m, m)), np.zeros((m, m))
        E[idx_i, idx_j] = est
        E[idx_j, idx_i] = est
        SE[idx_i, idx_j] = se
        SE[idx_j, idx_i] = se
        return EstimatorReport(E, SE, n)
    return EstimatorReport(est, se, n, {"pairs": [(int(a), int(b)) for a, b in zip(idx_i, idx_j)]})


def empirical_mean(sp: SamplePath | np.ndarray) -> EstimatorReport:
    X = sp.paths if isinstance(sp, SamplePath) else np.asarray(sp, dtype=float)
    n = X.shape[0]
    require(n >= 2, MODULE, "n_paths", "n_paths >= 2", n)
    return EstimatorReport(X.mean(axis=0), X.std(axis=0, ddof=1) / math.sqrt(n), n)


def within_se(estimate, target, std_error, k: float = 3.0) -> np.ndarray:
    """Elementwise |estimate - target| <= k * std_error."""
    return np.abs(np.asarray(estimate) - np.asarray(target)) <= k * np.asarray(std_error)


def compare_estimates(a: EstimatorReport, b: EstimatorReport, k: float = 3.0) -> dict:
    """Joint k-s.e. test of two independent estimates of the same quantity."""
    diff = np.abs(np.asarray(a.estimate) - np.asarray(b.estimate))
    se = np.sqrt(np.asarray(a.std_error) ** 2 + np.asarray(b.std_error) ** 2)
    z = np.divide(diff, se, out=np.zeros_like(diff), where=se > 0)
    return {"max_abs_diff": float(diff.max()), "max_z": float(z.max()), "passed": bool(np.all(diff <= k * se))}


def memory_exponent(r_values, s_values) -> EstimatorReport:
    """Log-log slope of r(s) with standard error and a curvature statistic."""
    r = np.asarray(r_values, dtype=float)
    s = np.asarray(s_values, dtype=float)
    require(r.shape == s.shape and r.ndim == 1, MODULE, "r_values", "same length as s_values", r.shape)
    require(r.size >= 10, MODULE, "s_values", ">= 10 points", r.size)
    require(bool(np.all(s > 0)), MODULE, "s_values", "s > 0", s.min())
    require(s.max() / s.min() >= 100 * (1 - 1e-12), MODULE, "s_values", "span >= 2 decades", s.max() / s.min())
    if np.any(r <= 0):
        raise ValidationError("r values must be positive", MODULE, parameter="r_values", bound="r > 0")
    fit = loglog_fit(s, r)
    return EstimatorReport(
        fit.slope,
        fit.std_error,
        int(r.size),
        {"curvature": fit.curvature, "curvature_z": fit.curvature_z, "curvature_flag": fit.curvature_flag},
    )


def psd_check(kernel, grid) -> PSDReport:
    """Minimum Gram eigenvalue against -1e-8 * trace/size."""
    x = _nodes(grid)
    require(x.size <= 512, MODULE, "grid", "size <= 512", x.size)
    G = _gram(kernel, x)
    lam = float(np.linalg.eigvalsh(G).min())
    thr = -1e-8 * float(np.trace(G)) / x.size
    return PSDReport(lam, thr, bool(lam >= thr), int(x.size))
