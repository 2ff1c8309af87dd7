"""Fractional operators on uniform time grids.

Convolution-type derivatives ``int_0^t u'(t-s) nu(s) ds`` (Caputo's for the
power tail) are discretised by product integration. ``scheme="l1"`` takes
``u'`` constant per cell (the L1 scheme, order ``2 - a``). The default
``scheme="l1-2"`` differentiates the quadratic through nodes ``j-1, j, j+1`` on
every cell but the first, which adds a second-difference memory term and
raises the order to ``3 - a`` on smooth input. ``nu`` and ``s nu(s)`` are
integrated over each cell in closed form when the tail supplies them.

Inputs that behave like ``c1 t^a + c2 t^(2a) + ...`` near the origin, which is
what Mittag-Leffler kernels look like, defeat both schemes at the first few
nodes. ``singular_powers="auto"`` adds starting weights that make the scheme
exact on ``t^(k a)`` for every ``k a`` below the scheme order (a Lubich-style
correction). Pass ``singular_powers=()`` to get the textbook scheme.

Node 0 is reported as 0 for every memory operator (empty memory integral).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from scipy import integrate

from . import _accel
from ._accel import njit
from .errors import NumericalError, ValidationError, require

MODULE = "fracops"


@dataclass(frozen=True)
class TimeGrid:
    t0: float
    t_max: float
    n_steps: int

    def __post_init__(self):
        require(math.isfinite(self.t0) and self.t0 >= 0, MODULE, "t0", "t0 >= 0", self.t0)
        require(math.isfinite(self.t_max) and self.t_max > self.t0, MODULE, "t_max", "t_max > t0", self.t_max)
        require(int(self.n_steps) == self.n_steps and self.n_steps >= 2, MODULE, "n_steps", "n_steps >= 2", self.n_steps)

    @property
    def h(self) -> float:
        return (self.t_max - self.t0) / self.n_steps

    @property
    def nodes(self) -> np.ndarray:
        return self.t0 + self.h * np.arange(self.n_steps + 1)

    def refine(self) -> "TimeGrid":
        return TimeGrid(self.t0, self.t_max, 2 * self.n_steps)


@dataclass(frozen=True)
class GridFunction:
    grid: TimeGrid
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        require(v.shape == (self.grid.n_steps + 1,), MODULE, "values", "len(values) == n_steps + 1", v.shape)
        require(bool(np.all(np.isfinite(v))), MODULE, "values", "finite", "non-finite entry")
        object.__setattr__(self, "values", v)

    @classmethod
    def sample(cls, f: Callable[[np.ndarray], np.ndarray], grid: TimeGrid) -> "GridFunction":
        return cls(grid, np.asarray(f(grid.nodes), dtype=float))

    @property
    def nodes(self) -> np.ndarray:
        return self.grid.nodes

    def __add__(self, other):
        return GridFunction(self.grid, self.values + _vals(other))

    def __mul__(self, c):
        return GridFunction(self.grid, self.values * _vals(c))

    __rmul__ = __mul__


def _vals(x):
    return x.values if isinstance(x, GridFunction) else x


# ---------------------------------------------------------------------------
# Levy tails


class LevyTail:
    """Tail ``nu(s)`` of a Levy measure, seen by the convolution derivative.

    Subclasses may override :meth:`cell_integral` and :meth:`cell_moment`
    with closed forms and :meth:`power_derivative` with the exact operator
    applied to ``t^sigma`` (which enables starting weights).
    """

    name = "custom"

    def __init__(self, func: Callable[[float], float] | None = None, name: str = "custom"):
        self._func = func
        self.name = name

    def __call__(self, s):
        if self._func is None:
            raise NotImplementedError
        return self._func(s)

    def cell_integral(self, lo: np.ndarray, hi: np.ndarray) -> np.ndarray:
        out = np.empty(len(lo))
        for i, (a, b) in enumerate(zip(lo, hi)):
            val, err = integrate.quad(self, a, b, limit=200)
            if not math.isfinite(val):
                raise ValidationError(
                    f"tail is not integrable on [{a}, {b}]", MODULE, parameter="nu_tail"
                )
            out[i] = val
        return out

    def cell_moment(self, lo: np.ndarray, hi: np.ndarray) -> np.ndarray:
        """``int_lo^hi (mid - s) nu(s) ds`` with ``mid`` the cell midpoint."""
        out = np.empty(len(lo))
        for i, (a, b) in enumerate(zip(lo, hi)):
            m = 0.5 * (a + b)
            val, err = integrate.quad(lambda s: (m - s) * self(s), a, b, limit=200)
            if not math.isfinite(val):
                raise ValidationError(f"tail is not integrable on [{a}, {b}]", MODULE, parameter="nu_tail")
            out[i] = val
        return out

    def power_derivative(self, sigma: float, t: np.ndarray) -> np.ndarray | None:
        return None

    def default_powers(self, order: float = 2.0) -> tuple[float, ...]:
        return ()

    def key(self):
        # arbitrary callables are not cached
        return None


class PowerTail(LevyTail):
    """``nu(s) = s^-alpha / Gamma(1 - alpha)``; the operator is Caputo's."""

    def __init__(self, alpha: float):
        require(0 < alpha < 1, MODULE, "alpha", "0 < alpha < 1", alpha)
        self.alpha = float(alpha)
        self.name = "stable"

    def __call__(self, s):
        return np.asarray(s, dtype=float) ** (-self.alpha) / math.gamma(1 - self.alpha)

    def cell_integral(self, lo, hi):
        p = 1.0 - self.alpha
        return (np.asarray(hi) ** p - np.asarray(lo) ** p) / math.gamma(2 - self.alpha)

    def cell_moment(self, lo, hi):
        a = self.alpha
        lo, hi = np.asarray(lo, dtype=float), np.asarray(hi, dtype=float)
        i0 = (hi ** (1 - a) - lo ** (1 - a)) / math.gamma(2 - a)
        i1 = (hi ** (2 - a) - lo ** (2 - a)) / ((2 - a) * math.gamma(1 - a))
        return 0.5 * (lo + hi) * i0 - i1

    def power_derivative(self, sigma, t):
        a = self.alpha
        return math.gamma(sigma + 1) / math.gamma(sigma + 1 - a) * np.asarray(t) ** (sigma - a)

    def default_powers(self, order: float = 2.0):
        return _auto_powers(self.alpha, order)

    def key(self):
        return ("stable", self.alpha)


class ExponentialTail(LevyTail):
    """``nu(s) = scale * exp(-a s)``: compound Poisson with exponential jumps."""

    def __init__(self, a: float, scale: float = 1.0):
        require(a > 0, MODULE, "a", "a > 0", a)
        self.a, self.scale = float(a), float(scale)
        self.name = "cpe"

    def __call__(self, s):
        return self.scale * np.exp(-self.a * np.asarray(s, dtype=float))

    def cell_integral(self, lo, hi):
        a = self.a
        return self.scale * np.exp(-a * np.asarray(lo)) * -np.expm1(-a * (np.asarray(hi) - np.asarray(lo))) / a

    def cell_moment(self, lo, hi):
        # with d = (hi - lo) / 2 and s = mid + x: -e^{-a mid} int_{-d}^{d} x e^{-a x} dx
        a = self.a
        lo, hi = np.asarray(lo, dtype=float), np.asarray(hi, dtype=float)
        d = 0.5 * (hi - lo)
        ad = a * d
        inner = 2.0 * (ad * np.cosh(ad) - np.sinh(ad)) / a**2
        return self.scale * np.exp(-a * (lo + d)) * inner

    def key(self):
        return ("cpe", self.a, self.scale)


SCHEMES = {"l1": 2.0, "l1-2": 3.0}  # scheme -> order on smooth input, plus alpha lost to the kernel


def _auto_powers(alpha: float, order: float = 2.0) -> tuple[float, ...]:
    if alpha >= 1.0:
        return ()
    cap = 4 if order <= 2.0 else 8
    out = []
    k = 1
    while k * alpha < order and len(out) < cap - (order > 2.0):
        out.append(k * alpha)
        k += 1
    # above order 2 the linear first cell also misses smooth t^2 terms; skip
    # t^2 when a nearby power already covers it (keeps the system well posed)
    if order > 2.0 and not any(abs(x - 2.0) < 0.05 for x in out):
        out.append(2.0)
    return tuple(sorted(out))


# ---------------------------------------------------------------------------
# Toeplitz memory sums


@njit
def _toeplitz_numba(c, du):
    n = du.shape[0]
    out = np.zeros(n + 1)
    for i in range(1, n + 1):
        acc = 0.0
        for j in range(i):
            acc += c[i - 1 - j] * du[j]
        out[i] = acc
    return out


def _toeplitz_numpy(c, du):
    out = np.zeros(du.shape[0] + 1)
    out[1:] = np.convolve(c, du)[: du.shape[0]]
    return out


def memory_sum(c: np.ndarray, du: np.ndarray) -> np.ndarray:
    """``out[n] = sum_{j<n} c[n-1-j] du[j]``, with ``out[0] = 0``."""
    c = np.ascontiguousarray(c, dtype=float)
    du = np.ascontiguousarray(du, dtype=float)
    if _accel.enabled():
        return _toeplitz_numba(c, du)
    return _toeplitz_numpy(c, du)


_WEIGHT_CACHE: dict = {}
_CACHE_MAX = 128


def _cached(key, build):
    if key[1] is None:
        val = build()
        val.flags.writeable = False
        return val
    val = _WEIGHT_CACHE.get(key)
    if val is None:
        if len(_WEIGHT_CACHE) >= _CACHE_MAX:
            _WEIGHT_CACHE.clear()
        val = _WEIGHT_CACHE[key] = build()
        val.flags.writeable = False
    return val


def _cell_weights(tail: LevyTail, n: int, h: float) -> np.ndarray:
    return _cached(("cell", tail.key(), n, h), lambda: _build_cell_weights(tail, n, h))


def _build_cell_weights(tail, n, h):
    # c_k = (1/h) int_{kh}^{(k+1)h} nu(s) ds
    k = np.arange(n, dtype=float)
    c = tail.cell_integral(k * h, (k + 1) * h) / h
    if not np.all(np.isfinite(c)):
        raise ValidationError("tail is not integrable at 0 under its cell integral", MODULE, parameter="nu_tail")
    return c


def _moment_weights(tail: LevyTail, n: int, h: float) -> np.ndarray:
    return _cached(("moment", tail.key(), n, h), lambda: _build_moment_weights(tail, n, h))


def _build_moment_weights(tail, n, h):
    # d_k = (1/h^2) int_{kh}^{(k+1)h} ((k + 1/2) h - s) nu(s) ds
    k = np.arange(n, dtype=float)
    d = tail.cell_moment(k * h, (k + 1) * h) / h**2
    if not np.all(np.isfinite(d)):
        raise ValidationError("tail is not integrable at 0 under its cell moment", MODULE, parameter="nu_tail")
    return d


def _scheme_sum(tail: LevyTail, v: np.ndarray, h: float, scheme: str) -> np.ndarray:
    n = v.size - 1
    out = memory_sum(_cell_weights(tail, n, h), np.diff(v))
    if scheme == "l1-2":
        d2 = np.zeros(n)
        d2[1:] = v[2:] - 2.0 * v[1:-1] + v[:-2]  # cell j >= 1 uses nodes j-1, j, j+1
        out = out + memory_sum(_moment_weights(tail, n, h), d2)
    return out


def _starting_weights(tail: LevyTail, n: int, h: float, sigmas: tuple, scheme: str) -> np.ndarray:
    return _cached(("start", tail.key(), n, h, sigmas, scheme), lambda: _build_starting(tail, n, h, sigmas, scheme))


def _build_starting(tail, n, h, sigmas, scheme):
    """Weights W (m x n+1) so the scheme plus W^T (u_1..m - u_0) is exact on t^sigma."""
    m = len(sigmas)
    t = h * np.arange(n + 1)
    j = np.arange(1, m + 1, dtype=float)
    A = np.array([j**s for s in sigmas])
    R = np.empty((m, n + 1))
    for k, s in enumerate(sigmas):
        # work in units of h^sigma so the system stays well scaled
        u = np.arange(n + 1, dtype=float) ** s
        exact = tail.power_derivative(s, t) / h**s
        R[k] = exact - _scheme_sum(tail, u, h, scheme)
    R[:, 0] = 0.0
    return np.linalg.solve(A, R)


def convolution_derivative(
    u: GridFunction,
    nu_tail: LevyTail | Callable[[float], float],
    singular_powers: Sequence[float] | str = "auto",
    u0_plus: float | None = None,
    scheme: str = "l1-2",
) -> GridFunction:
    """Discretised ``int_0^t u'(t-s) nu(s) ds`` (lower terminal ``grid.t0``).

    ``u0_plus`` declares a jump of ``u`` at the origin: node 0 holds ``u(0)``,
    the smooth branch starts from ``u0_plus`` and the jump contributes
    ``(u0_plus - u(0)) nu(t)`` exactly.
    """
    grid = u.grid
    require(grid.n_steps >= 2, MODULE, "u", "at least 3 nodes", grid.n_steps + 1)
    require(scheme in SCHEMES, MODULE, "scheme", f"one of {sorted(SCHEMES)}", scheme)
    tail = nu_tail if isinstance(nu_tail, LevyTail) else LevyTail(nu_tail)
    n, h = grid.n_steps, grid.h
    v = u.values.copy()
    jump = 0.0
    if u0_plus is not None:
        jump = float(u0_plus) - v[0]
        v[0] = float(u0_plus)
    out = _scheme_sum(tail, v, h, scheme)
    sigmas = tail.default_powers(SCHEMES[scheme]) if singular_powers == "auto" else tuple(float(s) for s in singular_powers)
    sigmas = tuple(sigmas[: min(len(sigmas), n)])
    if sigmas:
        if tail.power_derivative(sigmas[0], np.ones(1)) is None:
            raise ValidationError("starting weights need an exact power rule for this tail", MODULE, parameter="singular_powers")
        W = _starting_weights(tail, n, h, sigmas, scheme)
        out = out + (v[1 : len(sigmas) + 1] - v[0]) @ W
    if jump:
        out[1:] += jump * np.asarray(tail(h * np.arange(1, n + 1)))
    out[0] = 0.0
    return GridFunction(grid, out)


def caputo_derivative(
    u: GridFunction, alpha: float, singular_powers: Sequence[float] | str = "auto", scheme: str = "l1-2"
) -> GridFunction:
    """Caputo derivative of order ``alpha`` in (0, 1].

    For ``alpha < 1``: product integration of order ``3 - alpha`` (``"l1-2"``)
    or ``2 - alpha`` (``"l1"``) on smooth input, with starting weights for the
    ``t^(k alpha)`` terms by default. For ``alpha == 1``: fourth-order finite
    differences.
    """
    require(0 < alpha <= 1, MODULE, "alpha", "0 < alpha <= 1", alpha)
    require(u.grid.n_steps >= 2, MODULE, "u", "at least 3 nodes", u.grid.n_steps + 1)
    if alpha == 1.0:
        return GridFunction(u.grid, first_derivative(u.values, u.grid.h))
    return convolution_derivative(u, PowerTail(alpha), singular_powers, scheme=scheme)


# fourth-order stencils: centred, and one-sided at the two ends
_C4 = np.array([1.0, -8.0, 0.0, 8.0, -1.0]) / 12.0
_F4 = np.array([-25.0, 48.0, -36.0, 16.0, -3.0]) / 12.0
_S4 = np.array([-3.0, -10.0, 18.0, -6.0, 1.0]) / 12.0  # node 1 from nodes 0..4


def first_derivative(v: np.ndarray, h: float) -> np.ndarray:
    """du/dt at nodes 1..N (node 0 set to 0), fourth order where the grid allows."""
    v = np.asarray(v, dtype=float)
    n = v.size - 1
    out = np.zeros(n + 1)
    if n < 4:
        out[1:] = np.gradient(v, h, edge_order=2)[1:]
        return out
    out[2 : n - 1] = sum(_C4[k] * v[k : n - 3 + k] for k in range(5)) / h
    out[1] = _S4 @ v[0:5] / h
    out[n - 1] = -(_S4 @ v[n - 4 : n + 1][::-1]) / h
    out[n] = -(_F4 @ v[n - 4 : n + 1][::-1]) / h
    return out


def _log_of(u: GridFunction) -> GridFunction:
    if np.any(u.values <= 0):
        bad = int(np.flatnonzero(u.values <= 0)[0])
        raise ValidationError(
            f"u must be strictly positive (node {bad} has {u.values[bad]!r})", MODULE, parameter="u"
        )
    return GridFunction(u.grid, np.log(u.values))


def log_operator(
    u: GridFunction, alpha: float, singular_powers: Sequence[float] | str = "auto", scheme: str = "l1-2"
) -> GridFunction:
    """``u * D^alpha log u`` nodewise."""
    d = caputo_derivative(_log_of(u), alpha, singular_powers, scheme)
    return GridFunction(u.grid, u.values * d.values)


def log_operator_g(
    u: GridFunction,
    nu_tail: LevyTail | Callable[[float], float],
    singular_powers: Sequence[float] | str = "auto",
    u0_plus: float | None = None,
    scheme: str = "l1-2",
) -> GridFunction:
    """``u * D^g log u`` nodewise; ``u0_plus`` as in :func:`convolution_derivative`."""
    lu = _log_of(u)
    lp = None
    if u0_plus is not None:
        require(u0_plus > 0, MODULE, "u0_plus", "u0_plus > 0", u0_plus)
        lp = math.log(u0_plus)
    d = convolution_derivative(lu, nu_tail, singular_powers, lp, scheme)
    return GridFunction(u.grid, u.values * d.values)


def observed_order(err_coarse: float, err_fine: float) -> float:
    """log2 of the error ratio between a grid and its refinement."""
    if err_fine <= 0 or err_coarse <= 0:
        raise NumericalError("errors must be positive to estimate an order", MODULE)
    return math.log2(err_coarse / err_fine)
