"""Log-log regression shared by the memory-exponent estimators."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

CURVATURE_FLAG = 0.1


@dataclass(frozen=True)
class LogLogFit:
    slope: float
    std_error: float
    intercept: float
    curvature: float
    curvature_z: float
    curvature_flag: bool
    n_points: int

    def to_dict(self) -> dict:
        return asdict(self)


def loglog_fit(s, r) -> LogLogFit:
    """Least-squares slope of log r on log s, plus a quadratic-term test.

    The curvature flag is raised when the fitted quadratic term bends the
    line by more than 0.1 in log r across half the range, which separates
    exponential decay from power laws with slowly varying corrections.
    """
    x = np.log(np.asarray(s, dtype=float))
    y = np.log(np.asarray(r, dtype=float))
    n = x.size
    xc = x - x.mean()
    sxx = float(xc @ xc)
    slope = float(xc @ (y - y.mean()) / sxx)
    intercept = float(y.mean() - slope * x.mean())
    resid = y - intercept - slope * x
    dof = max(n - 2, 1)
    se = math.sqrt(float(resid @ resid) / dof / sxx)

    X = np.column_stack([np.ones(n), xc, xc**2])
    coef, *_ = np.linalg.lstsq(X, y, rcond=None)
    res2 = y - X @ coef
    s2 = float(res2 @ res2) / max(n - 3, 1)
    cov = s2 * np.linalg.inv(X.T @ X)
    c2 = float(coef[2])
    c2_se = math.sqrt(max(cov[2, 2], 0.0))
    z = abs(c2) / c2_se if c2_se > 0 else (math.inf if c2 != 0 else 0.0)
    half = 0.5 * (x.max() - x.min())
    flag = abs(c2) * half**2 > CURVATURE_FLAG
    return LogLogFit(slope, se, intercept, c2, z, bool(flag), n)
