"""Long-memory Gaussian processes driven by fractional Fokker-Planck dynamics.

Modules
-------
mlf        Mittag-Leffler and Wright functions
fracops    Caputo and convolution-type fractional operators on uniform grids
kernels    covariances, characteristic functions and spectra
subord     Bernstein functions, Laplace inversion and generalized kernels
sampling   Gaussian path samplers and Monte Carlo estimators
shotnoise  Poisson shot-noise approximation
verify     residual and identity suites
cli        command-line front end
"""

from . import fracops, kernels, mlf, sampling, shotnoise, subord, verify
from ._accel import backend
from .errors import AccuracyError, FracouError, NumericalError, ValidationError

__version__ = "0.1.0"

__all__ = [
    "mlf",
    "fracops",
    "kernels",
    "subord",
    "sampling",
    "shotnoise",
    "verify",
    "backend",
    "FracouError",
    "ValidationError",
    "NumericalError",
    "AccuracyError",
    "__version__",
]
