"""Exception hierarchy.

Every error carries the module it originated in, so the CLI can emit a
machine-readable record such as ``{"code": "kernels.validation", ...}``.
"""

from __future__ import annotations


class FracouError(Exception):
    kind = "error"
    exit_code = 1

    def __init__(self, message: str, module: str = "fracou", **details):
        super().__init__(message)
        self.module = module
        self.details = details

    @property
    def code(self) -> str:
        return f"{self.module}.{self.kind}"

    def to_record(self) -> dict:
        rec = {"code": self.code, "module": self.module, "message": str(self)}
        if self.details:
            rec["details"] = {k: _jsonable(v) for k, v in self.details.items()}
        return rec


class ValidationError(FracouError, ValueError):
    """A parameter violates its documented bound."""

    kind = "validation"
    exit_code = 2


class NumericalError(FracouError, ArithmeticError):
    """A numerical method failed (non-convergence, non-PSD matrix, ...)."""

    kind = "numerical"
    exit_code = 3


class AccuracyError(NumericalError):
    """Series or quadrature did not reach its target; carries the partial value."""

    kind = "accuracy"

    def __init__(self, message: str, module: str = "fracou", partial=None, **details):
        super().__init__(message, module, partial=partial, **details)
        self.partial = partial


def _jsonable(v):
    try:
        return float(v)
    except (TypeError, ValueError):
        return str(v)


def require(cond: bool, module: str, name: str, bound: str, value) -> None:
    """Raise :class:`ValidationError` naming the parameter and the violated bound."""
    if not cond:
        raise ValidationError(
            f"{name} must satisfy {bound} (got {value!r})",
            module,
            parameter=name,
            bound=bound,
            value=value,
        )
