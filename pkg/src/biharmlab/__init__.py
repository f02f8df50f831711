"""Numerical laboratory for the degenerate biharmonic operator
``A = (1 + |x|^alpha)^2 Delta^2 + |x|^(2 beta)`` on radial sectors of R^N."""

__version__ = "0.1.0"

from .params import OperatorParams, ParameterError  # noqa: E402

__all__ = ["OperatorParams", "ParameterError", "__version__"]
