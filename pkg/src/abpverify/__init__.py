"""Numerical verification of sharp geometric inequalities via the ABP method."""

__version__ = "0.1.0"

from .kernels import BACKEND  # noqa: E402

__all__ = ["BACKEND", "__version__"]
