"""Twisted Eisenstein series on Gamma_0(N) extended by the Fricke involution,
their Fourier coefficients and scattering data, and the completed double
Dirichlet series built from them."""

from .errors import EistwistError

__version__ = "0.1.0"

__all__ = ["EistwistError", "__version__"]
