"""Numerical laboratory for spectra of degenerating quadratic-form families."""

__version__ = "0.1.0"

from . import airy, bessel, domains, forms, halfline, profiles, separation

__all__ = [
    "__version__",
    "airy",
    "bessel",
    "domains",
    "forms",
    "halfline",
    "profiles",
    "separation",
]
