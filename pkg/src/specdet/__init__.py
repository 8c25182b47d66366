"""Spectra, resolvent traces and zeta-regularized determinants of Sturm-Liouville operators."""

__version__ = "0.1.0"
