"""Numerical toolkit for SDEs driven by alpha-stable-like jump noise with state-dependent intensity."""

__version__ = "0.1.0"
