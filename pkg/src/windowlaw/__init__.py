"""Numerical toolkit for delayed-sum limit laws with windows of width n / L(n)."""

__version__ = "0.1.0"
