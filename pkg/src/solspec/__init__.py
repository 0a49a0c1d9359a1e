"""Computational toolkit for noncommutative solenoids."""
__version__ = "0.1.0"
