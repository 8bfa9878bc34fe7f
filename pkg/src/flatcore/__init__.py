"""Numerics for -Lap u + |u|^(a-1) u = lam |u|^(b-1) u with 0 < a < b < 1 under Dirichlet data."""
from importlib.metadata import PackageNotFoundError, version

try:
    __version__ = version("artifact")
except PackageNotFoundError:
    __version__ = "0.0.0"
