"""Strong-form finite-difference elasticity on diffuse-boundary geometries."""

__version__ = "0.1.0"
