"""Delaunay-based CPWL regression with Hessian total-variation regularization."""

from ._core import (
    DhtvError,
    Model,
    Triangulation,
    delaunay,
    fit,
    grid_search,
    mse,
    random_grid_metrics,
)

__all__ = [
    "DhtvError",
    "Model",
    "Triangulation",
    "delaunay",
    "fit",
    "grid_search",
    "mse",
    "random_grid_metrics",
]

__version__ = "0.1.0"
