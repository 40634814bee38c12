"""Nonparametric MLE for interval-censored survival times with marks.

The light core (observation handling, maximal intersections, the closed-form
mass fit) imports from here; quadrature-backed population limits, the
consistency checker, the grid-repaired estimator, and the simulation harness
live in their own submodules and pull in numpy/scipy on first import.
"""

from .data import Observation, OrderedDataset, derive_endpoints, order_dataset
from .maxint import MaximalIntersection, maximal_intersections
from .plmle import MassVector, eval_F, eval_FX, fit_masses, log_likelihood

__version__ = "0.1.0"

__all__ = [
    "Observation",
    "OrderedDataset",
    "derive_endpoints",
    "order_dataset",
    "MaximalIntersection",
    "maximal_intersections",
    "MassVector",
    "fit_masses",
    "eval_F",
    "eval_FX",
    "log_likelihood",
    "__version__",
]
