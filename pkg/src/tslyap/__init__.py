"""Stability certificates and domain-of-attraction estimates for Takagi-Sugeno fuzzy systems."""
from .conditions import ConditionSpec, build
from .fixtures import catalog, fixture
from .model import Box, FuzzyModel, MembershipFamily, OutOfRegionError
from .regions import (DaEstimate, LyapunovFn, RegionSpec, ball_inclusion_radius, contains,
                      largest_sublevel)
from .sdp import FeasibilityVerdict, SolverOptions, Status, solve, validate_certificate
from .search import bisect_hyper, compare_sweeps, sweep
from .verify import integrate, validate_da

__version__ = "0.1.0"

__all__ = [
    "Box", "ConditionSpec", "DaEstimate", "FeasibilityVerdict", "FuzzyModel", "LyapunovFn",
    "MembershipFamily", "OutOfRegionError", "RegionSpec", "SolverOptions", "Status",
    "ball_inclusion_radius", "bisect_hyper", "build", "catalog", "compare_sweeps", "contains",
    "fixture", "integrate", "largest_sublevel", "solve", "sweep", "validate_certificate",
    "validate_da",
]
