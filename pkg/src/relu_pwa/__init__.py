"""Exact piecewise-affine analysis of ReLU networks."""
from .analysis import (
    FixedPoint,
    HomeoCertificate,
    InvariantSetResult,
    RoaResult,
    check_homeomorphism,
    control_invariant_set,
    find_fixed_points,
    grow_roa,
    predecessor_set,
    seed_roa,
)
from .config import DEFAULT_CAPS, DEFAULT_TOL, Caps, ResourceLimitError, Tolerances
from .estimator import PiecewiseAffineDecomposition
from .geometry import AffineMap, Halfspace, Polyhedron, PolyUnion
from .marching import (
    PwaFunction,
    ReachResult,
    Region,
    backward_reach,
    enumerate_regions,
    forward_reach,
    march,
)
from .network import ReluNetwork, random_network
from .svg import render_svg

__version__ = "0.1.0"
