"""Newton's method dynamics for elliptic functions over period lattices."""

from .errors import DomainError
from .lattice import Lattice, make_lattice
from .elliptic import EllipticFunction, WpPlusB, make_elliptic
from .newton import NewtonMap, newton_map, wp_plus_b_map, wandering_parameter
from .dynamics import OrbitOutcome, OrbitParams, Tag, classify_orbit, classify_orbits

__version__ = "0.1.0"

__all__ = [
    "DomainError",
    "Lattice",
    "make_lattice",
    "EllipticFunction",
    "WpPlusB",
    "make_elliptic",
    "NewtonMap",
    "newton_map",
    "wp_plus_b_map",
    "wandering_parameter",
    "OrbitOutcome",
    "OrbitParams",
    "Tag",
    "classify_orbit",
    "classify_orbits",
]
