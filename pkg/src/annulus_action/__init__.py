"""Action functions, Calabi invariants, flux and periodic orbits of
area-preserving maps of the annulus and the disk."""
from .action import ActionField, Normalization, calabi, flux, invariants
from .analysis import check_main_theorem, check_sandwich, diagram_for
from .embedding import embed
from .errors import (AnnulusActionError, NonConvergence, NotRigidNearBoundary, ParseError,
                     ValidationError)
from .mapdef import MapDefinition, compose, parse_map_line, parse_map_spec
from .orbits import birkhoff, find_periodic_orbits
from .report import TOOL_VERSION as __version__
from .specfile import load_spec

__all__ = [
    "ActionField", "AnnulusActionError", "MapDefinition", "NonConvergence",
    "Normalization", "NotRigidNearBoundary", "ParseError", "ValidationError", "birkhoff",
    "calabi", "check_main_theorem", "check_sandwich", "compose", "diagram_for", "embed",
    "find_periodic_orbits", "flux", "invariants", "load_spec", "parse_map_line",
    "parse_map_spec",
]
