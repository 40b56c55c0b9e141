"""Resonance structure of exponential polynomials from point scatterers,
open quantum graphs, and layered dielectrics."""

from .crystal import CrystalSpec, crystal_exppoly, crystal_resonances
from .density import (count_ball, count_log, count_strip, fit_density,
                      log_density_profile, match_chains, mirror_double)
from .diagram import (DistributionDiagram, build_diagram,
                      chains_for_diagram, density_jumps,
                      predicted_resonances)
from .exppoly import (ExpPoly, as_k_function, build_characteristic_exppoly,
                      canonicalize, det_gamma, gamma_matrix)
from .geometry import PointConfig, size_profile
from .qgraph import (ExpSum, GraphSpec, classify_KSH, commensurable_reduce,
                     graph_resonances, symbolic_det)
from .rootfind import (ResonanceMultiset, SearchRect, count_zeros,
                       find_zeros, refine)

__version__ = "0.1.0"

__all__ = [
    "CrystalSpec",
    "DistributionDiagram",
    "ExpPoly",
    "ExpSum",
    "GraphSpec",
    "PointConfig",
    "ResonanceMultiset",
    "SearchRect",
    "as_k_function",
    "build_characteristic_exppoly",
    "build_diagram",
    "canonicalize",
    "chains_for_diagram",
    "classify_KSH",
    "commensurable_reduce",
    "count_ball",
    "count_log",
    "count_strip",
    "count_zeros",
    "crystal_exppoly",
    "crystal_resonances",
    "density_jumps",
    "det_gamma",
    "find_zeros",
    "fit_density",
    "gamma_matrix",
    "graph_resonances",
    "log_density_profile",
    "match_chains",
    "mirror_double",
    "predicted_resonances",
    "refine",
    "size_profile",
    "symbolic_det",
]
