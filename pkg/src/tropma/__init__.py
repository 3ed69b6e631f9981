"""Tropical Calabi-Yau toolkit for real tori R^d / Lambda.

Green functions of line bundles, their rational piecewise-linear
approximations, discrete Chambert-Loir measures, and a periodic real
Monge-Ampere solver realizing prescribed smooth measures.
"""

from .clmeasure import (
    DensityMeasure,
    DiscreteMeasure,
    chambert_loir_measure,
    dual_polytope,
    harmonic_battery,
    hessian_density,
    weak_distance,
)
from .errors import ConvergenceError, InputError, TropmaError
from .green import (
    GreenData,
    GreenFunction,
    canonical_green,
    degree,
    hessian_bounds,
    integrate_mixed_hessian,
    mixed_hessian,
)
from .lattice import Lattice, reduce
from .masolver import MAProblem, MASolution, normalize_density, solution_to_green, solve
from .periodic import GridPart, TrigSeries, parse_harmonics
from .plapprox import PLGreenFunction, build_pl_approx, evaluate, induced_decomposition

__version__ = "0.1.0"

__all__ = [
    "DensityMeasure", "DiscreteMeasure", "chambert_loir_measure", "dual_polytope",
    "harmonic_battery", "hessian_density", "weak_distance",
    "ConvergenceError", "InputError", "TropmaError",
    "GreenData", "GreenFunction", "canonical_green", "degree", "hessian_bounds",
    "integrate_mixed_hessian", "mixed_hessian",
    "Lattice", "reduce",
    "MAProblem", "MASolution", "normalize_density", "solution_to_green", "solve",
    "GridPart", "TrigSeries", "parse_harmonics",
    "PLGreenFunction", "build_pl_approx", "evaluate", "induced_decomposition",
]
