"""Open Ulam method for expanding interval maps with holes.

Escape rates, conditionally invariant densities, quasi-conformal and
survivor-set measures from sparse Ulam matrices, with admissibility
diagnostics and a Monte Carlo cross-check.
"""

__version__ = "0.1.0"

from .errors import (BranchRangeError, DegenerateSolutionError, DomainError, NonConvergenceError,
                     NotApplicableError, NumericalError, OpenUlamError, ResourceError, StatisticsError,
                     ValidationError)
from .intervals import Interval, IntervalSet
from .maps import PiecewiseMap, make_map, power
from .holes import OpenSystem, admissibility_report, enlarge_hole, lorenz_admissibility, lorenz_system, survivor_set
from .ulam import Partition, TransitionMatrix, build_closed, build_open
from .spectral import (SpectralSolution, density_from_left, enlargement_consistency, leading_triple,
                       measure_from_right, solve, survivor_measure, verify_quasi_conformal)
from .oracle import SurvivalCurve, empirical_accim, escape_rate_fit, simulate

__all__ = [
    "BranchRangeError", "DegenerateSolutionError", "DomainError", "NonConvergenceError", "NotApplicableError",
    "NumericalError", "OpenUlamError", "ResourceError", "StatisticsError", "ValidationError",
    "Interval", "IntervalSet", "PiecewiseMap", "make_map", "power",
    "OpenSystem", "admissibility_report", "enlarge_hole", "lorenz_admissibility", "lorenz_system", "survivor_set",
    "Partition", "TransitionMatrix", "build_closed", "build_open",
    "SpectralSolution", "density_from_left", "enlargement_consistency", "leading_triple", "measure_from_right",
    "solve", "survivor_measure", "verify_quasi_conformal",
    "SurvivalCurve", "empirical_accim", "escape_rate_fit", "simulate",
]
