"""Edge asymptotics of beta-ensemble additions.

Free cumulants and moments (``freeprob``), non-crossing partitions and
Łukasiewicz walks (``combinatorics``), saddle-point edge data (``edge``),
exact Dunkl-operator moment expansions (``dunkl``), Monte Carlo for walks
and Brownian excursions (``stochastics``) and matrix models
(``ensembles``).
"""

from .edge import EdgeParameters, edge_parameters
from .errors import BetaEdgeError, SpecError
from .freeprob import EnsembleSpec, cumulants, moment_coefficient, moment_nc, voiculescu

__all__ = [
    "BetaEdgeError",
    "EdgeParameters",
    "EnsembleSpec",
    "SpecError",
    "cumulants",
    "edge_parameters",
    "moment_coefficient",
    "moment_nc",
    "voiculescu",
]
