"""Numerical verification of the Lax form and dynamical r-matrix on Schottky-uniformized curves."""

from .errors import *  # noqa: F401,F403
from .liealg import AlgebraSpec, casimir, gl, sl
from .moebius import (INFINITY, Circle, MoebiusMap, SchottkyData, SchottkyPair, Word,
                      enumerate_words, loxodromic, validate, word_to_map)
from .phasespace import (Observable, PhasePoint, contraction_factor, holonomy,
                         holonomy_derivative, moment_map, poisson_bracket, poisson_bracket_fd,
                         random_point)
from .poincare import (LaxSeries, SeriesValue, TruncationPolicy, XiObservable, lax_series,
                       r_matrix, s_matrix, xi)
from .verify import CheckReport, bracket_defect

__version__ = "0.1.0"
