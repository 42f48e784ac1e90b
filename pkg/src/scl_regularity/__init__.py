"""Explicit entropy solutions of multi-dimensional scalar conservation laws
whose Besov and BV semi-norms blow up, with finite-volume cross-checks."""

from __future__ import annotations

__version__ = "0.1.0"

from .exact import (ExactSolution, WaveSchedule, evaluate, evolve, first_interaction_bruteforce,
                    interaction_times, rankine_hugoniot_speed)
from .flux import (EffectiveFlux, FluxSpec, NondegeneracyResult, effective_flux, eval_flux,
                   eval_flux_prime, nondegeneracy_exponent)
from .fv import Grid1D, Grid2D, godunov_solve, lax_friedrichs_2d
from .profile import PlanarProfile
from .seminorm import (ScanResult, SeminormQuery, lemma2_check, lower_bound_series,
                       shifted_lp_difference, truncated_besov, tv_partial)
from .staircase import BlowupParams, RungSequences, Tiling, build_rungs, build_single_box, build_tiling

__all__ = [
    "BlowupParams", "EffectiveFlux", "ExactSolution", "FluxSpec", "Grid1D", "Grid2D",
    "NondegeneracyResult", "PlanarProfile", "RungSequences", "ScanResult", "SeminormQuery", "Tiling",
    "WaveSchedule", "build_rungs", "build_single_box", "build_tiling", "effective_flux", "eval_flux",
    "eval_flux_prime", "evaluate", "evolve", "first_interaction_bruteforce", "godunov_solve",
    "interaction_times", "lax_friedrichs_2d", "lemma2_check", "lower_bound_series",
    "nondegeneracy_exponent", "rankine_hugoniot_speed", "shifted_lp_difference", "truncated_besov",
    "tv_partial",
]
