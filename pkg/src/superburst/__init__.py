"""Dicke superradiance photon statistics: master-equation predictions,
synthetic time-tag generation, and HBT g2 estimation."""

__version__ = "0.1.0"

from .dicke import (CollectiveOperators, DickeState, LadderBasis, SimConfig,
                    build_operators, effective_atom_number, emission_rate, evolve,
                    g2_equal_time, g2_two_time, lindblad_rhs)
from .hbt import BinningSpec, CorrelationMap, accumulate, diagonal_g2, estimate_g2, sum_rule_check
from .obe import BlochState, PulseProfile, solve_obe, uncorrelated_rate
from .photon_mc import DetectorModel, DickeSource, IndependentSource, generate_dataset
from .timetags import TimeTagData, read_timetags, write_timetags

__all__ = [
    "BinningSpec", "BlochState", "CollectiveOperators", "CorrelationMap", "DetectorModel",
    "DickeSource", "DickeState", "IndependentSource", "LadderBasis", "PulseProfile",
    "SimConfig", "TimeTagData", "accumulate", "build_operators", "diagonal_g2",
    "effective_atom_number", "emission_rate", "estimate_g2", "evolve", "g2_equal_time",
    "g2_two_time", "generate_dataset", "lindblad_rhs", "read_timetags", "solve_obe",
    "sum_rule_check", "uncorrelated_rate", "write_timetags",
]
