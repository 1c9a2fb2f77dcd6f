"""MPS engines for the open and infinite ANNNI chain."""

from .finite import (DEFAULT_CHI, DEFAULT_DTAU_SCHEDULE, DEFAULT_ENERGY_TOL, FiniteResult,
                     ground_state_finite, imaginary_time_evolve)
from .infinite import ITEBDResult, InfiniteMPS, energy_per_site, ground_state_itebd
from .mps import MPSState, apply_two_site_gate, canonicalize, init_product_mps, overlap
from .scan import (CorrelationCurve, Dip, PhaseRow, ScanCurve, TwoPassScan, classify_decay,
                   correlation_mps, detect_dips, fit_exponential, phase_diagram,
                   second_derivative_scan, two_pass_scan)

__all__ = [
    "DEFAULT_CHI", "DEFAULT_DTAU_SCHEDULE", "DEFAULT_ENERGY_TOL", "FiniteResult", "ground_state_finite",
    "imaginary_time_evolve", "ITEBDResult", "InfiniteMPS", "energy_per_site", "ground_state_itebd",
    "MPSState", "apply_two_site_gate", "canonicalize", "init_product_mps", "overlap",
    "CorrelationCurve", "Dip", "PhaseRow", "ScanCurve", "TwoPassScan", "classify_decay",
    "correlation_mps", "detect_dips", "fit_exponential", "phase_diagram", "second_derivative_scan",
    "two_pass_scan",
]
