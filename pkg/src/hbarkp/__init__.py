"""Exact symbol calculus for the hbar-dependent KP hierarchy.

The package solves the Riemann-Hilbert type problem for the dressing
operator order by order in hbar, converts the result to the WKB phase of
the wave function and to the hbar-expansion of log tau, and checks every
step by exact residuals.  All coefficients are exact rationals.
"""

from .calculus import (
    ExpGenerator,
    ad_exp,
    bracket_over_hbar,
    dressing_conjugate,
    poisson,
    star_commutator,
    star_mul,
)
from .dkp import DKPSeed, dkp_dress, dkp_lax_residual, dkp_rh_residual, extend_seed_in_t
from .errors import HbarKPError
from .recursion import (
    DressingData,
    RHProblem,
    build_lax,
    residual_ccr,
    residual_lax,
    residual_rh,
    solve,
)
from .series import GradedSymbol, Monomial, TrustRecord, TruncationPolicy, parse_symbol
from .tau import TauExpansion, integrate_F, miwa_shift, v_coefficients, verify_tau_wave
from .wkb import WaveData, WKBPhase, s_to_x, star_exp_total, wave_function, x_to_s

__version__ = "0.1.0"

__all__ = [
    "DKPSeed",
    "DressingData",
    "ExpGenerator",
    "GradedSymbol",
    "HbarKPError",
    "Monomial",
    "RHProblem",
    "TauExpansion",
    "TrustRecord",
    "TruncationPolicy",
    "WKBPhase",
    "WaveData",
    "ad_exp",
    "bracket_over_hbar",
    "build_lax",
    "dkp_dress",
    "dkp_lax_residual",
    "dkp_rh_residual",
    "dressing_conjugate",
    "extend_seed_in_t",
    "integrate_F",
    "miwa_shift",
    "parse_symbol",
    "poisson",
    "residual_ccr",
    "residual_lax",
    "residual_rh",
    "s_to_x",
    "solve",
    "star_commutator",
    "star_exp_total",
    "star_mul",
    "v_coefficients",
    "verify_tau_wave",
    "wave_function",
    "x_to_s",
]
