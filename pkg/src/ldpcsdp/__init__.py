"""Exact LDPC degree-distribution optimization for the binary erasure channel."""

__version__ = "0.1.0"

from .ensemble import (ChannelParam, DegreeDistribution, DesignResult, InvalidDistribution, InvalidInput,
                       capacity_and_gap, code_rate, de_margin, inverse_average, validate)
from .polyops import DensePolynomial, p_coefficients, phi_cross_check, pi_transform
from .sdpcore import SdpProblem, SdpSolution, psd_check, solve
from .sosrep import (FeasibilityCertificate, NoDesign, Refutation, build_rate_sdp, check_nonneg_on_01,
                     extract_design, gram_residual, optimize_design)
from .desim import bp_threshold, de_trajectory, verify_design
from .baseline_lp import DiscretizationGrid, discretized_optimize, grid_sweep

__all__ = [
    "ChannelParam", "DegreeDistribution", "DesignResult", "InvalidDistribution", "InvalidInput",
    "capacity_and_gap", "code_rate", "de_margin", "inverse_average", "validate",
    "DensePolynomial", "p_coefficients", "phi_cross_check", "pi_transform",
    "SdpProblem", "SdpSolution", "psd_check", "solve",
    "FeasibilityCertificate", "NoDesign", "Refutation", "build_rate_sdp", "check_nonneg_on_01",
    "extract_design", "gram_residual", "optimize_design",
    "bp_threshold", "de_trajectory", "verify_design",
    "DiscretizationGrid", "discretized_optimize", "grid_sweep",
]
