"""Popularity-aware private information retrieval with side information."""

from .analysis import (
    Policy,
    PrivacyVerdict,
    RateReport,
    expected_download,
    gamma_search_equivalence,
    lemma4_minimizer,
    privacy_oracle,
    rate_lower_bound,
    rate_mds,
    rate_report,
    rate_upper_bound,
)
from .field import FieldElement, PrimeField, fadd, finv, fmul, solve_square_system
from .pmf import PopularityProfile, ProblemParams, joint_pmf, pmf_S, pmf_W, pmf_W_given_S, sample_profile
from .schemes import (
    Answer,
    Dataset,
    MdsQuery,
    PartitionQuery,
    RcsPolicy,
    Scheme,
    rcs_gamma,
    rcs_gamma_base,
    rcs_round,
)

__all__ = [
    "Answer", "Dataset", "FieldElement", "MdsQuery", "PartitionQuery", "Policy", "PopularityProfile",
    "PrimeField", "PrivacyVerdict", "ProblemParams", "RateReport", "RcsPolicy", "Scheme",
    "expected_download", "fadd", "finv", "fmul", "gamma_search_equivalence", "joint_pmf",
    "lemma4_minimizer", "pmf_S", "pmf_W", "pmf_W_given_S", "privacy_oracle", "rate_lower_bound",
    "rate_mds", "rate_report", "rate_upper_bound", "rcs_gamma", "rcs_gamma_base", "rcs_round",
    "sample_profile", "solve_square_system",
]
