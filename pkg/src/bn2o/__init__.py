"""Diagnosis in two-layer noisy-OR networks under three inference models.

The same disease priors, leak probabilities and causal probabilities feed a
noisy-OR model (exact or sampled), a multimembership Bayes model and a simple
Bayes model, so their posteriors can be compared case by case.
"""

from .errors import DiagnosisError, InferenceError, ValidationError
from .exact import brute_force_posteriors, negative_evidence_posteriors, quickscore_posteriors
from .generate import GeneratorConfig, generate_case, generate_cases, generate_network
from .harness import ComparisonReport, compare_models, emit_report, rank_diseases
from .multimembership import derive_mb_conditionals, mb_posteriors
from .network import (
    CaseEvidence,
    CausalLink,
    DiseaseSpec,
    FindingSpec,
    NetworkSpec,
    finding_absent_given_instance,
    instance_prior,
    load_case,
    load_network,
    save_case,
    save_network,
    validate_case,
    validate_network,
)
from .report import PosteriorReport
from .sampling import SamplerConfig, SamplerTrace, check_convergence, likelihood_weighting_posteriors
from .simple_bayes import derive_sb_parameters, sb_posteriors

__version__ = "0.1.0"
