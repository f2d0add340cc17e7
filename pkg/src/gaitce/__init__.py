"""Gait characteristics from body-movement series, condition comparisons and copula entropy."""
from .copula import AnalysisWarning, CEEstimate, copula_entropy, dependence_with_score, ksg_mutual_information
from .data import Condition, Group, InputError, SampleSeries, parse_manifest, parse_recording
from .features import FEATURE_NAMES, FeatureConfig, FeatureVector, extract_feature_vector
from .hypotest import compare_conditions, ks_two_sample, mann_whitney, welch_t
from .report import AnalysisConfig, PipelineError, ReportBundle, run_pipeline
from .segmentation import Bout, WalkInterval, detect_walking, generate_bouts
from .synth import WalkParams, gen_gaussian_copula, gen_two_condition_dataset, gen_walk

__version__ = "0.1.0"

__all__ = [
    "AnalysisConfig",
    "AnalysisWarning",
    "Bout",
    "CEEstimate",
    "Condition",
    "FEATURE_NAMES",
    "FeatureConfig",
    "FeatureVector",
    "Group",
    "InputError",
    "PipelineError",
    "ReportBundle",
    "SampleSeries",
    "WalkInterval",
    "WalkParams",
    "compare_conditions",
    "copula_entropy",
    "dependence_with_score",
    "detect_walking",
    "extract_feature_vector",
    "gen_gaussian_copula",
    "gen_two_condition_dataset",
    "gen_walk",
    "generate_bouts",
    "ks_two_sample",
    "ksg_mutual_information",
    "mann_whitney",
    "parse_manifest",
    "parse_recording",
    "run_pipeline",
    "welch_t",
]
