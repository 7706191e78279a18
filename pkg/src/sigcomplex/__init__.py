"""Complexity-adapted on-line signature verification.

Signatures are sorted into low/medium/high complexity by the number of
lognormal strokes needed to rebuild their speed profile; each level then uses
its own set of time functions for DTW matching.
"""
from .complexity import ComplexityLevel, ComplexityThresholds, classify_signature, classify_user
from .evaluation import RunConfig, compute_eer, far_frr_curve, report, run_protocol
from .lognormal import LogNormalStroke, count_strokes, decompose, decompose_signature
from .matcher import UserTemplate, dtw, verify
from .preprocess import preprocess
from .selection import Profile, default_subsets, sffs
from .signal_io import Label, Modality, RawSignature, load_manifest, read_signature
from .timefunctions import FeatureSubset, compute_time_functions

__version__ = "0.1.0"

__all__ = [
    "ComplexityLevel", "ComplexityThresholds", "FeatureSubset", "Label", "LogNormalStroke",
    "Modality", "Profile", "RawSignature", "RunConfig", "UserTemplate", "classify_signature",
    "classify_user", "compute_eer", "compute_time_functions", "count_strokes", "decompose",
    "decompose_signature", "default_subsets", "dtw", "far_frr_curve", "load_manifest",
    "preprocess", "read_signature", "report", "run_protocol", "sffs", "verify",
]
