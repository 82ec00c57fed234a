"""Unsupervised tensorial-kernel SVM phase classification from MUB classical shadows."""

from . import circuits, mps, phasegraph, pipeline, sampler, shadows, svm
from .mps import build_family, right_canonicalize, transfer_fixed_points
from .phasegraph import build_graph, fiedler_partition
from .pipeline import RunConfig, load_config
from .sampler import SampleSet, sample_mub
from .shadows import build_table, feature_vector, mub_set
from .svm import train

__version__ = "0.1.0"

__all__ = [
    "circuits",
    "mps",
    "phasegraph",
    "pipeline",
    "sampler",
    "shadows",
    "svm",
    "build_family",
    "right_canonicalize",
    "transfer_fixed_points",
    "build_graph",
    "fiedler_partition",
    "RunConfig",
    "load_config",
    "SampleSet",
    "sample_mub",
    "build_table",
    "feature_vector",
    "mub_set",
    "train",
]
