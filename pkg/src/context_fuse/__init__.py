"""Context-aware correction of sensor classifications.

A hierarchical Bayesian model ties each object's sensor reading to a
scene-level expected class count drawn from a learned context prior; MCMC
recovers the corrected class probabilities. A co-occurrence graph offers a
simpler pairwise alternative.
"""
__version__ = "0.1.0"

from .bayesnet import (
    CooccurrenceGraph,
    build_graph,
    conditional_cooccurrence,
    orient_edges,
    rank_completions,
    threshold_graph,
)
from .estimators import ContextEstimator, ContextualFusion, CooccurrenceNetwork, HyperpriorFusion
from .exceptions import ContextFuseError, NotConvergedWarning
from .hbm import log_joint, normalize_eta, posterior_class_probabilities, sample_latent
from .hyperprior import context_posterior, fuse_with_hyperprior
from .learning import estimate_context, load_coco_annotations, load_native_corpus
from .mcmc import SamplerConfig, benchmark, converged, geweke_scores, run_chain
from .scene import (
    AnnotatedCorpus,
    ClassCatalog,
    ContextModel,
    Scene,
    SensorReading,
    load_context,
    make_context,
    make_scene,
    save_context,
)

__all__ = [
    "AnnotatedCorpus", "ClassCatalog", "ContextEstimator", "ContextFuseError", "ContextModel",
    "ContextualFusion", "CooccurrenceGraph", "CooccurrenceNetwork", "HyperpriorFusion",
    "NotConvergedWarning", "SamplerConfig", "Scene", "SensorReading", "benchmark",
    "build_graph", "conditional_cooccurrence", "context_posterior", "converged",
    "estimate_context", "fuse_with_hyperprior", "geweke_scores", "load_coco_annotations",
    "load_context", "load_native_corpus", "log_joint", "make_context", "make_scene",
    "normalize_eta", "orient_edges", "posterior_class_probabilities", "rank_completions",
    "run_chain", "sample_latent", "save_context", "threshold_graph",
]
