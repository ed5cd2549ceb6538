"""scikit-learn style estimators over the context-fusion machinery.

Sensor readings are passed as ``X`` of shape (n_objects, n_classes), columns
in ``classes_`` order, with a matching ``uncertainty`` (scalar or per row).
Posteriors come back in the same layout.
"""
from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from .bayesnet import build_graph, conditional_cooccurrence, rank_completions, threshold_graph
from .exceptions import InvalidInput, NoContexts
from .hbm import posterior_class_probabilities
from .hyperprior import HIGH_CONFIDENCE, context_posterior, fuse_with_hyperprior
from .learning import estimate_context
from .mcmc import SamplerConfig
from .scene import ContextModel, validate_context
from .validation import check_corpus, readings_to_scene


class _SamplerParams:
    def _sampler_config(self) -> SamplerConfig:
        return SamplerConfig(
            iterations=self.iterations,
            burn_in=self.burn_in,
            thin=self.thin,
            eta_step=self.eta_step,
            c_step=self.c_step,
            seed=0 if self.random_state is None else int(self.random_state),
            geweke_threshold=self.geweke_threshold,
        )


class ContextEstimator(TransformerMixin, BaseEstimator):
    """Learn a context's class frequencies and correlation matrix from a corpus.

    ``fit`` takes an :class:`AnnotatedCorpus` or a list of images, each a list
    of class names. ``transform`` maps images to per-class count vectors.
    """

    def __init__(self, name="context", classes=None):
        self.name = name
        self.classes = classes

    def fit(self, X, y=None):
        corpus = check_corpus(X, self.classes)
        self.context_ = estimate_context(corpus, self.name)
        self.classes_ = np.array(corpus.catalog.names)
        self.mu_ = self.context_.mu
        self.sigma_ = self.context_.sigma
        self.n_images_ = len(corpus)
        return self

    def transform(self, X):
        check_is_fitted(self, "context_")
        corpus = check_corpus(X, list(self.classes_))
        return corpus.count_matrix()


class ContextualFusion(_SamplerParams, BaseEstimator):
    """Correct sensor readings with one context through the HBM posterior.

    Parameters
    ----------
    context : ContextModel, optional
        Fixed context. When omitted, ``fit`` learns one from a corpus.
    iterations, burn_in, thin, eta_step, c_step, geweke_threshold
        Sampler settings, see :class:`SamplerConfig`.
    random_state : int, optional
        Seed of the chain.
    """

    def __init__(self, context=None, iterations=100_000, burn_in=20_000, thin=10,
                 eta_step=0.1, c_step=0.05, geweke_threshold=0.01, random_state=0):
        self.context = context
        self.iterations = iterations
        self.burn_in = burn_in
        self.thin = thin
        self.eta_step = eta_step
        self.c_step = c_step
        self.geweke_threshold = geweke_threshold
        self.random_state = random_state

    def fit(self, X=None, y=None):
        if X is not None:
            name = self.context.name if isinstance(self.context, ContextModel) else "learned"
            self.context_ = estimate_context(check_corpus(X), name)
        elif isinstance(self.context, ContextModel):
            self.context_ = validate_context(self.context)
        else:
            raise InvalidInput("pass a corpus to fit() or set context=")
        self.classes_ = np.array(self.context_.catalog.names)
        return self

    def predict_proba(self, X, uncertainty, query=None):
        """Posterior class probabilities, shape (n_objects, n_classes).

        ``query`` is an optional (object_index, class_name) pair whose trace
        drives the Geweke check in ``diagnostics_``.
        """
        check_is_fitted(self, "context_")
        scene = readings_to_scene(X, uncertainty, self.context_.catalog)
        track = None
        if query is not None:
            obj, cls = query
            track = (self.context_.catalog.index(cls), int(obj))
        probs, self.diagnostics_ = posterior_class_probabilities(
            scene, self.context_, self._sampler_config(), query=track)
        return probs.T

    def predict(self, X, uncertainty):
        return self.classes_[np.argmax(self.predict_proba(X, uncertainty), axis=1)]


class HyperpriorFusion(_SamplerParams, BaseEstimator):
    """Fuse readings over several candidate contexts weighted by their evidence.

    After ``predict_proba``, ``context_weights_`` holds the inferred weight of
    each context, in the order of ``contexts``.
    """

    def __init__(self, contexts=(), prior_weights=None, mc_samples=50_000,
                 confidence_threshold=HIGH_CONFIDENCE, iterations=100_000, burn_in=20_000,
                 thin=10, eta_step=0.1, c_step=0.05, geweke_threshold=0.01,
                 random_state=0, n_jobs=1):
        self.contexts = contexts
        self.prior_weights = prior_weights
        self.mc_samples = mc_samples
        self.confidence_threshold = confidence_threshold
        self.iterations = iterations
        self.burn_in = burn_in
        self.thin = thin
        self.eta_step = eta_step
        self.c_step = c_step
        self.geweke_threshold = geweke_threshold
        self.random_state = random_state
        self.n_jobs = n_jobs

    def fit(self, X=None, y=None):
        contexts = list(self.contexts)
        if not contexts:
            raise NoContexts("HyperpriorFusion needs at least one context")
        for ctx in contexts:
            validate_context(ctx)
            if ctx.catalog != contexts[0].catalog:
                raise InvalidInput("all contexts must share one class catalog")
        self.contexts_ = contexts
        self.classes_ = np.array(contexts[0].catalog.names)
        return self

    def context_weights(self, X, uncertainty):
        check_is_fitted(self, "contexts_")
        scene = readings_to_scene(X, uncertainty, self.contexts_[0].catalog)
        return context_posterior(scene, self.contexts_, self.prior_weights, self.mc_samples,
                                 self.random_state, self.confidence_threshold)

    def predict_proba(self, X, uncertainty):
        check_is_fitted(self, "contexts_")
        scene = readings_to_scene(X, uncertainty, self.contexts_[0].catalog)
        self.context_weights_ = context_posterior(
            scene, self.contexts_, self.prior_weights, self.mc_samples,
            self.random_state, self.confidence_threshold)
        mixed, comps = fuse_with_hyperprior(
            scene, self.contexts_, self.context_weights_, self._sampler_config(),
            n_jobs=self.n_jobs, return_components=True)
        self.components_ = comps
        return mixed.T

    def predict(self, X, uncertainty):
        return self.classes_[np.argmax(self.predict_proba(X, uncertainty), axis=1)]


class CooccurrenceNetwork(BaseEstimator):
    """Co-occurrence graph of a corpus with pairwise conditional queries.

    ``predict_proba(evidence)`` returns, for each evidence class, the
    fraction of its images that also contain each class (columns in
    ``classes_`` order).
    """

    def __init__(self, tau=0):
        self.tau = tau

    def fit(self, X, y=None):
        corpus = check_corpus(X)
        self.graph_ = threshold_graph(build_graph(corpus), self.tau)
        self.classes_ = np.array(corpus.catalog.names)
        return self

    def predict_proba(self, evidence):
        check_is_fitted(self, "graph_")
        evidence = [evidence] if isinstance(evidence, str) else list(evidence)
        return np.array([
            [conditional_cooccurrence(self.graph_, e, q) for q in self.classes_]
            for e in evidence
        ])

    def rank(self, evidence, top_k=None):
        check_is_fitted(self, "graph_")
        return rank_completions(self.graph_, evidence, top_k)
