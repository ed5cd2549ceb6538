"""Context mixing when the scene's context is unknown.

Each candidate context is weighted by its prior weight times a Monte Carlo
estimate of the marginal likelihood of the scene's confidently resolved
objects. Per-context posteriors are then averaged with those weights.
"""
from __future__ import annotations

from typing import Sequence

import numpy as np
from joblib import Parallel, delayed
from scipy.special import logsumexp

from .exceptions import AllLikelihoodsZero, DimensionMismatch, InvalidInput, NoContexts
from .hbm import as_generator, posterior_class_probabilities
from .scene import ContextModel, Scene

HIGH_CONFIDENCE = 0.05


def _check_weights(weights, k: int, what: str) -> np.ndarray:
    w = np.asarray(weights, dtype=float)
    if w.shape != (k,):
        raise DimensionMismatch(f"{what} has {w.size} entries for {k} contexts")
    if np.any(w < 0) or not np.all(np.isfinite(w)):
        raise InvalidInput(f"{what} must be finite and non-negative")
    if abs(w.sum() - 1.0) > 1e-6:
        raise InvalidInput(f"{what} sums to {w.sum():.6g}, expected 1")
    return w


def _logistic_normal_logpdf(p: np.ndarray, context: ContextModel) -> np.ndarray:
    """Log density of ``softmax(eta_raw)`` at rows of ``p``, in additive log-ratio coordinates."""
    m = context.n_classes
    if m == 1:
        return np.zeros(p.shape[0])
    a = np.hstack([np.eye(m - 1), -np.ones((m - 1, 1))])
    mean = a @ context.mu
    cov = a @ context.sigma @ a.T
    out = np.full(p.shape[0], -np.inf)
    ok = np.all(p > 0, axis=1)
    logp = np.log(p[ok])
    y = logp[:, :-1] - logp[:, -1:]
    chol = np.linalg.cholesky(cov)
    sol = np.linalg.solve(chol, (y - mean).T)
    out[ok] = (-0.5 * (sol ** 2).sum(axis=0) - np.log(np.diag(chol)).sum()
               - 0.5 * (m - 1) * np.log(2 * np.pi) - logp.sum(axis=1))
    return out


def context_log_evidence(scene: Scene, contexts: Sequence[ContextModel], mc_samples: int = 50_000,
                         rng=None, threshold: float = HIGH_CONFIDENCE) -> np.ndarray:
    """Log marginal likelihood of the confidently resolved readings under each context.

    Resolved columns of C are drawn from their (normalized) sensor likelihoods
    and the raw scene vector from each context's prior. A draw counts when the
    remaining objects can still complete the assignment matrix, i.e. the
    residual ``eta - sum(resolved columns)`` is non-negative. When every object
    is resolved, the prior density of ``eta`` at the column sum is used instead.
    The [0, 1] bounds of the resolved columns are not enforced; they hold
    for all but a context-independent sliver of draws. The same random draws
    are shared by all contexts.
    """
    rng = as_generator(rng)
    obs = scene.observations()
    unc = scene.uncertainties()
    m, n = obs.shape
    resolved = np.flatnonzero(unc <= threshold)
    if resolved.size == 0:
        return np.zeros(len(contexts))

    z = rng.standard_normal((mc_samples, resolved.size, m))
    z -= z.mean(axis=2, keepdims=True)
    cols = obs[:, resolved].T[None] + unc[resolved][None, :, None] * z
    total = cols.sum(axis=1)

    out = np.empty(len(contexts))
    if resolved.size == n:
        for i, ctx in enumerate(contexts):
            out[i] = logsumexp(_logistic_normal_logpdf(total / n, ctx)) - np.log(mc_samples)
        return out

    eta_noise = rng.standard_normal((mc_samples, m))
    for i, ctx in enumerate(contexts):
        raw = ctx.mu + eta_noise @ np.linalg.cholesky(ctx.sigma).T
        e = np.exp(raw - raw.max(axis=1, keepdims=True))
        eta = n * e / e.sum(axis=1, keepdims=True)
        hits = np.count_nonzero(np.all(eta - total >= 0, axis=1))
        out[i] = np.log(hits / mc_samples) if hits else -np.inf
    return out


def context_posterior(scene: Scene, contexts: Sequence[ContextModel], prior_weights=None,
                      mc_samples: int = 50_000, rng=None,
                      threshold: float = HIGH_CONFIDENCE) -> np.ndarray:
    """Posterior weight of each candidate context given the resolved readings."""
    if not contexts:
        raise NoContexts("need at least one candidate context")
    k = len(contexts)
    prior = np.full(k, 1.0 / k) if prior_weights is None else _check_weights(
        prior_weights, k, "prior_weights")
    for ctx in contexts:
        if ctx.catalog != scene.catalog:
            raise DimensionMismatch(f"context {ctx.name!r} classes differ from the scene's")
    with np.errstate(divide="ignore"):
        log_w = np.log(prior) + context_log_evidence(scene, contexts, mc_samples, rng, threshold)
    if not np.any(np.isfinite(log_w)):
        raise AllLikelihoodsZero("no candidate context can explain the resolved readings")
    return np.exp(log_w - logsumexp(log_w))


def mix_posteriors(posteriors: Sequence[np.ndarray], weights) -> np.ndarray:
    """Weighted average of per-context posterior matrices."""
    w = _check_weights(weights, len(posteriors), "weights")
    out = np.zeros_like(np.asarray(posteriors[0], dtype=float))
    for wi, post in zip(w, posteriors):
        if wi > 0:
            out = out + wi * np.asarray(post, dtype=float)
    return out


def fuse_with_hyperprior(scene: Scene, contexts: Sequence[ContextModel], weights,
                         sampler_config=None, query=None, n_jobs: int = 1,
                         return_components: bool = False):
    """Mix the per-context HBM posteriors of ``scene`` with ``weights``.

    Contexts with zero weight are not sampled. With ``return_components``
    the per-context ``(probs, diagnostics)`` pairs are returned as well
    (``None`` for skipped contexts).
    """
    if not contexts:
        raise NoContexts("need at least one candidate context")
    w = _check_weights(weights, len(contexts), "weights")
    live = [i for i in range(len(contexts)) if w[i] > 0]
    results = Parallel(n_jobs=n_jobs)(
        delayed(posterior_class_probabilities)(scene, contexts[i], sampler_config, query)
        for i in live
    )
    components = [None] * len(contexts)
    for i, res in zip(live, results):
        components[i] = res
    shape = (scene.n_classes, scene.n_objects)
    posts = [res[0] if res is not None else np.zeros(shape) for res in components]
    mixed = mix_posteriors(posts, w)
    if return_components:
        return mixed, components
    return mixed
