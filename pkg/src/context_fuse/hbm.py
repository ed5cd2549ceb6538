"""Hierarchical Bayesian model of a scene given its context.

Generative story, for N objects and M classes:

1. ``eta_raw ~ N(mu, sigma)``
2. ``eta = N * softmax(eta_raw)``, the expected count of each class
3. assignments ``C`` (M x N) with row sums ``eta``, column sums 1 and entries
   in [0, 1]; column n is the true class distribution of object n
4. each reading ``x_n ~ N(c_n, s_n^2 I)`` with ``s_n`` the sensor's reported
   uncertainty

The density targeted by MCMC is ``log p(eta_raw) + sum_n log p(x_n | c_n)``.
The conditional density of ``C`` given ``eta`` is taken as uniform over the
feasible set, and its eta-dependent normalizer is dropped.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .exceptions import DimensionMismatch, InfeasibleEta, InvalidInput, NotConvergedWarning
from .scene import (
    ContextModel,
    LatentScene,
    Scene,
    SensorReading,
    check_latent,
    softmax_counts,
    validate_context,
)

LOG_2PI = np.log(2 * np.pi)
IPF_TOL = 1e-9
IPF_MAX_ITER = 10_000


def as_generator(rng) -> np.random.Generator:
    if isinstance(rng, np.random.Generator):
        return rng
    return np.random.default_rng(rng)


def normalize_eta(eta_raw, n_objects: int) -> np.ndarray:
    """Map a raw scene vector to expected class counts summing to ``n_objects``."""
    eta_raw = np.asarray(eta_raw, dtype=float)
    if n_objects < 1:
        raise InvalidInput(f"n_objects must be >= 1, got {n_objects}")
    if eta_raw.ndim != 1 or not np.all(np.isfinite(eta_raw)):
        raise InvalidInput("eta_raw must be a finite 1-D vector")
    return softmax_counts(eta_raw, n_objects)


def sample_eta_raw(context: ContextModel, rng=None) -> np.ndarray:
    """Draw ``eta_raw ~ N(mu, sigma)`` through the Cholesky factor of sigma."""
    rng = as_generator(rng)
    chol = np.linalg.cholesky(context.sigma)
    return context.mu + chol @ rng.standard_normal(context.n_classes)


def fit_margins(start: np.ndarray, eta: np.ndarray, tol: float = IPF_TOL,
                max_iter: int = IPF_MAX_ITER) -> np.ndarray:
    """Iterative proportional fitting of ``start`` to row sums ``eta``, column sums 1.

    ``start`` must be strictly positive wherever ``eta`` is.
    """
    c = np.array(start, dtype=float)
    for _ in range(max_iter):
        rows = c.sum(axis=1)
        scale = np.divide(eta, rows, out=np.zeros_like(eta), where=rows > 0)
        c *= scale[:, None]
        c /= c.sum(axis=0, keepdims=True)
        if np.max(np.abs(c.sum(axis=1) - eta)) <= tol:
            return c
    raise InfeasibleEta(
        f"proportional fitting did not reach row sums {eta} within {tol} "
        f"after {max_iter} iterations"
    )


def sample_assignments(eta, n_objects: int, rng=None) -> np.ndarray:
    """Draw an M x N assignment matrix with row sums ``eta`` and column sums 1.

    Columns start from a flat Dirichlet and are pulled onto the constraint
    set by :func:`fit_margins`.
    """
    rng = as_generator(rng)
    eta = np.asarray(eta, dtype=float)
    if np.any(eta < 0) or abs(eta.sum() - n_objects) > 1e-6:
        raise InfeasibleEta(f"eta {eta} must be non-negative and sum to {n_objects}")
    start = rng.dirichlet(np.ones(eta.shape[0]), size=n_objects).T
    return fit_margins(start, eta)


def sample_latent(context: ContextModel, n_objects: int, rng=None) -> LatentScene:
    """Run generative steps 1-3 and return the latent scene."""
    rng = as_generator(rng)
    eta_raw = sample_eta_raw(context, rng)
    c = sample_assignments(normalize_eta(eta_raw, n_objects), n_objects, rng)
    return LatentScene(eta_raw, c)


def sample_observations(latent: LatentScene, uncertainties, rng=None) -> np.ndarray:
    """Step 4: noisy sensor observations around each object's class vector.

    Returns an M x N matrix; draws are not projected back to the simplex.
    """
    rng = as_generator(rng)
    c = latent.assignments
    unc = np.broadcast_to(np.asarray(uncertainties, dtype=float), (c.shape[1],))
    return c + rng.standard_normal(c.shape) * unc


def sensor_log_likelihood(reading: SensorReading, c_n) -> float:
    """Log density of the reading under an isotropic normal centred on ``c_n``."""
    c_n = np.asarray(c_n, dtype=float)
    if c_n.shape != reading.probs.shape:
        raise DimensionMismatch(f"c_n has shape {c_n.shape}, reading has {reading.probs.shape}")
    m = c_n.shape[0]
    var = reading.uncertainty ** 2
    resid = reading.probs - c_n
    return float(-0.5 * m * (LOG_2PI + np.log(var)) - resid @ resid / (2 * var))


@dataclass(frozen=True, eq=False)
class JointDensityTarget:
    """Log joint density of one scene under one context, with cached factors."""

    scene: Scene
    context: ContextModel
    _chol: np.ndarray = field(init=False, repr=False)
    _precision: np.ndarray = field(init=False, repr=False)
    _prior_const: float = field(init=False, repr=False)
    _obs: np.ndarray = field(init=False, repr=False)
    _inv_var: np.ndarray = field(init=False, repr=False)
    _lik_const: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        validate_context(self.context)
        if self.scene.catalog != self.context.catalog:
            raise DimensionMismatch(
                f"scene classes {self.scene.catalog.names} differ from "
                f"context {self.context.name!r} classes {self.context.catalog.names}"
            )
        m = self.context.n_classes
        chol = np.linalg.cholesky(self.context.sigma)
        inv_chol = np.linalg.inv(chol)
        set_ = object.__setattr__
        set_(self, "_chol", chol)
        set_(self, "_precision", inv_chol.T @ inv_chol)
        set_(self, "_prior_const", -0.5 * m * LOG_2PI - np.log(np.diag(chol)).sum())
        var = self.scene.uncertainties() ** 2
        set_(self, "_obs", self.scene.observations())
        set_(self, "_inv_var", 1.0 / var)
        set_(self, "_lik_const", -0.5 * m * (LOG_2PI + np.log(var)))

    @property
    def n_classes(self) -> int:
        return self.context.n_classes

    @property
    def n_objects(self) -> int:
        return self.scene.n_objects

    def log_prior(self, eta_raw: np.ndarray) -> float:
        d = eta_raw - self.context.mu
        return float(self._prior_const - 0.5 * d @ self._precision @ d)

    def column_log_likelihoods(self, c: np.ndarray) -> np.ndarray:
        resid = self._obs - c
        return self._lik_const - 0.5 * self._inv_var * np.einsum("ij,ij->j", resid, resid)

    def log_density(self, eta_raw: np.ndarray, c: np.ndarray) -> float:
        """Unchecked log joint; callers guarantee the latent constraints."""
        return self.log_prior(eta_raw) + float(self.column_log_likelihoods(c).sum())

    def initial_state(self) -> tuple[np.ndarray, np.ndarray]:
        """A feasible latent point near the readings, used to start chains."""
        n = self.n_objects
        totals = np.maximum(self._obs.sum(axis=1), 1e-3)
        totals *= n / totals.sum()
        eta_raw = np.log(totals)
        eta_raw += self.context.mu.mean() - eta_raw.mean()
        eta = softmax_counts(eta_raw, n)
        start = self._obs + 1e-3
        return eta_raw, fit_margins(start / start.sum(axis=0), eta)


def log_joint(target: JointDensityTarget, latent: LatentScene) -> float:
    """Log joint density of the scene's readings and one latent point."""
    check_latent(latent, target.n_classes, target.n_objects, tol=1e-6)
    return target.log_density(latent.eta_raw, latent.assignments)


@dataclass
class Diagnostics:
    acceptance_rate: float
    geweke_scores: np.ndarray
    converged: bool
    tracked: str
    n_samples: int
    chain: object = field(default=None, repr=False)


def posterior_class_probabilities(scene: Scene, context: ContextModel | None,
                                  config=None, query: tuple[int, int] | None = None):
    """Posterior mean of the assignment matrix, estimated by MCMC.

    Parameters
    ----------
    scene, context
        The readings to correct and the context to correct them with.
        ``context=None`` means no context, and the readings are returned as-is.
    config : SamplerConfig, optional
        Chain settings; defaults to ``SamplerConfig()``.
    query : (class_index, object_index), optional
        Scalar tracked for the Geweke check. Defaults to the log density.

    Returns
    -------
    probs : ndarray, shape (M, N)
    diagnostics : Diagnostics
    """
    from .mcmc import SamplerConfig, converged, geweke_scores, run_chain

    config = config or SamplerConfig()
    if context is None:
        probs = scene.observations()
        return probs, Diagnostics(1.0, np.zeros(20), True, "none", 0)

    target = JointDensityTarget(scene, context)
    chain = run_chain(target, config, track=query)
    probs = chain.posterior_mean()
    trace = chain.trace()[chain.post_burn_in]
    if trace.shape[0] >= 200:
        scores = geweke_scores(trace)
        ok = converged(scores, threshold=config.geweke_threshold)
    else:
        scores, ok = np.full(20, np.nan), False
    if not ok:
        warnings.warn(
            f"chain for context {context.name!r} did not meet the Geweke rule",
            NotConvergedWarning,
            stacklevel=2,
        )
    label = "log_density" if query is None else (
        f"{scene.catalog.names[query[0]]}[object {query[1]}]")
    return probs, Diagnostics(chain.acceptance_rate, scores, ok, label, trace.shape[0], chain)
