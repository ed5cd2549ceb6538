"""Metropolis-Hastings over (eta_raw, C), Geweke diagnostics and a timing harness."""
from __future__ import annotations

import csv
import time
from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

import numpy as np

from .exceptions import InvalidInput, SeriesTooShort, WrongCount
from .scene import LatentScene, softmax_counts

BLOCK = 8192


@dataclass(frozen=True)
class SamplerConfig:
    iterations: int = 100_000
    burn_in: int = 20_000
    thin: int = 10
    eta_step: float = 0.1
    c_step: float = 0.05
    seed: int = 0
    geweke_threshold: float = 0.01

    def __post_init__(self):
        if self.iterations < 1 or not 0 <= self.burn_in < self.iterations:
            raise InvalidInput(
                f"need 0 <= burn_in < iterations, got {self.burn_in} and {self.iterations}"
            )
        if self.thin < 1:
            raise InvalidInput(f"thin must be >= 1, got {self.thin}")
        if not (self.eta_step > 0 and self.c_step > 0):
            raise InvalidInput("eta_step and c_step must be positive")

    def replace(self, **changes) -> "SamplerConfig":
        return replace(self, **changes)


@dataclass(eq=False)
class Chain:
    """Thinned record of a run; burn-in states are kept and flagged."""

    iterations: np.ndarray
    eta_raw: np.ndarray
    assignments: np.ndarray
    log_densities: np.ndarray
    accepted: np.ndarray
    seed: int
    config: SamplerConfig
    track: tuple[int, int] | None = None

    @property
    def acceptance_rate(self) -> float:
        return float(self.accepted.mean()) if self.accepted.size else 0.0

    @property
    def post_burn_in(self) -> np.ndarray:
        return self.iterations >= self.config.burn_in

    @property
    def states(self) -> list[LatentScene]:
        return [LatentScene(e, c) for e, c in zip(self.eta_raw, self.assignments)]

    @property
    def eta(self) -> np.ndarray:
        n = self.assignments.shape[2]
        return np.array([softmax_counts(e, n) for e in self.eta_raw])

    def posterior_mean(self) -> np.ndarray:
        return self.assignments[self.post_burn_in].mean(axis=0)

    def trace(self) -> np.ndarray:
        """The tracked scalar at every stored state."""
        if self.track is None:
            return self.log_densities
        m, n = self.track
        return self.assignments[:, m, n]


def _accept(log_ratio: float, u: float) -> bool:
    return log_ratio >= 0 or np.log(u) < log_ratio


def run_chain(target, config: SamplerConfig, track: tuple[int, int] | None = None) -> Chain:
    """Sample the target's latent posterior with a three-move MH cycle.

    Iteration ``it`` uses move ``it % 3``:

    0. random-walk ``eta_raw`` with steps shaped by chol(Sigma) and move ``C``
       by the change in ``eta``, spread over columns in proportion to each
       reading's variance;
    1. the same ``eta_raw`` step, spread with flat Dirichlet weights;
    2. shift mass ``delta ~ N(0, c_step^2)`` around a random 2 x 2 cycle of ``C``.

    Every move keeps all row and column sums and is a unit-Jacobian shift
    whose reverse has equal proposal density, so the acceptance ratio is the
    density ratio. Proposals leaving [0, 1] are rejected.
    """
    rng = np.random.default_rng(config.seed)
    m, n = target.n_classes, target.n_objects
    eta_raw, c = target.initial_state()
    eta_raw, c = eta_raw.copy(), c.copy()
    eta = softmax_counts(eta_raw, n)
    log_prior = target.log_prior(eta_raw)
    col_ll = target.column_log_likelihoods(c)
    cur = log_prior + col_ll.sum()
    can_transfer = m >= 2 and n >= 2
    step_chol = config.eta_step * np.linalg.cholesky(target.context.sigma)
    # move most of an eta change onto the least certain objects
    var_weights = target.scene.uncertainties() ** 2
    var_weights = var_weights / var_weights.sum()

    n_keep = config.iterations // config.thin
    kept_iter = np.empty(n_keep, dtype=np.int64)
    kept_raw = np.empty((n_keep, m))
    kept_c = np.empty((n_keep, m, n))
    kept_ld = np.empty(n_keep)
    accepted = np.zeros(config.iterations, dtype=bool)
    k = 0

    for start in range(0, config.iterations, BLOCK):
        size = min(BLOCK, config.iterations - start)
        z_eta = rng.standard_normal((size, m)) @ step_chol.T
        w_col = rng.standard_exponential((size, n))
        z_c = rng.standard_normal(size) * config.c_step
        rows = np.argsort(rng.random((size, m)), axis=1)[:, :2] if m >= 2 else None
        cols = np.argsort(rng.random((size, n)), axis=1)[:, :2] if n >= 2 else None
        uniforms = rng.random(size)

        for j in range(size):
            it = start + j
            kind = it % 3
            if kind < 2 or not can_transfer:
                new_raw = eta_raw + z_eta[j]
                new_eta = softmax_counts(new_raw, n)
                w = var_weights if kind == 0 else w_col[j] / w_col[j].sum()
                new_c = c + np.outer(new_eta - eta, w)
                if new_c.min() >= 0.0 and new_c.max() <= 1.0:
                    new_prior = target.log_prior(new_raw)
                    new_ll = target.column_log_likelihoods(new_c)
                    prop = new_prior + new_ll.sum()
                    if _accept(prop - cur, uniforms[j]):
                        eta_raw, eta, c = new_raw, new_eta, new_c
                        log_prior, col_ll, cur = new_prior, new_ll, prop
                        accepted[it] = True
            else:
                a, b = rows[j]
                p, q = cols[j]
                d = z_c[j]
                vals = (c[a, p] + d, c[b, p] - d, c[a, q] - d, c[b, q] + d)
                if min(vals) >= 0.0 and max(vals) <= 1.0:
                    new_c = c.copy()
                    new_c[a, p], new_c[b, p], new_c[a, q], new_c[b, q] = vals
                    new_ll = target.column_log_likelihoods(new_c)
                    prop = log_prior + new_ll.sum()
                    if _accept(prop - cur, uniforms[j]):
                        c, col_ll, cur = new_c, new_ll, prop
                        accepted[it] = True
            if (it + 1) % config.thin == 0:
                kept_iter[k] = it
                kept_raw[k] = eta_raw
                kept_c[k] = c
                kept_ld[k] = cur
                k += 1

    return Chain(kept_iter, kept_raw, kept_c, kept_ld, accepted, config.seed, config, track)


@dataclass
class MHTrace:
    samples: np.ndarray
    log_densities: np.ndarray
    accepted: np.ndarray

    @property
    def acceptance_rate(self) -> float:
        return float(self.accepted.mean())


def metropolis_hastings(log_density: Callable, initial, propose: Callable,
                        iterations: int, seed=None) -> MHTrace:
    """Generic Metropolis-Hastings with a symmetric proposal.

    ``propose(x, rng)`` returns a candidate state; ``log_density`` may return
    ``-inf`` for states outside the support.
    """
    rng = np.random.default_rng(seed)
    x = initial
    cur = log_density(x)
    if not np.isfinite(cur):
        raise InvalidInput("initial state has zero density")
    samples = [None] * iterations
    lds = np.empty(iterations)
    accepted = np.zeros(iterations, dtype=bool)
    uniforms = rng.random(iterations)
    for i in range(iterations):
        cand = propose(x, rng)
        prop = log_density(cand)
        if np.isfinite(prop) and _accept(prop - cur, uniforms[i]):
            x, cur = cand, prop
            accepted[i] = True
        samples[i] = x
        lds[i] = cur
    return MHTrace(np.asarray(samples), lds, accepted)


def _long_run_variance(x: np.ndarray) -> float:
    """Variance of the mean times n, by non-overlapping batch means of size floor(sqrt(n))."""
    n = x.shape[0]
    size = max(int(np.sqrt(n)), 1)
    n_batches = n // size
    if n_batches < 2:
        return float(x.var(ddof=1)) if n > 1 else 0.0
    means = x[: n_batches * size].reshape(n_batches, size).mean(axis=1)
    return float(size * means.var(ddof=1))


def geweke_scores(series: Sequence[float], first: float = 0.1, last: float = 0.5,
                  intervals: int = 20) -> np.ndarray:
    """Geweke z-scores of the early window against segments of the late window.

    The first ``first`` fraction of the series is compared with each of
    ``intervals`` consecutive segments covering the last ``last`` fraction.
    Under the stationary null every window shares one long-run variance,
    estimated once by batch means over the whole series; a window of length
    k then has mean variance ``lrv / k``. Late segments are too short to
    hold batches longer than a typical autocorrelation time, so per-window
    estimates would understate the variance. A score whose denominator is
    zero is reported as 0.
    """
    x = np.asarray(series, dtype=float)
    if x.ndim != 1 or x.shape[0] < 200:
        raise SeriesTooShort(f"need at least 200 values, got {x.shape[0]}")
    if not (0 < first < 1 and 0 < last < 1 and first + last <= 1):
        raise InvalidInput("window fractions must lie in (0, 1) and not overlap")
    n = x.shape[0]
    head = x[: int(first * n)]
    tail = x[n - int(last * n):]
    if tail.shape[0] < intervals:
        raise SeriesTooShort(f"late window has fewer than {intervals} values")
    scores = np.zeros(intervals)
    if np.ptp(x) == 0:
        # batch means of a constant can differ in the last bit
        return scores
    lrv = _long_run_variance(x - x.mean())
    for i, seg in enumerate(np.array_split(tail, intervals)):
        denom = np.sqrt(lrv / head.shape[0] + lrv / seg.shape[0])
        if denom > 0:
            scores[i] = (head.mean() - seg.mean()) / denom
    return scores


def converged(scores: Sequence[float], threshold: float = 0.01, max_exceed: int = 3,
              expected: int = 20) -> bool:
    """True when no more than ``max_exceed`` scores exceed ``threshold`` in magnitude."""
    scores = np.asarray(scores, dtype=float)
    if scores.shape != (expected,):
        raise WrongCount(f"expected {expected} Geweke scores, got {scores.size}")
    return int(np.count_nonzero(np.abs(scores) > threshold)) <= max_exceed


@dataclass
class BenchmarkRow:
    label: str
    iterations: int
    us_per_iter: float
    iterations_to_converge: int | None
    estimate: float
    acceptance_rate: float
    final_scores: np.ndarray = field(repr=False, default=None)

    @property
    def converged(self) -> bool:
        return self.iterations_to_converge is not None


def first_converged_iteration(chain: Chain, threshold: float = 0.01,
                              check_every: int = 1000) -> int | None:
    """Earliest checkpoint at which the tracked trace so far meets the Geweke rule."""
    trace = chain.trace()
    for stop in range(check_every, chain.config.iterations + 1, check_every):
        upto = trace[chain.iterations < stop]
        if upto.shape[0] < 200:
            continue
        if converged(geweke_scores(upto), threshold=threshold):
            return stop
    return None


def benchmark(target, configs: Sequence[SamplerConfig], track: tuple[int, int] | None = None,
              labels: Sequence[str] | None = None, check_every: int = 1000) -> list[BenchmarkRow]:
    """Time each config and find when its tracked scalar first passes the Geweke rule."""
    if not configs:
        raise InvalidInput("benchmark needs at least one config")
    labels = labels or [f"mh-{i}" for i in range(len(configs))]
    rows = []
    for label, config in zip(labels, configs):
        t0 = time.perf_counter()
        chain = run_chain(target, config, track=track)
        elapsed = time.perf_counter() - t0
        trace = chain.trace()
        post = trace[chain.post_burn_in]
        scores = geweke_scores(trace) if trace.shape[0] >= 200 else None
        rows.append(BenchmarkRow(
            label=label,
            iterations=config.iterations,
            us_per_iter=1e6 * elapsed / config.iterations,
            iterations_to_converge=first_converged_iteration(
                chain, config.geweke_threshold, check_every),
            estimate=float(post.mean()) if post.size else float("nan"),
            acceptance_rate=chain.acceptance_rate,
            final_scores=scores,
        ))
    return rows


def write_chain_csv(chain: Chain, path, class_names: Sequence[str]) -> None:
    """Dump a chain: iteration, log density, C column-major, then eta."""
    m, n = chain.assignments.shape[1:]
    header = ["iteration", "log_density"]
    header += [f"c[{class_names[i]},{j}]" for j in range(n) for i in range(m)]
    header += [f"eta[{name}]" for name in class_names]
    eta = chain.eta
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for k in range(chain.iterations.shape[0]):
            row = [int(chain.iterations[k]), repr(float(chain.log_densities[k]))]
            row += [repr(float(v)) for v in chain.assignments[k].T.ravel()]
            row += [repr(float(v)) for v in eta[k]]
            writer.writerow(row)
