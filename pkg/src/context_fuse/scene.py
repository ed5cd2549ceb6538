"""Domain types: class catalogs, contexts, sensor readings, scenes and latent state.

Every vector or matrix indexed by class follows the catalog order, which is
lexicographic (case-insensitive, ties broken case-sensitively).
"""
from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .exceptions import (
    AsymmetricSigma,
    BadDiagonal,
    DimensionMismatch,
    InvalidInput,
    InvalidLatent,
    NegativeFrequency,
    NotPositiveDefinite,
    UnnormalizedMu,
)

EQ_TOL = 1e-9
EIG_FLOOR = 1e-12


def _frozen(a, dtype=float) -> np.ndarray:
    arr = np.array(a, dtype=dtype, copy=True)
    arr.setflags(write=False)
    return arr


def catalog_key(name: str) -> tuple[str, str]:
    return (name.lower(), name)


@dataclass(frozen=True)
class ClassCatalog:
    """Ordered set of class names; the order is fixed at construction."""

    names: tuple[str, ...]

    def __post_init__(self):
        names = tuple(str(n) for n in self.names)
        if not names:
            raise InvalidInput("a class catalog needs at least one class")
        if len(set(names)) != len(names):
            raise InvalidInput(f"duplicate class names in {names!r}")
        object.__setattr__(self, "names", tuple(sorted(names, key=catalog_key)))

    def __len__(self) -> int:
        return len(self.names)

    def __iter__(self):
        return iter(self.names)

    def __contains__(self, name) -> bool:
        return name in self.names

    def index(self, name: str) -> int:
        try:
            return self.names.index(name)
        except ValueError:
            raise InvalidInput(f"unknown class {name!r}") from None


@dataclass(frozen=True, eq=False)
class ContextModel:
    """Hyper-parameters of one named context.

    ``mu`` holds relative class frequencies and ``sigma`` the class correlation
    matrix, both in catalog order.
    """

    name: str
    catalog: ClassCatalog
    mu: np.ndarray
    sigma: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "mu", _frozen(self.mu))
        object.__setattr__(self, "sigma", _frozen(self.sigma))
        m = len(self.catalog)
        if self.mu.shape != (m,) or self.sigma.shape != (m, m):
            raise DimensionMismatch(
                f"context {self.name!r}: expected mu ({m},) and sigma ({m}, {m}), "
                f"got {self.mu.shape} and {self.sigma.shape}"
            )

    @property
    def n_classes(self) -> int:
        return len(self.catalog)

    def with_sigma(self, sigma, name: str | None = None) -> "ContextModel":
        return validate_context(
            ContextModel(name or self.name, self.catalog, self.mu, sigma)
        )


def validate_context(model: ContextModel) -> ContextModel:
    """Return ``model`` unchanged if its hyper-parameters are well formed.

    Raises one of the :class:`ContextValidationError` subclasses otherwise.
    """
    mu, sigma = model.mu, model.sigma
    if not (np.all(np.isfinite(mu)) and np.all(np.isfinite(sigma))):
        raise InvalidInput(f"context {model.name!r} has non-finite entries")
    if np.any(mu < 0):
        raise NegativeFrequency(f"context {model.name!r}: mu has negative entries")
    if abs(mu.sum() - 1.0) > EQ_TOL:
        raise UnnormalizedMu(
            f"context {model.name!r}: mu sums to {mu.sum()!r}, expected 1"
        )
    if np.max(np.abs(sigma - sigma.T)) > EQ_TOL:
        raise AsymmetricSigma(f"context {model.name!r}: sigma is not symmetric")
    if np.max(np.abs(np.diag(sigma) - 1.0)) > EQ_TOL:
        raise BadDiagonal(f"context {model.name!r}: sigma diagonal is not 1")
    try:
        np.linalg.cholesky(sigma)
    except np.linalg.LinAlgError:
        raise NotPositiveDefinite(
            f"context {model.name!r}: sigma is not positive definite"
        ) from None
    if np.linalg.eigvalsh(sigma).min() <= EIG_FLOOR:
        raise NotPositiveDefinite(
            f"context {model.name!r}: smallest eigenvalue below {EIG_FLOOR}"
        )
    return model


def make_context(name: str, classes: Sequence[str] | ClassCatalog, mu, sigma) -> ContextModel:
    """Build and validate a context, normalizing ``mu`` with a warning if needed.

    ``mu`` and ``sigma`` are given in the order of ``classes``; they are
    re-indexed into catalog order.
    """
    given = list(classes.names if isinstance(classes, ClassCatalog) else classes)
    catalog = classes if isinstance(classes, ClassCatalog) else ClassCatalog(given)
    mu = np.asarray(mu, dtype=float)
    sigma = np.asarray(sigma, dtype=float)
    if mu.shape != (len(given),) or sigma.shape != (len(given), len(given)):
        raise DimensionMismatch(
            f"context {name!r}: {len(given)} classes but mu {mu.shape}, sigma {sigma.shape}"
        )
    perm = [given.index(n) for n in catalog.names]
    mu = mu[perm]
    sigma = sigma[np.ix_(perm, perm)]
    if np.any(mu < 0):
        raise NegativeFrequency(f"context {name!r}: mu has negative entries")
    total = mu.sum()
    if abs(total - 1.0) > EQ_TOL:
        if not np.isfinite(total) or total <= 0:
            raise UnnormalizedMu(f"context {name!r}: mu sums to {total!r}")
        warnings.warn(
            f"context {name!r}: mu sums to {total:.6g}; normalizing to 1",
            stacklevel=2,
        )
        mu = mu / total
    return validate_context(ContextModel(name, catalog, mu, sigma))


def context_to_dict(model: ContextModel) -> dict:
    return {
        "name": model.name,
        "classes": list(model.catalog.names),
        "mu": [float(v) for v in model.mu],
        "sigma": [[float(v) for v in row] for row in model.sigma],
    }


def context_from_dict(payload: dict) -> ContextModel:
    try:
        return make_context(
            payload["name"], payload["classes"], payload["mu"], payload["sigma"]
        )
    except KeyError as exc:
        raise InvalidInput(f"context payload is missing field {exc}") from None


def save_context(model: ContextModel, path) -> None:
    # json writes floats with repr(), which round-trips float64 exactly
    Path(path).write_text(json.dumps(context_to_dict(model), indent=2) + "\n")


def load_context(path) -> ContextModel:
    from .learning import read_json  # local import: learning depends on this module

    return context_from_dict(read_json(path))


@dataclass(frozen=True, eq=False)
class SensorReading:
    """One detected object: the sensor's class-probability vector and its std."""

    probs: np.ndarray
    uncertainty: float

    def __post_init__(self):
        probs = _frozen(self.probs)
        object.__setattr__(self, "probs", probs)
        object.__setattr__(self, "uncertainty", float(self.uncertainty))
        if probs.ndim != 1 or not np.all(np.isfinite(probs)):
            raise InvalidInput("sensor probabilities must be a finite 1-D vector")
        if np.any(probs < 0) or np.any(probs > 1):
            raise InvalidInput(f"sensor probabilities outside [0, 1]: {probs}")
        if abs(probs.sum() - 1.0) > EQ_TOL:
            raise InvalidInput(f"sensor probabilities sum to {probs.sum()!r}, expected 1")
        if not (np.isfinite(self.uncertainty) and self.uncertainty > 0):
            raise InvalidInput(f"uncertainty must be positive, got {self.uncertainty!r}")


@dataclass(frozen=True, eq=False)
class Scene:
    catalog: ClassCatalog
    readings: tuple[SensorReading, ...]

    def __post_init__(self):
        readings = tuple(self.readings)
        object.__setattr__(self, "readings", readings)
        if not readings:
            raise InvalidInput("a scene needs at least one reading")
        m = len(self.catalog)
        for i, r in enumerate(readings):
            if r.probs.shape != (m,):
                raise DimensionMismatch(
                    f"reading {i} has {r.probs.shape[0]} classes, catalog has {m}"
                )

    @property
    def n_objects(self) -> int:
        return len(self.readings)

    @property
    def n_classes(self) -> int:
        return len(self.catalog)

    def observations(self) -> np.ndarray:
        """Readings stacked as an M x N matrix (one column per object)."""
        return np.column_stack([r.probs for r in self.readings])

    def uncertainties(self) -> np.ndarray:
        return np.array([r.uncertainty for r in self.readings])


def make_scene(classes, probs, uncertainties) -> Scene:
    """Build a scene from per-object rows given in the order of ``classes``."""
    given = list(classes.names if isinstance(classes, ClassCatalog) else classes)
    catalog = classes if isinstance(classes, ClassCatalog) else ClassCatalog(given)
    probs = np.atleast_2d(np.asarray(probs, dtype=float))
    unc = np.broadcast_to(np.asarray(uncertainties, dtype=float), (probs.shape[0],))
    if probs.shape[1] != len(given):
        raise DimensionMismatch(f"readings have {probs.shape[1]} classes, expected {len(given)}")
    perm = [given.index(n) for n in catalog.names]
    return Scene(catalog, tuple(SensorReading(p[perm], s) for p, s in zip(probs, unc)))


def softmax_counts(eta_raw, n_objects: int) -> np.ndarray:
    e = np.exp(eta_raw - np.max(eta_raw))
    return n_objects * e / e.sum()


@dataclass(frozen=True, eq=False)
class LatentScene:
    """HBM latent state: raw scene vector, expected class counts and assignments.

    ``assignments`` is M x N; column n is object n's true class distribution.
    ``eta`` is always derived from ``eta_raw``.
    """

    eta_raw: np.ndarray
    assignments: np.ndarray
    eta: np.ndarray = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "eta_raw", _frozen(self.eta_raw))
        object.__setattr__(self, "assignments", _frozen(np.atleast_2d(self.assignments)))
        n = self.assignments.shape[1]
        object.__setattr__(self, "eta", _frozen(softmax_counts(self.eta_raw, n)))

    @property
    def n_objects(self) -> int:
        return self.assignments.shape[1]


def check_latent(latent: LatentScene, n_classes: int | None = None,
                 n_objects: int | None = None, tol: float = EQ_TOL) -> LatentScene:
    """Raise :class:`InvalidLatent` unless every LatentScene constraint holds."""
    c = latent.assignments
    m, n = c.shape
    if latent.eta_raw.shape != (m,):
        raise InvalidLatent(f"eta_raw has shape {latent.eta_raw.shape}, expected ({m},)")
    if (n_classes is not None and m != n_classes) or (n_objects is not None and n != n_objects):
        raise InvalidLatent(f"assignments shape {c.shape} does not match scene")
    if not (np.all(np.isfinite(c)) and np.all(np.isfinite(latent.eta_raw))):
        raise InvalidLatent("latent state has non-finite entries")
    if c.min() < -tol or c.max() > 1 + tol:
        raise InvalidLatent("assignment entries outside [0, 1]")
    col_err = np.max(np.abs(c.sum(axis=0) - 1.0))
    if col_err > tol:
        raise InvalidLatent(f"assignment columns miss 1 by {col_err:.3g}")
    row_err = np.max(np.abs(c.sum(axis=1) - latent.eta))
    if row_err > tol:
        raise InvalidLatent(f"assignment rows miss eta by {row_err:.3g}")
    return latent


@dataclass(frozen=True, eq=False)
class AnnotatedCorpus:
    """Labeled images; each image is a tuple of class indices (one per instance)."""

    catalog: ClassCatalog
    images: tuple[tuple[int, ...], ...]

    def __post_init__(self):
        images = tuple(tuple(int(i) for i in img) for img in self.images)
        object.__setattr__(self, "images", images)
        m = len(self.catalog)
        for img in images:
            for i in img:
                if not 0 <= i < m:
                    raise InvalidInput(f"class index {i} out of range for {m} classes")

    def __len__(self) -> int:
        return len(self.images)

    @classmethod
    def from_names(cls, images: Iterable[Iterable[str]],
                   classes: Iterable[str] | None = None) -> "AnnotatedCorpus":
        images = [list(img) for img in images]
        if classes is None:
            classes = {name for img in images for name in img}
        catalog = classes if isinstance(classes, ClassCatalog) else ClassCatalog(tuple(classes))
        return cls(catalog, tuple(tuple(catalog.index(n) for n in img) for img in images))

    def count_matrix(self) -> np.ndarray:
        """Per-image class counts, shape (n_images, M)."""
        counts = np.zeros((len(self.images), len(self.catalog)), dtype=np.int64)
        for row, img in enumerate(self.images):
            for i in img:
                counts[row, i] += 1
        return counts
