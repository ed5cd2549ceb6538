"""Input validation helpers shared by the estimators and the CLI."""
from __future__ import annotations

import numpy as np
from sklearn.utils.validation import check_array

from .exceptions import DimensionMismatch, InvalidInput
from .scene import AnnotatedCorpus, ClassCatalog, Scene, SensorReading


def check_readings(X, uncertainty, n_classes: int | None = None):
    """Validate an (n_objects, n_classes) probability matrix and its uncertainties.

    Rows are renormalized when they miss 1 by less than 1e-6, which absorbs
    rounding in hand-written inputs.
    """
    X = check_array(X, dtype=np.float64, ensure_2d=True)
    if n_classes is not None and X.shape[1] != n_classes:
        raise DimensionMismatch(f"X has {X.shape[1]} columns, expected {n_classes}")
    if np.any(X < 0) or np.any(X > 1):
        raise InvalidInput("probabilities must lie in [0, 1]")
    sums = X.sum(axis=1)
    if np.any(np.abs(sums - 1) > 1e-6):
        raise InvalidInput(f"each row must sum to 1; got sums {sums}")
    X = X / sums[:, None]
    unc = np.asarray(uncertainty, dtype=np.float64)
    if unc.ndim > 1 or (unc.ndim == 1 and unc.shape[0] != X.shape[0]):
        raise DimensionMismatch(f"uncertainty must be a scalar or have {X.shape[0]} entries")
    unc = np.broadcast_to(unc, (X.shape[0],)).copy()
    if not np.all(np.isfinite(unc)) or np.any(unc <= 0):
        raise InvalidInput("uncertainties must be positive")
    return X, unc


def readings_to_scene(X, uncertainty, catalog: ClassCatalog) -> Scene:
    """Scene from rows already in catalog order."""
    X, unc = check_readings(X, uncertainty, len(catalog))
    return Scene(catalog, tuple(SensorReading(row, s) for row, s in zip(X, unc)))


def check_corpus(X, classes=None) -> AnnotatedCorpus:
    """Accept an :class:`AnnotatedCorpus` or an iterable of class-name lists."""
    if isinstance(X, AnnotatedCorpus):
        if classes is not None and tuple(ClassCatalog(tuple(classes)).names) != X.catalog.names:
            raise DimensionMismatch("corpus catalog differs from the requested classes")
        return X
    if isinstance(X, (str, bytes)):
        raise InvalidInput("expected a corpus or a list of images, got a string")
    images = [list(img) for img in X]
    return AnnotatedCorpus.from_names(images, classes)
