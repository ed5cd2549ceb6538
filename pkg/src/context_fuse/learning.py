"""Learning context hyper-parameters and co-occurrence counts from labeled corpora."""
from __future__ import annotations

import json
from collections import defaultdict
from pathlib import Path

import numpy as np

from .exceptions import EmptyCorpus, NoObjects, ParseError, UnknownSupercategory
from .scene import AnnotatedCorpus, ClassCatalog, ContextModel, validate_context

PD_FLOOR = 1e-12
PD_CLIP = 1e-6


def read_json(path):
    """Load a JSON file, turning decode failures into :class:`ParseError`."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ParseError(f"{path}: {exc.strerror or exc}") from None
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from None


def load_coco_annotations(path, supercategory_filter: str | None = None) -> AnnotatedCorpus:
    """Read a COCO ``instances_*.json`` file into an :class:`AnnotatedCorpus`.

    Each annotated image becomes one corpus image holding one class index per
    annotation. With ``supercategory_filter`` only images containing at least
    one object of that super-category are kept, with all of their objects.
    The catalog always spans every category in the file.
    """
    data = read_json(path)
    try:
        categories = data["categories"]
        annotations = data["annotations"]
        id_to_name = {int(c["id"]): str(c["name"]) for c in categories}
        id_to_super = {int(c["id"]): str(c.get("supercategory", "")) for c in categories}
        per_image = defaultdict(list)
        for ann in annotations:
            per_image[int(ann["image_id"])].append(int(ann["category_id"]))
        image_order = [int(img["id"]) for img in data.get("images", [])]
    except (KeyError, TypeError, ValueError) as exc:
        raise ParseError(f"{path}: not a COCO instances file ({exc!r})") from None

    if supercategory_filter is not None and supercategory_filter not in set(id_to_super.values()):
        known = ", ".join(sorted(set(id_to_super.values())))
        raise UnknownSupercategory(f"unknown supercategory {supercategory_filter!r}; known: {known}")

    catalog = ClassCatalog(tuple(id_to_name.values()))
    seen = set(image_order)
    order = [i for i in image_order if i in per_image]
    order += sorted(i for i in per_image if i not in seen)
    images = []
    for image_id in order:
        cat_ids = per_image[image_id]
        unknown = [c for c in cat_ids if c not in id_to_name]
        if unknown:
            raise ParseError(f"{path}: image {image_id} uses unknown category ids {unknown}")
        if supercategory_filter is not None and not any(
            id_to_super[c] == supercategory_filter for c in cat_ids
        ):
            continue
        images.append(tuple(catalog.index(id_to_name[c]) for c in cat_ids))
    return AnnotatedCorpus(catalog, tuple(images))


def load_native_corpus(path) -> AnnotatedCorpus:
    """Read a JSON list of images, each a list of class-name strings."""
    data = read_json(path)
    if not isinstance(data, list) or not all(
        isinstance(img, list) and all(isinstance(n, str) for n in img) for img in data
    ):
        raise ParseError(f"{path}: expected a JSON list of lists of class names")
    if not any(data):
        raise EmptyCorpus(f"{path}: corpus has no labeled objects")
    return AnnotatedCorpus.from_names(data)


def _correlation(counts: np.ndarray) -> np.ndarray:
    m = counts.shape[1]
    centered = counts - counts.mean(axis=0)
    std = np.sqrt((centered ** 2).mean(axis=0))
    live = std > 0
    corr = np.eye(m)
    if live.any():
        z = centered[:, live] / std[live]
        corr[np.ix_(live, live)] = z.T @ z / counts.shape[0]
    np.fill_diagonal(corr, 1.0)
    return (corr + corr.T) / 2


def nearest_correlation(corr: np.ndarray) -> np.ndarray:
    """Return ``corr`` if positive definite, else an eigenvalue-clipped repair."""
    w, v = np.linalg.eigh(corr)
    if w.min() > PD_FLOOR:
        return corr
    fixed = (v * np.clip(w, PD_CLIP, None)) @ v.T
    d = np.sqrt(np.diag(fixed))
    fixed = fixed / np.outer(d, d)
    fixed = (fixed + fixed.T) / 2
    np.fill_diagonal(fixed, 1.0)
    return fixed


def estimate_context(corpus: AnnotatedCorpus, name: str) -> ContextModel:
    """Estimate class frequencies and the count-correlation matrix of a corpus."""
    if len(corpus) == 0:
        raise EmptyCorpus("cannot estimate a context from an empty corpus")
    counts = corpus.count_matrix().astype(float)
    totals = counts.sum(axis=0)
    if totals.sum() == 0:
        raise NoObjects("corpus contains no labeled objects")
    mu = totals / totals.sum()
    sigma = nearest_correlation(_correlation(counts))
    return validate_context(ContextModel(name, corpus.catalog, mu, sigma))


def cooccurrence_counts(corpus: AnnotatedCorpus) -> tuple[np.ndarray, np.ndarray]:
    """Image-level co-occurrence matrix and per-class image counts.

    Entry (a, b) counts images holding at least one instance of both classes;
    the diagonal counts images holding the class at all.
    """
    if len(corpus) == 0:
        raise EmptyCorpus("cannot count co-occurrences in an empty corpus")
    presence = (corpus.count_matrix() > 0).astype(np.int64)
    matrix = presence.T @ presence
    return matrix, np.diag(matrix).copy()
