"""Co-occurrence graph between object classes and pairwise conditional queries.

Nodes are classes; the weight of edge (a, b) is the number of images in
which both classes appear. Edges are oriented from the alphabetically
earlier class to the later one, which makes the graph acyclic.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path

import numpy as np

from .exceptions import EvidenceUnseen, InvalidInput
from .learning import cooccurrence_counts
from .scene import AnnotatedCorpus, ClassCatalog


@dataclass(frozen=True, eq=False)
class CooccurrenceGraph:
    catalog: ClassCatalog
    edge_weights: np.ndarray
    node_counts: np.ndarray
    total_images: int

    def __post_init__(self):
        w = np.array(self.edge_weights, dtype=np.int64)
        counts = np.array(self.node_counts, dtype=np.int64)
        np.fill_diagonal(w, 0)
        w.setflags(write=False)
        counts.setflags(write=False)
        object.__setattr__(self, "edge_weights", w)
        object.__setattr__(self, "node_counts", counts)
        m = len(self.catalog)
        if w.shape != (m, m) or counts.shape != (m,):
            raise InvalidInput("graph arrays do not match the catalog size")
        if not np.array_equal(w, w.T):
            raise InvalidInput("edge weights must be symmetric")
        if np.any(w < 0) or np.any(w > np.minimum.outer(counts, counts)):
            raise InvalidInput("edge weight exceeds a node count")
        if np.any(counts > self.total_images):
            raise InvalidInput("node count exceeds the number of images")

    def edges(self) -> list[tuple[str, str, int]]:
        """Surviving undirected edges as (a, b, weight) with a before b."""
        names = self.catalog.names
        a, b = np.nonzero(np.triu(self.edge_weights, k=1))
        return [(names[i], names[j], int(self.edge_weights[i, j])) for i, j in zip(a, b)]


def build_graph(corpus: AnnotatedCorpus) -> CooccurrenceGraph:
    matrix, node_counts = cooccurrence_counts(corpus)
    return CooccurrenceGraph(corpus.catalog, matrix, node_counts, len(corpus))


def threshold_graph(graph: CooccurrenceGraph, tau: int) -> CooccurrenceGraph:
    """Drop every edge whose weight is not strictly greater than ``tau``."""
    if tau < 0:
        raise InvalidInput(f"tau must be non-negative, got {tau}")
    w = np.where(graph.edge_weights > tau, graph.edge_weights, 0)
    return CooccurrenceGraph(graph.catalog, w, graph.node_counts, graph.total_images)


def orient_edges(graph: CooccurrenceGraph) -> list[tuple[str, str]]:
    """Directed (parent, child) pairs; the parent is the earlier class name."""
    # catalog order is the alphabetical order, so a < b already holds
    return [(a, b) for a, b, _ in graph.edges()]


def conditional_cooccurrence_fraction(graph: CooccurrenceGraph, evidence: str,
                                      query: str) -> Fraction:
    """Exact fraction of evidence-holding images that also hold ``query``."""
    e = graph.catalog.index(evidence)
    q = graph.catalog.index(query)
    seen = int(graph.node_counts[e])
    if seen == 0:
        raise EvidenceUnseen(f"class {evidence!r} appears in no image")
    if e == q:
        return Fraction(1)
    return Fraction(int(graph.edge_weights[e, q]), seen)


def conditional_cooccurrence(graph: CooccurrenceGraph, evidence: str, query: str) -> float:
    return float(conditional_cooccurrence_fraction(graph, evidence, query))


def rank_completions(graph: CooccurrenceGraph, evidence: str,
                     top_k: int | None = None) -> list[tuple[str, float]]:
    """Other classes ranked by co-occurrence with ``evidence``, ties alphabetical."""
    scored = [
        (name, conditional_cooccurrence_fraction(graph, evidence, name))
        for name in graph.catalog.names if name != evidence
    ]
    scored.sort(key=lambda item: -item[1])  # stable: ties keep catalog order
    if top_k is not None:
        scored = scored[: max(top_k, 0)]
    return [(name, float(p)) for name, p in scored]


def graph_to_dict(graph: CooccurrenceGraph) -> dict:
    return {
        "classes": list(graph.catalog.names),
        "total_images": int(graph.total_images),
        "node_counts": [int(v) for v in graph.node_counts],
        "edges": [{"a": a, "b": b, "weight": w} for a, b, w in graph.edges()],
    }


def graph_from_dict(payload: dict) -> CooccurrenceGraph:
    try:
        catalog = ClassCatalog(tuple(payload["classes"]))
        given = list(payload["classes"])
        perm = [given.index(n) for n in catalog.names]
        counts = np.asarray(payload["node_counts"], dtype=np.int64)[perm]
        w = np.zeros((len(catalog), len(catalog)), dtype=np.int64)
        for edge in payload["edges"]:
            i, j = catalog.index(edge["a"]), catalog.index(edge["b"])
            w[i, j] = w[j, i] = int(edge["weight"])
        return CooccurrenceGraph(catalog, w, counts, int(payload["total_images"]))
    except (KeyError, TypeError, ValueError) as exc:
        raise InvalidInput(f"malformed graph payload: {exc!r}") from None


def save_graph(graph: CooccurrenceGraph, path) -> None:
    Path(path).write_text(json.dumps(graph_to_dict(graph), indent=2) + "\n")


def load_graph(path) -> CooccurrenceGraph:
    from .learning import read_json

    return graph_from_dict(read_json(path))


def to_dot(graph: CooccurrenceGraph) -> str:
    """DOT source for the oriented graph, edges labeled with their weights."""
    lines = ["digraph cooccurrence {"]
    for name, count in zip(graph.catalog.names, graph.node_counts):
        lines.append(f'  "{name}" [label="{name}\\n{int(count)}"];')
    for a, b, w in graph.edges():
        lines.append(f'  "{a}" -> "{b}" [label="{w}"];')
    lines.append("}")
    return "\n".join(lines) + "\n"
