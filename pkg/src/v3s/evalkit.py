"""Retrieval and classification metrics over feature vectors."""
from __future__ import annotations

import numpy as np

from .errors import EmptyGallery, ZeroVector


def cosine_similarity(u, v) -> float:
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    nu, nv = np.linalg.norm(u), np.linalg.norm(v)
    if nu == 0 or nv == 0:
        raise ZeroVector("cosine similarity is undefined for a zero vector")
    return float(np.clip(u @ v / (nu * nv), -1.0, 1.0))


def _unit_rows(m: np.ndarray, what: str) -> np.ndarray:
    norms = np.linalg.norm(m, axis=1, keepdims=True)
    if np.any(norms == 0):
        raise ZeroVector(f"{what} row {int(np.argmin(norms[:, 0]))} is a zero vector")
    return m / norms


def similarity_matrix(queries, gallery) -> np.ndarray:
    q = _unit_rows(np.atleast_2d(np.asarray(queries, dtype=np.float64)), "query")
    g = _unit_rows(np.atleast_2d(np.asarray(gallery, dtype=np.float64)), "gallery")
    if q.shape[1] != g.shape[1]:
        raise ValueError(f"query width {q.shape[1]} != gallery width {g.shape[1]}")
    # a matrix product may round identical gallery rows differently depending on
    # their position; the same per-row reduction keeps exact duplicates tied
    return np.stack([(g * row).sum(axis=1) for row in q])


def topk_retrieval(queries, gallery, k: int, exclude_self: bool = False) -> np.ndarray:
    """Indices of the ``k`` most cosine-similar gallery rows for each query.

    Ties go to the lower gallery index. With ``exclude_self`` the gallery is
    taken to be the query set itself and query ``i`` never retrieves row ``i``.
    """
    gallery = np.asarray(gallery, dtype=np.float64)
    if gallery.size == 0:
        raise EmptyGallery("retrieval needs at least one gallery vector")
    sims = similarity_matrix(queries, gallery)
    available = sims.shape[1] - (1 if exclude_self else 0)
    if not 1 <= k <= available:
        raise ValueError(f"k={k} outside [1, {available}]")
    if exclude_self:
        if sims.shape[0] != sims.shape[1]:
            raise ValueError("exclude_self needs the gallery to be the query set")
        np.fill_diagonal(sims, -np.inf)
    # stable sort of negated similarity keeps lower indices first among ties
    order = np.argsort(-sims, axis=1, kind="stable")
    return order[:, :k]


def recall_at_k(retrievals, query_labels, gallery_labels, k: int) -> float:
    """Fraction of queries with a same-label item among their first ``k`` retrievals."""
    retrievals = np.asarray(retrievals)
    if k > retrievals.shape[1]:
        raise ValueError(f"k={k} exceeds retrieval depth {retrievals.shape[1]}")
    if len(retrievals) == 0:
        return 0.0
    hits = np.asarray(gallery_labels)[retrievals[:, :k]] == np.asarray(query_labels)[:, None]
    return float(np.mean(hits.any(axis=1)))


def chance_recall_at_1(query_labels, gallery_labels) -> float:
    """Expected recall@1 of a retriever that picks a uniformly random gallery item."""
    q = np.asarray(query_labels)
    g = np.asarray(gallery_labels)
    classes, counts = np.unique(g, return_counts=True)
    freq = dict(zip(classes.tolist(), (counts / len(g)).tolist()))
    return float(np.mean([freq.get(c, 0.0) for c in q.tolist()]))


def confusion_matrix(predictions, labels, n_classes: int) -> np.ndarray:
    """Rows index the true class, columns the predicted class."""
    labels = np.asarray(labels, dtype=np.intp)
    predictions = np.asarray(predictions, dtype=np.intp)
    if labels.size and (labels.min() < 0 or labels.max() >= n_classes):
        raise ValueError(f"labels outside [0, {n_classes})")
    m = np.zeros((n_classes, n_classes), dtype=np.int64)
    np.add.at(m, (labels, predictions), 1)
    return m


def accuracy(matrix: np.ndarray) -> float:
    total = matrix.sum()
    return float(np.trace(matrix) / total) if total else 0.0
