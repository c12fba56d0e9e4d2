"""Article ingestion, topic clustering, and translation-candidate selection.

Articles arrive as JSONL with optional topic vectors (pre-computed topic-model
proportions). Clustering is plain Lloyd k-means over those vectors; selection
keeps large clusters only and picks one representative plus a few random
extras per cluster, truncating overly long articles.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .jsonl import JsonlError, iter_jsonl, write_jsonl


class CorpusError(ValueError):
    pass


@dataclass(frozen=True)
class Article:
    """A dated, sourced news document with ordered sentences."""

    id: str
    newspaper: str
    year: int
    language: str
    sentences: tuple[str, ...]
    topic_vector: tuple[float, ...] | None = None

    def __post_init__(self):
        if not self.id:
            raise CorpusError("article id must be nonempty")
        if len(self.sentences) < 1 or any(not s for s in self.sentences):
            raise CorpusError(f"article {self.id!r}: sentences must be nonempty")
        if self.topic_vector is not None and any(v < 0 for v in self.topic_vector):
            raise CorpusError(f"article {self.id!r}: topic_vector entries must be >= 0")

    @property
    def text(self) -> str:
        """Article body as the sentences joined by single spaces."""
        return " ".join(self.sentences)

    def to_dict(self) -> dict:
        d = {
            "id": self.id,
            "newspaper": self.newspaper,
            "year": self.year,
            "language": self.language,
            "sentences": list(self.sentences),
        }
        if self.topic_vector is not None:
            d["topic_vector"] = list(self.topic_vector)
        return d


@dataclass(frozen=True)
class ClusterAssignment:
    article_id: str
    cluster_id: int
    distance: float  # squared Euclidean to centroid


@dataclass(frozen=True)
class SelectionConfig:
    k: int = 2000
    min_cluster_size: int = 20
    min_sentences: int = 5
    max_sentences: int = 20
    extra_samples_per_cluster: int = 3
    seed: int = 0

    def __post_init__(self):
        if self.k < 1:
            raise CorpusError("k must be >= 1")
        if not (1 <= self.min_sentences <= self.max_sentences):
            raise CorpusError("need 1 <= min_sentences <= max_sentences")


_REQUIRED_FIELDS = ("id", "newspaper", "year", "language", "sentences")


def _article_from_obj(obj: dict, lineno: int) -> Article:
    for key in _REQUIRED_FIELDS:
        if key not in obj:
            raise JsonlError(f"line {lineno}: missing field {key!r}", line=lineno)
    sentences = obj["sentences"]
    if not isinstance(sentences, list) or not sentences or not all(isinstance(s, str) and s for s in sentences):
        raise JsonlError(f"line {lineno}: 'sentences' must be a nonempty list of nonempty strings", line=lineno)
    tv = obj.get("topic_vector")
    if tv is not None:
        if not isinstance(tv, list) or not all(isinstance(v, (int, float)) for v in tv):
            raise JsonlError(f"line {lineno}: 'topic_vector' must be a list of numbers", line=lineno)
        if any(v < 0 for v in tv):
            raise JsonlError(f"line {lineno}: 'topic_vector' entries must be >= 0", line=lineno)
        tv = tuple(float(v) for v in tv)
    if not isinstance(obj["year"], int):
        raise JsonlError(f"line {lineno}: 'year' must be an integer", line=lineno)
    if not isinstance(obj["id"], str) or not obj["id"]:
        raise JsonlError(f"line {lineno}: 'id' must be a nonempty string", line=lineno)
    return Article(
        id=obj["id"],
        newspaper=str(obj["newspaper"]),
        year=obj["year"],
        language=str(obj["language"]),
        sentences=tuple(sentences),
        topic_vector=tv,
    )


def load_articles(path: str | Path) -> list[Article]:
    """Load an article JSONL file.

    Raises JsonlError naming the line number for malformed lines, duplicate
    ids (both lines named), or inconsistent topic-vector dimensions.
    """
    articles: list[Article] = []
    seen: dict[str, int] = {}
    topic_dim: int | None = None
    topic_dim_line = 0
    for lineno, obj in iter_jsonl(path):
        art = _article_from_obj(obj, lineno)
        if art.id in seen:
            raise JsonlError(
                f"line {lineno}: duplicate article id {art.id!r} (first seen on line {seen[art.id]})",
                line=lineno,
            )
        seen[art.id] = lineno
        if art.topic_vector is not None:
            if topic_dim is None:
                topic_dim, topic_dim_line = len(art.topic_vector), lineno
            elif len(art.topic_vector) != topic_dim:
                raise JsonlError(
                    f"line {lineno}: topic_vector has length {len(art.topic_vector)}, "
                    f"expected {topic_dim} (set on line {topic_dim_line})",
                    line=lineno,
                )
        articles.append(art)
    return articles


def save_articles(path: str | Path, articles: list[Article]) -> int:
    return write_jsonl(path, (a.to_dict() for a in articles))


def kmeans_cluster(
    vectors: list | np.ndarray,
    k: int,
    seed: int,
    max_iters: int = 100,
    ids: list[str] | None = None,
) -> tuple[np.ndarray, list[ClusterAssignment]]:
    """Lloyd k-means with seeded init; returns (centroids, assignments).

    Initialization picks k distinct input points uniformly at random. An
    empty cluster is reseeded to the point currently farthest from its
    centroid. The within-cluster SSE is checked to be non-increasing after
    every assignment step. Deterministic for a fixed seed.
    """
    try:
        X = np.asarray(vectors, dtype=np.float64)
    except ValueError as exc:
        raise CorpusError(f"kmeans_cluster: vectors must share one dimension: {exc}") from exc
    if X.ndim == 1:
        X = X.reshape(-1, 1)
    if X.ndim != 2 or X.shape[0] == 0:
        raise CorpusError("kmeans_cluster: need a nonempty list of same-dimension vectors")
    n = X.shape[0]
    if k > n:
        raise CorpusError(f"kmeans_cluster: k={k} exceeds number of points n={n}")
    if ids is None:
        ids = [str(i) for i in range(n)]
    if len(ids) != n:
        raise CorpusError("kmeans_cluster: ids length must match vectors")

    rng = np.random.default_rng(seed)
    centroids = X[rng.choice(n, size=k, replace=False)].copy()

    x_sq = np.einsum("ij,ij->i", X, X)

    def assign(cents: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        # squared Euclidean via the expansion trick; clip tiny negatives
        d2 = x_sq[:, None] + np.einsum("ij,ij->i", cents, cents)[None, :] - 2.0 * (X @ cents.T)
        np.maximum(d2, 0.0, out=d2)
        labels = np.argmin(d2, axis=1)
        return labels, d2[np.arange(n), labels]

    labels, dists = assign(centroids)
    prev_sse = float(dists.sum())
    for _ in range(max_iters):
        # update step: mean of assigned points per cluster
        counts = np.bincount(labels, minlength=k).astype(np.float64)
        sums = np.zeros_like(centroids)
        np.add.at(sums, labels, X)
        nonempty = counts > 0
        centroids[nonempty] = sums[nonempty] / counts[nonempty, None]
        # reseed empty clusters to the farthest points from their centroids
        empty = np.flatnonzero(~nonempty)
        if empty.size:
            order = np.argsort(-dists, kind="stable")
            for slot, point in zip(empty, order[: empty.size]):
                centroids[slot] = X[point]
        new_labels, dists = assign(centroids)
        sse = float(dists.sum())
        if sse > prev_sse + 1e-9 * max(1.0, prev_sse):
            raise AssertionError(f"kmeans objective increased: {prev_sse} -> {sse}")
        converged = bool(np.array_equal(new_labels, labels)) and not empty.size
        labels = new_labels
        prev_sse = sse
        if converged:
            break

    assignments = [
        ClusterAssignment(article_id=ids[i], cluster_id=int(labels[i]), distance=float(dists[i]))
        for i in range(n)
    ]
    return centroids, assignments


def select_articles(
    articles: list[Article],
    assignments: list[ClusterAssignment],
    cfg: SelectionConfig,
) -> list[Article]:
    """Pick translation candidates cluster by cluster.

    Only clusters with more than cfg.min_cluster_size members are considered.
    Each contributes its most representative member (minimal distance to the
    centroid, ties broken by smallest article id) plus up to
    cfg.extra_samples_per_cluster uniformly sampled extras, all restricted to
    articles with at least cfg.min_sentences sentences. Selected articles
    longer than cfg.max_sentences keep only their first cfg.max_sentences
    sentences. Deterministic under cfg.seed; no article is selected twice.
    """
    by_id = {a.id: a for a in articles}
    for asg in assignments:
        if asg.article_id not in by_id:
            raise CorpusError(f"assignment references unknown article {asg.article_id!r}")

    clusters: dict[int, list[ClusterAssignment]] = {}
    for asg in assignments:
        clusters.setdefault(asg.cluster_id, []).append(asg)

    rng = np.random.default_rng(cfg.seed)
    selected: list[Article] = []
    for cluster_id in sorted(clusters):
        members = clusters[cluster_id]
        if len(members) <= cfg.min_cluster_size:
            continue
        eligible = [m for m in members if len(by_id[m.article_id].sentences) >= cfg.min_sentences]
        if not eligible:
            continue
        rep = min(eligible, key=lambda m: (m.distance, m.article_id))
        chosen = [rep.article_id]
        pool = sorted(m.article_id for m in eligible if m.article_id != rep.article_id)
        n_extra = min(cfg.extra_samples_per_cluster, len(pool))
        if n_extra > 0:
            picks = rng.choice(len(pool), size=n_extra, replace=False)
            chosen.extend(pool[i] for i in sorted(picks))
        for aid in chosen:
            art = by_id[aid]
            if len(art.sentences) > cfg.max_sentences:
                art = dataclasses.replace(art, sentences=art.sentences[: cfg.max_sentences])
            selected.append(art)
    return selected
