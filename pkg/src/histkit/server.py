"""HTTP search service over a persisted cross-lingual index.

Endpoints: GET /health, GET /corpora, GET /stats, POST /query, plus
GET /articles/{side}/{article_id} so a UI can show a hit in article context.
Queries embed the text with the configured provider, map it through the
index's adapter when one is present, filter candidates by metadata, and rank
by exact cosine. The loaded index is immutable; swapping one in is a single
attribute assignment, so concurrent readers always see a full snapshot.
"""

from __future__ import annotations

import threading
import time
from dataclasses import dataclass, field

import numpy as np
from fastapi import FastAPI, Request
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse

from .adapt import apply_adapter
from .embedstore import EmbeddingMatrix, knn
from .index import SearchIndex, load_index

MAX_K = 100

_LATENCY_BUCKETS_MS = (1.0, 2.0, 5.0, 10.0, 20.0, 50.0, 100.0, 200.0, 500.0, 1000.0)


@dataclass
class ServiceStats:
    started_at: float = field(default_factory=time.monotonic)
    queries: int = 0
    total_ms: float = 0.0
    max_ms: float = 0.0
    buckets: list[int] = field(default_factory=lambda: [0] * (len(_LATENCY_BUCKETS_MS) + 1))
    _lock: threading.Lock = field(default_factory=threading.Lock, repr=False)

    def record(self, elapsed_ms: float) -> None:
        with self._lock:
            self.queries += 1
            self.total_ms += elapsed_ms
            self.max_ms = max(self.max_ms, elapsed_ms)
            for i, edge in enumerate(_LATENCY_BUCKETS_MS):
                if elapsed_ms <= edge:
                    self.buckets[i] += 1
                    break
            else:
                self.buckets[-1] += 1

    def to_dict(self) -> dict:
        with self._lock:
            mean = self.total_ms / self.queries if self.queries else 0.0
            return {
                "queries": self.queries,
                "uptime_s": time.monotonic() - self.started_at,
                "latency_ms": {
                    "mean": mean,
                    "max": self.max_ms,
                    "histogram": [
                        {"le": edge, "count": c} for edge, c in zip(_LATENCY_BUCKETS_MS, self.buckets)
                    ]
                    + [{"le": "inf", "count": self.buckets[-1]}],
                },
            }


def _error(status: int, message: str, headers: dict | None = None) -> JSONResponse:
    return JSONResponse(status_code=status, content={"error": message}, headers=headers)


def _validate_query(body) -> tuple[dict | None, str | None]:
    if not isinstance(body, dict):
        return None, "request body must be a JSON object"
    text = body.get("text")
    if not isinstance(text, str) or not text.strip():
        return None, "'text' must be a nonempty string"
    target = body.get("target_side")
    if not isinstance(target, str) or not target:
        return None, "'target_side' must name an indexed language side"
    k = body.get("k", 10)
    if not isinstance(k, int) or isinstance(k, bool) or k < 1 or k > MAX_K:
        return None, f"'k' must be an integer in [1, {MAX_K}]"
    filters = body.get("filters")
    if filters is None:
        filters = {}
    if not isinstance(filters, dict):
        return None, "'filters' must be an object"
    for key in filters:
        if key not in ("newspaper", "year_min", "year_max", "article_id"):
            return None, f"unknown filter {key!r}"
    for key in ("year_min", "year_max"):
        if key in filters and filters[key] is not None and not isinstance(filters[key], int):
            return None, f"'{key}' must be an integer"
    return (
        {
            "text": text,
            "source_lang": body.get("source_lang"),
            "target_side": target,
            "k": k,
            "filters": filters,
        },
        None,
    )


def _apply_filters(emb: EmbeddingMatrix, payloads, filters: dict) -> EmbeddingMatrix:
    """Restrict candidate rows by metadata before ranking."""
    if not filters:
        return emb
    keep_ids = []
    keep_rows = []
    by_id = {p.id: p for p in payloads}
    for i, sid in enumerate(emb.ids):
        p = by_id[sid]
        if filters.get("newspaper") is not None and p.newspaper != filters["newspaper"]:
            continue
        if filters.get("year_min") is not None and p.year < filters["year_min"]:
            continue
        if filters.get("year_max") is not None and p.year > filters["year_max"]:
            continue
        if filters.get("article_id") is not None and p.article_id != filters["article_id"]:
            continue
        keep_ids.append(sid)
        keep_rows.append(i)
    data = emb.data[keep_rows] if keep_rows else np.empty((0, emb.dim), dtype=np.float32)
    return EmbeddingMatrix(dim=emb.dim, ids=keep_ids, data=data, normalized=emb.normalized)


def create_app(
    index: SearchIndex | None = None,
    provider=None,
    index_dir: str | None = None,
    cors_origins: list[str] | None = None,
) -> FastAPI:
    """Build the service; pass either a loaded index or a directory to load."""
    if index is None and index_dir is not None:
        index = load_index(index_dir)  # corrupt index raises: refuse to start

    app = FastAPI(title="histkit search")
    app.add_middleware(
        CORSMiddleware,
        allow_origins=cors_origins or ["*"],
        allow_methods=["*"],
        allow_headers=["*"],
    )
    app.state.index = index
    app.state.provider = provider
    app.state.stats = ServiceStats()

    @app.get("/health")
    def health():
        return {"status": "ok", "uptime_s": time.monotonic() - app.state.stats.started_at}

    @app.get("/corpora")
    def corpora():
        idx: SearchIndex | None = app.state.index
        if idx is None:
            return []
        return [
            {
                "name": idx.name,
                "sides": {lang: emb.n for lang, (emb, _) in idx.sides.items()},
                "language_pairs": idx.language_pairs(),
                "sentence_count": idx.sentence_count,
                "adapter": idx.adapter is not None,
            }
        ]

    @app.get("/stats")
    def stats():
        return app.state.stats.to_dict()

    @app.get("/articles/{side}/{article_id}")
    def article(side: str, article_id: str):
        idx: SearchIndex | None = app.state.index
        if idx is None:
            return _error(503, "index not loaded")
        if side not in idx.sides:
            return _error(404, f"unknown side {side!r}")
        hits = [p.to_dict() for p in idx.sides[side][1] if p.article_id == article_id]
        if not hits:
            return _error(404, f"no article {article_id!r} on side {side!r}")
        return {"article_id": article_id, "side": side, "sentences": hits}

    @app.post("/query")
    async def query(request: Request):
        t0 = time.monotonic()
        try:
            body = await request.json()
        except Exception:
            return _error(400, "request body must be valid JSON")
        parsed, problem = _validate_query(body)
        if problem:
            return _error(400, problem)
        idx: SearchIndex | None = app.state.index
        if idx is None:
            return _error(503, "index not loaded")
        if parsed["target_side"] not in idx.sides:
            return _error(400, f"unknown target_side {parsed['target_side']!r}")
        provider = app.state.provider
        if provider is None:
            return _error(503, "no embedding provider configured")
        try:
            qvec = np.asarray(provider.embed_batch([parsed["text"]])[0], dtype=np.float64)
        except Exception as exc:
            return _error(502, f"embedding provider failed: {exc}", headers={"Retry-After": "1"})
        if idx.adapter is not None:
            qvec = apply_adapter(idx.adapter, qvec)

        emb, payloads = idx.sides[parsed["target_side"]]
        filtered = _apply_filters(emb, payloads, parsed["filters"])
        results = knn(qvec, filtered, k=parsed["k"]) if filtered.n else []
        by_id = {p.id: p for p in payloads}
        hits = [
            {
                "id": sid,
                "score": max(-1.0, min(1.0, score)),
                "text": by_id[sid].text,
                "newspaper": by_id[sid].newspaper,
                "year": by_id[sid].year,
                "article_id": by_id[sid].article_id,
            }
            for sid, score in results
        ]
        app.state.stats.record((time.monotonic() - t0) * 1000.0)
        return {
            "hits": hits,
            "config": {
                "k": parsed["k"],
                "target_side": parsed["target_side"],
                "source_lang": parsed["source_lang"],
                "filters": parsed["filters"],
                "adapter": idx.adapter is not None,
                "index": idx.name,
            },
        }

    return app


def serve(index_dir: str, addr: str = "0.0.0.0:8080", provider=None) -> None:
    """Run the service under uvicorn (blocking)."""
    import uvicorn

    host, _, port = addr.rpartition(":")
    app = create_app(index_dir=index_dir, provider=provider)
    uvicorn.run(app, host=host or "0.0.0.0", port=int(port), log_level="info")
