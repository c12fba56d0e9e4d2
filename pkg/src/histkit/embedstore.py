"""Embedding acquisition, bit-exact persistence, and exact cosine kNN.

Vectors are float32 row-major in memory and on disk; dot products accumulate
in float64. Search is exact brute force: candidate sets here are a few
thousand rows, where an approximate index would only add failure modes.
"""

from __future__ import annotations

import hashlib
import struct
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
import requests

MAGIC = b"HXEM"
FORMAT_VERSION = 1


class StoreFormatError(ValueError):
    """Malformed or truncated embedding-matrix file."""


class ProviderError(RuntimeError):
    """Embedding provider failed after retries."""


@dataclass
class EmbeddingMatrix:
    """Dense row-per-sentence vector store."""

    dim: int
    ids: list[str]
    data: np.ndarray  # (n, dim) float32, C-contiguous
    normalized: bool = False
    _index: dict[str, int] | None = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        self.data = np.ascontiguousarray(self.data, dtype=np.float32)
        if self.data.ndim != 2 or self.data.shape != (len(self.ids), self.dim):
            raise StoreFormatError(
                f"data shape {self.data.shape} does not match n={len(self.ids)}, dim={self.dim}"
            )

    @property
    def n(self) -> int:
        return len(self.ids)

    @property
    def index(self) -> dict[str, int]:
        if self._index is None:
            self._index = {sid: i for i, sid in enumerate(self.ids)}
        return self._index

    def row(self, sid: str) -> np.ndarray:
        try:
            return self.data[self.index[sid]]
        except KeyError:
            raise KeyError(f"no embedding stored for id {sid!r}") from None

    @classmethod
    def from_rows(cls, ids: Sequence[str], rows: np.ndarray, normalized: bool = False) -> "EmbeddingMatrix":
        rows = np.atleast_2d(np.asarray(rows, dtype=np.float32))
        dim = rows.shape[1] if rows.size else (rows.shape[1] if rows.ndim == 2 else 0)
        return cls(dim=dim, ids=list(ids), data=rows.reshape(len(ids), dim), normalized=normalized)


def normalize_rows(m: EmbeddingMatrix) -> EmbeddingMatrix:
    """Return a copy with unit-L2 rows; zero rows are rejected by index."""
    norms = np.linalg.norm(m.data.astype(np.float64), axis=1)
    zero = np.flatnonzero(norms == 0.0)
    if zero.size:
        raise ValueError(f"cannot normalize zero row at index {int(zero[0])} (id {m.ids[int(zero[0])]!r})")
    data = (m.data.astype(np.float64) / norms[:, None]).astype(np.float32)
    return EmbeddingMatrix(dim=m.dim, ids=list(m.ids), data=data, normalized=True)


def cosine(a: np.ndarray, b: np.ndarray) -> float:
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"dimension mismatch: {a.shape} vs {b.shape}")
    na = np.linalg.norm(a)
    nb = np.linalg.norm(b)
    if na == 0.0 or nb == 0.0:
        raise ValueError("cosine undefined for zero vectors")
    return float(np.dot(a, b) / (na * nb))


def knn(
    query: np.ndarray,
    m: EmbeddingMatrix,
    k: int,
    exclude: set[str] | frozenset[str] = frozenset(),
) -> list[tuple[str, float]]:
    """Exact top-k rows by cosine, descending; ties broken by ascending id."""
    if k < 1:
        raise ValueError("k must be >= 1")
    q = np.asarray(query, dtype=np.float64)
    if q.shape != (m.dim,):
        raise ValueError(f"query dim {q.shape} does not match store dim {m.dim}")
    nq = np.linalg.norm(q)
    if nq == 0.0:
        raise ValueError("cosine undefined for zero vectors")
    if m.n == 0:
        return []
    data = m.data.astype(np.float64)
    norms = np.linalg.norm(data, axis=1)
    norms[norms == 0.0] = np.inf  # zero rows never rank
    scores = (data @ q) / (norms * nq)
    order = sorted(range(m.n), key=lambda i: (-scores[i], m.ids[i]))
    out: list[tuple[str, float]] = []
    for i in order:
        if m.ids[i] in exclude:
            continue
        out.append((m.ids[i], float(scores[i])))
        if len(out) == k:
            break
    return out


def save(m: EmbeddingMatrix, path: str | Path) -> None:
    """Write the binary matrix format; load() reproduces it bit-exactly."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<IIQB", FORMAT_VERSION, m.dim, m.n, 1 if m.normalized else 0))
        for sid in m.ids:
            raw = sid.encode("utf-8")
            fh.write(struct.pack("<I", len(raw)))
            fh.write(raw)
        fh.write(np.ascontiguousarray(m.data, dtype="<f4").tobytes())


def _read_exact(fh, n: int, what: str) -> bytes:
    buf = fh.read(n)
    if len(buf) != n:
        raise StoreFormatError(f"truncated file while reading {what}")
    return buf


def load(path: str | Path) -> EmbeddingMatrix:
    with open(path, "rb") as fh:
        if _read_exact(fh, 4, "magic") != MAGIC:
            raise StoreFormatError("bad magic bytes (not an embedding matrix file)")
        version, dim, n, norm_flag = struct.unpack("<IIQB", _read_exact(fh, 17, "header"))
        if version != FORMAT_VERSION:
            raise StoreFormatError(f"unsupported format version {version}")
        ids = []
        for i in range(n):
            (length,) = struct.unpack("<I", _read_exact(fh, 4, f"id {i} length"))
            ids.append(_read_exact(fh, length, f"id {i}").decode("utf-8"))
        raw = _read_exact(fh, n * dim * 4, "vector data")
        trailing = fh.read(1)
        if trailing:
            raise StoreFormatError("trailing bytes after vector data")
    data = np.frombuffer(raw, dtype="<f4").reshape(n, dim).copy()
    return EmbeddingMatrix(dim=dim, ids=ids, data=data, normalized=bool(norm_flag))


class StubProvider:
    """Deterministic hash-seeded unit vectors; the test/demo provider."""

    kind = "stub"

    def __init__(self, dim: int = 64, model_name: str = "stub"):
        self.dim = dim
        self.model_name = model_name

    def embed_batch(self, texts: Sequence[str]) -> np.ndarray:
        out = np.empty((len(texts), self.dim), dtype=np.float32)
        for i, text in enumerate(texts):
            digest = hashlib.sha256(text.encode("utf-8")).digest()
            seed = int.from_bytes(digest[:8], "little")
            rng = np.random.default_rng(seed)
            v = rng.standard_normal(self.dim)
            out[i] = (v / np.linalg.norm(v)).astype(np.float32)
        return out


class FileProvider:
    """Looks vectors up in a JSONL of {"text": ..., "vector": [...]} records."""

    kind = "file"

    def __init__(self, path: str | Path, model_name: str = "file"):
        from .jsonl import read_jsonl

        self.model_name = model_name
        self._table: dict[str, np.ndarray] = {}
        dim = None
        for rec in read_jsonl(path):
            vec = np.asarray(rec["vector"], dtype=np.float32)
            if dim is None:
                dim = vec.shape[0]
            elif vec.shape[0] != dim:
                raise StoreFormatError(f"vector dimension drift in {path}: {vec.shape[0]} != {dim}")
            self._table[rec["text"]] = vec
        if dim is None:
            raise StoreFormatError(f"no vectors in {path}")
        self.dim = dim

    def embed_batch(self, texts: Sequence[str]) -> np.ndarray:
        rows = []
        for text in texts:
            if text not in self._table:
                raise ProviderError(f"no precomputed vector for text {text[:60]!r}")
            rows.append(self._table[text])
        return np.stack(rows) if rows else np.empty((0, self.dim), dtype=np.float32)


class RemoteProvider:
    """OpenAI-compatible embeddings endpoint (POST {base_url}/embeddings)."""

    kind = "remote-api"

    def __init__(
        self,
        base_url: str,
        model_name: str,
        api_key: str = "",
        timeout: float = 60.0,
        retries: int = 3,
        session: requests.Session | None = None,
    ):
        self.base_url = base_url.rstrip("/")
        self.model_name = model_name
        self.api_key = api_key
        self.timeout = timeout
        self.retries = retries
        self.session = session or requests.Session()

    def embed_batch(self, texts: Sequence[str]) -> np.ndarray:
        headers = {"Content-Type": "application/json"}
        if self.api_key:
            headers["Authorization"] = f"Bearer {self.api_key}"
        payload = {"model": self.model_name, "input": list(texts)}
        last: Exception | None = None
        for attempt in range(self.retries + 1):
            try:
                resp = self.session.post(
                    f"{self.base_url}/embeddings", json=payload, headers=headers, timeout=self.timeout
                )
                if resp.status_code // 100 != 2:
                    raise ProviderError(f"embeddings endpoint returned HTTP {resp.status_code}")
                body = resp.json()
                items = sorted(body["data"], key=lambda d: d["index"])
                return np.asarray([it["embedding"] for it in items], dtype=np.float32)
            except (requests.RequestException, ProviderError, KeyError, ValueError) as exc:
                last = exc
                if attempt < self.retries:
                    time.sleep(min(2.0**attempt * 0.1, 5.0))
        raise ProviderError(f"embedding request failed after {self.retries + 1} attempts: {last}")


def embed_texts(
    provider,
    texts: Sequence[str],
    batch_size: int = 64,
    ids: Sequence[str] | None = None,
) -> EmbeddingMatrix:
    """Embed texts in batches; row i corresponds to texts[i]."""
    if ids is None:
        ids = [str(i) for i in range(len(texts))]
    if len(ids) != len(texts):
        raise ValueError("ids must align with texts")
    if batch_size < 1:
        raise ValueError("batch_size must be >= 1")
    chunks: list[np.ndarray] = []
    dim: int | None = None
    for start in range(0, len(texts), batch_size):
        batch = provider.embed_batch(texts[start : start + batch_size])
        batch = np.atleast_2d(np.asarray(batch, dtype=np.float32))
        if dim is None:
            dim = batch.shape[1]
        elif batch.shape[1] != dim:
            raise ProviderError(f"dimension drift across batches: {batch.shape[1]} != {dim}")
        chunks.append(batch)
    if dim is None:
        dim = getattr(provider, "dim", 0)
        data = np.empty((0, dim), dtype=np.float32)
    else:
        data = np.concatenate(chunks, axis=0)
    return EmbeddingMatrix(dim=dim, ids=list(ids), data=data)
