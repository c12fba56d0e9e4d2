"""Persistent cross-lingual search index: embeddings + sentence payloads.

An index is a directory holding a manifest, one embedding matrix and one
payload JSONL per language side, and optionally the adapter that was
pre-applied to the stored rows (kept so queries can be mapped into the same
adapted space). Rebuilds are atomic: written to a temp dir, then renamed.
"""

from __future__ import annotations

import json
import os
import shutil
import tempfile
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from . import embedstore
from .adapt import AdapterModel, apply_adapter
from .embedstore import EmbeddingMatrix, StoreFormatError
from .jsonl import read_jsonl, write_jsonl

MANIFEST_NAME = "manifest.json"
INDEX_VERSION = 1


class SearchIndexError(ValueError):
    """Inconsistent or corrupt index inputs."""


@dataclass(frozen=True)
class Payload:
    id: str
    text: str
    article_id: str
    newspaper: str
    year: int
    lang: str

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "text": self.text,
            "article_id": self.article_id,
            "newspaper": self.newspaper,
            "year": self.year,
            "lang": self.lang,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Payload":
        return cls(
            id=d["id"],
            text=d["text"],
            article_id=d.get("article_id", ""),
            newspaper=d.get("newspaper", ""),
            year=int(d.get("year", 0)),
            lang=d.get("lang", ""),
        )


@dataclass
class SearchIndex:
    name: str
    sides: dict[str, tuple[EmbeddingMatrix, list[Payload]]]
    adapter: AdapterModel | None = None

    @property
    def dim(self) -> int:
        for emb, _ in self.sides.values():
            return emb.dim
        return 0

    @property
    def sentence_count(self) -> int:
        return sum(emb.n for emb, _ in self.sides.values())

    def language_pairs(self) -> list[str]:
        langs = sorted(self.sides)
        return [f"{a}-{b}" for i, a in enumerate(langs) for b in langs[i + 1 :]]

    def payload(self, side: str, sid: str) -> Payload:
        for p in self.sides[side][1]:
            if p.id == sid:
                return p
        raise KeyError(sid)


def build_index(
    name: str,
    sides: dict[str, tuple[Sequence[Payload], EmbeddingMatrix]],
    adapter: AdapterModel | None = None,
) -> SearchIndex:
    """Assemble an in-memory index; the adapter is pre-applied to stored rows.

    Every payload id must have an embedding row and vice versa; mismatches
    raise with the first ten offending ids.
    """
    built: dict[str, tuple[EmbeddingMatrix, list[Payload]]] = {}
    for lang, (payloads, emb) in sides.items():
        payload_ids = [p.id for p in payloads]
        missing = [pid for pid in payload_ids if pid not in emb.index]
        orphaned = [eid for eid in emb.ids if eid not in set(payload_ids)]
        offenders = missing + orphaned
        if offenders:
            raise SearchIndexError(
                f"side {lang!r}: {len(offenders)} id(s) lack a payload/embedding counterpart: "
                f"{offenders[:10]}"
            )
        if adapter is not None:
            if adapter.dim != emb.dim:
                raise SearchIndexError(f"adapter dim {adapter.dim} does not match embedding dim {emb.dim}")
            rows = apply_adapter(adapter, emb.data.astype(np.float64)).astype(np.float32)
            emb = EmbeddingMatrix(dim=emb.dim, ids=list(emb.ids), data=rows, normalized=False)
        built[lang] = (emb, list(payloads))
    return SearchIndex(name=name, sides=built, adapter=adapter)


def save_index(index: SearchIndex, out_dir: str | Path) -> None:
    """Persist atomically: write a sibling temp dir, then rename into place."""
    out_dir = Path(out_dir)
    out_dir.parent.mkdir(parents=True, exist_ok=True)
    tmp = Path(tempfile.mkdtemp(prefix=f".{out_dir.name}.tmp-", dir=out_dir.parent))
    try:
        manifest: dict = {"version": INDEX_VERSION, "name": index.name, "dim": index.dim, "sides": {}}
        for lang, (emb, payloads) in index.sides.items():
            emb_file = f"{lang}.hxem"
            payload_file = f"{lang}.payloads.jsonl"
            embedstore.save(emb, tmp / emb_file)
            write_jsonl(tmp / payload_file, (p.to_dict() for p in payloads))
            manifest["sides"][lang] = {"emb": emb_file, "payloads": payload_file, "count": emb.n}
        if index.adapter is not None:
            index.adapter.save(tmp / "adapter.hxad")
            manifest["adapter"] = "adapter.hxad"
        (tmp / MANIFEST_NAME).write_text(json.dumps(manifest, indent=1), encoding="utf-8")
        if out_dir.exists():
            shutil.rmtree(out_dir)
        os.replace(tmp, out_dir)
    except BaseException:
        shutil.rmtree(tmp, ignore_errors=True)
        raise


def load_index(path: str | Path) -> SearchIndex:
    """Load and validate a persisted index; malformed input raises, never crashes."""
    path = Path(path)
    manifest_path = path / MANIFEST_NAME
    if not manifest_path.exists():
        raise SearchIndexError(f"no {MANIFEST_NAME} in {path}")
    try:
        manifest = json.loads(manifest_path.read_text(encoding="utf-8"))
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise SearchIndexError(f"corrupt manifest: {exc}") from exc
    if not isinstance(manifest, dict) or manifest.get("version") != INDEX_VERSION:
        raise SearchIndexError(f"unsupported index manifest version: {manifest.get('version')!r}")
    sides: dict[str, tuple[EmbeddingMatrix, list[Payload]]] = {}
    for lang, entry in manifest.get("sides", {}).items():
        try:
            emb = embedstore.load(path / entry["emb"])
            payloads = [Payload.from_dict(d) for d in read_jsonl(path / entry["payloads"])]
        except (OSError, KeyError, StoreFormatError) as exc:
            raise SearchIndexError(f"side {lang!r}: {exc}") from exc
        ids = {p.id for p in payloads}
        if ids != set(emb.ids) or len(payloads) != emb.n:
            raise SearchIndexError(f"side {lang!r}: payload ids do not match embedding ids")
        sides[lang] = (emb, payloads)
    adapter = None
    if manifest.get("adapter"):
        adapter = AdapterModel.load(path / manifest["adapter"])
    return SearchIndex(name=manifest.get("name", path.name), sides=sides, adapter=adapter)
