"""Evaluation protocols: bitext mining, triplet ranking, zero-shot topics.

Bitext mining counts a query as correct only when its gold translation is
strictly more similar than every remaining candidate; near-duplicate
candidates are excluded beforehand by a normalized Levenshtein filter over
alphanumeric-stripped text, which would otherwise produce false negatives.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Sequence

import numpy as np

from .embedstore import EmbeddingMatrix, cosine


class EvalError(ValueError):
    pass


def levenshtein_distance(a: str, b: str) -> int:
    """Edit distance over Unicode scalar values (insert/delete/substitute)."""
    if a == b:
        return 0
    if not a:
        return len(b)
    if not b:
        return len(a)
    if len(a) < len(b):
        a, b = b, a
    prev = list(range(len(b) + 1))
    cur = [0] * (len(b) + 1)
    for i, ca in enumerate(a, start=1):
        cur[0] = i
        for j, cb in enumerate(b, start=1):
            cost = 0 if ca == cb else 1
            cur[j] = min(prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + cost)
        prev, cur = cur, prev
    return prev[len(b)]


def _levenshtein_within(a: str, b: str, limit: int) -> int:
    """Banded edit distance; returns the exact distance if <= limit, else limit+1."""
    la, lb = len(a), len(b)
    if abs(la - lb) > limit:
        return limit + 1
    if a == b:
        return 0
    if limit <= 0:
        return limit + 1 if a != b else 0
    if la < lb:
        a, b, la, lb = b, a, lb, la
    big = limit + 1
    prev = [j if j <= limit else big for j in range(lb + 1)]
    cur = [0] * (lb + 1)
    for i, ca in enumerate(a, start=1):
        lo = max(1, i - limit)
        hi = min(lb, i + limit)
        cur[lo - 1] = i if (lo - 1 == 0 and i <= limit) else big
        row_best = cur[lo - 1]
        for j in range(lo, hi + 1):
            cb = b[j - 1]
            cost = 0 if ca == cb else 1
            val = min(prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + cost)
            cur[j] = val if val <= limit else big
            if cur[j] < row_best:
                row_best = cur[j]
        if hi < lb:
            cur[hi + 1] = big
        if row_best > limit:
            return big
        prev, cur = cur, prev
    return prev[lb] if prev[lb] <= limit else big


def _strip_non_alnum(s: str) -> str:
    return "".join(ch for ch in s if ch.isalnum())


def lev_similarity(a: str, b: str, casefold: bool = False) -> float:
    """Normalized Levenshtein similarity over alphanumeric-stripped strings.

    1 - dist/max(len); both strings empty after stripping counts as 1.0.
    """
    a2, b2 = _strip_non_alnum(a), _strip_non_alnum(b)
    if casefold:
        a2, b2 = a2.casefold(), b2.casefold()
    m = max(len(a2), len(b2))
    if m == 0:
        return 1.0
    return 1.0 - levenshtein_distance(a2, b2) / m


def _similar_above(a2: str, b2: str, threshold: float) -> bool:
    """sim(a2, b2) > threshold for pre-stripped strings, via a banded early exit."""
    m = max(len(a2), len(b2))
    if m == 0:
        return threshold < 1.0
    limit = int(np.ceil((1.0 - threshold) * m))
    d = _levenshtein_within(a2, b2, limit)
    if d > limit:
        return False
    return 1.0 - d / m > threshold


@dataclass
class BitextTask:
    """Query/candidate sets with gold mapping and per-direction exclusions."""

    queries: list[str]
    candidates: list[str]
    gold: dict[str, str]  # query id -> candidate id
    excluded: dict[str, set[str]]  # query id -> candidate ids filtered out
    excluded_rev: dict[str, set[str]]  # candidate id -> query ids filtered out
    threshold: float = 0.85
    texts: dict[str, str] = field(default_factory=dict)

    @property
    def n_excluded_pairs(self) -> int:
        return sum(len(v) for v in self.excluded.values())

    def to_dict(self) -> dict:
        return {
            "queries": self.queries,
            "candidates": self.candidates,
            "gold": self.gold,
            "excluded": {k: sorted(v) for k, v in self.excluded.items() if v},
            "excluded_rev": {k: sorted(v) for k, v in self.excluded_rev.items() if v},
            "threshold": self.threshold,
            "texts": self.texts,
        }

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), ensure_ascii=False, indent=1), encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> "BitextTask":
        d = json.loads(Path(path).read_text(encoding="utf-8"))
        # empty exclusion sets are elided on disk; restore one per id
        excluded = {q: set() for q in d["queries"]}
        excluded.update({k: set(v) for k, v in d.get("excluded", {}).items()})
        excluded_rev = {c: set() for c in d["candidates"]}
        excluded_rev.update({k: set(v) for k, v in d.get("excluded_rev", {}).items()})
        return cls(
            queries=d["queries"],
            candidates=d["candidates"],
            gold=d["gold"],
            excluded=excluded,
            excluded_rev=excluded_rev,
            threshold=d.get("threshold", 0.85),
            texts=d.get("texts", {}),
        )


def build_bitext_task(
    pairs: Sequence,
    threshold: float = 0.85,
    casefold: bool = False,
) -> BitextTask:
    """Turn aligned sentence pairs into a bitext-mining task with exclusions.

    ``pairs`` are objects (or dicts) carrying source/target texts; ids are
    derived as ``{article_id}:{index}`` when available, else positional. A
    non-gold query/candidate pair whose texts have Levenshtein similarity
    strictly above ``threshold`` is excluded in both directions.
    """
    src_texts: list[str] = []
    tgt_texts: list[str] = []
    qids: list[str] = []
    cids: list[str] = []
    seen = set()
    for i, p in enumerate(pairs):
        if isinstance(p, dict):
            src = p.get("lb") or p.get("source_text") or p.get("src")
            tgt = p.get("tgt") or p.get("target_text")
            aid, idx = p.get("article_id"), p.get("index")
        else:
            src, tgt = p.source_text, p.target_text
            aid, idx = p.article_id, p.index
        if src is None or tgt is None:
            raise EvalError(f"pair {i}: missing source or target text")
        base = f"{aid}:{idx}" if aid is not None and idx is not None else str(i)
        if base in seen:
            raise EvalError(f"duplicate gold mapping for pair id {base!r}")
        seen.add(base)
        qids.append(f"src:{base}")
        cids.append(f"tgt:{base}")
        src_texts.append(src)
        tgt_texts.append(tgt)

    gold = dict(zip(qids, cids))
    excluded: dict[str, set[str]] = {q: set() for q in qids}
    excluded_rev: dict[str, set[str]] = {c: set() for c in cids}
    stripped_src = [_strip_non_alnum(s).casefold() if casefold else _strip_non_alnum(s) for s in src_texts]
    stripped_tgt = [_strip_non_alnum(s).casefold() if casefold else _strip_non_alnum(s) for s in tgt_texts]
    n = len(qids)
    for i in range(n):
        for j in range(n):
            if i == j:
                continue  # gold pairs never excluded
            # cheap upper bound from the length gap before running the DP
            la, lb = len(stripped_src[i]), len(stripped_tgt[j])
            m = max(la, lb)
            if m > 0 and 1.0 - abs(la - lb) / m <= threshold:
                continue
            if _similar_above(stripped_src[i], stripped_tgt[j], threshold):
                excluded[qids[i]].add(cids[j])
                excluded_rev[cids[j]].add(qids[i])

    texts = {q: t for q, t in zip(qids, src_texts)}
    texts.update({c: t for c, t in zip(cids, tgt_texts)})
    return BitextTask(
        queries=qids,
        candidates=cids,
        gold=gold,
        excluded=excluded,
        excluded_rev=excluded_rev,
        threshold=threshold,
        texts=texts,
    )


@dataclass(frozen=True)
class EvalReport:
    acc_src_to_tgt: float
    acc_tgt_to_src: float
    n_queries: int
    n_excluded_pairs: int
    config: dict = field(default_factory=dict)

    @property
    def acc_avg(self) -> float:
        return (self.acc_src_to_tgt + self.acc_tgt_to_src) / 2.0

    def to_dict(self) -> dict:
        return {
            "acc_src_to_tgt": self.acc_src_to_tgt,
            "acc_tgt_to_src": self.acc_tgt_to_src,
            "acc_avg": self.acc_avg,
            "n_queries": self.n_queries,
            "n_excluded_pairs": self.n_excluded_pairs,
            "config": self.config,
        }


def _directional_accuracy(
    query_ids: list[str],
    cand_ids: list[str],
    gold: dict[str, str],
    excluded: dict[str, set[str]],
    Q: np.ndarray,
    C: np.ndarray,
) -> float:
    """Fraction of queries whose gold candidate strictly outranks all others."""
    qn = Q / np.linalg.norm(Q, axis=1, keepdims=True)
    cn = C / np.linalg.norm(C, axis=1, keepdims=True)
    sims = qn @ cn.T
    col = {cid: j for j, cid in enumerate(cand_ids)}
    hits = 0
    for i, qid in enumerate(query_ids):
        row = sims[i].copy()
        g = col[gold[qid]]
        gold_sim = row[g]
        row[g] = -np.inf
        for cid in excluded.get(qid, ()):
            row[col[cid]] = -np.inf
        rest = row.max() if row.size else -np.inf
        if gold_sim > rest:
            hits += 1
    return hits / len(query_ids) if query_ids else 0.0


def bitext_accuracy(
    task: BitextTask,
    emb_src: EmbeddingMatrix,
    emb_tgt: EmbeddingMatrix,
) -> EvalReport:
    """Bidirectional bitext-mining accuracy under the task's exclusions.

    A hit requires the gold candidate's cosine similarity to be strictly
    greater than every other non-excluded candidate's; ties count as misses.
    """
    if emb_src.dim != emb_tgt.dim:
        raise EvalError(f"embedding dims differ: {emb_src.dim} vs {emb_tgt.dim}")
    for qid in task.queries:
        if qid not in emb_src.index:
            raise EvalError(f"missing embedding for query {qid!r}")
    for cid in task.candidates:
        if cid not in emb_tgt.index:
            raise EvalError(f"missing embedding for candidate {cid!r}")

    Q = np.stack([emb_src.row(q) for q in task.queries]).astype(np.float64)
    C = np.stack([emb_tgt.row(c) for c in task.candidates]).astype(np.float64)

    fwd = _directional_accuracy(task.queries, task.candidates, task.gold, task.excluded, Q, C)
    gold_rev = {c: q for q, c in task.gold.items()}
    rev = _directional_accuracy(task.candidates, task.queries, gold_rev, task.excluded_rev, C, Q)
    return EvalReport(
        acc_src_to_tgt=fwd,
        acc_tgt_to_src=rev,
        n_queries=len(task.queries),
        n_excluded_pairs=task.n_excluded_pairs,
        config={"threshold": task.threshold, "tie_rule": "miss"},
    )


@dataclass(frozen=True)
class Triplet:
    anchor: str
    positive: str
    negative: str

    def __post_init__(self):
        if not (self.anchor and self.positive and self.negative):
            raise EvalError("triplet texts must be nonempty")
        if self.negative == self.positive:
            raise EvalError("triplet negative must differ from positive")


def triplet_accuracy(triplets: Iterable[Triplet], emb: Callable[[str], np.ndarray]) -> float:
    """Fraction of triplets where the anchor is strictly closer to the positive."""
    total = 0
    hits = 0
    for t in triplets:
        a, p, n = emb(t.anchor), emb(t.positive), emb(t.negative)
        if cosine(a, p) > cosine(a, n):
            hits += 1
        total += 1
    return hits / total if total else 0.0


def zero_shot_classify(
    texts: Sequence[str],
    labels: Sequence[str],
    template: str,
    emb: Callable[[str], np.ndarray],
    gold: Sequence[str] | None = None,
) -> tuple[list[str], float | None]:
    """Assign each text the label whose rendered template embeds most similarly.

    Each label goes through ``template`` (one ``{label}`` placeholder) and is
    embedded once; ties resolve to the smallest label index. Returns the
    predictions and, when gold labels are given, the accuracy.
    """
    if not labels:
        raise EvalError("labels must be nonempty")
    if template.count("{label}") != 1:
        raise EvalError("template must contain exactly one {label} placeholder")
    label_vecs = [emb(template.format(label=lab)) for lab in labels]
    L = np.stack(label_vecs).astype(np.float64)
    Ln = L / np.linalg.norm(L, axis=1, keepdims=True)
    preds: list[str] = []
    for text in texts:
        v = np.asarray(emb(text), dtype=np.float64)
        sims = Ln @ (v / np.linalg.norm(v))
        preds.append(labels[int(np.argmax(sims))])  # argmax takes the first max
    accuracy = None
    if gold is not None:
        if len(gold) != len(texts):
            raise EvalError("gold labels must align with texts")
        accuracy = sum(p == g for p, g in zip(preds, gold)) / len(texts) if texts else 0.0
    return preds, accuracy
