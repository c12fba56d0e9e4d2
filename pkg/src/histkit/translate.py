"""LLM-driven segmentation and translation of historical articles.

Each article is sent whole (sentences joined by single spaces) to a
chat-completion endpoint with a per-language system prompt; the model returns
sentence-aligned JSON. Regenerated source sentences are checked against the
original article text, and per-language outputs are aligned into 4-way
parallel quadruplets where segmentation agrees.
"""

from __future__ import annotations

import json
import os
import re
import time
from concurrent.futures import ThreadPoolExecutor, as_completed
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence
from urllib.parse import quote

import requests

from .corpus import Article
from .jsonl import read_jsonl, write_jsonl

SUPPORTED_LANGS = {"de": "German", "fr": "French", "en": "English"}

_PROMPT_TEMPLATE = """You are a professional translator specializing in the translation of historical Luxembourgish newspaper articles into modern Standard {language}.

Your task is to translate paragraphs from such newspapers, provided to you by the user. These paragraphs may contain old spellings, outdated expressions, and likely a lot of OCR errors, as they are extracted from 19th-century LB newspapers. Please translate each sentence individually into modern Standard {language}. Prioritize retaining the original meaning, expressions, and any nuanced tone in each translation, even if the result sounds somewhat unconventional or even bad in {language}. If an expression is ambiguous due to its historical nature or OCR errors, attempt to reconstruct the most probable meaning based on linguistic context. Ensure that all punctuation and whitespace is preserved exactly. Do not add any extra formatting such as backticks, markdown, or additional symbols.

Please return the source sentences and your translations in the following format as JSON:
{{"translation": [
{{"lb": "lb_sent1", "{code}": "{code}_sent1"}},
{{"lb": "lb_sent2", "{code}": "{code}_sent2"}},
{{"lb": "lb_sent3", "{code}": "{code}_sent3"}}, ...]}}"""


class TranslateError(RuntimeError):
    pass


class TranslationParseError(ValueError):
    """Response body did not match the instructed JSON format."""

    def __init__(self, message: str, item: int | None = None):
        super().__init__(message)
        self.item = item


@dataclass(frozen=True)
class SentencePair:
    source_text: str
    target_text: str
    target_lang: str
    article_id: str
    index: int

    def __post_init__(self):
        if not self.source_text or not self.target_text:
            raise TranslationParseError("sentence pair texts must be nonempty")
        if self.index < 0:
            raise ValueError("index must be >= 0")

    def to_dict(self) -> dict:
        return {
            "article_id": self.article_id,
            "index": self.index,
            "lb": self.source_text,
            "tgt": self.target_text,
            "lang": self.target_lang,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SentencePair":
        return cls(
            source_text=d["lb"],
            target_text=d["tgt"],
            target_lang=d["lang"],
            article_id=d["article_id"],
            index=d["index"],
        )


@dataclass
class FidelityReport:
    total: int
    mismatched: list[tuple[str, int, str, str]]  # (article_id, index, regenerated, original)

    @property
    def mismatch_rate(self) -> float:
        return len(self.mismatched) / self.total if self.total else 0.0

    @classmethod
    def merged(cls, reports: Iterable["FidelityReport"]) -> "FidelityReport":
        total = 0
        mismatched: list[tuple[str, int, str, str]] = []
        for r in reports:
            total += r.total
            mismatched.extend(r.mismatched)
        return cls(total=total, mismatched=mismatched)

    def to_dict(self) -> dict:
        return {
            "total": self.total,
            "mismatch_rate": self.mismatch_rate,
            "mismatched": [
                {"article_id": a, "index": i, "regenerated": r, "original": o}
                for a, i, r, o in self.mismatched
            ],
        }


@dataclass(frozen=True)
class Quadruplet:
    source_text: str
    de: str
    fr: str
    en: str
    article_id: str

    def to_dict(self) -> dict:
        return {
            "lb": self.source_text,
            "de": self.de,
            "fr": self.fr,
            "en": self.en,
            "article_id": self.article_id,
        }


def build_prompt(target_lang: str) -> str:
    """Render the system prompt for one target language."""
    if target_lang not in SUPPORTED_LANGS:
        raise TranslateError(f"unsupported target language {target_lang!r} (expected one of de, fr, en)")
    return _PROMPT_TEMPLATE.format(language=SUPPORTED_LANGS[target_lang], code=target_lang)


_FENCE_RE = re.compile(r"^\s*```[a-zA-Z0-9_-]*\s*\n?(.*?)\n?\s*```\s*$", re.DOTALL)


def _strip_code_fences(body: str) -> str:
    m = _FENCE_RE.match(body)
    return m.group(1) if m else body


def parse_translation_response(body: str, target_lang: str, article_id: str = "") -> list[SentencePair]:
    """Parse the model's {"translation": [{"lb": ..., "<lang>": ...}, ...]} JSON.

    Surrounding code fences are stripped first. Item-level problems (missing
    or extra keys, empty strings) raise TranslationParseError carrying the
    item index.
    """
    if target_lang not in SUPPORTED_LANGS:
        raise TranslateError(f"unsupported target language {target_lang!r}")
    try:
        obj = json.loads(_strip_code_fences(body))
    except json.JSONDecodeError as exc:
        raise TranslationParseError(f"response is not valid JSON: {exc.msg}") from exc
    if not isinstance(obj, dict) or "translation" not in obj:
        raise TranslationParseError('response must be an object with a "translation" key')
    items = obj["translation"]
    if not isinstance(items, list):
        raise TranslationParseError('"translation" must hold an array')
    pairs: list[SentencePair] = []
    expected = {"lb", target_lang}
    for i, item in enumerate(items):
        if not isinstance(item, dict):
            raise TranslationParseError(f"item {i}: expected an object", item=i)
        keys = set(item)
        if keys != expected:
            missing = expected - keys
            extra = keys - expected
            detail = []
            if missing:
                detail.append(f"missing {sorted(missing)}")
            if extra:
                detail.append(f"unknown {sorted(extra)}")
            raise TranslationParseError(f"item {i}: {', '.join(detail)}", item=i)
        lb, tgt = item["lb"], item[target_lang]
        if not isinstance(lb, str) or not isinstance(tgt, str) or not lb or not tgt:
            raise TranslationParseError(f"item {i}: texts must be nonempty strings", item=i)
        pairs.append(
            SentencePair(source_text=lb, target_text=tgt, target_lang=target_lang, article_id=article_id, index=i)
        )
    return pairs


class LLMClient:
    """Minimal OpenAI-compatible chat-completions client."""

    def __init__(
        self,
        base_url: str,
        api_key: str = "",
        model: str = "gpt-4o",
        temperature: float = 0.0,
        timeout: float = 120.0,
        session: requests.Session | None = None,
    ):
        self.base_url = base_url.rstrip("/")
        self.api_key = api_key
        self.model = model
        self.temperature = temperature
        self.timeout = timeout
        self.session = session or requests.Session()

    @classmethod
    def from_env(cls, **kwargs) -> "LLMClient":
        url = os.environ.get("HISTKIT_LLM_URL")
        if not url:
            raise TranslateError("HISTKIT_LLM_URL is not set")
        return cls(base_url=url, api_key=os.environ.get("HISTKIT_LLM_KEY", ""), **kwargs)

    def complete(self, system: str, user: str) -> str:
        """One chat completion; returns the assistant message content."""
        headers = {"Content-Type": "application/json"}
        if self.api_key:
            headers["Authorization"] = f"Bearer {self.api_key}"
        payload = {
            "model": self.model,
            "temperature": self.temperature,
            "response_format": {"type": "json_object"},
            "messages": [
                {"role": "system", "content": system},
                {"role": "user", "content": user},
            ],
        }
        resp = self.session.post(
            f"{self.base_url}/chat/completions", json=payload, headers=headers, timeout=self.timeout
        )
        if resp.status_code // 100 != 2:
            raise TranslateError(f"chat endpoint returned HTTP {resp.status_code}")
        try:
            return resp.json()["choices"][0]["message"]["content"]
        except (KeyError, IndexError, ValueError) as exc:
            raise TranslateError(f"malformed chat completion response: {exc}") from exc


def request_translation(
    article: Article,
    target_lang: str,
    client: LLMClient,
    retries: int = 3,
    backoff_base: float = 0.5,
) -> str:
    """Request one article's translation; returns the first parseable raw body.

    Retries up to `retries` additional times on transport errors or bodies
    that fail to parse, with exponential backoff.
    """
    system = build_prompt(target_lang)
    user = article.text
    last: Exception | None = None
    for attempt in range(retries + 1):
        try:
            body = client.complete(system, user)
            parse_translation_response(body, target_lang, article_id=article.id)
            return body
        except (TranslateError, TranslationParseError, requests.RequestException) as exc:
            last = exc
            if attempt < retries:
                time.sleep(backoff_base * (2.0**attempt))
    raise TranslateError(
        f"translation of article {article.id!r} to {target_lang} failed after {retries + 1} attempts: {last}"
    ) from last


_WS_RE = re.compile(r"\s+")


def _collapse_ws(s: str) -> str:
    return _WS_RE.sub(" ", s).strip()


def validate_fidelity(pairs: Sequence[SentencePair], article: Article) -> FidelityReport:
    """Check regenerated source sentences against the original article.

    A sentence matches iff it occurs as a contiguous substring of the article
    text after collapsing whitespace runs in both.
    """
    original = _collapse_ws(article.text)
    mismatched = []
    for p in pairs:
        if p.article_id != article.id:
            raise TranslateError(f"pair for article {p.article_id!r} checked against {article.id!r}")
        if _collapse_ws(p.source_text) not in original:
            mismatched.append((p.article_id, p.index, p.source_text, article.text))
    return FidelityReport(total=len(pairs), mismatched=mismatched)


def align_quadruplets(
    pairs_de: Sequence[SentencePair],
    pairs_fr: Sequence[SentencePair],
    pairs_en: Sequence[SentencePair],
) -> tuple[list[Quadruplet], float]:
    """Group pairs by (article_id, exact source text) into 4-way alignments.

    A quadruplet needs exactly one pair from each language for the same
    character-identical source sentence. The rate divides quadruplets by the
    number of distinct source sentences seen across the three runs.
    """
    groups: dict[tuple[str, str], dict[str, list[str]]] = {}
    for lang, pairs in (("de", pairs_de), ("fr", pairs_fr), ("en", pairs_en)):
        for p in pairs:
            groups.setdefault((p.article_id, p.source_text), {}).setdefault(lang, []).append(p.target_text)

    quads: list[Quadruplet] = []
    for (article_id, source_text), by_lang in groups.items():
        if all(len(by_lang.get(lang, ())) == 1 for lang in ("de", "fr", "en")):
            quads.append(
                Quadruplet(
                    source_text=source_text,
                    de=by_lang["de"][0],
                    fr=by_lang["fr"][0],
                    en=by_lang["en"][0],
                    article_id=article_id,
                )
            )
    rate = len(quads) / len(groups) if groups else 0.0
    return quads, rate


@dataclass
class TranslateConfig:
    out_dir: str | Path
    retries: int = 3
    concurrency: int = 4
    backoff_base: float = 0.5
    corrections_path: str | Path | None = None


@dataclass
class TranslateSummary:
    requests_made: int
    pair_counts: dict[str, int]
    corrections_applied: int
    fidelity: dict[str, FidelityReport]
    failures: list[dict]
    flagged_empty: list[dict]


def _part_path(out_dir: Path, lang: str, article_id: str) -> Path:
    return out_dir / "parts" / lang / f"{quote(article_id, safe='')}.jsonl"


def _load_corrections(path: str | Path | None) -> dict[tuple[str, int, str | None], str]:
    """corrections.jsonl records: {"article_id", "index", "source_text", "lang"?}."""
    if path is None or not Path(path).exists():
        return {}
    table: dict[tuple[str, int, str | None], str] = {}
    for rec in read_jsonl(path):
        table[(rec["article_id"], rec["index"], rec.get("lang"))] = rec["source_text"]
    return table


def translate_corpus(
    articles: Sequence[Article],
    langs: Sequence[str],
    client: LLMClient,
    cfg: TranslateConfig,
) -> TranslateSummary:
    """Translate every article into every language, resumably.

    Each (article, lang) result lives in its own part file under
    parts/<lang>/; completed parts are skipped on rerun, so deleting one
    group re-requests exactly that group. Per-article failures are recorded
    in failures.jsonl and never abort the batch. Assembled per-language pair
    files (lb_<lang>.jsonl) and fidelity reports are rebuilt from the parts
    on every run, applying any corrections file.
    """
    for lang in langs:
        if lang not in SUPPORTED_LANGS:
            raise TranslateError(f"unsupported target language {lang!r}")
    out_dir = Path(cfg.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    by_id = {a.id: a for a in articles}

    jobs = [(a, lang) for lang in langs for a in articles if not _part_path(out_dir, lang, a.id).exists()]
    requests_made = 0
    failures: list[dict] = []
    flagged: list[dict] = []

    def run_job(article: Article, lang: str):
        body = request_translation(article, lang, client, retries=cfg.retries, backoff_base=cfg.backoff_base)
        return parse_translation_response(body, lang, article_id=article.id)

    if jobs:
        with ThreadPoolExecutor(max_workers=max(1, cfg.concurrency)) as pool:
            futures = {pool.submit(run_job, a, lang): (a, lang) for a, lang in jobs}
            for fut in as_completed(futures):
                article, lang = futures[fut]
                requests_made += 1
                try:
                    pairs = fut.result()
                except Exception as exc:
                    failures.append({"article_id": article.id, "lang": lang, "error": str(exc)})
                    continue
                if not pairs:
                    flagged.append({"article_id": article.id, "lang": lang, "reason": "empty translation"})
                part = _part_path(out_dir, lang, article.id)
                write_jsonl(part, (p.to_dict() for p in pairs))

    if failures:
        write_jsonl(out_dir / "failures.jsonl", failures)
    if flagged:
        write_jsonl(out_dir / "flagged.jsonl", flagged)

    corrections = _load_corrections(cfg.corrections_path)
    corrections_applied = 0
    pair_counts: dict[str, int] = {}
    fidelity: dict[str, FidelityReport] = {}
    for lang in langs:
        assembled: list[SentencePair] = []
        reports: list[FidelityReport] = []
        for article in articles:
            part = _part_path(out_dir, lang, article.id)
            if not part.exists():
                continue
            pairs = [SentencePair.from_dict(rec) for rec in read_jsonl(part)]
            reports.append(validate_fidelity(pairs, article))
            for p in pairs:
                fix = corrections.get((p.article_id, p.index, lang))
                if fix is None:
                    fix = corrections.get((p.article_id, p.index, None))
                if fix is not None:
                    p = SentencePair(
                        source_text=fix,
                        target_text=p.target_text,
                        target_lang=p.target_lang,
                        article_id=p.article_id,
                        index=p.index,
                    )
                    corrections_applied += 1
                assembled.append(p)
        write_jsonl(out_dir / f"lb_{lang}.jsonl", (p.to_dict() for p in assembled))
        pair_counts[lang] = len(assembled)
        rep = FidelityReport.merged(reports)
        fidelity[lang] = rep
        (out_dir / f"fidelity_{lang}.json").write_text(
            json.dumps(rep.to_dict(), ensure_ascii=False, indent=1), encoding="utf-8"
        )

    return TranslateSummary(
        requests_made=requests_made,
        pair_counts=pair_counts,
        corrections_applied=corrections_applied,
        fidelity=fidelity,
        failures=failures,
        flagged_empty=flagged,
    )
