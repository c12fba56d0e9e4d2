#!/usr/bin/env python3
"""Translate a corpus through an LLM endpoint, resumably, with fidelity checks.

The bundled mock server speaks the OpenAI chat-completions protocol and
echoes each sentence back with a language tag, so the whole pipeline runs
offline. Point LLMClient at a real endpoint to do this for real.
"""

import tempfile
from pathlib import Path

from histkit.corpus import Article
from histkit.mockllm import MockLLMServer
from histkit.translate import LLMClient, TranslateConfig, translate_corpus

articles = [
    Article(
        id=f"art{i}",
        newspaper="wort",
        year=1900 + i,
        language="lb",
        sentences=(
            f"Den Zuch nummer {i} ass ukomm.",
            f"D'Leit hunn {i} Stonnen gewaart.",
            f"De Wieder war schlecht den Dag {i}.",
        ),
    )
    for i in range(5)
]

out_dir = Path(tempfile.mkdtemp(prefix="histkit_demo_"))
with MockLLMServer() as server:
    client = LLMClient(server.url, api_key="demo")
    cfg = TranslateConfig(out_dir=out_dir, retries=2, concurrency=3)

    summary = translate_corpus(articles, ["de", "fr"], client, cfg)
    print(f"requests made: {summary.requests_made}")
    print(f"pairs per language: {summary.pair_counts}")
    for lang, rep in summary.fidelity.items():
        print(f"fidelity[{lang}]: {rep.total} sentences, mismatch rate {rep.mismatch_rate:.3f}")

    # each (article, language) result lives in its own part file; deleting one
    # and re-running re-requests exactly that group and nothing else
    (out_dir / "parts" / "de" / "art2.jsonl").unlink()
    before = server.n_chat_requests
    translate_corpus(articles, ["de", "fr"], client, cfg)
    print(f"resume re-requested {server.n_chat_requests - before} group(s)")

print("assembled pair files:", sorted(p.name for p in out_dir.glob("lb_*.jsonl")))
