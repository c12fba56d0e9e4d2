"""Shared fixtures: synthetic article corpora and the mock LLM server."""

from __future__ import annotations

import numpy as np
import pytest

from histkit.corpus import Article
from histkit.jsonl import write_jsonl
from histkit.mockllm import MockLLMServer


def make_articles(
    n: int = 30,
    sentences_per: int = 6,
    dim: int = 8,
    n_blobs: int = 3,
    seed: int = 0,
) -> list[Article]:
    """Articles in well-separated topic blobs; sentences end with periods so
    sentence splitting on punctuation reproduces them exactly."""
    rng = np.random.default_rng(seed)
    centers = np.zeros((n_blobs, dim))
    for b in range(n_blobs):
        centers[b, b % dim] = 10.0  # one dominant topic per blob
    articles = []
    for i in range(n):
        blob = i % n_blobs
        vec = centers[blob] + np.abs(rng.normal(scale=0.1, size=dim))
        sentences = tuple(
            f"Article {i} sentence {j} talks about topic {blob}." for j in range(sentences_per)
        )
        articles.append(
            Article(
                id=f"a{i:03d}",
                newspaper=f"paper{blob}",
                year=1850 + (i % 40),
                language="lb",
                sentences=sentences,
                topic_vector=tuple(float(x) for x in vec),
            )
        )
    return articles


def write_articles(path, articles) -> None:
    write_jsonl(path, (a.to_dict() for a in articles))


@pytest.fixture
def mock_llm():
    with MockLLMServer() as server:
        yield server


def pytest_terminal_summary(terminalreporter):
    """One PASS/FAIL line per acceptance criterion, printed after capture ends."""
    import sys

    mod = sys.modules.get("test_acceptance")
    results = getattr(mod, "RESULTS", None) if mod else None
    if results:
        terminalreporter.section("acceptance criteria")
        for status, label in results:
            terminalreporter.write_line(f"{status}  {label}")
