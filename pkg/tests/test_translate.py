import json

import pytest

from histkit.corpus import Article
from histkit.jsonl import read_jsonl, write_jsonl
from histkit.mockllm import MockLLMServer, fake_translation, split_sentences
from histkit.translate import (
    FidelityReport,
    LLMClient,
    Quadruplet,
    SentencePair,
    TranslateConfig,
    TranslateError,
    TranslationParseError,
    align_quadruplets,
    build_prompt,
    parse_translation_response,
    request_translation,
    translate_corpus,
    validate_fidelity,
)

from conftest import make_articles


def _article(aid="a1", sentences=("Sentence one here.", "Sentence two here.")):
    return Article(id=aid, newspaper="p", year=1880, language="lb", sentences=tuple(sentences))


def _body(lang, sentences):
    return json.dumps({"translation": [{"lb": s, lang: f"[{lang}] {s}"} for s in sentences]})


def test_build_prompt_language_substitution():
    de = build_prompt("de")
    assert "modern Standard German" in de
    assert '"lb": "lb_sent1", "de": "de_sent1"' in de
    fr = build_prompt("fr")
    assert "French" in fr and '"fr": "fr_sent1"' in fr
    with pytest.raises(TranslateError, match="unsupported"):
        build_prompt("xx")


def test_parse_valid_response():
    pairs = parse_translation_response(_body("de", ["A.", "B."]), "de", article_id="art")
    assert len(pairs) == 2
    assert pairs[0].source_text == "A."
    assert pairs[0].target_text == "[de] A."
    assert pairs[0].target_lang == "de"
    assert pairs[0].article_id == "art"
    assert [p.index for p in pairs] == [0, 1]


def test_parse_strips_code_fences():
    fenced = "```json\n" + _body("fr", ["X."]) + "\n```"
    pairs = parse_translation_response(fenced, "fr")
    assert pairs[0].target_text == "[fr] X."


def test_parse_errors():
    with pytest.raises(TranslationParseError, match="not valid JSON"):
        parse_translation_response("nope", "de")
    with pytest.raises(TranslationParseError, match='"translation"'):
        parse_translation_response('{"other": []}', "de")
    with pytest.raises(TranslationParseError, match="array"):
        parse_translation_response('{"translation": "x"}', "de")
    with pytest.raises(TranslationParseError, match="item 0: missing \\['de'\\]"):
        parse_translation_response('{"translation": [{"lb": "a"}]}', "de")
    with pytest.raises(TranslationParseError, match="unknown \\['fr'\\]"):
        parse_translation_response('{"translation": [{"lb": "a", "de": "b", "fr": "c"}]}', "de")
    with pytest.raises(TranslationParseError, match="nonempty"):
        parse_translation_response('{"translation": [{"lb": "a", "de": ""}]}', "de")
    try:
        parse_translation_response('{"translation": [{"lb": "a", "de": "b"}, {"lb": "", "de": "x"}]}', "de")
    except TranslationParseError as exc:
        assert exc.item == 1


def test_sentence_pair_wire_format():
    p = SentencePair(source_text="s", target_text="t", target_lang="de", article_id="a", index=3)
    d = p.to_dict()
    assert d == {"article_id": "a", "index": 3, "lb": "s", "tgt": "t", "lang": "de"}
    assert SentencePair.from_dict(d) == p


def test_validate_fidelity_counts_and_whitespace():
    art = _article(sentences=("Once upon a time.", "There   was a\tnewspaper."))
    pairs = [
        SentencePair("Once upon a time.", "t", "de", "a1", 0),
        SentencePair("There was a newspaper.", "t", "de", "a1", 1),  # whitespace-collapsed match
        SentencePair("upon a time. There was", "t", "de", "a1", 2),  # spans the join; still a substring
    ]
    report = validate_fidelity(pairs, art)
    assert report.total == 3
    assert report.mismatched == []
    assert report.mismatch_rate == 0.0

    bad = [SentencePair("Entirely invented text.", "t", "de", "a1", 0)]
    report = validate_fidelity(bad, art)
    assert report.total == 1
    assert len(report.mismatched) == 1
    assert report.mismatched[0][:2] == ("a1", 0)


def test_validate_fidelity_wrong_article():
    art = _article()
    with pytest.raises(TranslateError, match="checked against"):
        validate_fidelity([SentencePair("x", "t", "de", "other", 0)], art)


def test_fidelity_report_merge_and_empty():
    empty = FidelityReport(total=0, mismatched=[])
    assert empty.mismatch_rate == 0.0
    merged = FidelityReport.merged(
        [FidelityReport(total=30, mismatched=[]), FidelityReport(total=20, mismatched=[("a", 1, "r", "o")])]
    )
    assert merged.total == 50
    assert merged.mismatch_rate == pytest.approx(1 / 50)


def _pairs_for(lang, sentences, aid="a1"):
    return [
        SentencePair(source_text=s, target_text=f"[{lang}] {s}", target_lang=lang, article_id=aid, index=i)
        for i, s in enumerate(sentences)
    ]


def test_align_quadruplets_rate():
    sents = ["S one.", "S two.", "S three."]
    pairs_de = _pairs_for("de", sents)
    pairs_fr = _pairs_for("fr", sents)
    pairs_en = _pairs_for("en", sents[:2])  # EN run dropped the third sentence
    quads, rate = align_quadruplets(pairs_de, pairs_fr, pairs_en)
    assert len(quads) == 2
    assert rate == pytest.approx(2 / 3)
    assert {q.source_text for q in quads} == {"S one.", "S two."}
    assert quads[0].de.startswith("[de]") and quads[0].en.startswith("[en]")


def test_align_quadruplets_duplicate_source_disqualifies():
    sents = ["Same sentence.", "Other sentence."]
    pairs_de = _pairs_for("de", sents) + [
        SentencePair("Same sentence.", "[de] again", "de", "a1", 9)
    ]
    quads, rate = align_quadruplets(pairs_de, _pairs_for("fr", sents), _pairs_for("en", sents))
    assert {q.source_text for q in quads} == {"Other sentence."}
    assert rate == pytest.approx(1 / 2)


def test_align_quadruplets_empty():
    quads, rate = align_quadruplets([], [], [])
    assert quads == [] and rate == 0.0


def test_llm_client_from_env(monkeypatch):
    monkeypatch.delenv("HISTKIT_LLM_URL", raising=False)
    with pytest.raises(TranslateError, match="HISTKIT_LLM_URL"):
        LLMClient.from_env()
    monkeypatch.setenv("HISTKIT_LLM_URL", "http://example.test/v1")
    monkeypatch.setenv("HISTKIT_LLM_KEY", "sekrit")
    client = LLMClient.from_env(model="m2")
    assert client.base_url == "http://example.test/v1"
    assert client.api_key == "sekrit"
    assert client.model == "m2"


def test_request_translation_against_mock(mock_llm):
    client = LLMClient(mock_llm.url, api_key="k")
    art = _article()
    body = request_translation(art, "de", client, retries=0)
    pairs = parse_translation_response(body, "de", article_id=art.id)
    assert [p.source_text for p in pairs] == list(art.sentences)
    assert pairs[0].target_text == fake_translation(art.sentences[0], "de")


@pytest.mark.parametrize("fail_mode", ["http", "garbage"])
def test_request_translation_retries(monkeypatch, fail_mode):
    monkeypatch.setattr("time.sleep", lambda s: None)
    with MockLLMServer(fail_first=2, fail_mode=fail_mode) as server:
        client = LLMClient(server.url)
        request_translation(_article(), "de", client, retries=3)
        assert server.n_chat_requests == 3

    with MockLLMServer(fail_first=5, fail_mode=fail_mode) as server:
        client = LLMClient(server.url)
        with pytest.raises(TranslateError, match="failed after 3 attempts"):
            request_translation(_article(), "de", client, retries=2)
        assert server.n_chat_requests == 3


def test_translate_corpus_outputs(tmp_path, mock_llm):
    articles = make_articles(n=3, sentences_per=4)
    client = LLMClient(mock_llm.url)
    cfg = TranslateConfig(out_dir=tmp_path / "out", retries=1, concurrency=2)
    summary = translate_corpus(articles, ["de", "fr"], client, cfg)

    assert summary.requests_made == 6
    assert summary.failures == []
    assert summary.pair_counts == {"de": 12, "fr": 12}
    for lang in ("de", "fr"):
        records = read_jsonl(tmp_path / "out" / f"lb_{lang}.jsonl")
        assert len(records) == 12
        assert all(r["lang"] == lang for r in records)
        fid = json.loads((tmp_path / "out" / f"fidelity_{lang}.json").read_text())
        assert fid["total"] == 12
        assert fid["mismatch_rate"] == 0.0
        assert summary.fidelity[lang].mismatch_rate == 0.0


def test_translate_corpus_resume_skips_done_parts(tmp_path):
    articles = make_articles(n=3, sentences_per=4)
    with MockLLMServer() as server:
        client = LLMClient(server.url)
        cfg = TranslateConfig(out_dir=tmp_path / "out", concurrency=1)
        translate_corpus(articles, ["de"], client, cfg)
        assert server.n_chat_requests == 3

        # nothing left to do: no new requests
        translate_corpus(articles, ["de"], client, cfg)
        assert server.n_chat_requests == 3

        # deleting one part re-requests exactly that article
        part = tmp_path / "out" / "parts" / "de" / f"{articles[1].id}.jsonl"
        assert part.exists()
        part.unlink()
        summary = translate_corpus(articles, ["de"], client, cfg)
        assert server.n_chat_requests == 4
        assert summary.pair_counts["de"] == 12


def test_translate_corpus_records_failures(tmp_path, monkeypatch):
    monkeypatch.setattr("time.sleep", lambda s: None)
    articles = make_articles(n=2, sentences_per=3)
    with MockLLMServer(fail_first=100) as server:
        client = LLMClient(server.url)
        cfg = TranslateConfig(out_dir=tmp_path / "out", retries=1, concurrency=1)
        summary = translate_corpus(articles, ["de"], client, cfg)
        assert len(summary.failures) == 2
        failures = read_jsonl(tmp_path / "out" / "failures.jsonl")
        assert {f["article_id"] for f in failures} == {a.id for a in articles}
        assert summary.pair_counts["de"] == 0


def test_translate_corpus_applies_corrections(tmp_path, mock_llm):
    articles = make_articles(n=1, sentences_per=3)
    client = LLMClient(mock_llm.url)
    out = tmp_path / "out"
    translate_corpus(articles, ["de"], client, TranslateConfig(out_dir=out))

    corrections = tmp_path / "corrections.jsonl"
    fixed_text = "Corrected source sentence."
    write_jsonl(
        corrections,
        [{"article_id": articles[0].id, "index": 1, "source_text": fixed_text, "lang": "de"}],
    )
    summary = translate_corpus(
        articles, ["de"], client, TranslateConfig(out_dir=out, corrections_path=corrections)
    )
    assert summary.corrections_applied == 1
    records = read_jsonl(out / "lb_de.jsonl")
    assert records[1]["lb"] == fixed_text
    # the regenerated text no longer matches the article: flagged by fidelity
    assert summary.fidelity["de"].mismatch_rate == 0.0  # fidelity checked pre-correction


def test_translate_corpus_unsupported_lang(tmp_path, mock_llm):
    client = LLMClient(mock_llm.url)
    with pytest.raises(TranslateError, match="unsupported"):
        translate_corpus(make_articles(n=1), ["zz"], client, TranslateConfig(out_dir=tmp_path))


def test_split_sentences_round_trip():
    art = make_articles(n=1, sentences_per=5)[0]
    assert split_sentences(art.text) == list(art.sentences)
