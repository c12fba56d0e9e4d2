import json

import numpy as np
import pytest

from histkit.adapt import AdapterModel
from histkit.embedstore import EmbeddingMatrix, StubProvider, embed_texts
from histkit.index import Payload, SearchIndex, SearchIndexError, build_index, load_index, save_index


def _side(n=4, lang="de", dim=8, adapterless_ids=None):
    texts = [f"{lang} sentence {i}." for i in range(n)]
    ids = adapterless_ids or [f"{lang}:{i}" for i in range(n)]
    emb = embed_texts(StubProvider(dim=dim), texts, ids=ids)
    payloads = [
        Payload(id=ids[i], text=texts[i], article_id=f"art{i // 2}", newspaper="p", year=1880 + i, lang=lang)
        for i in range(n)
    ]
    return payloads, emb


def test_build_index_and_metadata():
    sides = {"lb": _side(4, "lb"), "de": _side(6, "de")}
    idx = build_index("demo", sides)
    assert idx.sentence_count == 10
    assert idx.dim == 8
    assert idx.language_pairs() == ["de-lb"]
    assert idx.payload("de", "de:3").year == 1883
    with pytest.raises(KeyError):
        idx.payload("de", "missing")


def test_build_index_id_mismatch_lists_offenders():
    payloads, emb = _side(4, "lb")
    payloads = payloads[:2]  # two embeddings lack payloads
    with pytest.raises(SearchIndexError, match="2 id\\(s\\)"):
        build_index("broken", {"lb": (payloads, emb)})

    payloads, emb = _side(15, "lb")
    with pytest.raises(SearchIndexError, match="15 id\\(s\\)") as exc:
        build_index("broken", {"lb": ([], emb)})
    # only the first ten offenders are named
    listed = str(exc.value).split("[")[1]
    assert listed.count("lb:") == 10


def test_build_index_adapter_preapplied():
    payloads, emb = _side(3, "lb")
    adapter = AdapterModel(W=2.0 * np.eye(8), b=np.zeros(8))
    idx = build_index("adapted", {"lb": (payloads, emb)}, adapter=adapter)
    emb_adapted, _ = idx.sides["lb"]
    assert np.allclose(emb_adapted.data, emb.data * 2.0, atol=1e-6)
    assert idx.adapter is adapter


def test_build_index_adapter_dim_mismatch():
    payloads, emb = _side(3, "lb", dim=8)
    with pytest.raises(SearchIndexError, match="adapter dim"):
        build_index("bad", {"lb": (payloads, emb)}, adapter=AdapterModel.identity(4))


def test_save_load_round_trip(tmp_path):
    sides = {"lb": _side(4, "lb"), "de": _side(4, "de")}
    adapter = AdapterModel.identity(8)
    idx = build_index("rt", sides, adapter=adapter)
    out = tmp_path / "index"
    save_index(idx, out)

    loaded = load_index(out)
    assert loaded.name == "rt"
    assert set(loaded.sides) == {"lb", "de"}
    for lang in ("lb", "de"):
        emb0, pay0 = idx.sides[lang]
        emb1, pay1 = loaded.sides[lang]
        assert emb1.ids == emb0.ids
        assert emb1.data.tobytes() == emb0.data.tobytes()
        assert pay1 == pay0
    assert loaded.adapter is not None
    assert loaded.adapter.W.tobytes() == adapter.W.tobytes()


def test_save_index_atomic_replace(tmp_path):
    out = tmp_path / "index"
    idx1 = build_index("v1", {"lb": _side(2, "lb")})
    save_index(idx1, out)
    idx2 = build_index("v2", {"lb": _side(5, "lb")})
    save_index(idx2, out)
    loaded = load_index(out)
    assert loaded.name == "v2"
    assert loaded.sentence_count == 5
    # no temp dirs left behind
    assert [p.name for p in tmp_path.iterdir()] == ["index"]


def test_load_index_missing_or_corrupt_manifest(tmp_path):
    with pytest.raises(SearchIndexError, match="no manifest.json"):
        load_index(tmp_path / "nowhere")

    bad = tmp_path / "bad"
    bad.mkdir()
    (bad / "manifest.json").write_text("{not json", encoding="utf-8")
    with pytest.raises(SearchIndexError, match="corrupt manifest"):
        load_index(bad)

    (bad / "manifest.json").write_text('{"version": 99, "sides": {}}', encoding="utf-8")
    with pytest.raises(SearchIndexError, match="version"):
        load_index(bad)


def test_load_index_side_mismatch(tmp_path):
    idx = build_index("x", {"lb": _side(3, "lb")})
    out = tmp_path / "index"
    save_index(idx, out)
    # drop one payload line
    payload_file = out / "lb.payloads.jsonl"
    lines = payload_file.read_text(encoding="utf-8").strip().splitlines()
    payload_file.write_text("\n".join(lines[:-1]) + "\n", encoding="utf-8")
    with pytest.raises(SearchIndexError, match="do not match"):
        load_index(out)


def test_load_index_missing_blob(tmp_path):
    idx = build_index("x", {"lb": _side(3, "lb")})
    out = tmp_path / "index"
    save_index(idx, out)
    (out / "lb.hxem").unlink()
    with pytest.raises(SearchIndexError, match="side 'lb'"):
        load_index(out)
