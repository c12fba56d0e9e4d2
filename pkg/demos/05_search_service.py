#!/usr/bin/env python3
"""Build a persistent cross-lingual search index and query it.

The index stores one embedding matrix and payload list per language side,
plus an optional adapter applied to a side at build time. The same
directory feeds the HTTP service:  histkit serve --index <dir>
"""

import tempfile
from pathlib import Path

import numpy as np

from histkit.embedstore import StubProvider, embed_texts, knn
from histkit.index import Payload, build_index, load_index, save_index

provider = StubProvider(dim=32)

sentences = {
    "lb": [
        "Den Haff vun der Stad ass grouss.",
        "D'Wahle fanne muer statt.",
        "De Wanter war dest Joer laang.",
    ],
    "de": [
        "Der Hafen der Stadt ist gross.",
        "Die Wahlen finden morgen statt.",
        "Der Winter war dieses Jahr lang.",
    ],
}

sides = {}
for lang, texts in sentences.items():
    ids = [f"{lang}:art1:{i}" for i in range(len(texts))]
    emb = embed_texts(provider, texts, ids=ids)
    payloads = [
        Payload(id=ids[i], text=texts[i], article_id="art1", newspaper="wort", year=1925, lang=lang)
        for i in range(len(texts))
    ]
    sides[lang] = (payloads, emb)

index = build_index("demo", sides)
print(f"built index '{index.name}': {index.sentence_count} sentences, pairs {index.language_pairs()}")

# persistence: save, reload, verify the reload is bit-identical
out = Path(tempfile.mkdtemp(prefix="histkit_index_")) / "demo_index"
save_index(index, out)
reloaded = load_index(out)
assert reloaded.sides["de"][0].data.tobytes() == index.sides["de"][0].data.tobytes()
print(f"saved and reloaded from {out}")

# query: embed the text, rank a language side by cosine similarity
query = "Wahlen morgen"
qvec = np.asarray(provider.embed_batch([query])[0], dtype=np.float64)
emb_de = reloaded.sides["de"][0]
payload_by_id = {p.id: p for p in reloaded.sides["de"][1]}
print(f"query: {query!r} against side 'de'")
for sid, score in knn(qvec, emb_de, k=3):
    print(f"  {score:+.3f}  {sid}  {payload_by_id[sid].text}")

print("serve it:  histkit serve --index", out, "--provider stub --dim 32")
