#!/usr/bin/env python3
"""Score cross-lingual sentence retrieval on an aligned pair set.

From aligned (source, target) sentences we build a mining task: every
source queries all targets and must rank its own translation first, in
both directions. Non-gold pairs whose surface forms are nearly identical
(Levenshtein similarity above 0.85 after stripping non-alphanumerics)
are excluded so boilerplate cannot masquerade as semantic retrieval.
"""

import numpy as np

from histkit.embedstore import EmbeddingMatrix, StubProvider, embed_texts
from histkit.evalsuite import bitext_accuracy, build_bitext_task

pairs = [
    {"article_id": "a1", "index": 0, "lb": "De Maart ass haut op.", "tgt": "Der Markt ist heute offen."},
    {"article_id": "a1", "index": 1, "lb": "D'Press schreift iwwer d'Wahlen.", "tgt": "Die Presse schreibt ueber die Wahlen."},
    {"article_id": "a2", "index": 0, "lb": "Den Zuch kennt spéit un.", "tgt": "Der Zug kommt spaet an."},
    # the next target differs from the second pair's SOURCE only in punctuation;
    # close relatives share surface forms, so the task excludes the near-duplicate
    # in both directions rather than let string overlap pose as retrieval
    {"article_id": "a2", "index": 1, "lb": "Et reent de ganzen Dag.", "tgt": "D'Press, schreift iwwer d'Wahlen!"},
]

task = build_bitext_task(pairs, threshold=0.85)
print(f"task: {len(task.queries)} queries, {task.n_excluded_pairs} excluded near-duplicate pair(s)")

# hash-based stub embeddings stand in for a real encoder; identical text
# maps to an identical vector, so give the gold pairs shared geometry
provider = StubProvider(dim=32)
src = embed_texts(provider, [task.texts[q] for q in task.queries], ids=task.queries)
gold_rows = np.stack([src.row(q) for q in task.queries])
noise = np.random.default_rng(0).normal(scale=0.05, size=gold_rows.shape)
tgt = EmbeddingMatrix(dim=32, ids=task.candidates, data=(gold_rows + noise).astype(np.float32))

report = bitext_accuracy(task, src, tgt)
print(f"accuracy src->tgt: {report.acc_src_to_tgt:.2f}")
print(f"accuracy tgt->src: {report.acc_tgt_to_src:.2f}")
print(f"average: {report.acc_avg:.2f} over {report.n_queries} queries")
print("config echo:", report.config)
