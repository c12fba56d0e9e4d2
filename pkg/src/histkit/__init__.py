"""histkit: cross-lingual semantic search over OCR-noisy historical news corpora.

The toolkit covers the full pipeline: selecting diverse historical articles by
topic clustering, driving an LLM to produce sentence-aligned translations,
building and scoring bitext-mining evaluation tasks, persisting embeddings,
adapting frozen embedding spaces with contrastive or distillation objectives,
and serving an interactive cross-lingual search index.
"""

__version__ = "0.1.0"

from .corpus import Article, ClusterAssignment, SelectionConfig, load_articles, kmeans_cluster, select_articles
from .embedstore import EmbeddingMatrix, StubProvider, embed_texts, normalize_rows, cosine, knn
from .evalsuite import (
    BitextTask,
    EvalReport,
    Triplet,
    levenshtein_distance,
    lev_similarity,
    build_bitext_task,
    bitext_accuracy,
    triplet_accuracy,
    zero_shot_classify,
)
from .adapt import AdapterModel, TrainConfig, apply_adapter, mnrl_loss, distill_loss, plan_batches, train, distill_bidirectional
from .translate import (
    SentencePair,
    FidelityReport,
    Quadruplet,
    build_prompt,
    parse_translation_response,
    validate_fidelity,
    align_quadruplets,
)
