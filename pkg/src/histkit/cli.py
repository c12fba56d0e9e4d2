"""Command-line entry points for the corpus/eval/adapter/search pipeline.

Subcommands compose into the full workflow:

    histkit select     pick representative articles by topic clustering
    histkit translate  request translations for selected articles
    histkit build-task turn aligned pairs into a mining task with exclusions
    histkit embed      embed sentences into an .hxem matrix file
    histkit train      fit a linear adapter over frozen embeddings
    histkit evaluate   bitext / triplet / zeroshot protocols
    histkit index      build a persisted search index from pairs + embeddings
    histkit serve      run the HTTP search service
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .adapt import AdapterModel, TrainConfig, distill_bidirectional
from .adapt import train as train_adapter
from .corpus import SelectionConfig, kmeans_cluster, load_articles, save_articles, select_articles
from .embedstore import (
    EmbeddingMatrix,
    FileProvider,
    RemoteProvider,
    StubProvider,
    embed_texts,
    load as load_emb,
    save as save_emb,
)
from .evalsuite import (
    BitextTask,
    Triplet,
    bitext_accuracy,
    build_bitext_task,
    triplet_accuracy,
    zero_shot_classify,
)
from .jsonl import read_jsonl
from .translate import LLMClient, TranslateConfig, translate_corpus


def _make_provider(args) -> object:
    name = args.provider
    if name == "stub":
        return StubProvider(dim=getattr(args, "dim", 64) or 64)
    if name == "file":
        if not getattr(args, "vectors", None):
            raise ValueError("--vectors is required with --provider file")
        return FileProvider(args.vectors, model_name=args.model or "file")
    if name == "remote":
        base_url = getattr(args, "base_url", None) or os.environ.get("HISTKIT_LLM_URL")
        if not base_url:
            raise ValueError("--base-url or HISTKIT_LLM_URL is required with --provider remote")
        if not args.model:
            raise ValueError("--model is required with --provider remote")
        api_key = getattr(args, "api_key", None) or os.environ.get("HISTKIT_LLM_KEY", "")
        return RemoteProvider(base_url, args.model, api_key=api_key)
    raise ValueError(f"unknown provider {name!r}")


def _pair_rows(path: str, side: str) -> tuple[list[str], list[str]]:
    """Ids and texts for one side of a pair file, or generic id/text records."""
    ids: list[str] = []
    texts: list[str] = []
    for rec in read_jsonl(path):
        if "text" in rec and "id" in rec:
            ids.append(str(rec["id"]))
            texts.append(rec["text"])
            continue
        if "lb" not in rec or "tgt" not in rec:
            raise ValueError(f"{path}: records need id/text or article_id/index/lb/tgt fields")
        base = f"{rec['article_id']}:{rec['index']}"
        ids.append(f"{side}:{base}")
        texts.append(rec["lb"] if side == "src" else rec["tgt"])
    return ids, texts


def _strip_prefix(emb: EmbeddingMatrix, prefix: str) -> EmbeddingMatrix:
    """Drop a uniform 'src:'/'tgt:' id prefix so both sides share pair ids."""
    if emb.ids and all(i.startswith(prefix) for i in emb.ids):
        return EmbeddingMatrix(
            dim=emb.dim,
            ids=[i[len(prefix):] for i in emb.ids],
            data=emb.data,
            normalized=emb.normalized,
        )
    return emb


def cmd_select(args) -> int:
    articles = load_articles(args.infile)
    missing = [a.id for a in articles if a.topic_vector is None]
    if missing:
        raise ValueError(
            f"{len(missing)} articles lack topic_vector (first: {missing[0]!r}); "
            "clustering needs one per article"
        )
    vectors = np.asarray([a.topic_vector for a in articles], dtype=np.float64)
    _, assignments = kmeans_cluster(vectors, k=args.k, seed=args.seed, ids=[a.id for a in articles])
    cfg = SelectionConfig(
        k=args.k,
        min_cluster_size=args.min_cluster_size,
        min_sentences=args.min_sent,
        max_sentences=args.max_sent,
        extra_samples_per_cluster=args.extra,
        seed=args.seed,
    )
    selected = select_articles(articles, assignments, cfg)
    n = save_articles(args.out, selected)
    print(f"selected {n} of {len(articles)} articles -> {args.out}")
    return 0


def cmd_translate(args) -> int:
    articles = load_articles(args.infile)
    langs = [s.strip() for s in args.langs.split(",") if s.strip()]
    if not langs:
        raise ValueError("--langs must name at least one language code")
    kwargs = {"model": args.model} if args.model else {}
    if args.base_url is None:
        client = LLMClient.from_env(**kwargs)
    else:
        client = LLMClient(
            base_url=args.base_url,
            api_key=args.api_key or os.environ.get("HISTKIT_LLM_KEY", ""),
            **kwargs,
        )
    cfg = TranslateConfig(
        out_dir=args.out,
        retries=args.retries,
        concurrency=args.concurrency,
        corrections_path=args.corrections,
    )
    summary = translate_corpus(articles, langs, client, cfg)
    for lang in langs:
        fid = summary.fidelity.get(lang)
        rate = f"{fid.mismatch_rate:.4f}" if fid else "n/a"
        print(f"{lang}: {summary.pair_counts.get(lang, 0)} pairs, mismatch rate {rate}")
    if summary.failures:
        print(f"{len(summary.failures)} article/language jobs failed; see failures.jsonl", file=sys.stderr)
        return 1
    return 0


def cmd_build_task(args) -> int:
    pairs = list(read_jsonl(args.pairs))
    task = build_bitext_task(pairs, threshold=args.threshold, casefold=args.casefold)
    Path(args.out).parent.mkdir(parents=True, exist_ok=True)
    task.save(args.out)
    print(
        f"task: {len(task.queries)} pairs, {task.n_excluded_pairs} excluded near-duplicate "
        f"pairs at threshold {task.threshold} -> {args.out}"
    )
    return 0


def cmd_embed(args) -> int:
    provider = _make_provider(args)
    ids, texts = _pair_rows(args.infile, args.side)
    emb = embed_texts(provider, texts, batch_size=args.batch_size, ids=ids)
    if args.normalize:
        from .embedstore import normalize_rows

        emb = normalize_rows(emb)
    Path(args.out).parent.mkdir(parents=True, exist_ok=True)
    save_emb(emb, args.out)
    print(f"embedded {emb.n} texts (dim {emb.dim}) -> {args.out}")
    return 0


def cmd_train(args) -> int:
    base = _strip_prefix(load_emb(args.base_emb), "src:")
    tgt = _strip_prefix(load_emb(args.tgt_emb), "tgt:")
    hist_ids = _pool_ids(args.hist) if args.hist else None
    modern_ids = _pool_ids(args.modern) if args.modern else None
    cfg = TrainConfig(
        objective=args.objective,
        strategy=args.strategy,
        batch_size=args.batch_size,
        epochs=args.epochs,
        learning_rate=args.lr,
        scale=args.scale,
        seed=args.seed,
        symmetric=args.symmetric,
        distill_both_sides=not args.single_side,
        oversample_to_balance=args.oversample,
    )
    if args.objective == "distill" and args.student_tgt_emb:
        student_tgt = _strip_prefix(load_emb(args.student_tgt_emb), "tgt:")
        model, history = distill_bidirectional(
            base, student_tgt, tgt, cfg, hist_ids=hist_ids, modern_ids=modern_ids
        )
    else:
        model, history = train_adapter(base, tgt, cfg, hist_ids=hist_ids, modern_ids=modern_ids)
    model.save(args.out)
    first = history[0] if history else float("nan")
    last = history[-1] if history else float("nan")
    print(f"trained {args.objective}/{args.strategy}: {len(history)} steps, loss {first:.6f} -> {last:.6f}")
    print(f"adapter (dim {model.dim}) -> {args.out}")
    return 0


def _pool_ids(path: str) -> list[str]:
    ids = []
    for rec in read_jsonl(path):
        if "article_id" in rec and "index" in rec:
            ids.append(f"{rec['article_id']}:{rec['index']}")
        elif "id" in rec:
            ids.append(str(rec["id"]))
        else:
            raise ValueError(f"{path}: pool records need article_id/index or id")
    return ids


def _write_report(report: dict, out: str | None) -> None:
    text = json.dumps(report, indent=2, sort_keys=True)
    if out:
        Path(out).parent.mkdir(parents=True, exist_ok=True)
        Path(out).write_text(text + "\n", encoding="utf-8")
        print(f"report -> {out}")
    else:
        print(text)


def cmd_eval_bitext(args) -> int:
    task = BitextTask.load(args.task)
    emb_src = load_emb(args.src_emb)
    emb_tgt = load_emb(args.tgt_emb)
    adapter = AdapterModel.load(args.adapter) if args.adapter else None
    if adapter is not None:
        from .adapt import apply_adapter

        emb_src = EmbeddingMatrix(
            dim=emb_src.dim,
            ids=list(emb_src.ids),
            data=apply_adapter(adapter, emb_src.data.astype(np.float64)).astype(np.float32),
        )
        if args.adapt_both:
            emb_tgt = EmbeddingMatrix(
                dim=emb_tgt.dim,
                ids=list(emb_tgt.ids),
                data=apply_adapter(adapter, emb_tgt.data.astype(np.float64)).astype(np.float32),
            )
    report = bitext_accuracy(task, emb_src, emb_tgt)
    out = report.to_dict()
    out["config"]["adapter"] = adapter is not None
    out["config"]["adapt_both"] = bool(adapter is not None and args.adapt_both)
    print(
        f"bitext accuracy: src->tgt {report.acc_src_to_tgt:.4f}, "
        f"tgt->src {report.acc_tgt_to_src:.4f}, avg {report.acc_avg:.4f}"
    )
    _write_report(out, args.out)
    return 0


def cmd_eval_triplet(args) -> int:
    provider = _make_provider(args)
    triplets = [
        Triplet(anchor=r["anchor"], positive=r["positive"], negative=r["negative"])
        for r in read_jsonl(args.infile)
    ]
    cache: dict[str, np.ndarray] = {}

    def emb(text: str) -> np.ndarray:
        if text not in cache:
            cache[text] = provider.embed_batch([text])[0]
        return cache[text]

    acc = triplet_accuracy(triplets, emb)
    _write_report({"accuracy": acc, "n_triplets": len(triplets)}, args.out)
    return 0


def cmd_eval_zeroshot(args) -> int:
    provider = _make_provider(args)
    labels = [s.strip() for s in args.labels.split(",") if s.strip()]
    records = list(read_jsonl(args.infile))
    texts = [r["text"] for r in records]
    gold = [r["label"] for r in records] if all("label" in r for r in records) else None

    def emb(text: str) -> np.ndarray:
        return provider.embed_batch([text])[0]

    preds, acc = zero_shot_classify(texts, labels, args.template, emb, gold=gold)
    report = {
        "accuracy": acc,
        "n_texts": len(texts),
        "predictions": preds if args.predictions else None,
        "config": {"labels": labels, "template": args.template, "tie_rule": "lowest-index"},
    }
    _write_report(report, args.out)
    return 0


def cmd_index(args) -> int:
    from .index import Payload, build_index, save_index

    articles = {a.id: a for a in load_articles(args.articles)}
    src_payloads: list[Payload] = []
    tgt_payloads: list[Payload] = []
    tgt_lang = None
    for rec in read_jsonl(args.pairs):
        art = articles.get(rec["article_id"])
        if art is None:
            raise ValueError(f"pair references unknown article {rec['article_id']!r}")
        base = f"{rec['article_id']}:{rec['index']}"
        tgt_lang = rec.get("lang", tgt_lang)
        src_payloads.append(
            Payload(
                id=f"src:{base}",
                text=rec["lb"],
                article_id=art.id,
                newspaper=art.newspaper,
                year=art.year,
                lang=art.language,
            )
        )
        tgt_payloads.append(
            Payload(
                id=f"tgt:{base}",
                text=rec["tgt"],
                article_id=art.id,
                newspaper=art.newspaper,
                year=art.year,
                lang=rec.get("lang", ""),
            )
        )
    if not src_payloads:
        raise ValueError("no pairs to index")
    emb_src = load_emb(args.src_emb)
    emb_tgt = load_emb(args.tgt_emb)
    adapter = AdapterModel.load(args.adapter) if args.adapter else None
    sides = {
        args.src_side: (src_payloads, emb_src),
        tgt_lang or "tgt": (tgt_payloads, emb_tgt),
    }
    idx = build_index(args.name, sides, adapter=adapter)
    save_index(idx, args.out)
    print(f"index {args.name!r}: {idx.sentence_count} sentences over sides {sorted(idx.sides)} -> {args.out}")
    return 0


def cmd_serve(args) -> int:
    from .server import serve

    provider = _make_provider(args)
    addr = args.addr or os.environ.get("HISTKIT_ADDR", "0.0.0.0:8080")
    serve(args.index, addr=addr, provider=provider)
    return 0


def _add_provider_args(p: argparse.ArgumentParser, default: str = "stub") -> None:
    p.add_argument("--provider", choices=("remote", "stub", "file"), default=default)
    p.add_argument("--model", default=None, help="model name for the remote provider")
    p.add_argument("--dim", type=int, default=64, help="vector size for the stub provider")
    p.add_argument("--vectors", default=None, help="precomputed-vector JSONL for the file provider")
    p.add_argument("--base-url", default=None, help="override HISTKIT_LLM_URL")
    p.add_argument("--api-key", default=None, help="override HISTKIT_LLM_KEY")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="histkit", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("select", help="cluster topic vectors and pick representative articles")
    p.add_argument("--in", dest="infile", required=True, help="article JSONL")
    p.add_argument("--k", type=int, default=2000, help="number of clusters")
    p.add_argument("--min-cluster-size", type=int, default=20)
    p.add_argument("--min-sent", type=int, default=5)
    p.add_argument("--max-sent", type=int, default=20)
    p.add_argument("--extra", type=int, default=3, help="random extra articles per cluster")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_select)

    p = sub.add_parser("translate", help="request translations for each article and language")
    p.add_argument("--in", dest="infile", required=True, help="selected-article JSONL")
    p.add_argument("--langs", required=True, help="comma-separated target codes, e.g. de,fr,en")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--retries", type=int, default=3)
    p.add_argument("--concurrency", type=int, default=4)
    p.add_argument("--corrections", default=None, help="manual-correction JSONL applied on assembly")
    p.add_argument("--model", default=None)
    p.add_argument("--base-url", default=None, help="override HISTKIT_LLM_URL")
    p.add_argument("--api-key", default=None, help="override HISTKIT_LLM_KEY")
    p.set_defaults(func=cmd_translate)

    p = sub.add_parser("build-task", help="build a mining task with near-duplicate exclusions")
    p.add_argument("--pairs", required=True, help="sentence-pair JSONL")
    p.add_argument("--threshold", type=float, default=0.85)
    p.add_argument("--casefold", action="store_true", help="case-fold before the similarity filter")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_build_task)

    p = sub.add_parser("embed", help="embed sentences into an .hxem file")
    _add_provider_args(p)
    p.add_argument("--in", dest="infile", required=True, help="pair JSONL or id/text JSONL")
    p.add_argument("--side", choices=("src", "tgt"), default="src", help="which pair side to embed")
    p.add_argument("--batch-size", type=int, default=64)
    p.add_argument("--normalize", action="store_true", help="store unit-norm rows")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_embed)

    p = sub.add_parser("train", help="fit a linear adapter over frozen embeddings")
    p.add_argument("--objective", choices=("contrastive", "distill"), default="contrastive")
    p.add_argument("--strategy", choices=("hist", "modern", "mixed"), default="hist")
    p.add_argument("--hist", default=None, help="historical pair JSONL (id pool)")
    p.add_argument("--modern", default=None, help="modern pair JSONL (id pool)")
    p.add_argument("--base-emb", required=True, help="source-side embeddings (.hxem)")
    p.add_argument("--tgt-emb", required=True, help="target/teacher embeddings (.hxem)")
    p.add_argument(
        "--student-tgt-emb",
        default=None,
        help="distill only: student embeddings of the target side for two-sided distillation",
    )
    p.add_argument("--batch-size", type=int, default=8)
    p.add_argument("--epochs", type=int, default=None, help="default 1 contrastive, 5 distill")
    p.add_argument("--lr", type=float, default=2e-5)
    p.add_argument("--scale", type=float, default=20.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--symmetric", action="store_true", help="contrastive: adapt both sides")
    p.add_argument("--single-side", action="store_true", help="distill: drop the target-side term")
    p.add_argument("--oversample", action="store_true", help="mixed: balance pools by resampling")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("evaluate", help="run an evaluation protocol")
    esub = p.add_subparsers(dest="protocol", required=True)

    e = esub.add_parser("bitext", help="bidirectional mining accuracy on a task file")
    e.add_argument("--task", required=True)
    e.add_argument("--src-emb", required=True)
    e.add_argument("--tgt-emb", required=True)
    e.add_argument("--adapter", default=None, help="apply an .hxad adapter to the source side")
    e.add_argument("--adapt-both", action="store_true", help="also adapt the target side")
    e.add_argument("--out", default=None)
    e.set_defaults(func=cmd_eval_bitext)

    e = esub.add_parser("triplet", help="anchor/positive/negative accuracy")
    _add_provider_args(e)
    e.add_argument("--in", dest="infile", required=True, help="triplet JSONL")
    e.add_argument("--out", default=None)
    e.set_defaults(func=cmd_eval_triplet)

    e = esub.add_parser("zeroshot", help="template-based label assignment")
    _add_provider_args(e)
    e.add_argument("--in", dest="infile", required=True, help="JSONL with text and optional label")
    e.add_argument("--labels", required=True, help="comma-separated label names")
    e.add_argument("--template", default="The topic of the news is {label}")
    e.add_argument("--predictions", action="store_true", help="include per-text predictions")
    e.add_argument("--out", default=None)
    e.set_defaults(func=cmd_eval_zeroshot)

    p = sub.add_parser("index", help="build a persisted search index")
    p.add_argument("--name", required=True)
    p.add_argument("--articles", required=True, help="article JSONL for payload metadata")
    p.add_argument("--pairs", required=True, help="sentence-pair JSONL")
    p.add_argument("--src-emb", required=True)
    p.add_argument("--tgt-emb", required=True)
    p.add_argument("--adapter", default=None)
    p.add_argument("--src-side", default="lb", help="name of the source-language side")
    p.add_argument("--out", required=True, help="index directory")
    p.set_defaults(func=cmd_index)

    p = sub.add_parser("serve", help="run the HTTP search service")
    p.add_argument("--index", required=True, help="index directory")
    p.add_argument("--addr", default=None, help="host:port (default HISTKIT_ADDR or 0.0.0.0:8080)")
    _add_provider_args(p)
    p.set_defaults(func=cmd_serve)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, RuntimeError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
