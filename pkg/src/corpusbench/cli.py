"""Command-line surface: corpus chunking, dataset generation, indexing,
retrieval-augmented asking, metric scoring, evaluation runs, ranking, and the
grading service."""

from __future__ import annotations

import csv
import json
import sys
from pathlib import Path

import click

from . import config as config_mod
from . import corpus as corpus_mod
from . import datagen as datagen_mod
from . import evaluation as eval_mod
from . import metrics as metrics_mod
from . import ranking as ranking_mod
from .providers import EmbeddingEndpoint, get_chat_client, get_embedder, get_reranker
from .rag import RerankSpec, RetrievalConfig, VectorStore, answer_with_rag, build_index

LAYER_ALIASES = {"mcq": "mcq", "textsim": "text_sim", "text_sim": "text_sim",
                 "judge": "judge", "human": "human"}


def _resolve_embedder(name: str, config: dict | None, granularity: str = "sequence"):
    """Embedder by roster name, or directly from a mock:// URL."""
    if name.startswith("mock://"):
        return get_embedder(EmbeddingEndpoint(name="cli", base_url=name, granularity=granularity))
    if config is None:
        raise click.UsageError(f"embedder {name!r} needs --config with an embedders roster")
    return get_embedder(config_mod.get_embedder_endpoint(config, name))


@click.group()
def main():
    """Benchmark chat endpoints against a markdown corpus."""


# ---------------------------------------------------------------------------
# corpus


@main.group()
def corpus():
    """Corpus ingestion and chunking."""


@corpus.command("chunk")
@click.option("--manifest", "manifest_path", required=True, type=click.Path(exists=True))
@click.option("--strategy", type=click.Choice(["recursive", "markdown_header"]), default="recursive")
@click.option("--size", default=1024, show_default=True)
@click.option("--overlap", default=100, show_default=True)
@click.option("--out", "out_path", required=True, type=click.Path())
def corpus_chunk(manifest_path, strategy, size, overlap, out_path):
    """Clean every manifest document and write the chunk store."""
    docs = corpus_mod.load_corpus(manifest_path)
    chunks = []
    for doc in docs:
        chunks.extend(corpus_mod.chunk_document(
            doc, strategy=corpus_mod.ChunkStrategy(strategy), size=size, overlap=overlap,
        ))
    corpus_mod.write_chunk_store(chunks, out_path)
    click.echo(f"wrote {len(chunks)} chunks from {len(docs)} documents to {out_path}")


# ---------------------------------------------------------------------------
# datagen


@main.group()
def datagen():
    """Synthetic dataset generation and profiling."""


def _generate_datasets(kind, manifest_path, config_path, generator_name, seed, out_path,
                       chapters_out, threshold, max_per_chapter):
    cfg = config_mod.load_config(config_path)
    endpoint = config_mod.get_endpoint(cfg, generator_name)
    client = get_chat_client(endpoint)
    docs = corpus_mod.load_corpus(manifest_path)
    essential = {d.id for d in docs if d.essential}

    all_chapters = []
    items = []
    for doc in docs:
        for chapter in corpus_mod.split_chapters(doc):
            all_chapters.append(chapter)
            if kind == "qa":
                items.extend(datagen_mod.generate_qa(
                    chapter, client, faithfulness_threshold=threshold,
                    max_items_per_chapter=max_per_chapter, special=doc.special,
                ))
            else:
                items.extend(datagen_mod.generate_mcq(
                    chapter, client, max_items_per_chapter=max_per_chapter, special=doc.special,
                ))
    items = datagen_mod.dedup(items)
    items = datagen_mod.split_dataset(items, seed=seed, essential_docs=essential)

    if kind == "qa":
        datagen_mod.write_qa_dataset(items, out_path)
    else:
        datagen_mod.write_mcq_dataset(items, out_path)
    if chapters_out:
        datagen_mod.write_chapter_store(all_chapters, chapters_out)
    click.echo(f"wrote {len(items)} {kind} items to {out_path}")


@datagen.command("qa")
@click.option("--corpus", "manifest_path", required=True, type=click.Path(exists=True))
@click.option("--config", "config_path", required=True, type=click.Path(exists=True))
@click.option("--generator", "generator_name", required=True)
@click.option("--seed", default=0, show_default=True)
@click.option("--out", "out_path", required=True, type=click.Path())
@click.option("--chapters-out", type=click.Path(), default=None,
              help="Also write the chapter store (needed by the judge layer).")
@click.option("--faithfulness-threshold", "threshold", default=0.5, show_default=True)
@click.option("--max-per-chapter", default=None, type=int)
def datagen_qa(manifest_path, config_path, generator_name, seed, out_path, chapters_out,
               threshold, max_per_chapter):
    """Generate free-text Q&A pairs from a corpus."""
    _generate_datasets("qa", manifest_path, config_path, generator_name, seed, out_path,
                       chapters_out, threshold, max_per_chapter)


@datagen.command("mcq")
@click.option("--corpus", "manifest_path", required=True, type=click.Path(exists=True))
@click.option("--config", "config_path", required=True, type=click.Path(exists=True))
@click.option("--generator", "generator_name", required=True)
@click.option("--seed", default=0, show_default=True)
@click.option("--out", "out_path", required=True, type=click.Path())
@click.option("--chapters-out", type=click.Path(), default=None)
@click.option("--max-per-chapter", default=None, type=int)
def datagen_mcq(manifest_path, config_path, generator_name, seed, out_path, chapters_out,
                max_per_chapter):
    """Generate 4-option multiple-choice items from a corpus."""
    _generate_datasets("mcq", manifest_path, config_path, generator_name, seed, out_path,
                       chapters_out, 0.0, max_per_chapter)


@datagen.command("profile")
@click.option("--in", "in_path", required=True, type=click.Path(exists=True))
@click.option("--kind", type=click.Choice(["qa", "mcq"]), default="qa", show_default=True)
def datagen_profile(in_path, kind):
    """Readability and split profile of a dataset file."""
    items = (datagen_mod.read_qa_dataset(in_path) if kind == "qa"
             else datagen_mod.read_mcq_dataset(in_path))
    profile = datagen_mod.profile_dataset(items)
    click.echo(json.dumps({
        "n_items": profile.n_items,
        "mean_flesch": round(profile.mean_flesch, 2),
        "split_counts": profile.split_counts,
    }, sort_keys=True))


# ---------------------------------------------------------------------------
# rag


@main.group()
def rag():
    """Vector index building and retrieval-augmented asking."""


@rag.command("index")
@click.option("--chunks", "chunks_path", required=True, type=click.Path(exists=True))
@click.option("--embedding", "embedding_name", required=True)
@click.option("--config", "config_path", type=click.Path(exists=True), default=None)
@click.option("--out", "out_path", required=True, type=click.Path())
def rag_index(chunks_path, embedding_name, config_path, out_path):
    """Embed a chunk store into a persisted exact-cosine index."""
    cfg = config_mod.load_config(config_path) if config_path else None
    embedder = _resolve_embedder(embedding_name, cfg)
    chunks = corpus_mod.read_chunk_store(chunks_path)
    store = build_index(chunks, embedder)
    store.save(out_path)
    click.echo(f"indexed {len(store)} chunks (dim {store.dimension}) into {out_path}")


@rag.command("ask")
@click.option("--index", "index_path", required=True, type=click.Path(exists=True))
@click.option("--config", "config_path", required=True, type=click.Path(exists=True))
@click.option("--endpoint", "endpoint_name", required=True)
@click.option("--question", required=True)
@click.option("--top-k", default=20, show_default=True)
@click.option("--rerank-keep", default=5, show_default=True,
              help="0 disables reranking.")
@click.option("--rerank-provider", default="lexical", show_default=True)
def rag_ask(index_path, config_path, endpoint_name, question, top_k, rerank_keep, rerank_provider):
    """Answer one question with retrieval augmentation."""
    cfg = config_mod.load_config(config_path)
    store = VectorStore.load(index_path)
    embedder = _resolve_embedder(store.embedding_name, cfg)
    endpoint = config_mod.get_endpoint(cfg, endpoint_name)
    retrieval = RetrievalConfig(
        name="cli", embedding=store.embedding_name, top_k=top_k,
        rerank=RerankSpec(provider=rerank_provider, keep=rerank_keep) if rerank_keep else None,
    )
    result = answer_with_rag(get_chat_client(endpoint), store, retrieval, question, embedder,
                             reranker=get_reranker(rerank_provider) if rerank_keep else None)
    click.echo(json.dumps({
        "answer": result.text,
        "retrieved": [{"chunk_id": c.chunk_id, "doc_id": c.doc_id, "score": c.score}
                      for c in result.retrieved.chunks],
    }, ensure_ascii=False, sort_keys=True))


# ---------------------------------------------------------------------------
# metrics


@main.command("metrics")
@click.argument("action", type=click.Choice(["score"]))
@click.option("--pred", "pred_path", required=True, type=click.Path(exists=True))
@click.option("--ref", "ref_path", required=True, type=click.Path(exists=True))
@click.option("--embedder", "embedder_name", default=None,
              help="Token-granularity embedder for BERTScore (roster name or mock:// URL).")
@click.option("--config", "config_path", type=click.Path(exists=True), default=None)
@click.option("--csv-out", type=click.Path(), default=None)
def metrics_cmd(action, pred_path, ref_path, embedder_name, config_path, csv_out):
    """Score predictions against references, one text per line."""
    preds = Path(pred_path).read_text(encoding="utf-8").splitlines()
    refs = Path(ref_path).read_text(encoding="utf-8").splitlines()
    if len(preds) != len(refs):
        raise click.UsageError(f"{len(preds)} predictions vs {len(refs)} references")
    cfg = config_mod.load_config(config_path) if config_path else None
    embedder = (_resolve_embedder(embedder_name, cfg, granularity="token")
                if embedder_name else None)
    reports = [metrics_mod.similarity_report(p, r, embedder) for p, r in zip(preds, refs)]
    means = metrics_mod.mean_report(reports)
    width = max(len(k) for k in means)
    for key in sorted(means):
        click.echo(f"{key.ljust(width)}  {means[key]:.4f}")
    if csv_out:
        with Path(csv_out).open("w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["metric", "value"])
            for key in sorted(means):
                writer.writerow([key, means[key]])
        click.echo(f"wrote {csv_out}")


# ---------------------------------------------------------------------------
# eval


@main.group("eval")
def eval_group():
    """Run evaluation layers against configured systems."""


def _write_layer_records(records, out_dir: Path, layer: str, subset: str, cfg: dict,
                         dataset_path: str, seed: int):
    out_dir.mkdir(parents=True, exist_ok=True)
    out_path = out_dir / f"{layer}_{subset}.jsonl"
    eval_mod.write_records(records, out_path)
    eval_mod.write_run_manifest(
        out_dir / "manifest.json",
        config=cfg,
        dataset_paths={"dataset": dataset_path},
        endpoint_roster=[e["name"] for e in cfg.get("endpoints", [])],
        seed=seed,
    )
    click.echo(f"wrote {len(records)} records to {out_path}")


@eval_group.command("mcq")
@click.option("--systems", "config_path", required=True, type=click.Path(exists=True))
@click.option("--dataset", "dataset_path", required=True, type=click.Path(exists=True))
@click.option("--subset", type=click.Choice(["full", "special", "checked", "test"]), default="full")
@click.option("--seed", default=0, show_default=True)
@click.option("--out", "out_dir", required=True, type=click.Path())
def eval_mcq(config_path, dataset_path, subset, seed, out_dir):
    """Multiple-choice accuracy with shuffled options."""
    cfg = config_mod.load_config(config_path)
    systems = config_mod.build_systems(cfg, base_dir=Path(config_path).parent)
    items = eval_mod.filter_subset(datagen_mod.read_mcq_dataset(dataset_path), subset)
    records = []
    for system in systems:
        records.extend(eval_mod.run_mcq(system, items, seed=seed))
    _write_layer_records(records, Path(out_dir), "mcq", subset, cfg, dataset_path, seed)


@eval_group.command("textsim")
@click.option("--systems", "config_path", required=True, type=click.Path(exists=True))
@click.option("--dataset", "dataset_path", required=True, type=click.Path(exists=True))
@click.option("--subset", type=click.Choice(["full", "special", "checked", "test"]), default="test")
@click.option("--embedder", "embedder_name", default=None)
@click.option("--seed", default=0, show_default=True)
@click.option("--out", "out_dir", required=True, type=click.Path())
def eval_textsim(config_path, dataset_path, subset, embedder_name, seed, out_dir):
    """Surface/semantic similarity of free-text answers.

    Subsets intersect with the test split; text similarity never sees
    training or validation answers."""
    cfg = config_mod.load_config(config_path)
    systems = config_mod.build_systems(cfg, base_dir=Path(config_path).parent)
    items = [item for item in
             eval_mod.filter_subset(datagen_mod.read_qa_dataset(dataset_path), subset)
             if item.split == "test"]
    embedder = (_resolve_embedder(embedder_name, cfg, granularity="token")
                if embedder_name else None)
    records = []
    for system in systems:
        records.extend(eval_mod.run_text_sim(system, items, embedder))
    _write_layer_records(records, Path(out_dir), "text_sim", subset, cfg, dataset_path, seed)


@eval_group.command("judge")
@click.option("--systems", "config_path", required=True, type=click.Path(exists=True))
@click.option("--dataset", "dataset_path", required=True, type=click.Path(exists=True))
@click.option("--chapters", "chapters_path", required=True, type=click.Path(exists=True))
@click.option("--judge", "judge_name", required=True)
@click.option("--subset", type=click.Choice(["full", "special", "checked", "test"]), default="test")
@click.option("--seed", default=0, show_default=True)
@click.option("--out", "out_dir", required=True, type=click.Path())
def eval_judge(config_path, dataset_path, chapters_path, judge_name, subset, seed, out_dir):
    """Judge-endpoint verdicts with source context."""
    cfg = config_mod.load_config(config_path)
    systems = config_mod.build_systems(cfg, base_dir=Path(config_path).parent)
    items = eval_mod.filter_subset(datagen_mod.read_qa_dataset(dataset_path), subset)
    chapters = datagen_mod.read_chapter_store(chapters_path)
    judge_endpoint = config_mod.get_endpoint(cfg, judge_name)
    judge_client = get_chat_client(judge_endpoint)
    records = []
    for system in systems:
        records.extend(eval_mod.run_judge(system, items, judge_client, chapters))
    _write_layer_records(records, Path(out_dir), "judge", subset, cfg, dataset_path, seed)


@eval_group.command("ingest-human")
@click.option("--csv", "csv_path", required=True, type=click.Path(exists=True))
@click.option("--out", "out_dir", required=True, type=click.Path())
@click.option("--records", "records_path", type=click.Path(exists=True), default=None,
              help="Existing records file to validate (system, item) pairs against.")
def eval_ingest_human(csv_path, out_dir, records_path):
    """Convert a grading CSV export into human-layer records."""
    known = None
    if records_path:
        known = {(r.system, r.item_id) for r in eval_mod.read_records(records_path)}
    records = eval_mod.ingest_human_labels(csv_path, known_items=known)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    out_path = out / "human_curated.jsonl"
    eval_mod.write_records(records, out_path)
    click.echo(f"wrote {len(records)} records to {out_path}")


# ---------------------------------------------------------------------------
# rank


@main.command("rank")
@click.option("--records", "records_dir", required=True, type=click.Path(exists=True))
@click.option("--layers", default="mcq,textsim,judge,human", show_default=True)
@click.option("--n-iter", default=1000, show_default=True)
@click.option("--seed", default=0, show_default=True)
@click.option("--out", "out_dir", type=click.Path(), default=None)
def rank_cmd(records_dir, layers, n_iter, seed, out_dir):
    """Bootstrap leaderboards per result file plus the median-rank aggregate."""
    wanted = {LAYER_ALIASES[x.strip()] for x in layers.split(",") if x.strip()}
    records_dir = Path(records_dir)
    out = Path(out_dir) if out_dir else records_dir
    out.mkdir(parents=True, exist_ok=True)

    category_ranks: dict[str, dict[str, list[float]]] = {}
    boards = []
    for path in sorted(records_dir.glob("*.jsonl")):
        records = eval_mod.read_records(path)
        if not records:
            continue
        layer = records[0].layer
        if layer not in wanted:
            continue
        vectors = eval_mod.score_vectors(records, layer)
        if len(vectors) < 2:
            click.echo(f"skipping {path.name}: fewer than 2 systems")
            continue
        board = ranking_mod.rank_with_ties(vectors, n_iter=n_iter, seed=seed)
        boards.append((path.stem, board))
        for entry in board.entries:
            category_ranks.setdefault(entry["system"], {}).setdefault(layer, []).append(entry["rank"])

        board_path = out / f"{path.stem}_leaderboard.csv"
        with board_path.open("w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["rank", "system", "mean_score"])
            for entry in board.entries:
                writer.writerow([entry["rank"], entry["system"], entry["mean_score"]])
        click.echo(f"== {path.stem} ==")
        for entry in board.entries:
            click.echo(f"  {entry['rank']:>2}  {entry['system']:<28} {entry['mean_score']:.4f}")

    if not category_ranks:
        click.echo("no rankable record files found")
        sys.exit(1)

    rows = ranking_mod.median_rank(category_ranks)
    categories = list(rows[0]["categories"])
    agg_path = out / "median_ranks.csv"
    with agg_path.open("w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["system", *categories, "median_rank"])
        for row in rows:
            writer.writerow([row["system"], *[row["categories"][c] for c in categories],
                             row["median_rank"]])
    click.echo("== median ranks ==")
    for row in rows:
        cats = "  ".join(f"{c}={row['categories'][c]:g}" for c in categories)
        click.echo(f"  {row['median_rank']:<4g} {row['system']:<28} {cats}")


# ---------------------------------------------------------------------------
# serve


@main.command("serve")
@click.option("--port", default=8000, show_default=True)
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--data-dir", required=True, type=click.Path())
@click.option("--records", "records_path", type=click.Path(exists=True), default=None)
@click.option("--token", default=None, help="Shared auth token (open when unset).")
def serve_cmd(port, host, data_dir, records_path, token):
    """Run the blinded grading service."""
    import uvicorn

    from .grading_api import create_app

    app = create_app(data_dir, records_path=records_path, auth_token=token)
    uvicorn.run(app, host=host, port=port)


if __name__ == "__main__":
    main()
