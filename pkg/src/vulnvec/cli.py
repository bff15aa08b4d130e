"""Command-line driver for the offline pipeline and batch deployment.

Exit codes: 0 success, 2 usage error, 3 missing prerequisite, 4 data error.
Failures print one machine-parsable line: "error: <code>: <detail>".
"""

from __future__ import annotations

import csv
import io
import json
import sys
from pathlib import Path

import click
import numpy as np

from . import store as artifacts
from .classifier import (
    APP_LOGIC,
    CWE_LABELS,
    ClassifierConfig,
    bug_count_features,
    bug_count_to_bytes,
    dual_models_from_bytes,
    dual_models_to_bytes,
    fine_tune_with_feedback,
    train_bug_count,
    train_dual,
)
from .composite import aggregates_by_module, build_composite, read_aggregates, write_aggregates
from .contexts import Vocabulary, extract_file, read_corpus, write_corpus
from .embedding import (
    TrainConfig,
    export_code_vector,
    model_from_bytes,
    model_to_bytes,
    train_embeddings,
)
from .errors import FineTuneRegression, VulnvecError
from .feedback import apply_incremental_vote, write_overlays
from .pipeline import Toolchain, ToolchainConfig, read_vectors, write_vectors
from .ranker import FilterBounds, build_frequency_table, filter_contexts
from .similarity import distance
from .store import Store


def fail(exit_code: int, code: str, detail: str = "") -> None:
    click.echo(f"error: {code}" + (f": {detail}" if detail else ""), err=True)
    sys.exit(exit_code)


def need(store: Store, *names: str) -> None:
    missing = [n for n in names if not store.has(n)]
    if missing:
        fail(3, "missing_prerequisite", ", ".join(missing))


def open_store(ctx) -> Store:
    return Store.create(ctx.obj["store"])


@click.group()
@click.option("--store", default="store", show_default=True, help="Artifact store root.")
@click.option("--config", "config_path", default=None, help="JSON config file.")
@click.option("--seed", default=13, show_default=True, help="Seed for every random choice.")
@click.pass_context
def main(ctx, store, config_path, seed):
    """Code-vector vulnerability prediction toolchain."""
    ctx.ensure_object(dict)
    ctx.obj["store"] = store
    ctx.obj["seed"] = seed
    ctx.obj["config"] = ToolchainConfig.load(config_path)
    ctx.obj["config"].store_root = store


@main.command()
@click.option("--source", "source_dir", required=True, type=click.Path(exists=True))
@click.option("--max-path-length", default=8, show_default=True)
@click.option("--max-path-width", default=2, show_default=True)
@click.pass_context
def extract(ctx, source_dir, max_path_length, max_path_width):
    """Parse every C file under SOURCE and write corpus plus vocabularies."""
    store = open_store(ctx)
    token_vocab, path_vocab = Vocabulary(), Vocabulary()
    records = []
    files = sorted(Path(source_dir).rglob("*.c")) + sorted(Path(source_dir).rglob("*.h"))
    for path in files:
        module_id = path.name
        records.extend(
            extract_file(
                path.read_text(), module_id, token_vocab, path_vocab,
                max_path_length, max_path_width,
            )
        )
    if not records:
        fail(4, "empty_corpus", f"no functions found under {source_dir}")
    store.save_text(artifacts.CORPUS, write_corpus(records))
    store.save_text(artifacts.VOCAB_TOKENS, token_vocab.to_json())
    store.save_text(artifacts.VOCAB_PATHS, path_vocab.to_json())
    click.echo(f"extracted {len(records)} functions from {len(files)} files")


@main.command()
@click.option("--min-count", default=2, show_default=True)
@click.option("--max-count", default=10_000, show_default=True)
@click.pass_context
def rank(ctx, min_count, max_count):
    """Build the context frequency table and report filter survival."""
    store = open_store(ctx)
    need(store, artifacts.CORPUS)
    records = read_corpus(store.load_text(artifacts.CORPUS))
    table = build_frequency_table(records)
    store.save_text(artifacts.FREQ, table.to_jsonl())
    bounds = FilterBounds(min_count, max_count)
    kept = sum(
        1 for r in records if filter_contexts(r, table, bounds).contexts
    )
    click.echo(
        f"{len(table.counts)} distinct contexts; "
        f"{kept}/{len(records)} functions keep contexts at bounds "
        f"({min_count}, {max_count})"
    )


def _filtered_records(store: Store, bounds: FilterBounds):
    from .ranker import ContextFrequencyTable

    records = read_corpus(store.load_text(artifacts.CORPUS))
    table = ContextFrequencyTable.from_jsonl(store.load_text(artifacts.FREQ))
    out = []
    for record in records:
        filtered = filter_contexts(record, table, bounds)
        out.append(filtered if filtered.contexts else record)
    return records, out


@main.command("train-embeddings")
@click.option("--dim", default=128, show_default=True, help="Token, path and code dims.")
@click.option("--epochs", default=200, show_default=True)
@click.option("--lr", default=0.01, show_default=True)
@click.option("--momentum", default=0.0, show_default=True)
@click.option("--batch-size", default=8, show_default=True)
@click.option("--min-count", default=2, show_default=True)
@click.option("--max-count", default=10_000, show_default=True)
@click.option("--warm-start", is_flag=True, help="Initialize from the stored model.")
@click.pass_context
def train_embeddings_cmd(ctx, dim, epochs, lr, momentum, batch_size,
                         min_count, max_count, warm_start):
    """Train the attention embedding network on the filtered corpus."""
    store = open_store(ctx)
    need(store, artifacts.CORPUS, artifacts.FREQ, artifacts.VOCAB_TOKENS, artifacts.VOCAB_PATHS)
    token_vocab = Vocabulary.from_json(store.load_text(artifacts.VOCAB_TOKENS))
    path_vocab = Vocabulary.from_json(store.load_text(artifacts.VOCAB_PATHS))
    _, filtered = _filtered_records(store, FilterBounds(min_count, max_count))
    trainable = [r for r in filtered if r.contexts]
    if not trainable:
        fail(4, "empty_corpus", "no functions with surviving contexts")
    config = TrainConfig(
        dim_token=dim, dim_path=dim, dim_code=dim, learning_rate=lr,
        momentum=momentum, epochs=epochs, batch_size=batch_size,
        seed=ctx.obj["seed"],
    )
    if warm_start:
        need(store, artifacts.EMBEDDING_MODEL)
        from .feedback import warm_start_retrain

        base = model_from_bytes(store.load_artifact(artifacts.EMBEDDING_MODEL))
        result = warm_start_retrain(base, trainable, token_vocab, path_vocab, config)
    else:
        result = train_embeddings(trainable, token_vocab, path_vocab, config)
    store.save_artifact(artifacts.EMBEDDING_MODEL, model_to_bytes(result.model))
    store.set_model_version(result.model.version)
    if warm_start and store.has(artifacts.VECTORS):
        _export_vectors(store, FilterBounds(min_count, max_count))
        click.echo("re-exported vectors under the new model version")
    click.echo(
        f"trained {result.model.version}: loss {result.loss_log[0]:.4f} -> "
        f"{result.loss_log[-1]:.4f} over {epochs} epochs"
    )


def _export_vectors(store: Store, bounds: FilterBounds) -> int:
    model = model_from_bytes(store.load_artifact(artifacts.EMBEDDING_MODEL))
    _, filtered = _filtered_records(store, bounds)
    vectors = {r.id: export_code_vector(r, model) for r in filtered}
    store.save_text(artifacts.VECTORS, write_vectors(vectors))
    return len(vectors)


@main.command()
@click.option("--min-count", default=2, show_default=True)
@click.option("--max-count", default=10_000, show_default=True)
@click.option("--index-meta", "meta_path", default=None, type=click.Path(exists=True),
              help="Install function metadata (names, bug ids, fix ids) for the index.")
@click.pass_context
def vectors(ctx, min_count, max_count, meta_path):
    """Export a code vector for every corpus function."""
    store = open_store(ctx)
    need(store, artifacts.CORPUS, artifacts.FREQ, artifacts.EMBEDDING_MODEL)
    n = _export_vectors(store, FilterBounds(min_count, max_count))
    if meta_path:
        store.save_text(artifacts.INDEX_META, Path(meta_path).read_text())
    click.echo(f"exported {n} vectors")


@main.command()
@click.pass_context
def aggregates(ctx):
    """Build per-module aggregate vectors from the exported vectors."""
    store = open_store(ctx)
    need(store, artifacts.CORPUS, artifacts.VECTORS)
    records = read_corpus(store.load_text(artifacts.CORPUS))
    vectors_by_id = read_vectors(store.load_text(artifacts.VECTORS))
    module_of = {r.id: r.module_id for r in records}
    aggs = aggregates_by_module(vectors_by_id, module_of)
    store.save_text(artifacts.AGGREGATES, write_aggregates(aggs.values()))
    click.echo(f"aggregated {len(aggs)} modules")


def _labeled_matrices(store: Store, rows: list[dict], labels: tuple[str, ...]):
    records = read_corpus(store.load_text(artifacts.CORPUS))
    vectors_by_id = read_vectors(store.load_text(artifacts.VECTORS))
    aggs = read_aggregates(store.load_text(artifacts.AGGREGATES))
    module_of = {r.id: r.module_id for r in records}
    x_v, x_c, y, extras, ids = [], [], [], [], []
    for row in rows:
        fn_id = row["id"]
        if fn_id not in vectors_by_id:
            continue
        vec = vectors_by_id[fn_id]
        agg = aggs[module_of[fn_id]]
        x_v.append(vec.values)
        x_c.append(build_composite(vec, agg).values)
        y.append([1.0 if label in row.get("labels", []) else 0.0 for label in labels])
        extras.append(row)
        ids.append(fn_id)
    return np.array(x_v), np.array(x_c), np.array(y), extras, ids


@main.command("train-classifier")
@click.option("--labels", "labels_path", required=True, type=click.Path(exists=True))
@click.option("--epochs", default=200, show_default=True)
@click.option("--lr", default=0.1, show_default=True)
@click.option("--hidden1", default=128, show_default=True)
@click.option("--hidden2", default=64, show_default=True)
@click.pass_context
def train_classifier(ctx, labels_path, epochs, lr, hidden1, hidden2):
    """Train the dual nets and fusion on a labeled corpus; also fits the bug
    count ensemble when the label file carries bug_count fields."""
    store = open_store(ctx)
    need(store, artifacts.CORPUS, artifacts.VECTORS, artifacts.AGGREGATES)
    rows = [json.loads(line) for line in Path(labels_path).read_text().splitlines() if line.strip()]
    store.save_text(artifacts.LABELS, "".join(json.dumps(r) + "\n" for r in rows))
    x_v, x_c, y, extras, _ = _labeled_matrices(store, rows, CWE_LABELS)
    if len(x_v) == 0:
        fail(4, "empty_train_set", "no labeled functions matched exported vectors")
    config = ClassifierConfig(
        hidden1=hidden1, hidden2=hidden2, epochs=epochs, learning_rate=lr,
        seed=ctx.obj["seed"],
    )
    models = train_dual(x_v, x_c, y, config)
    store.save_artifact(
        artifacts.CLASSIFIER_MODEL, dual_models_to_bytes(models, store.model_version)
    )
    click.echo(f"trained dual classifier on {len(x_v)} functions")

    counted = [(i, r["bug_count"]) for i, r in enumerate(extras) if "bug_count" in r]
    if counted:
        features = np.array(
            [
                bug_count_features(
                    x_v[i], extras[i].get("sa_score"), extras[i].get("coverage"),
                    extras[i].get("hotspot"),
                )
                for i, _ in counted
            ]
        )
        counts = np.array([c for _, c in counted], dtype=float)
        bug_model = train_bug_count(features, counts, config)
        store.save_artifact(artifacts.BUGCOUNT_MODEL, bug_count_to_bytes(bug_model))
        click.echo(f"trained bug-count ensemble on {len(counts)} functions")


@main.command("fine-tune")
@click.option("--validated", "validated_path", required=True, type=click.Path(exists=True))
@click.option("--epochs", default=100, show_default=True)
@click.option("--lr", default=0.05, show_default=True)
@click.pass_context
def fine_tune(ctx, validated_path, epochs, lr):
    """Widen the classifier with the application-logic label and fine-tune on
    manually validated rows; gates on old-label regression."""
    store = open_store(ctx)
    need(store, artifacts.CLASSIFIER_MODEL, artifacts.CORPUS, artifacts.VECTORS,
         artifacts.AGGREGATES)
    models, version = dual_models_from_bytes(store.load_artifact(artifacts.CLASSIFIER_MODEL))
    rows = [json.loads(line) for line in Path(validated_path).read_text().splitlines() if line.strip()]
    wide_labels = CWE_LABELS + (APP_LOGIC,)
    x_v, x_c, y, _, _ = _labeled_matrices(store, rows, wide_labels)
    if len(x_v) == 0:
        fail(4, "empty_validated_set", "no validated functions matched exported vectors")
    old_set = None
    if store.has(artifacts.LABELS):
        old_rows = [json.loads(line) for line in store.load_text(artifacts.LABELS).splitlines() if line.strip()]
        ox_v, ox_c, oy, _, _ = _labeled_matrices(store, old_rows, CWE_LABELS)
        if len(ox_v):
            old_set = (ox_v, ox_c, oy)
    config = ClassifierConfig(
        hidden1=models.vanilla.w1.shape[0], hidden2=models.vanilla.w2.shape[0],
        epochs=epochs, learning_rate=lr, seed=ctx.obj["seed"],
    )
    try:
        tuned, report = fine_tune_with_feedback(models, x_v, x_c, y, config, old_set=old_set)
    except FineTuneRegression as exc:
        fail(4, "fine_tune_regression", str(exc))
    store.save_artifact(artifacts.CLASSIFIER_MODEL, dual_models_to_bytes(tuned, version))
    click.echo(f"fine-tuned with {APP_LOGIC} on {len(x_v)} validated functions")
    if report.old_accuracy_before:
        worst = max(
            report.old_accuracy_before[label] - report.old_accuracy_after[label]
            for label in report.old_accuracy_before
        )
        click.echo(f"worst old-label accuracy drop: {worst:.3f}")


@main.command()
@click.option("--component", default="", help="Module id prefix filter.")
@click.option("--out", "out_path", default=None, type=click.Path())
@click.pass_context
def scan(ctx, component, out_path):
    """Batch prediction over the corpus; writes a report sorted by strongest
    fused probability."""
    store_root = ctx.obj["store"]
    try:
        toolchain = Toolchain.load(store_root, ctx.obj["config"])
    except VulnvecError as exc:
        fail(3, "missing_prerequisite", str(exc))
    if not toolchain.ready_for_predict:
        fail(3, "missing_prerequisite", "corpus, models and vectors must exist")
    rows = toolchain.scan(component)
    text = "".join(json.dumps(r) + "\n" for r in rows)
    if out_path:
        Path(out_path).write_text(text)
    else:
        toolchain.store.save_text("reports/scan.jsonl", text)
        out_path = str(Path(store_root) / "reports/scan.jsonl")
    click.echo(f"scanned {len(rows)} functions -> {out_path}")


@main.command("sweep-threshold")
@click.option("--pairs", "pairs_path", required=True, type=click.Path(exists=True))
@click.option("--out", "out_path", default="sweep.csv", type=click.Path())
@click.option("--start", default=0.1, show_default=True)
@click.option("--stop", default=0.9, show_default=True)
@click.option("--step", default=0.1, show_default=True)
@click.pass_context
def sweep_threshold(ctx, pairs_path, out_path, start, stop, step):
    """Accuracy of the similarity rule over a threshold grid, against a
    labeled clone-pair file."""
    store = open_store(ctx)
    need(store, artifacts.VECTORS)
    vectors_by_id = read_vectors(store.load_text(artifacts.VECTORS))
    pairs = [json.loads(line) for line in Path(pairs_path).read_text().splitlines() if line.strip()]
    missing = [p for p in pairs if p["a"] not in vectors_by_id or p["b"] not in vectors_by_id]
    if missing:
        fail(4, "unknown_function", f"{len(missing)} pairs reference unexported ids")
    if not pairs:
        fail(4, "empty_pairs", "clone-pair file has no rows")
    distances = [
        (distance(vectors_by_id[p["a"]], vectors_by_id[p["b"]]), bool(p["similar"]))
        for p in pairs
    ]
    out = io.StringIO()
    writer = csv.writer(out)
    writer.writerow(["threshold", "accuracy"])
    thresholds = []
    t = start
    while t <= stop + 1e-9:
        thresholds.append(round(t, 10))
        t += step
    for threshold in thresholds:
        correct = sum(
            1
            for d, similar in distances
            if (d < threshold) == similar
        )
        writer.writerow([f"{threshold:.3f}", f"{correct / len(distances):.6f}"])
    Path(out_path).write_text(out.getvalue())
    click.echo(f"swept {len(thresholds)} thresholds over {len(pairs)} pairs -> {out_path}")


@main.command()
@click.option("--port", default=None, type=int, help="Override config port.")
@click.pass_context
def serve(ctx, port):
    """Start the HTTP service over the store."""
    config = ctx.obj["config"]
    if port is not None:
        config.port = port
    from .service import serve as run_service

    try:
        run_service(ctx.obj["store"], config)
    except VulnvecError as exc:
        fail(3, "missing_prerequisite", str(exc))


@main.command()
@click.option("--alpha", default=None, type=float, help="Override step scale.")
@click.option("--guard", default=None, type=float, help="Override overshoot guard.")
@click.pass_context
def feedback(ctx, alpha, guard):
    """Replay the vote log from scratch into fresh vector overlays."""
    store_root = ctx.obj["store"]
    config = ctx.obj["config"]
    if alpha is not None:
        config.alpha = alpha
    if guard is not None:
        config.guard = guard
    try:
        toolchain = Toolchain.load(store_root, config)
    except VulnvecError as exc:
        fail(3, "missing_prerequisite", str(exc))
    if not toolchain.votes.events:
        click.echo("vote log is empty; nothing to replay")
        return
    toolchain.overlays = {}
    counts: dict[tuple, int] = {}
    for event in toolchain.votes.events:
        key = (event["src"], event["tgt"], event["polarity"])
        counts[key] = counts.get(key, 0) + 1
        source_vec = toolchain.overlays.get(event["src"])
        if source_vec is None:
            source_vec = toolchain.vector_of(event["src"])
        target_vec = toolchain.vector_of(event["tgt"])
        adjusted, _ = apply_incremental_vote(
            source_vec, target_vec, event["polarity"], counts[key], config.adjustment
        )
        toolchain.overlays[event["src"]] = adjusted
    version = toolchain.embedding.version if toolchain.embedding else ""
    toolchain.store.save_text(
        artifacts.OVERLAYS, write_overlays(toolchain.overlays, version)
    )
    click.echo(
        f"replayed {len(toolchain.votes.events)} votes into "
        f"{len(toolchain.overlays)} overlays"
    )


@main.command()
@click.option("--dir", "target_dir", default="demo", show_default=True, type=click.Path())
def demo(target_dir):
    """Materialize the bundled sample corpus, clone pairs, labels and index
    metadata for a full pipeline walkthrough."""
    from .sampledata import (
        clone_pairs,
        toy_index_meta,
        toy_labels,
        write_clone_pairs,
        write_toy_tree,
    )

    target = Path(target_dir)
    meta = write_toy_tree(target / "src")
    (target / "clone_pairs.jsonl").write_text(write_clone_pairs(clone_pairs(meta)))
    labels = toy_labels(meta)
    (target / "labels.jsonl").write_text("".join(json.dumps(r) + "\n" for r in labels))
    index_meta = toy_index_meta(meta, labels)
    (target / "index_meta.jsonl").write_text("".join(json.dumps(r) + "\n" for r in index_meta))
    click.echo(f"sample data written under {target}")


if __name__ == "__main__":
    main()
