import json
import shutil

import pytest
from click.testing import CliRunner

from vulnvec.cli import main as cli_main

PIPELINE_SEED = "13"

# One pipeline configuration for every test that needs a trained toy store:
# 32-dim embeddings, 200 epochs, momentum 0.9, count bounds (1, 10000).
PIPELINE_STEPS = [
    ["extract", "--source", "{demo}/src"],
    ["rank", "--min-count", "1"],
    [
        "train-embeddings", "--dim", "32", "--epochs", "200", "--lr", "0.05",
        "--momentum", "0.9", "--batch-size", "8", "--min-count", "1",
    ],
    ["vectors", "--min-count", "1", "--index-meta", "{demo}/index_meta.jsonl"],
    ["aggregates"],
    [
        "train-classifier", "--labels", "{demo}/labels.jsonl",
        "--epochs", "150", "--lr", "0.2", "--hidden1", "16", "--hidden2", "8",
    ],
]


def run_cli(args, store_root):
    runner = CliRunner()
    result = runner.invoke(
        cli_main, ["--store", str(store_root), "--seed", PIPELINE_SEED] + args,
        catch_exceptions=False,
    )
    return result


@pytest.fixture(scope="session")
def built_store(tmp_path_factory):
    """Demo data extracted, embeddings and classifiers trained, vectors and
    aggregates exported. Treat as immutable; copy before mutating."""
    base = tmp_path_factory.mktemp("toy")
    demo = base / "demo"
    store = base / "store"
    result = run_cli(["demo", "--dir", str(demo)], store)
    assert result.exit_code == 0, result.output
    for step in PIPELINE_STEPS:
        args = [a.format(demo=demo) for a in step]
        result = run_cli(args, store)
        assert result.exit_code == 0, f"{args}: {result.output}"
    return {"store": store, "demo": demo}


@pytest.fixture()
def store_copy(built_store, tmp_path):
    """Private mutable copy of the built store."""
    target = tmp_path / "store"
    shutil.copytree(built_store["store"], target)
    return {"store": target, "demo": built_store["demo"]}


def demo_sources(demo_dir):
    """Map corpus function id -> (source text, module id) via re-extraction."""
    from vulnvec.cgrammar import CFamilyGrammar
    from vulnvec.contexts import make_function_id

    grammar = CFamilyGrammar()
    out = {}
    for path in sorted((demo_dir / "src").glob("*.c")):
        for ordinal, (root, source) in enumerate(
            grammar.parse_file_with_sources(path.read_text())
        ):
            name = grammar.function_name(root)
            out[make_function_id(path.name, name, ordinal)] = (source, path.name)
    return out


def load_jsonl(path):
    return [json.loads(line) for line in path.read_text().splitlines() if line.strip()]
