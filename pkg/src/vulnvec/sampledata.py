"""Bundled deterministic sample data.

A 50-function C corpus over 10 files with 10 distinct leading name subtokens
(5 functions per name family). Four families contribute an exact-duplicate
pair and four contribute a statement-reordered pair, which together with
cross-family negatives form the clone-pair ground truth for threshold
sweeps. Everything is generated from fixed templates and a fixed seed, so
pipelines built on it are reproducible byte for byte.
"""

from __future__ import annotations

import json

import numpy as np

FAMILIES = ["copy", "find", "init", "sum", "scale", "clamp", "swap", "count", "fill", "max"]

N_FILES = 10


def _family_sources(family: str, idx: int) -> list[tuple[str, str, str]]:
    """Five (variant, name, source) entries for one name family."""
    op = ["+", "-", "*", "|", "^"][idx % 5]
    lit1 = idx + 1
    lit2 = 2 * idx + 3
    f = family
    small1 = (
        "small1",
        f"{f}_one",
        f"int {f}_one(int a){{return a {op} {lit1};}}",
    )
    small2 = (
        "small2",
        f"{f}_two",
        f"int {f}_two(int b){{return b {op} {lit2};}}",
    )
    medium = (
        "medium",
        f"{f}_loop",
        f"int {f}_loop(int *xs, int n){{\n"
        f"    int acc = {lit1};\n"
        f"    int i = 0;\n"
        f"    while (i < n) {{\n"
        f"        acc = acc {op} xs[i];\n"
        f"        i = i + 1;\n"
        f"    }}\n"
        f"    return acc;\n"
        f"}}",
    )
    pair_body_a = (
        f"int {f}_pair(int a, int b){{\n"
        f"    int left = a * {lit1};\n"
        f"    int right = b * {lit2};\n"
        f"    return left {op} right;\n"
        f"}}"
    )
    pair_body_b = (
        f"int {f}_pair(int a, int b){{\n"
        f"    int right = b * {lit2};\n"
        f"    int left = a * {lit1};\n"
        f"    return left {op} right;\n"
        f"}}"
    )
    if idx < 4:  # exact duplicate pair
        pair1 = ("pair1", f"{f}_pair", pair_body_a)
        pair2 = ("pair2", f"{f}_pair", pair_body_a)
    elif idx < 8:  # adjacent statements swapped
        pair1 = ("pair1", f"{f}_pair", pair_body_a)
        pair2 = ("pair2", f"{f}_pair", pair_body_b)
    else:
        # Duplicate bodies shared across the last two families under their
        # own names: clones a name-supervised embedding cannot keep at
        # distance zero, which gives the threshold sweep its interior shape.
        mirror = (
            "int {name}(int a, int b, int n){{\n"
            "    int low = a - 2;\n"
            "    int high = b + 4;\n"
            "    int total = 0;\n"
            "    int step = 0;\n"
            "    while (step < n) {{\n"
            "        total = total + low * high;\n"
            "        low = low + 1;\n"
            "        high = high - 1;\n"
            "        step = step + 1;\n"
            "    }}\n"
            "    return total;\n"
            "}}"
        )
        flip = (
            "int {name}(int u, int v){{\n"
            "    int gap = 0;\n"
            "    int sign = 1;\n"
            "    if (u < v) {{\n"
            "        gap = v - u;\n"
            "        sign = 0 - sign;\n"
            "    }} else {{\n"
            "        gap = u - v;\n"
            "    }}\n"
            "    return gap * sign;\n"
            "}}"
        )
        pair1 = ("pair1", f"{f}_mirror", mirror.format(name=f"{f}_mirror"))
        pair2 = ("pair2", f"{f}_flip", flip.format(name=f"{f}_flip"))
    return [small1, small2, medium, pair1, pair2]


def toy_corpus_files() -> tuple[dict[str, str], list[dict]]:
    """Render the corpus as {filename: source} plus one metadata row per
    function: id, family, variant, name, module. Pair members always land in
    different files."""
    placements: dict[str, list[tuple[str, str, str, str]]] = {
        f"mod{i}.c": [] for i in range(N_FILES)
    }
    for idx, family in enumerate(FAMILIES):
        variants = _family_sources(family, idx)
        for v, (variant, name, source) in enumerate(variants):
            file_idx = (idx + v * 3) % N_FILES
            if variant == "pair2":  # keep the pair split across files
                file_idx = (idx + (v + 4) * 3) % N_FILES
            placements[f"mod{file_idx}.c"].append((family, variant, name, source))

    files: dict[str, str] = {}
    meta: list[dict] = []
    for filename in sorted(placements):
        chunks = []
        for ordinal, (family, variant, name, source) in enumerate(placements[filename]):
            chunks.append(source)
            meta.append(
                {
                    "id": f"{filename}:{name}:{ordinal}",
                    "family": family,
                    "variant": variant,
                    "name": name,
                    "module": filename,
                }
            )
        files[filename] = "\n\n".join(chunks) + "\n"
    return files, meta


def write_toy_tree(directory) -> list[dict]:
    """Materialize the corpus under a directory; returns the metadata rows."""
    from pathlib import Path

    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    files, meta = toy_corpus_files()
    for filename, source in files.items():
        (directory / filename).write_text(source)
    return meta


def clone_pairs(meta: list[dict]) -> list[dict]:
    """Ground-truth similar/dissimilar pairs over the toy corpus. Similar:
    duplicate pairs, statement-reordered pairs, and the two renamed duplicate
    bodies shared between the last families. Dissimilar: unrelated functions,
    including two pairs that share a leading name subtoken."""
    by_key = {(m["family"], m["variant"]): m["id"] for m in meta}
    pairs = []
    for idx, family in enumerate(FAMILIES):
        if idx < 8:
            pairs.append(
                {
                    "a": by_key[(family, "pair1")],
                    "b": by_key[(family, "pair2")],
                    "similar": True,
                }
            )
    pairs.append(
        {"a": by_key[("fill", "pair1")], "b": by_key[("max", "pair1")], "similar": True}
    )
    pairs.append(
        {"a": by_key[("fill", "pair2")], "b": by_key[("max", "pair2")], "similar": True}
    )
    for idx, family in enumerate(FAMILIES):
        other = FAMILIES[(idx + 1) % len(FAMILIES)]
        pairs.append(
            {
                "a": by_key[(family, "small1")],
                "b": by_key[(other, "small2")],
                "similar": False,
            }
        )
        if idx < 4:
            pairs.append(
                {
                    "a": by_key[(family, "medium")],
                    "b": by_key[(FAMILIES[(idx + 5) % 10], "medium")],
                    "similar": False,
                }
            )
    # Same leading subtoken, unrelated bodies.
    pairs.append(
        {"a": by_key[("copy", "small1")], "b": by_key[("copy", "medium")], "similar": False}
    )
    pairs.append(
        {"a": by_key[("find", "small1")], "b": by_key[("find", "medium")], "similar": False}
    )
    return pairs


def write_clone_pairs(pairs: list[dict]) -> str:
    return "\n".join(json.dumps(p) for p in pairs) + "\n"


def toy_labels(meta: list[dict], seed: int = 0) -> list[dict]:
    """Seeded pseudo-random CWE labels plus optional scalar columns; around
    half the functions carry at least one label."""
    from .classifier import CWE_LABELS

    rng = np.random.default_rng(seed)
    rows = []
    for m in meta:
        labels = [label for label in CWE_LABELS if rng.random() < 0.18]
        row = {"id": m["id"], "labels": labels}
        if rng.random() < 0.4:
            row["sa_score"] = round(float(rng.random()), 3)
        if rng.random() < 0.4:
            row["coverage"] = round(float(rng.random()), 3)
        if rng.random() < 0.3:
            row["hotspot"] = round(float(rng.random()), 3)
        if rng.random() < 0.5:
            row["bug_count"] = int(rng.integers(0, 4))
        rows.append(row)
    return rows


def toy_index_meta(meta: list[dict], labels: list[dict]) -> list[dict]:
    """Index metadata: labeled functions carry bug ids, half of those a fix."""
    labeled = {row["id"]: row["labels"] for row in labels}
    rows = []
    bug_n = 0
    for m in meta:
        row = {
            "id": m["id"],
            "name": m["name"],
            "module_id": m["module"],
            "bug_ids": [],
        }
        if labeled.get(m["id"]):
            bug_n += 1
            row["bug_ids"] = [f"BUG-{bug_n:03d}"]
            if bug_n % 2 == 0:
                row["fix_id"] = f"FIX-{bug_n:03d}"
        rows.append(row)
    return rows


def module_context_set(
    n_modules: int = 20,
    per_module: int = 6,
    dim: int = 8,
    seed: int = 0,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Synthetic labeled set where the first label depends only on module
    context: function vectors are pure noise, module aggregates sit at +mu or
    -mu, and the label is the aggregate's sign. Vanilla vectors carry no
    signal, composites carry it all."""
    rng = np.random.default_rng(seed)
    mu = np.zeros(dim)
    mu[0] = 2.0
    xs, xcs, ys = [], [], []
    for m in range(n_modules):
        sign = 1.0 if m % 2 == 0 else -1.0
        aggregate = sign * mu + rng.normal(scale=0.1, size=dim)
        for _ in range(per_module):
            v = rng.normal(size=dim)
            xs.append(v)
            xcs.append(np.concatenate([v, aggregate]))
            ys.append([1.0 if sign > 0 else 0.0])
    return np.array(xs), np.array(xcs), np.array(ys)
