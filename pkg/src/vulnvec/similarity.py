"""Exact nearest-neighbor search over code vectors.

Cosine distance by default (scale-invariant, so feedback moves that stretch
vectors do not disturb unrelated similarities); Euclidean available via the
index metric tag. Search is a full linear scan with a deterministic id
tiebreak, which keeps an oracle-equality contract feasible.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .embedding import CodeVector
from .errors import DimensionMismatch, EmptyIndex, TooFewEntries, ZeroVector

DEFAULT_SIMILARITY_THRESHOLD = 0.4


@dataclass
class IndexEntry:
    fn_id: str
    vector: np.ndarray
    name: str = ""
    module_id: str = ""
    bug_ids: tuple[str, ...] = ()
    fix_id: str | None = None


@dataclass
class Neighbor:
    fn_id: str
    distance: float
    name: str = ""
    module_id: str = ""
    bug_ids: tuple[str, ...] = ()
    fix_id: str | None = None


@dataclass
class VectorIndex:
    entries: list[IndexEntry] = field(default_factory=list)
    metric: str = "cosine"
    model_version: str = ""

    def __post_init__(self):
        ids = [e.fn_id for e in self.entries]
        if len(set(ids)) != len(ids):
            raise ValueError("index entries must have unique function ids")
        dims = {e.vector.shape for e in self.entries}
        if len(dims) > 1:
            raise DimensionMismatch(f"index mixes vector dims {sorted(dims)}")


def _values(v) -> np.ndarray:
    if isinstance(v, CodeVector):
        return np.asarray(v.values, dtype=np.float64)
    return np.asarray(v, dtype=np.float64)


def distance(a, b, metric: str = "cosine") -> float:
    """Cosine distance 1 - cos(a, b) in [0, 2]; identical vectors are exactly
    0. Zero vectors are an error for cosine, never silently similar."""
    va, vb = _values(a), _values(b)
    if va.shape != vb.shape:
        raise DimensionMismatch(f"vector dims differ: {va.shape} vs {vb.shape}")
    if metric == "euclidean":
        return float(np.linalg.norm(va - vb))
    na = np.linalg.norm(va)
    nb = np.linalg.norm(vb)
    if na == 0.0 or nb == 0.0:
        raise ZeroVector("cosine distance undefined for an all-zero vector")
    if np.array_equal(va, vb):
        return 0.0
    cos = float(np.clip(np.dot(va, vb) / (na * nb), -1.0, 1.0))
    return 1.0 - cos


def knn(query, index: VectorIndex, k: int) -> list[Neighbor]:
    """The k nearest entries, ascending by (distance, id). Exact scan."""
    if k < 1:
        raise ValueError("k must be >= 1")
    if not index.entries:
        raise EmptyIndex("knn over an empty index")
    q = _values(query)
    scored = [
        (distance(q, e.vector, index.metric), e.fn_id, e) for e in index.entries
    ]
    scored.sort(key=lambda item: (item[0], item[1]))
    return [
        Neighbor(
            fn_id=e.fn_id,
            distance=d,
            name=e.name,
            module_id=e.module_id,
            bug_ids=e.bug_ids,
            fix_id=e.fix_id,
        )
        for d, _, e in scored[:k]
    ]


def is_similar(a, b, threshold: float = DEFAULT_SIMILARITY_THRESHOLD) -> bool:
    """Strictly below the threshold counts as similar; at it does not."""
    return distance(a, b) < threshold


def suggest_fix(
    query, index: VectorIndex, threshold: float = DEFAULT_SIMILARITY_THRESHOLD
) -> tuple[str, str] | None:
    """Nearest entry within the threshold that carries a linked fix, as a
    (function id, fix id) pair; None when nothing qualifies."""
    if not index.entries:
        return None
    for neighbor in knn(query, index, len(index.entries)):
        if neighbor.distance >= threshold:
            return None
        if neighbor.fix_id:
            return neighbor.fn_id, neighbor.fix_id
    return None


def cluster(index: VectorIndex, k_clusters: int, seed: int = 0, max_iter: int = 100) -> list[int]:
    """Seeded k-means over unit-normalized vectors; assignment ties go to the
    lowest cluster id. Returns one cluster id per index entry."""
    n = len(index.entries)
    if k_clusters > n:
        raise TooFewEntries(f"asked for {k_clusters} clusters over {n} entries")
    if k_clusters < 1:
        raise ValueError("k_clusters must be >= 1")
    vectors = np.stack([e.vector for e in index.entries]).astype(np.float64)
    norms = np.linalg.norm(vectors, axis=1, keepdims=True)
    normalized = np.divide(vectors, norms, out=np.zeros_like(vectors), where=norms > 0)

    rng = np.random.default_rng(seed)
    centroids = normalized[rng.choice(n, size=k_clusters, replace=False)].copy()
    assignment = np.zeros(n, dtype=int)
    for iteration in range(max_iter):
        distances = np.linalg.norm(normalized[:, None, :] - centroids[None, :, :], axis=2)
        new_assignment = distances.argmin(axis=1)
        if iteration > 0 and np.array_equal(new_assignment, assignment):
            break
        assignment = new_assignment
        for c in range(k_clusters):
            members = normalized[assignment == c]
            if len(members):
                centroids[c] = members.mean(axis=0)
    return assignment.tolist()


# -- persistence ------------------------------------------------------------------


def write_index_meta(index: VectorIndex) -> str:
    lines = []
    for e in index.entries:
        obj = {
            "id": e.fn_id,
            "name": e.name,
            "module_id": e.module_id,
            "bug_ids": list(e.bug_ids),
        }
        if e.fix_id:
            obj["fix_id"] = e.fix_id
        lines.append(json.dumps(obj))
    return "\n".join(lines) + "\n" if lines else ""


def read_index_meta(text: str) -> dict[str, dict]:
    out = {}
    for line in text.splitlines():
        line = line.strip()
        if line:
            obj = json.loads(line)
            out[obj["id"]] = obj
    return out


def build_index(
    vectors: dict[str, CodeVector],
    meta: dict[str, dict] | None = None,
    metric: str = "cosine",
) -> VectorIndex:
    meta = meta or {}
    entries = []
    version = ""
    for fn_id in sorted(vectors):
        vec = vectors[fn_id]
        version = vec.model_version
        m = meta.get(fn_id, {})
        entries.append(
            IndexEntry(
                fn_id=fn_id,
                vector=np.asarray(vec.values, dtype=np.float64),
                name=m.get("name", ""),
                module_id=m.get("module_id", ""),
                bug_ids=tuple(m.get("bug_ids", ())),
                fix_id=m.get("fix_id"),
            )
        )
    return VectorIndex(entries=entries, metric=metric, model_version=version)
