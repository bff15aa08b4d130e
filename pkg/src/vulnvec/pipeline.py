"""End-to-end orchestration over a store: load trained artifacts once, then
serve predictions, similarity lookups, fix suggestions, and feedback.

One Toolchain instance backs both the HTTP service and the batch scan, so
the two deployment modes produce identical numbers by construction.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field

import numpy as np

from . import store as artifacts
from .cgrammar import DEFAULT_GRAMMAR
from .classifier import (
    BugCountModel,
    DualModels,
    bug_count_features,
    bug_count_from_bytes,
    dual_models_from_bytes,
    predict as classify,
    predict_bug_count,
)
from .composite import ModuleAggregate, build_composite, build_module_aggregate, read_aggregates
from .contexts import FunctionRecord, Vocabulary, build_record, read_corpus
from .embedding import CodeVector, EmbeddingModel, export_code_vector, model_from_bytes
from .errors import MissingPrerequisite, UnknownFunction
from .feedback import AdjustmentConfig, VoteStore, apply_incremental_vote, read_overlays, write_overlays
from .ranker import ContextFrequencyTable, FilterBounds, filter_contexts
from .similarity import VectorIndex, build_index, knn, read_index_meta, suggest_fix
from .store import Store


@dataclass
class ToolchainConfig:
    port: int = 8077
    store_root: str = "store"
    similarity_threshold: float = 0.4
    decision_threshold: float = 0.5
    alpha: float = 0.05
    guard: float = 0.9
    k: int = 5
    min_count: int = 2
    max_count: int = 10_000
    metric: str = "cosine"
    cors_origin: str = "*"

    @classmethod
    def load(cls, path: str | None = None) -> "ToolchainConfig":
        """Config file plus VULNVEC_* environment overrides."""
        config = cls()
        if path:
            data = json.loads(open(path).read())
            for key, value in data.items():
                if hasattr(config, key):
                    setattr(config, key, value)
        for key in vars(config):
            env = os.environ.get(f"VULNVEC_{key.upper()}")
            if env is not None:
                current = getattr(config, key)
                cast = type(current)
                setattr(config, key, cast(env) if cast is not str else env)
        return config

    @property
    def adjustment(self) -> AdjustmentConfig:
        return AdjustmentConfig(alpha=self.alpha, guard=self.guard)

    @property
    def bounds(self) -> FilterBounds:
        return FilterBounds(self.min_count, self.max_count)


@dataclass
class Toolchain:
    store: Store
    config: ToolchainConfig
    token_vocab: Vocabulary | None = None
    path_vocab: Vocabulary | None = None
    freq_table: ContextFrequencyTable | None = None
    embedding: EmbeddingModel | None = None
    classifiers: DualModels | None = None
    bug_count: BugCountModel | None = None
    corpus: dict[str, FunctionRecord] = field(default_factory=dict)
    index: VectorIndex | None = None
    aggregates: dict[str, ModuleAggregate] = field(default_factory=dict)
    overlays: dict[str, np.ndarray] = field(default_factory=dict)
    votes: VoteStore = field(default_factory=VoteStore)
    submissions: dict[str, dict] = field(default_factory=dict)
    _sha_order: dict[str, list[str]] = field(default_factory=dict)
    grammar = DEFAULT_GRAMMAR

    @classmethod
    def load(cls, store_root, config: ToolchainConfig | None = None) -> "Toolchain":
        config = config or ToolchainConfig()
        store = Store.open(store_root)
        tc = cls(store=store, config=config)
        if store.has(artifacts.VOCAB_TOKENS):
            tc.token_vocab = Vocabulary.from_json(store.load_text(artifacts.VOCAB_TOKENS))
        if store.has(artifacts.VOCAB_PATHS):
            tc.path_vocab = Vocabulary.from_json(store.load_text(artifacts.VOCAB_PATHS))
        if store.has(artifacts.FREQ):
            tc.freq_table = ContextFrequencyTable.from_jsonl(store.load_text(artifacts.FREQ))
        if store.has(artifacts.EMBEDDING_MODEL):
            tc.embedding = model_from_bytes(store.load_artifact(artifacts.EMBEDDING_MODEL))
        if store.has(artifacts.CLASSIFIER_MODEL):
            tc.classifiers, _ = dual_models_from_bytes(
                store.load_artifact(artifacts.CLASSIFIER_MODEL)
            )
        if store.has(artifacts.BUGCOUNT_MODEL):
            tc.bug_count = bug_count_from_bytes(store.load_artifact(artifacts.BUGCOUNT_MODEL))
        if store.has(artifacts.CORPUS):
            for record in read_corpus(store.load_text(artifacts.CORPUS)):
                tc.corpus[record.id] = record
                tc._sha_order.setdefault(record.source_sha, []).append(record.id)
        if store.has(artifacts.VECTORS):
            vectors = _read_vectors(store.load_text(artifacts.VECTORS))
            meta = {}
            if store.has(artifacts.INDEX_META):
                meta = read_index_meta(store.load_text(artifacts.INDEX_META))
            tc.index = build_index(vectors, meta, metric=config.metric)
        if store.has(artifacts.AGGREGATES):
            tc.aggregates = read_aggregates(store.load_text(artifacts.AGGREGATES))
        version = tc.embedding.version if tc.embedding else None
        if store.has(artifacts.OVERLAYS):
            tc.overlays = read_overlays(store.load_text(artifacts.OVERLAYS), version)
        if store.has(artifacts.FUNCTIONS):
            for line in store.load_text(artifacts.FUNCTIONS).splitlines():
                if line.strip():
                    row = json.loads(line)
                    tc.submissions[row["id"]] = row
                    tc._sha_order.setdefault(row["source_sha"], []).append(row["id"])
        votes_text = (
            store.load_text(artifacts.VOTES) if store.has(artifacts.VOTES) else ""
        )
        # Id validation happens in record_feedback against the live corpus
        # and submission tables, so the store itself replays unchecked.
        tc.votes = VoteStore.from_jsonl(votes_text)
        return tc

    # -- readiness -------------------------------------------------------------

    def require(self, *names: str) -> None:
        missing = [n for n in names if getattr(self, n) is None]
        if missing:
            raise MissingPrerequisite(", ".join(missing))

    @property
    def ready_for_predict(self) -> bool:
        return None not in (
            self.token_vocab, self.path_vocab, self.freq_table,
            self.embedding, self.classifiers, self.index,
        )

    # -- core pipeline ----------------------------------------------------------

    def _usable_contexts(self, record: FunctionRecord) -> FunctionRecord:
        """Rank-filter; a record whose every context is filtered away stays
        embeddable through its raw (possibly UNK-mapped) contexts."""
        filtered = filter_contexts(record, self.freq_table, self.config.bounds)
        return filtered if filtered.contexts else record

    def _base_vector(self, record: FunctionRecord) -> CodeVector:
        return export_code_vector(self._usable_contexts(record), self.embedding)

    def _overlay_for(self, fn_id: str, sha: str) -> np.ndarray | None:
        if fn_id in self.overlays:
            return self.overlays[fn_id]
        for known_id in reversed(self._sha_order.get(sha, [])):
            if known_id in self.overlays:
                return self.overlays[known_id]
        return None

    def current_vector(self, record: FunctionRecord) -> CodeVector:
        overlay = self._overlay_for(record.id, record.source_sha)
        if overlay is not None:
            return CodeVector(values=overlay, model_version=self.embedding.version)
        return self._base_vector(record)

    def _module_aggregate(self, module_id: str | None, vec: CodeVector) -> ModuleAggregate:
        if module_id and module_id in self.aggregates:
            return self.aggregates[module_id]
        return build_module_aggregate(module_id or "<adhoc>", [vec])

    def _classify(self, vec: CodeVector, module_id: str | None):
        composite = build_composite(vec, self._module_aggregate(module_id, vec))
        return classify(vec.values, composite.values, self.classifiers)

    def predict_record(self, record: FunctionRecord) -> dict:
        """Classification outcome for an already-extracted record."""
        vec = self.current_vector(record)
        prediction = self._classify(vec, record.module_id)
        flagged = [
            label
            for i, label in enumerate(prediction.labels)
            if prediction.p_fused[i] >= self.config.decision_threshold
        ]
        return {
            "id": record.id,
            "module_id": record.module_id,
            "predictions": prediction.as_dict(),
            "flagged": flagged,
            "max_fused": float(prediction.p_fused.max()),
        }

    def predict_source(self, source: str, module_id: str | None = None,
                       include_all: bool = False) -> dict:
        """Full real-time pipeline for raw source; persists the submission
        under a fresh id."""
        self.require("token_vocab", "path_vocab", "freq_table", "embedding",
                     "classifiers", "index")
        fn_id = f"sub-{len(self.submissions) + 1:06d}"
        record = build_record(
            source, fn_id, module_id or "<submitted>",
            self.token_vocab, self.path_vocab, frozen=True, grammar=self.grammar,
        )
        vec = self.current_vector(record)
        prediction = self._classify(vec, module_id)

        neighbors = knn(vec, self.index, self.config.k)
        if not include_all:
            neighbors = [
                n for n in neighbors if n.distance < self.config.similarity_threshold
            ]
        suggestion = suggest_fix(vec, self.index, self.config.similarity_threshold)

        response = {
            "function_id": fn_id,
            "vector_version": self.embedding.version,
            "predictions": prediction.as_dict(),
            "neighbors": [
                {
                    "id": n.fn_id,
                    "name": n.name,
                    "distance": n.distance,
                    "bug_ids": list(n.bug_ids),
                    **({"fix_id": n.fix_id} if n.fix_id else {}),
                }
                for n in neighbors
            ],
        }
        if suggestion is not None:
            response["suggested_fix"] = {"neighbor_id": suggestion[0], "fix_id": suggestion[1]}
        if self.bug_count is not None:
            features = bug_count_features(vec.values)
            response["bug_count_estimate"] = predict_bug_count(features, self.bug_count)

        self._persist_submission(record, vec)
        return response

    def _persist_submission(self, record: FunctionRecord, vec: CodeVector) -> None:
        row = record.to_json_obj()
        row["vec"] = [float(x) for x in vec.values]
        row["model_version"] = vec.model_version
        self.submissions[record.id] = row
        self._sha_order.setdefault(record.source_sha, []).append(record.id)
        text = "".join(json.dumps(r) + "\n" for r in self.submissions.values())
        self.store.save_text(artifacts.FUNCTIONS, text)

    # -- feedback ---------------------------------------------------------------

    def vector_of(self, fn_id: str) -> np.ndarray:
        if fn_id in self.overlays:
            return self.overlays[fn_id]
        if fn_id in self.submissions:
            return np.asarray(self.submissions[fn_id]["vec"], dtype=np.float64)
        if self.index is not None:
            for entry in self.index.entries:
                if entry.fn_id == fn_id:
                    return entry.vector
        if fn_id in self.corpus:
            return self._base_vector(self.corpus[fn_id]).values
        raise UnknownFunction(f"unknown function id {fn_id!r}")

    def record_feedback(self, source_fn: str, target_fn: str, polarity: str) -> dict:
        """Record the vote and move the source overlay by the newest vote's
        share of the log law."""
        for fn_id in (source_fn, target_fn):
            if fn_id not in self.corpus and fn_id not in self.submissions:
                raise UnknownFunction(f"unknown function id {fn_id!r}")
        source_vec = self.vector_of(source_fn)
        target_vec = self.vector_of(target_fn)
        count = self.votes.record_vote(source_fn, target_fn, polarity)
        adjusted, moved = apply_incremental_vote(
            source_vec, target_vec, polarity, count, self.config.adjustment
        )
        self.overlays[source_fn] = adjusted
        version = self.embedding.version if self.embedding else ""
        self.store.save_text(artifacts.OVERLAYS, write_overlays(self.overlays, version))
        self.store.save_text(artifacts.VOTES, self.votes.to_jsonl())
        return {"new_vote_count": count, "moved_distance": moved}

    def get_function(self, fn_id: str) -> dict:
        if fn_id in self.submissions:
            row = dict(self.submissions[fn_id])
            overlay = self._overlay_for(fn_id, row["source_sha"])
            vec = overlay if overlay is not None else np.asarray(row["vec"])
            return {
                "id": fn_id,
                "module_id": row["module_id"],
                "name_tokens": row["name_tokens"],
                "source_sha": row["source_sha"],
                "vector": [float(x) for x in vec],
                "model_version": row["model_version"],
                "votes": self.votes.summary_for(fn_id),
            }
        if fn_id in self.corpus:
            record = self.corpus[fn_id]
            vec = self.current_vector(record)
            return {
                "id": fn_id,
                "module_id": record.module_id,
                "name_tokens": record.name_tokens,
                "source_sha": record.source_sha,
                "vector": [float(x) for x in vec.values],
                "model_version": vec.model_version,
                "votes": self.votes.summary_for(fn_id),
            }
        raise UnknownFunction(f"unknown function id {fn_id!r}")

    # -- batch scan ---------------------------------------------------------------

    def scan(self, component: str = "", progress=None) -> list[dict]:
        """Batch prediction over corpus functions whose module matches the
        component prefix, sorted by strongest fused probability."""
        self.require("token_vocab", "path_vocab", "freq_table", "embedding",
                     "classifiers")
        matching = [
            r for r in self.corpus.values() if r.module_id.startswith(component)
        ]
        rows = []
        for i, record in enumerate(matching):
            rows.append(self.predict_record(record))
            if progress is not None:
                progress(i + 1, len(matching))
        rows.sort(key=lambda row: (-row["max_fused"], row["id"]))
        return rows


def _read_vectors(text: str) -> dict[str, CodeVector]:
    out = {}
    for line in text.splitlines():
        line = line.strip()
        if not line:
            continue
        obj = json.loads(line)
        out[obj["id"]] = CodeVector(
            values=np.asarray(obj["vec"], dtype=np.float64),
            model_version=obj["model_version"],
        )
    return out


def write_vectors(vectors: dict[str, CodeVector]) -> str:
    lines = [
        json.dumps(
            {
                "id": fn_id,
                "vec": [float(x) for x in vec.values],
                "model_version": vec.model_version,
            }
        )
        for fn_id, vec in vectors.items()
    ]
    return "\n".join(lines) + "\n" if lines else ""


def read_vectors(text: str) -> dict[str, CodeVector]:
    return _read_vectors(text)
