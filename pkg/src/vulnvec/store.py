"""File-backed artifact store.

Plain files under one root, every write going through temp-file-plus-rename
so readers never observe a torn artifact. manifest.json records a generation
counter (optimistic concurrency: a save fails rather than clobbering another
writer's work), the current model version, and the content hash of every
artifact.
"""

from __future__ import annotations

import hashlib
import json
import os
from pathlib import Path

from .errors import HashMismatch, IoFailure, ManifestConflict, MissingManifest

MANIFEST = "manifest.json"

CORPUS = "corpus.jsonl"
VOCAB_TOKENS = "vocab_tokens.json"
VOCAB_PATHS = "vocab_paths.json"
FREQ = "freq.jsonl"
VECTORS = "vectors.jsonl"
OVERLAYS = "overlays.jsonl"
AGGREGATES = "aggregates.jsonl"
LABELS = "labels.jsonl"
VOTES = "votes.jsonl"
FUNCTIONS = "functions.jsonl"  # functions submitted through the service
INDEX_META = "index_meta.jsonl"
EMBEDDING_MODEL = "models/embedding.bin"
CLASSIFIER_MODEL = "models/classifier.bin"
BUGCOUNT_MODEL = "models/bugcount.bin"


def _sha256(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def _atomic_write(path: Path, data: bytes) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(path.name + ".tmp")
    try:
        tmp.write_bytes(data)
        os.replace(tmp, path)
    except OSError as exc:
        raise IoFailure(f"writing {path}: {exc}") from exc
    finally:
        if tmp.exists():
            tmp.unlink(missing_ok=True)


class Store:
    """One directory of named artifacts plus their manifest."""

    def __init__(self, root: str | os.PathLike, manifest: dict):
        self.root = Path(root)
        self._manifest = manifest

    @classmethod
    def create(cls, root: str | os.PathLike) -> "Store":
        """Initialize a fresh store (or open an existing one)."""
        root = Path(root)
        if (root / MANIFEST).exists():
            return cls.open(root)
        root.mkdir(parents=True, exist_ok=True)
        manifest = {"generation": 0, "model_version": "", "artifacts": {}}
        _atomic_write(root / MANIFEST, json.dumps(manifest, indent=1).encode())
        return cls(root, manifest)

    @classmethod
    def open(cls, root: str | os.PathLike) -> "Store":
        root = Path(root)
        manifest_path = root / MANIFEST
        if not manifest_path.exists():
            raise MissingManifest(f"no {MANIFEST} under {root}")
        manifest = json.loads(manifest_path.read_text())
        return cls(root, manifest)

    # -- manifest ------------------------------------------------------------

    @property
    def generation(self) -> int:
        return self._manifest["generation"]

    @property
    def model_version(self) -> str:
        return self._manifest.get("model_version", "")

    def artifacts(self) -> dict[str, dict]:
        return dict(self._manifest["artifacts"])

    def _disk_generation(self) -> int:
        manifest_path = self.root / MANIFEST
        if not manifest_path.exists():
            raise MissingManifest(f"no {MANIFEST} under {self.root}")
        return json.loads(manifest_path.read_text())["generation"]

    def _commit_manifest(self) -> None:
        if self._disk_generation() != self._manifest["generation"]:
            raise ManifestConflict(
                "manifest changed on disk; another writer is active"
            )
        self._manifest["generation"] += 1
        _atomic_write(
            self.root / MANIFEST, json.dumps(self._manifest, indent=1).encode()
        )

    def set_model_version(self, version: str) -> None:
        self._manifest["model_version"] = version
        self._commit_manifest()

    # -- artifacts -----------------------------------------------------------

    def save_artifact(self, name: str, payload: bytes | str) -> str:
        """Write the artifact atomically, then update the manifest. Returns
        the content hash."""
        data = payload.encode("utf-8") if isinstance(payload, str) else payload
        digest = _sha256(data)
        _atomic_write(self.root / name, data)
        self._manifest["artifacts"][name] = {"sha256": digest, "bytes": len(data)}
        self._commit_manifest()
        return digest

    def load_artifact(self, name: str) -> bytes:
        path = self.root / name
        if not path.exists():
            raise IoFailure(f"artifact {name} missing under {self.root}")
        return path.read_bytes()

    def has(self, name: str) -> bool:
        return name in self._manifest["artifacts"] and (self.root / name).exists()

    def save_json(self, name: str, obj) -> str:
        return self.save_artifact(name, json.dumps(obj))

    def load_json(self, name: str):
        return json.loads(self.load_artifact(name).decode("utf-8"))

    def save_text(self, name: str, text: str) -> str:
        return self.save_artifact(name, text)

    def load_text(self, name: str) -> str:
        return self.load_artifact(name).decode("utf-8")


def load_manifest(root: str | os.PathLike) -> Store:
    """Open a store and verify every artifact against its recorded hash."""
    store = Store.open(root)
    mismatched = []
    for name, meta in store.artifacts().items():
        path = store.root / name
        if not path.exists() or _sha256(path.read_bytes()) != meta["sha256"]:
            mismatched.append(name)
    if mismatched:
        raise HashMismatch(sorted(mismatched))
    return store
