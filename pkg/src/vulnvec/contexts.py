"""Path-context extraction: turn a function's syntax tree into encoded
(start token, interior path, end token) triples plus the vocabularies that
encode them.

A path context connects two leaves through the tree. The path string is the
interior node-kind sequence with explicit direction marks: "^" before a kind
reached by moving up, "~" before one reached by moving down, so mirrored
shapes encode differently.
"""

from __future__ import annotations

import hashlib
import json
import re
from dataclasses import dataclass, field
from typing import Iterable, NamedTuple

from .cgrammar import DEFAULT_GRAMMAR, strip_comments
from .errors import NoLeaves, UnparsableSource
from .syntax import SyntaxNode

UNK_ID = 0

DEFAULT_MAX_PATH_LENGTH = 8
DEFAULT_MAX_PATH_WIDTH = 2


class PathContext(NamedTuple):
    start_id: int
    path_id: int
    end_id: int


@dataclass
class Vocabulary:
    """Dense string-to-id table. Id 0 is reserved for unknown entries."""

    entries: dict[str, int] = field(default_factory=dict)
    counts: dict[str, int] = field(default_factory=dict)

    def intern(self, text: str, frozen: bool = False) -> int:
        """Map text to its id. In training mode unseen strings get the next
        dense id; in frozen mode they map to UNK_ID."""
        existing = self.entries.get(text)
        if existing is not None:
            if not frozen:
                self.counts[text] += 1
            return existing
        if frozen:
            return UNK_ID
        new_id = len(self.entries) + 1
        self.entries[text] = new_id
        self.counts[text] = 1
        return new_id

    def lookup(self, text: str) -> int:
        return self.entries.get(text, UNK_ID)

    @property
    def size(self) -> int:
        """Number of rows an embedding table needs (UNK row included)."""
        return len(self.entries) + 1

    def to_json(self) -> str:
        return json.dumps({"entries": self.entries, "counts": self.counts})

    @classmethod
    def from_json(cls, text: str) -> "Vocabulary":
        data = json.loads(text)
        return cls(entries=dict(data["entries"]), counts=dict(data["counts"]))


@dataclass
class FunctionRecord:
    id: str
    module_id: str
    name_tokens: list[str]
    contexts: list[PathContext]
    source_sha: str

    def to_json_obj(self) -> dict:
        return {
            "id": self.id,
            "module_id": self.module_id,
            "name_tokens": self.name_tokens,
            "contexts": [list(c) for c in self.contexts],
            "source_sha": self.source_sha,
        }

    @classmethod
    def from_json_obj(cls, obj: dict) -> "FunctionRecord":
        return cls(
            id=obj["id"],
            module_id=obj["module_id"],
            name_tokens=list(obj["name_tokens"]),
            contexts=[PathContext(*c) for c in obj["contexts"]],
            source_sha=obj["source_sha"],
        )


def normalize_source(source: str) -> str:
    """Strip comments and collapse whitespace runs to single spaces."""
    stripped = strip_comments(source)
    return re.sub(r"\s+", " ", stripped).strip()


def source_sha(source: str) -> str:
    return hashlib.sha256(normalize_source(source).encode("utf-8")).hexdigest()


_CAMEL_BOUNDARY = re.compile(r"(?<=[a-z0-9])(?=[A-Z])|(?<=[A-Z])(?=[A-Z][a-z])")


def split_name(name: str) -> list[str]:
    """Split an identifier into lowercase subtokens on case and underscore
    boundaries: getFooBar_baz -> [get, foo, bar, baz]."""
    parts = [p for p in re.split(r"[^0-9A-Za-z]+", name) if p]
    tokens: list[str] = []
    for part in parts:
        tokens.extend(t.lower() for t in _CAMEL_BOUNDARY.split(part) if t)
    return tokens


def _collect_leaf_info(root: SyntaxNode):
    """Depth-first walk recording, per leaf, the ancestor chain from the leaf
    up to the root and each node's child index within its parent."""
    leaves: list[SyntaxNode] = []
    chains: list[list[SyntaxNode]] = []
    indices: dict[int, int] = {}

    def walk(n: SyntaxNode, ancestors: list[SyntaxNode]):
        if n.is_leaf:
            leaves.append(n)
            chains.append([n] + ancestors)
            return
        for i, child in enumerate(n.children):
            indices[id(child)] = i
            walk(child, [n] + ancestors)

    indices[id(root)] = 0
    walk(root, [])
    return leaves, chains, indices


def extract_path_contexts(
    root: SyntaxNode,
    token_vocab: Vocabulary,
    path_vocab: Vocabulary,
    max_path_length: int = DEFAULT_MAX_PATH_LENGTH,
    max_path_width: int = DEFAULT_MAX_PATH_WIDTH,
    frozen: bool = False,
) -> list[PathContext]:
    """Enumerate one encoded context per unordered leaf pair, earlier leaf
    first, keeping pairs whose path has at most max_path_length nodes and
    whose branch spread at the top node is at most max_path_width."""
    if max_path_length < 2:
        raise ValueError("max_path_length must be >= 2")
    if max_path_width < 1:
        raise ValueError("max_path_width must be >= 1")
    leaves, chains, indices = _collect_leaf_info(root)
    if len(leaves) < 2:
        raise NoLeaves(f"tree has {len(leaves)} leaves; need at least 2")

    contexts: list[PathContext] = []
    positions = [{id(n): depth for depth, n in enumerate(chain)} for chain in chains]
    for i in range(len(leaves)):
        chain_i = chains[i]
        pos_i = positions[i]
        for j in range(i + 1, len(leaves)):
            chain_j = chains[j]
            # Lowest common ancestor: first node of j's chain also on i's chain.
            for depth_j, candidate in enumerate(chain_j):
                depth_i = pos_i.get(id(candidate))
                if depth_i is not None:
                    break
            node_count = depth_i + depth_j + 1
            if node_count > max_path_length:
                continue
            # Leaves cannot be ancestors, so both depths are >= 1 and the
            # nodes just below the common ancestor identify the two branches.
            branch_i = chain_i[depth_i - 1]
            branch_j = chain_j[depth_j - 1]
            width = abs(indices[id(branch_j)] - indices[id(branch_i)])
            if width > max_path_width:
                continue
            up_kinds = [chain_i[d].kind for d in range(1, depth_i)]
            down_kinds = [chain_j[d].kind for d in range(depth_j - 1, 0, -1)]
            path_str = "^".join(up_kinds + [candidate.kind])
            for kind in down_kinds:
                path_str += "~" + kind
            contexts.append(
                PathContext(
                    start_id=token_vocab.intern(leaves[i].token_text, frozen),
                    path_id=path_vocab.intern(path_str, frozen),
                    end_id=token_vocab.intern(leaves[j].token_text, frozen),
                )
            )
    return contexts


def make_function_id(module_id: str, name: str, ordinal: int) -> str:
    return f"{module_id}:{name}:{ordinal}"


def build_record(
    source: str,
    fn_id: str,
    module_id: str,
    token_vocab: Vocabulary,
    path_vocab: Vocabulary,
    max_path_length: int = DEFAULT_MAX_PATH_LENGTH,
    max_path_width: int = DEFAULT_MAX_PATH_WIDTH,
    frozen: bool = False,
    grammar=DEFAULT_GRAMMAR,
    root: SyntaxNode | None = None,
) -> FunctionRecord:
    """Parse one function and produce its corpus record."""
    if root is None:
        root = grammar.parse_function(source)
    name = grammar.function_name(root)
    name_tokens = split_name(name)
    if not name_tokens:
        raise UnparsableSource(f"function name {name!r} yields no subtokens")
    contexts = extract_path_contexts(
        root, token_vocab, path_vocab, max_path_length, max_path_width, frozen
    )
    return FunctionRecord(
        id=fn_id,
        module_id=module_id,
        name_tokens=name_tokens,
        contexts=contexts,
        source_sha=source_sha(source),
    )


def extract_file(
    source: str,
    module_id: str,
    token_vocab: Vocabulary,
    path_vocab: Vocabulary,
    max_path_length: int = DEFAULT_MAX_PATH_LENGTH,
    max_path_width: int = DEFAULT_MAX_PATH_WIDTH,
    frozen: bool = False,
    grammar=DEFAULT_GRAMMAR,
) -> list[FunctionRecord]:
    """Extract a record for every function definition in a source file.
    Functions that fail extraction (no leaves, unusable name) are skipped."""
    records: list[FunctionRecord] = []
    for ordinal, (root, fn_source) in enumerate(grammar.parse_file_with_sources(source)):
        try:
            name = grammar.function_name(root)
        except UnparsableSource:
            continue
        fn_id = make_function_id(module_id, name, ordinal)
        try:
            records.append(
                build_record(
                    fn_source,
                    fn_id,
                    module_id,
                    token_vocab,
                    path_vocab,
                    max_path_length,
                    max_path_width,
                    frozen,
                    grammar,
                    root=root,
                )
            )
        except (NoLeaves, UnparsableSource):
            continue
    return records


def write_corpus(records: Iterable[FunctionRecord]) -> str:
    return "\n".join(json.dumps(r.to_json_obj()) for r in records) + "\n"


def read_corpus(text: str) -> list[FunctionRecord]:
    records = []
    for line in text.splitlines():
        line = line.strip()
        if line:
            records.append(FunctionRecord.from_json_obj(json.loads(line)))
    return records
