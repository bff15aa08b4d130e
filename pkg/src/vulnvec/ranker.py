"""Corpus-frequency ranking of path contexts.

Contexts that occur too often carry no discriminative signal and contexts
that occur too rarely inflate the input dimensionality, so only those whose
corpus count lies inside [min_count, max_count] survive.
"""

from __future__ import annotations

import json
from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable

from .contexts import FunctionRecord, PathContext
from .errors import EmptyCorpus

DEFAULT_MIN_COUNT = 2
DEFAULT_MAX_COUNT = 10_000


@dataclass(frozen=True)
class FilterBounds:
    min_count: int = DEFAULT_MIN_COUNT
    max_count: int = DEFAULT_MAX_COUNT

    def __post_init__(self):
        if not (1 <= self.min_count <= self.max_count):
            raise ValueError(
                f"bounds must satisfy 1 <= min <= max, got ({self.min_count}, {self.max_count})"
            )


@dataclass
class ContextFrequencyTable:
    """Multiset counts of every context triple across the corpus."""

    counts: dict[PathContext, int] = field(default_factory=dict)
    total_functions: int = 0

    def count(self, ctx: PathContext) -> int:
        return self.counts.get(ctx, 0)

    def to_jsonl(self) -> str:
        lines = [
            json.dumps({"ctx": list(ctx), "n": n}) for ctx, n in sorted(self.counts.items())
        ]
        lines.append(json.dumps({"total_functions": self.total_functions}))
        return "\n".join(lines) + "\n"

    @classmethod
    def from_jsonl(cls, text: str) -> "ContextFrequencyTable":
        counts: dict[PathContext, int] = {}
        total = 0
        for line in text.splitlines():
            line = line.strip()
            if not line:
                continue
            obj = json.loads(line)
            if "total_functions" in obj:
                total = obj["total_functions"]
            else:
                counts[PathContext(*obj["ctx"])] = obj["n"]
        return cls(counts=counts, total_functions=total)


def build_frequency_table(corpus: Iterable[FunctionRecord]) -> ContextFrequencyTable:
    """Count every context occurrence; a context appearing twice in one
    function counts twice."""
    counter: Counter[PathContext] = Counter()
    total = 0
    for record in corpus:
        total += 1
        counter.update(record.contexts)
    if total == 0:
        raise EmptyCorpus("frequency table needs at least one function")
    return ContextFrequencyTable(counts=dict(counter), total_functions=total)


def filter_contexts(
    record: FunctionRecord, table: ContextFrequencyTable, bounds: FilterBounds
) -> FunctionRecord:
    """Keep contexts whose corpus count is within bounds, preserving order.
    A record can come back with an empty context list; the caller decides
    whether to exclude it."""
    surviving = [
        ctx
        for ctx in record.contexts
        if bounds.min_count <= table.count(ctx) <= bounds.max_count
    ]
    return FunctionRecord(
        id=record.id,
        module_id=record.module_id,
        name_tokens=list(record.name_tokens),
        contexts=surviving,
        source_sha=record.source_sha,
    )
