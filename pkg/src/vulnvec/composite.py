"""Module-level composite embeddings: a module aggregate is the mean of its
member function vectors, and a composite vector is the function vector with
its module aggregate concatenated on, so a downstream classifier can weigh
local and module-wide signal independently."""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Iterable

import numpy as np

from .embedding import CodeVector
from .errors import DimensionMismatch, EmptyModule, MixedModelVersions


@dataclass
class ModuleAggregate:
    module_id: str
    vector: np.ndarray
    member_count: int
    model_version: str


@dataclass
class CompositeVector:
    values: np.ndarray  # [function vector ; module aggregate], length 2d
    model_version: str


def build_module_aggregate(
    module_id: str, members: list[CodeVector]
) -> ModuleAggregate:
    """Componentwise mean over the member vectors, query function included."""
    if not members:
        raise EmptyModule(f"module {module_id!r} has no member vectors")
    versions = {m.model_version for m in members}
    if len(versions) > 1:
        raise MixedModelVersions(f"module {module_id!r} mixes versions {sorted(versions)}")
    dims = {m.values.shape for m in members}
    if len(dims) > 1:
        raise DimensionMismatch(f"module {module_id!r} mixes dims {sorted(dims)}")
    stacked = np.stack([m.values for m in members])
    return ModuleAggregate(
        module_id=module_id,
        vector=stacked.mean(axis=0),
        member_count=len(members),
        model_version=versions.pop(),
    )


def build_composite(fn_vec: CodeVector, agg: ModuleAggregate) -> CompositeVector:
    if fn_vec.values.shape != agg.vector.shape:
        raise DimensionMismatch(
            f"function dim {fn_vec.values.shape} != aggregate dim {agg.vector.shape}"
        )
    if fn_vec.model_version != agg.model_version:
        raise MixedModelVersions(
            f"function version {fn_vec.model_version} != aggregate version {agg.model_version}"
        )
    return CompositeVector(
        values=np.concatenate([fn_vec.values, agg.vector]),
        model_version=fn_vec.model_version,
    )


def aggregates_by_module(
    vectors: dict[str, CodeVector], module_of: dict[str, str]
) -> dict[str, ModuleAggregate]:
    """Group function vectors by module id and aggregate each group."""
    grouped: dict[str, list[CodeVector]] = {}
    for fn_id, vec in vectors.items():
        grouped.setdefault(module_of[fn_id], []).append(vec)
    return {
        module_id: build_module_aggregate(module_id, members)
        for module_id, members in grouped.items()
    }


def write_aggregates(aggregates: Iterable[ModuleAggregate]) -> str:
    lines = [
        json.dumps(
            {
                "module_id": a.module_id,
                "vec": [float(x) for x in a.vector],
                "n": a.member_count,
                "model_version": a.model_version,
            }
        )
        for a in aggregates
    ]
    return "\n".join(lines) + "\n" if lines else ""


def read_aggregates(text: str) -> dict[str, ModuleAggregate]:
    out = {}
    for line in text.splitlines():
        line = line.strip()
        if not line:
            continue
        obj = json.loads(line)
        out[obj["module_id"]] = ModuleAggregate(
            module_id=obj["module_id"],
            vector=np.asarray(obj["vec"], dtype=np.float64),
            member_count=obj["n"],
            model_version=obj["model_version"],
        )
    return out
