"""Developer feedback loop: votes move code vectors toward (positive) or
away from (negative) the bug-tagged function they were compared against.

The total displacement after n votes on a pair is alpha * ln(1 + n), so a
single application with the cumulative count and the per-vote incremental
step agree. Positive moves are capped at a fraction of the remaining gap so
repeated votes converge without ever overshooting the target. Moves use
Euclidean geometry and vectors are not renormalized afterwards; the cosine
similarity metric is scale-invariant, so only the direction change matters.
"""

from __future__ import annotations

import json
import math
import time
from dataclasses import dataclass, field

import numpy as np

from .contexts import FunctionRecord, Vocabulary
from .embedding import (
    EmbeddingModel,
    TrainConfig,
    TrainResult,
    bump_version,
    train_embeddings,
)
from .errors import CoincidentVectors, UnknownFunction

POSITIVE = "+"
NEGATIVE = "-"


@dataclass(frozen=True)
class AdjustmentConfig:
    alpha: float = 0.05       # proportionality constant for the log law
    guard: float = 0.9        # positive moves stop at this fraction of the gap

    def __post_init__(self):
        if self.alpha <= 0:
            raise ValueError("alpha must be > 0")
        if not (0 < self.guard <= 1):
            raise ValueError("guard must be in (0, 1]")


@dataclass
class FeedbackVote:
    source_fn: str
    target_fn: str
    polarity: str
    votes: int = 1
    timestamp: float = 0.0


def apply_feedback(
    v: np.ndarray,
    target: np.ndarray,
    polarity: str,
    votes: int,
    cfg: AdjustmentConfig = AdjustmentConfig(),
) -> np.ndarray:
    """Move v along the line to target by alpha * ln(1 + votes). Zero votes
    is the exact identity."""
    v = np.asarray(v, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    if votes <= 0:
        return v.copy()
    gap_vector = target - v
    gap = float(np.linalg.norm(gap_vector))
    if gap == 0.0:
        raise CoincidentVectors("source and target vectors coincide")
    step = cfg.alpha * math.log1p(votes)
    direction = gap_vector / gap
    if polarity == POSITIVE:
        return v + min(step, cfg.guard * gap) * direction
    if polarity == NEGATIVE:
        return v - step * direction
    raise ValueError(f"polarity must be '+' or '-', got {polarity!r}")


def incremental_step(cumulative_votes: int, cfg: AdjustmentConfig) -> float:
    """Step for the newest vote so the total obeys the log law:
    alpha * (ln(1 + n) - ln(n))."""
    if cumulative_votes < 1:
        raise ValueError("cumulative vote count must be >= 1")
    return cfg.alpha * (math.log1p(cumulative_votes) - math.log(cumulative_votes))


def apply_incremental_vote(
    v: np.ndarray,
    target: np.ndarray,
    polarity: str,
    cumulative_votes: int,
    cfg: AdjustmentConfig = AdjustmentConfig(),
) -> tuple[np.ndarray, float]:
    """Apply only the newest vote's share of the displacement. Returns the
    adjusted vector and the Euclidean distance actually moved."""
    v = np.asarray(v, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    gap_vector = target - v
    gap = float(np.linalg.norm(gap_vector))
    if gap == 0.0:
        raise CoincidentVectors("source and target vectors coincide")
    step = incremental_step(cumulative_votes, cfg)
    direction = gap_vector / gap
    if polarity == POSITIVE:
        moved = min(step, cfg.guard * gap)
        return v + moved * direction, moved
    if polarity == NEGATIVE:
        return v - step * direction, step
    raise ValueError(f"polarity must be '+' or '-', got {polarity!r}")


@dataclass
class VoteStore:
    """Cumulative vote counts with an append-only event log. Replaying the
    log reconstructs the counts exactly."""

    known_ids: set[str] | None = None
    events: list[dict] = field(default_factory=list)
    counts: dict[tuple[str, str, str], int] = field(default_factory=dict)

    def record_vote(self, source_fn: str, target_fn: str, polarity: str,
                    timestamp: float | None = None) -> int:
        if polarity not in (POSITIVE, NEGATIVE):
            raise ValueError(f"polarity must be '+' or '-', got {polarity!r}")
        if source_fn == target_fn:
            raise ValueError("source and target must differ")
        if self.known_ids is not None:
            for fn_id in (source_fn, target_fn):
                if fn_id not in self.known_ids:
                    raise UnknownFunction(f"unknown function id {fn_id!r}")
        key = (source_fn, target_fn, polarity)
        self.counts[key] = self.counts.get(key, 0) + 1
        self.events.append(
            {
                "src": source_fn,
                "tgt": target_fn,
                "polarity": polarity,
                "ts": time.time() if timestamp is None else timestamp,
            }
        )
        return self.counts[key]

    def count(self, source_fn: str, target_fn: str, polarity: str) -> int:
        return self.counts.get((source_fn, target_fn, polarity), 0)

    def summary_for(self, fn_id: str) -> dict:
        given = sum(n for (s, _, _), n in self.counts.items() if s == fn_id)
        received = sum(n for (_, t, _), n in self.counts.items() if t == fn_id)
        return {"given": given, "received": received}

    def to_jsonl(self) -> str:
        return "\n".join(json.dumps(e) for e in self.events) + "\n" if self.events else ""

    @classmethod
    def from_jsonl(cls, text: str, known_ids: set[str] | None = None) -> "VoteStore":
        store = cls(known_ids=known_ids)
        for line in text.splitlines():
            line = line.strip()
            if not line:
                continue
            event = json.loads(line)
            key = (event["src"], event["tgt"], event["polarity"])
            store.counts[key] = store.counts.get(key, 0) + 1
            store.events.append(event)
        return store


def warm_start_retrain(
    model: EmbeddingModel,
    corpus: list[FunctionRecord],
    token_vocab: Vocabulary,
    path_vocab: Vocabulary,
    config: TrainConfig,
) -> TrainResult:
    """Retrain starting from the current parameters. Vocabulary rows added
    since the last training round get fresh initialization; everything else
    warm-starts exactly. The version tag is bumped so stored vectors and
    overlays tied to the old version can be invalidated."""
    result = train_embeddings(corpus, token_vocab, path_vocab, config, init_model=model)
    result.model.version = bump_version(model.version)
    return result


# -- overlay persistence -------------------------------------------------------


def write_overlays(overlays: dict[str, np.ndarray], model_version: str) -> str:
    lines = [
        json.dumps({"id": fn_id, "vec": [float(x) for x in vec], "model_version": model_version})
        for fn_id, vec in overlays.items()
    ]
    return "\n".join(lines) + "\n" if lines else ""


def read_overlays(text: str, model_version: str | None = None) -> dict[str, np.ndarray]:
    """Load overlay vectors; entries from other model versions are dropped,
    since a retrain invalidates them."""
    out: dict[str, np.ndarray] = {}
    for line in text.splitlines():
        line = line.strip()
        if not line:
            continue
        obj = json.loads(line)
        if model_version is not None and obj.get("model_version") != model_version:
            continue
        out[obj["id"]] = np.asarray(obj["vec"], dtype=np.float64)
    return out
