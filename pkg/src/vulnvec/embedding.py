"""Attention network that turns a bag of path contexts into a fixed-length
code vector, trained by predicting the function's leading name subtoken.

Everything is plain numpy with hand-written gradients so the backward pass
can be checked against finite differences. Forward passes are pure; training
mutates one model under a seeded generator and is bit-reproducible.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import blockio
from .contexts import FunctionRecord, PathContext, Vocabulary
from .errors import (
    DimensionMismatch,
    EmptyBag,
    EmptyCorpus,
    NonFiniteLoss,
)

INITIAL_MODEL_VERSION = "v1"


@dataclass
class TrainConfig:
    dim_token: int = 128
    dim_path: int = 128
    dim_code: int = 128
    learning_rate: float = 0.01
    momentum: float = 0.0
    epochs: int = 100
    batch_size: int = 8
    max_contexts_per_function: int = 200
    init_scale: float = 0.05
    seed: int = 0


@dataclass
class EmbeddingModel:
    token_table: np.ndarray      # (token rows, dim_token), row 0 = UNK
    path_table: np.ndarray       # (path rows, dim_path), row 0 = UNK
    combine_weights: np.ndarray  # (dim_code, 2*dim_token + dim_path)
    attention_vector: np.ndarray # (dim_code,)
    name_output: np.ndarray      # (name rows, dim_code)
    names: list[str] = field(default_factory=list)  # index -> name subtoken, 0 = UNK
    version: str = INITIAL_MODEL_VERSION
    seed: int = 0

    @property
    def dim_code(self) -> int:
        return self.combine_weights.shape[0]

    @property
    def dim_token(self) -> int:
        return self.token_table.shape[1]

    @property
    def dim_path(self) -> int:
        return self.path_table.shape[1]

    def copy(self) -> "EmbeddingModel":
        return EmbeddingModel(
            token_table=self.token_table.copy(),
            path_table=self.path_table.copy(),
            combine_weights=self.combine_weights.copy(),
            attention_vector=self.attention_vector.copy(),
            name_output=self.name_output.copy(),
            names=list(self.names),
            version=self.version,
            seed=self.seed,
        )


@dataclass
class CodeVector:
    values: np.ndarray
    model_version: str


@dataclass
class AttentionWeights:
    weights: np.ndarray


@dataclass
class TrainResult:
    model: EmbeddingModel
    loss_log: list[float]


def new_model(
    token_rows: int,
    path_rows: int,
    name_rows: int,
    config: TrainConfig,
    names: list[str] | None = None,
) -> EmbeddingModel:
    rng = np.random.default_rng(config.seed)
    s = config.init_scale

    def init(*shape):
        return rng.uniform(-s, s, size=shape)

    return EmbeddingModel(
        token_table=init(token_rows, config.dim_token),
        path_table=init(path_rows, config.dim_path),
        combine_weights=init(config.dim_code, 2 * config.dim_token + config.dim_path),
        attention_vector=init(config.dim_code),
        name_output=init(name_rows, config.dim_code),
        names=list(names) if names else [],
        seed=config.seed,
    )


def _safe_rows(ids: np.ndarray, rows: int) -> np.ndarray:
    # Ids beyond the table (vocab grew after training) fall back to UNK.
    return np.where(ids < rows, ids, 0)


def _context_arrays(contexts: list[PathContext]):
    arr = np.asarray(contexts, dtype=np.int64).reshape(len(contexts), 3)
    return arr[:, 0], arr[:, 1], arr[:, 2]


def embed_context(pc: PathContext, model: EmbeddingModel) -> np.ndarray:
    """tanh of the combine matrix applied to the concatenated start-token,
    path, end-token embeddings."""
    return embed_contexts([pc], model)[0]


def embed_contexts(contexts: list[PathContext], model: EmbeddingModel) -> np.ndarray:
    if not contexts:
        raise EmptyBag("no contexts to embed")
    s, p, e = _context_arrays(contexts)
    x = np.concatenate(
        [
            model.token_table[_safe_rows(s, model.token_table.shape[0])],
            model.path_table[_safe_rows(p, model.path_table.shape[0])],
            model.token_table[_safe_rows(e, model.token_table.shape[0])],
        ],
        axis=1,
    )
    return np.tanh(x @ model.combine_weights.T)


def attention_pool(
    context_vectors: np.ndarray, model: EmbeddingModel
) -> tuple[CodeVector, AttentionWeights]:
    """Softmax-weighted sum of context vectors; the weights come back for
    explainability."""
    vectors = np.atleast_2d(np.asarray(context_vectors, dtype=np.float64))
    if vectors.shape[0] == 0:
        raise EmptyBag("attention pool needs at least one context vector")
    if vectors.shape[1] != model.dim_code:
        raise DimensionMismatch(
            f"context vectors have dim {vectors.shape[1]}, model expects {model.dim_code}"
        )
    scores = vectors @ model.attention_vector
    weights = _softmax(scores)
    pooled = weights @ vectors
    return CodeVector(values=pooled, model_version=model.version), AttentionWeights(weights)


def predict_name(v: CodeVector, model: EmbeddingModel) -> np.ndarray:
    values = v.values if isinstance(v, CodeVector) else np.asarray(v, dtype=np.float64)
    if values.shape != (model.dim_code,):
        raise DimensionMismatch(
            f"code vector has shape {values.shape}, model expects ({model.dim_code},)"
        )
    return _softmax(model.name_output @ values)


def export_code_vector(record: FunctionRecord, model: EmbeddingModel) -> CodeVector:
    if not record.contexts:
        raise EmptyBag(f"record {record.id} has no contexts")
    pooled, _ = attention_pool(embed_contexts(record.contexts, model), model)
    return pooled


def _softmax(scores: np.ndarray) -> np.ndarray:
    shifted = scores - np.max(scores)
    exp = np.exp(shifted)
    return exp / exp.sum()


# -- training ----------------------------------------------------------------


def _log_softmax(scores: np.ndarray) -> np.ndarray:
    shifted = scores - np.max(scores)
    return shifted - np.log(np.exp(shifted).sum())


def _forward_backward(model: EmbeddingModel, s, p, e, target: int):
    """Loss and gradients for one function. Returns (nll, grads dict)."""
    tok, pat = model.token_table, model.path_table
    w, a, u = model.combine_weights, model.attention_vector, model.name_output
    dt, dp = model.dim_token, model.dim_path

    x = np.concatenate([tok[s], pat[p], tok[e]], axis=1)      # (n, 2dt+dp)
    c = np.tanh(x @ w.T)                                       # (n, d)
    scores = c @ a                                             # (n,)
    alpha = _softmax(scores)
    v = alpha @ c                                              # (d,)
    logits = u @ v
    log_probs = _log_softmax(logits)
    nll = -log_probs[target]

    dlogits = np.exp(log_probs)
    dlogits[target] -= 1.0
    grad_u = np.outer(dlogits, v)
    dv = u.T @ dlogits

    dalpha = c @ dv
    dc = np.outer(alpha, dv)
    dscores = alpha * (dalpha - alpha @ dalpha)
    grad_a = dscores @ c
    dc += np.outer(dscores, a)

    dz = dc * (1.0 - c * c)
    grad_w = dz.T @ x
    dx = dz @ w

    grad_tok = np.zeros_like(tok)
    grad_pat = np.zeros_like(pat)
    np.add.at(grad_tok, s, dx[:, :dt])
    np.add.at(grad_pat, p, dx[:, dt : dt + dp])
    np.add.at(grad_tok, e, dx[:, dt + dp :])

    return nll, {
        "token_table": grad_tok,
        "path_table": grad_pat,
        "combine_weights": grad_w,
        "attention_vector": grad_a,
        "name_output": grad_u,
    }


def function_loss(model: EmbeddingModel, record: FunctionRecord, target: int) -> float:
    s, p, e = _context_arrays(record.contexts)
    s = _safe_rows(s, model.token_table.shape[0])
    p = _safe_rows(p, model.path_table.shape[0])
    e = _safe_rows(e, model.token_table.shape[0])
    nll, _ = _forward_backward(model, s, p, e, target)
    return float(nll)


def corpus_loss(model: EmbeddingModel, corpus: list[FunctionRecord], targets: list[int]) -> float:
    """Mean negative log-likelihood over all contexts of every function."""
    total = 0.0
    for record, target in zip(corpus, targets):
        total += function_loss(model, record, target)
    return total / len(corpus)


def _name_targets(corpus: list[FunctionRecord], name_vocab: Vocabulary, frozen: bool) -> list[int]:
    return [name_vocab.intern(r.name_tokens[0], frozen=frozen) for r in corpus]


def train_embeddings(
    corpus: list[FunctionRecord],
    token_vocab: Vocabulary,
    path_vocab: Vocabulary,
    config: TrainConfig,
    init_model: EmbeddingModel | None = None,
) -> TrainResult:
    """Minibatch gradient descent on the name-prediction cross entropy.

    With init_model the parameters warm-start from it; embedding tables grow
    for vocabulary entries added since, new rows freshly initialized. The
    loss log holds the full-corpus loss before training and after each epoch.
    """
    corpus = [r for r in corpus if r.contexts and r.name_tokens]
    if not corpus:
        raise EmptyCorpus("no trainable functions (need contexts and a name)")

    name_vocab = Vocabulary()
    if init_model is not None:
        for name in init_model.names[1:]:
            name_vocab.intern(name)
    targets = _name_targets(corpus, name_vocab, frozen=False)
    names = ["<unk>"] + [
        n for n, _ in sorted(name_vocab.entries.items(), key=lambda kv: kv[1])
    ]

    rng = np.random.default_rng(config.seed)
    if init_model is None:
        model = new_model(token_vocab.size, path_vocab.size, len(names), config, names)
    else:
        model = _grow_model(init_model, token_vocab.size, path_vocab.size, len(names), config, rng)
        model.names = names

    params = {
        "token_table": model.token_table,
        "path_table": model.path_table,
        "combine_weights": model.combine_weights,
        "attention_vector": model.attention_vector,
        "name_output": model.name_output,
    }
    velocity = {k: np.zeros_like(v) for k, v in params.items()}

    prepared = []
    for record in corpus:
        s, p, e = _context_arrays(record.contexts)
        prepared.append(
            (
                _safe_rows(s, model.token_table.shape[0]),
                _safe_rows(p, model.path_table.shape[0]),
                _safe_rows(e, model.token_table.shape[0]),
            )
        )

    loss_log = [corpus_loss(model, corpus, targets)]
    cap = config.max_contexts_per_function
    for epoch in range(config.epochs):
        order = rng.permutation(len(corpus))
        for start in range(0, len(order), config.batch_size):
            batch = order[start : start + config.batch_size]
            grads = {k: np.zeros_like(v) for k, v in params.items()}
            for idx in batch:
                s, p, e = prepared[idx]
                if len(s) > cap:
                    keep = rng.choice(len(s), size=cap, replace=False)
                    s, p, e = s[keep], p[keep], e[keep]
                nll, g = _forward_backward(model, s, p, e, targets[idx])
                for k in grads:
                    grads[k] += g[k]
            scale = 1.0 / len(batch)
            for k, param in params.items():
                velocity[k] = config.momentum * velocity[k] - config.learning_rate * scale * grads[k]
                param += velocity[k]
        epoch_loss = corpus_loss(model, corpus, targets)
        if not np.isfinite(epoch_loss):
            raise NonFiniteLoss(
                f"loss became non-finite at epoch {epoch + 1} "
                f"(lr={config.learning_rate}, momentum={config.momentum}); "
                "reduce the learning rate"
            )
        loss_log.append(epoch_loss)
    return TrainResult(model=model, loss_log=loss_log)


def _grow_model(
    base: EmbeddingModel,
    token_rows: int,
    path_rows: int,
    name_rows: int,
    config: TrainConfig,
    rng: np.random.Generator,
) -> EmbeddingModel:
    model = base.copy()
    s = config.init_scale

    def grown(table: np.ndarray, rows: int) -> np.ndarray:
        if rows <= table.shape[0]:
            return table
        extra = rng.uniform(-s, s, size=(rows - table.shape[0], table.shape[1]))
        return np.vstack([table, extra])

    model.token_table = grown(model.token_table, token_rows)
    model.path_table = grown(model.path_table, path_rows)
    model.name_output = grown(model.name_output, name_rows)
    return model


def training_accuracy(
    model: EmbeddingModel, corpus: list[FunctionRecord], name_vocab: Vocabulary
) -> float:
    """Top-1 accuracy of the name prediction task."""
    hits = 0
    for record in corpus:
        target = name_vocab.lookup(record.name_tokens[0])
        vector = export_code_vector(record, model)
        if int(np.argmax(predict_name(vector, model))) == target:
            hits += 1
    return hits / len(corpus)


def name_vocab_of(model: EmbeddingModel) -> Vocabulary:
    vocab = Vocabulary()
    for name in model.names[1:]:
        vocab.intern(name)
    return vocab


# -- serialization -----------------------------------------------------------


def model_to_bytes(model: EmbeddingModel) -> bytes:
    header = {
        "kind": "embedding",
        "dims": {
            "token": model.dim_token,
            "path": model.dim_path,
            "code": model.dim_code,
        },
        "vocab_sizes": {
            "token": model.token_table.shape[0],
            "path": model.path_table.shape[0],
            "name": model.name_output.shape[0],
        },
        "version": model.version,
        "seed": model.seed,
        "names": model.names,
    }
    blocks = {
        "token_table": model.token_table,
        "path_table": model.path_table,
        "combine_weights": model.combine_weights,
        "attention_vector": model.attention_vector,
        "name_output": model.name_output,
    }
    return blockio.write_block_file(header, blocks)


def model_from_bytes(data: bytes) -> EmbeddingModel:
    header, blocks = blockio.read_block_file(data)
    if header.get("kind") != "embedding":
        raise ValueError(f"expected an embedding model file, got {header.get('kind')!r}")
    return EmbeddingModel(
        token_table=blocks["token_table"],
        path_table=blocks["path_table"],
        combine_weights=blocks["combine_weights"],
        attention_vector=blocks["attention_vector"],
        name_output=blocks["name_output"],
        names=list(header["names"]),
        version=header["version"],
        seed=header["seed"],
    )


def bump_version(version: str) -> str:
    if version.startswith("v") and version[1:].isdigit():
        return f"v{int(version[1:]) + 1}"
    return version + ".1"
