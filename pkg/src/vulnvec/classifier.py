"""Weakness classification over code vectors.

Two 3-layer networks (one fed the plain function vector, one the composite
vector) produce independent per-label probabilities; a per-label logistic
regression fuses the two probability streams. A separate small ensemble
(fully connected net + linear regression) estimates expected bug counts.

Gradients are hand-written numpy, matching the embedding module's style, so
both nets are finite-difference checkable.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import blockio
from .errors import (
    DimensionMismatch,
    EmptyTrainSet,
    EmptyValidatedSet,
    FineTuneRegression,
    NonFiniteLoss,
)

CWE_LABELS = ("CWE119", "CWE120", "CWE469", "CWE476", "CWE_OTHER")
APP_LOGIC = "APP_LOGIC"


@dataclass
class ClassifierConfig:
    hidden1: int = 128
    hidden2: int = 64
    learning_rate: float = 0.1
    momentum: float = 0.9
    epochs: int = 200
    batch_size: int = 16
    holdout_fraction: float = 0.1
    fusion_steps: int = 800
    fusion_learning_rate: float = 0.5
    init_scale: float = 0.2
    seed: int = 0


@dataclass
class ThreeLayerNet:
    w1: np.ndarray  # (hidden1, input_dim)
    b1: np.ndarray
    w2: np.ndarray  # (hidden2, hidden1)
    b2: np.ndarray
    w3: np.ndarray  # (labels, hidden2)
    b3: np.ndarray
    labels: tuple[str, ...]

    @property
    def input_dim(self) -> int:
        return self.w1.shape[1]

    def copy(self) -> "ThreeLayerNet":
        return ThreeLayerNet(
            self.w1.copy(), self.b1.copy(), self.w2.copy(), self.b2.copy(),
            self.w3.copy(), self.b3.copy(), tuple(self.labels),
        )

    def logits(self, x: np.ndarray) -> np.ndarray:
        h1 = np.maximum(0.0, x @ self.w1.T + self.b1)
        h2 = np.maximum(0.0, h1 @ self.w2.T + self.b2)
        return h2 @ self.w3.T + self.b3

    def probabilities(self, x: np.ndarray) -> np.ndarray:
        """Per-label sigmoid outputs, each strictly inside (0, 1)."""
        if x.shape[-1] != self.input_dim:
            raise DimensionMismatch(
                f"input dim {x.shape[-1]} != net input dim {self.input_dim}"
            )
        return _sigmoid(self.logits(x))


@dataclass
class FusionModel:
    w_vanilla: np.ndarray   # (labels,)
    w_composite: np.ndarray
    bias: np.ndarray
    labels: tuple[str, ...]

    def fuse(self, p_vanilla: np.ndarray, p_composite: np.ndarray) -> np.ndarray:
        return _sigmoid(self.w_vanilla * p_vanilla + self.w_composite * p_composite + self.bias)

    def copy(self) -> "FusionModel":
        return FusionModel(
            self.w_vanilla.copy(), self.w_composite.copy(), self.bias.copy(),
            tuple(self.labels),
        )


@dataclass
class DualModels:
    vanilla: ThreeLayerNet
    composite: ThreeLayerNet
    fusion: FusionModel

    @property
    def labels(self) -> tuple[str, ...]:
        return self.vanilla.labels

    def copy(self) -> "DualModels":
        return DualModels(self.vanilla.copy(), self.composite.copy(), self.fusion.copy())


@dataclass
class DualPrediction:
    labels: tuple[str, ...]
    p_vanilla: np.ndarray
    p_composite: np.ndarray
    p_fused: np.ndarray

    def as_dict(self) -> list[dict]:
        return [
            {
                "label": label,
                "p_vanilla": float(self.p_vanilla[i]),
                "p_composite": float(self.p_composite[i]),
                "p_fused": float(self.p_fused[i]),
            }
            for i, label in enumerate(self.labels)
        ]


def _sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z, dtype=np.float64)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    expz = np.exp(z[~pos])
    out[~pos] = expz / (1.0 + expz)
    return out


def _bce_and_grad(logits: np.ndarray, y: np.ndarray):
    """Mean binary cross entropy computed from logits, plus d loss / d logits."""
    loss = np.mean(np.maximum(logits, 0.0) - logits * y + np.log1p(np.exp(-np.abs(logits))))
    grad = (_sigmoid(logits) - y) / logits.size
    return loss, grad


def new_net(input_dim: int, labels: tuple[str, ...], config: ClassifierConfig,
            rng: np.random.Generator) -> ThreeLayerNet:
    s = config.init_scale

    def init(*shape):
        return rng.uniform(-s, s, size=shape)

    return ThreeLayerNet(
        w1=init(config.hidden1, input_dim), b1=np.zeros(config.hidden1),
        w2=init(config.hidden2, config.hidden1), b2=np.zeros(config.hidden2),
        w3=init(len(labels), config.hidden2), b3=np.zeros(len(labels)),
        labels=tuple(labels),
    )


def _net_forward_backward(net: ThreeLayerNet, x: np.ndarray, y: np.ndarray):
    h1_pre = x @ net.w1.T + net.b1
    h1 = np.maximum(0.0, h1_pre)
    h2_pre = h1 @ net.w2.T + net.b2
    h2 = np.maximum(0.0, h2_pre)
    logits = h2 @ net.w3.T + net.b3

    loss, dlogits = _bce_and_grad(logits, y)

    grad_w3 = dlogits.T @ h2
    grad_b3 = dlogits.sum(axis=0)
    dh2 = (dlogits @ net.w3) * (h2_pre > 0)
    grad_w2 = dh2.T @ h1
    grad_b2 = dh2.sum(axis=0)
    dh1 = (dh2 @ net.w2) * (h1_pre > 0)
    grad_w1 = dh1.T @ x
    grad_b1 = dh1.sum(axis=0)

    return loss, {
        "w1": grad_w1, "b1": grad_b1,
        "w2": grad_w2, "b2": grad_b2,
        "w3": grad_w3, "b3": grad_b3,
    }


def net_loss(net: ThreeLayerNet, x: np.ndarray, y: np.ndarray) -> float:
    loss, _ = _bce_and_grad(net.logits(x), y)
    return float(loss)


def _train_net(net: ThreeLayerNet, x: np.ndarray, y: np.ndarray,
               config: ClassifierConfig, rng: np.random.Generator) -> None:
    params = {"w1": net.w1, "b1": net.b1, "w2": net.w2, "b2": net.b2,
              "w3": net.w3, "b3": net.b3}
    velocity = {k: np.zeros_like(v) for k, v in params.items()}
    n = x.shape[0]
    for epoch in range(config.epochs):
        order = rng.permutation(n)
        for start in range(0, n, config.batch_size):
            batch = order[start : start + config.batch_size]
            loss, grads = _net_forward_backward(net, x[batch], y[batch])
            if not np.isfinite(loss):
                raise NonFiniteLoss(f"classifier loss non-finite at epoch {epoch + 1}")
            for k, param in params.items():
                velocity[k] = config.momentum * velocity[k] - config.learning_rate * grads[k]
                param += velocity[k]


def _fit_fusion(p_vanilla: np.ndarray, p_composite: np.ndarray, y: np.ndarray,
                labels: tuple[str, ...], config: ClassifierConfig) -> FusionModel:
    """Per-label logistic regression on the two probability streams."""
    n_labels = len(labels)
    wv = np.zeros(n_labels)
    wc = np.zeros(n_labels)
    b = np.zeros(n_labels)
    n = y.shape[0]
    for _ in range(config.fusion_steps):
        z = p_vanilla * wv + p_composite * wc + b
        err = (_sigmoid(z) - y) / n
        wv -= config.fusion_learning_rate * (err * p_vanilla).sum(axis=0)
        wc -= config.fusion_learning_rate * (err * p_composite).sum(axis=0)
        b -= config.fusion_learning_rate * err.sum(axis=0)
    return FusionModel(w_vanilla=wv, w_composite=wc, bias=b, labels=tuple(labels))


def train_dual(
    x_vanilla: np.ndarray,
    x_composite: np.ndarray,
    y: np.ndarray,
    config: ClassifierConfig,
    labels: tuple[str, ...] = CWE_LABELS,
) -> DualModels:
    """Train both nets on a 90% split, then fit the per-label fusion on the
    held-out 10% so fusion weights are not driven by overfit probabilities."""
    x_vanilla = np.asarray(x_vanilla, dtype=np.float64)
    x_composite = np.asarray(x_composite, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x_vanilla.shape[0] == 0:
        raise EmptyTrainSet("classifier training set is empty")
    if y.shape[1] != len(labels):
        raise DimensionMismatch(f"label matrix has {y.shape[1]} columns, expected {len(labels)}")
    if x_composite.shape[1] != 2 * x_vanilla.shape[1]:
        raise DimensionMismatch(
            f"composite dim {x_composite.shape[1]} != 2 x vanilla dim {x_vanilla.shape[1]}"
        )

    rng = np.random.default_rng(config.seed)
    n = x_vanilla.shape[0]
    order = rng.permutation(n)
    n_holdout = max(1, round(config.holdout_fraction * n)) if n > 1 else 0
    holdout, fit = order[:n_holdout], order[n_holdout:]
    if fit.size == 0:
        fit = order

    vanilla = new_net(x_vanilla.shape[1], labels, config, rng)
    composite = new_net(x_composite.shape[1], labels, config, rng)
    _train_net(vanilla, x_vanilla[fit], y[fit], config, rng)
    _train_net(composite, x_composite[fit], y[fit], config, rng)

    # Labels whose holdout slice is single-class cannot anchor a logistic
    # fit; those fall back to the full set.
    fusion_idx = holdout if n_holdout > 0 else order
    p_v_all = vanilla.probabilities(x_vanilla)
    p_c_all = composite.probabilities(x_composite)
    fusion = _fit_fusion(p_v_all[fusion_idx], p_c_all[fusion_idx], y[fusion_idx], labels, config)
    degenerate = [
        i for i in range(len(labels))
        if np.all(y[fusion_idx, i] == y[fusion_idx, i][0])
    ]
    if degenerate:
        full_fit = _fit_fusion(p_v_all, p_c_all, y, labels, config)
        for i in degenerate:
            fusion.w_vanilla[i] = full_fit.w_vanilla[i]
            fusion.w_composite[i] = full_fit.w_composite[i]
            fusion.bias[i] = full_fit.bias[i]
    return DualModels(vanilla=vanilla, composite=composite, fusion=fusion)


def predict(v_vec: np.ndarray, c_vec: np.ndarray, models: DualModels) -> DualPrediction:
    v_vec = np.asarray(v_vec, dtype=np.float64)
    c_vec = np.asarray(c_vec, dtype=np.float64)
    p_v = models.vanilla.probabilities(v_vec.reshape(1, -1))[0]
    p_c = models.composite.probabilities(c_vec.reshape(1, -1))[0]
    p_f = models.fusion.fuse(p_v, p_c)
    return DualPrediction(
        labels=models.labels, p_vanilla=p_v, p_composite=p_c, p_fused=p_f
    )


@dataclass
class FineTuneReport:
    old_accuracy_before: dict[str, float] = field(default_factory=dict)
    old_accuracy_after: dict[str, float] = field(default_factory=dict)


def _widen_net(net: ThreeLayerNet, label: str) -> ThreeLayerNet:
    wide = net.copy()
    wide.w3 = np.vstack([wide.w3, np.zeros((1, wide.w3.shape[1]))])
    wide.b3 = np.concatenate([wide.b3, [0.0]])
    wide.labels = tuple(net.labels) + (label,)
    return wide


def label_accuracy(models: DualModels, x_v: np.ndarray, x_c: np.ndarray,
                   y: np.ndarray, threshold: float = 0.5) -> dict[str, float]:
    p_v = models.vanilla.probabilities(x_v)
    p_c = models.composite.probabilities(x_c)
    fused = models.fusion.fuse(p_v, p_c)
    out = {}
    for i, label in enumerate(models.labels[: y.shape[1]]):
        out[label] = float(np.mean((fused[:, i] >= threshold) == (y[:, i] > 0.5)))
    return out


def fine_tune_with_feedback(
    models: DualModels,
    x_vanilla: np.ndarray,
    x_composite: np.ndarray,
    y: np.ndarray,
    config: ClassifierConfig,
    old_set: tuple[np.ndarray, np.ndarray, np.ndarray] | None = None,
    max_regression: float = 0.05,
) -> tuple[DualModels, FineTuneReport]:
    """Widen both nets with a zero-initialized application-logic output unit
    and fine-tune every parameter on the validated set. When old_set is given
    the previously learned labels must not lose more than max_regression
    training accuracy on it."""
    x_vanilla = np.asarray(x_vanilla, dtype=np.float64)
    x_composite = np.asarray(x_composite, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x_vanilla.shape[0] == 0:
        raise EmptyValidatedSet("validated set is empty")
    wide_labels = tuple(models.labels) + (APP_LOGIC,)
    if y.shape[1] != len(wide_labels):
        raise DimensionMismatch(
            f"validated labels have {y.shape[1]} columns, expected {len(wide_labels)}"
        )

    report = FineTuneReport()
    if old_set is not None:
        report.old_accuracy_before = label_accuracy(models, *old_set)

    tuned = DualModels(
        vanilla=_widen_net(models.vanilla, APP_LOGIC),
        composite=_widen_net(models.composite, APP_LOGIC),
        fusion=FusionModel(
            w_vanilla=np.concatenate([models.fusion.w_vanilla, [0.0]]),
            w_composite=np.concatenate([models.fusion.w_composite, [0.0]]),
            bias=np.concatenate([models.fusion.bias, [0.0]]),
            labels=wide_labels,
        ),
    )
    if config.epochs > 0:
        rng = np.random.default_rng(config.seed)
        _train_net(tuned.vanilla, x_vanilla, y, config, rng)
        _train_net(tuned.composite, x_composite, y, config, rng)
        tuned.fusion = _fit_fusion(
            tuned.vanilla.probabilities(x_vanilla),
            tuned.composite.probabilities(x_composite),
            y,
            wide_labels,
            config,
        )

    if old_set is not None:
        report.old_accuracy_after = label_accuracy(tuned, *old_set)
        for label, before in report.old_accuracy_before.items():
            after = report.old_accuracy_after[label]
            if before - after >= max_regression:
                raise FineTuneRegression(
                    f"label {label} degraded from {before:.3f} to {after:.3f}"
                )
    return tuned, report


# -- bug count ensemble -------------------------------------------------------

N_EXTRA_FEATURES = 6  # sa_score, coverage, hotspot plus their presence mask


@dataclass
class BugCountModel:
    nn_w1: np.ndarray  # (hidden, features)
    nn_b1: np.ndarray
    nn_w2: np.ndarray  # (hidden,)
    nn_b2: float
    lin_w: np.ndarray  # (features,)
    lin_b: float

    @property
    def input_dim(self) -> int:
        return self.nn_w1.shape[1]


def bug_count_features(vector: np.ndarray, sa_score=None, coverage=None, hotspot=None) -> np.ndarray:
    """Feature layout: [code vector, scalars with missing as 0, presence mask]."""
    scalars = [sa_score, coverage, hotspot]
    values = [0.0 if s is None else float(s) for s in scalars]
    mask = [0.0 if s is None else 1.0 for s in scalars]
    return np.concatenate([np.asarray(vector, dtype=np.float64), values, mask])


def predict_bug_count(features: np.ndarray, model: BugCountModel) -> float:
    """Mean of the net and the linear regressor, clamped at zero."""
    features = np.asarray(features, dtype=np.float64)
    if features.shape != (model.input_dim,):
        raise DimensionMismatch(
            f"feature dim {features.shape} != model dim ({model.input_dim},)"
        )
    hidden = np.maximum(0.0, model.nn_w1 @ features + model.nn_b1)
    nn_out = float(model.nn_w2 @ hidden + model.nn_b2)
    lin_out = float(model.lin_w @ features + model.lin_b)
    return max(0.0, (nn_out + lin_out) / 2.0)


def train_bug_count(
    features: np.ndarray, counts: np.ndarray, config: ClassifierConfig, hidden: int = 16
) -> BugCountModel:
    """Fit both ensemble members by seeded gradient descent on squared error."""
    features = np.asarray(features, dtype=np.float64)
    counts = np.asarray(counts, dtype=np.float64)
    if features.shape[0] == 0:
        raise EmptyTrainSet("bug count training set is empty")
    rng = np.random.default_rng(config.seed)
    dim = features.shape[1]
    s = config.init_scale
    model = BugCountModel(
        nn_w1=rng.uniform(-s, s, size=(hidden, dim)),
        nn_b1=np.zeros(hidden),
        nn_w2=rng.uniform(-s, s, size=hidden),
        nn_b2=0.0,
        lin_w=np.zeros(dim),
        lin_b=0.0,
    )
    n = features.shape[0]
    lr = config.learning_rate * 0.1
    for _ in range(config.epochs):
        h_pre = features @ model.nn_w1.T + model.nn_b1
        h = np.maximum(0.0, h_pre)
        nn_out = h @ model.nn_w2 + model.nn_b2
        err_nn = (nn_out - counts) / n
        model.nn_w2 -= lr * (err_nn @ h)
        model.nn_b2 -= lr * err_nn.sum()
        dh = np.outer(err_nn, model.nn_w2) * (h_pre > 0)
        model.nn_w1 -= lr * (dh.T @ features)
        model.nn_b1 -= lr * dh.sum(axis=0)

        lin_out = features @ model.lin_w + model.lin_b
        err_lin = (lin_out - counts) / n
        model.lin_w -= lr * (err_lin @ features)
        model.lin_b -= lr * err_lin.sum()
    return model


# -- serialization --------------------------------------------------------------


def dual_models_to_bytes(models: DualModels, model_version: str = "") -> bytes:
    header = {
        "kind": "dual-classifier",
        "labels": list(models.labels),
        "model_version": model_version,
    }
    blocks = {}
    for prefix, net in (("vanilla", models.vanilla), ("composite", models.composite)):
        for name in ("w1", "b1", "w2", "b2", "w3", "b3"):
            blocks[f"{prefix}.{name}"] = getattr(net, name)
    blocks["fusion.w_vanilla"] = models.fusion.w_vanilla
    blocks["fusion.w_composite"] = models.fusion.w_composite
    blocks["fusion.bias"] = models.fusion.bias
    return blockio.write_block_file(header, blocks)


def dual_models_from_bytes(data: bytes) -> tuple[DualModels, str]:
    header, blocks = blockio.read_block_file(data)
    if header.get("kind") != "dual-classifier":
        raise ValueError(f"expected a dual-classifier file, got {header.get('kind')!r}")
    labels = tuple(header["labels"])

    def net(prefix):
        return ThreeLayerNet(
            w1=blocks[f"{prefix}.w1"], b1=blocks[f"{prefix}.b1"],
            w2=blocks[f"{prefix}.w2"], b2=blocks[f"{prefix}.b2"],
            w3=blocks[f"{prefix}.w3"], b3=blocks[f"{prefix}.b3"],
            labels=labels,
        )

    models = DualModels(
        vanilla=net("vanilla"),
        composite=net("composite"),
        fusion=FusionModel(
            w_vanilla=blocks["fusion.w_vanilla"],
            w_composite=blocks["fusion.w_composite"],
            bias=blocks["fusion.bias"],
            labels=labels,
        ),
    )
    return models, header.get("model_version", "")


def bug_count_to_bytes(model: BugCountModel) -> bytes:
    header = {"kind": "bug-count"}
    blocks = {
        "nn_w1": model.nn_w1,
        "nn_b1": model.nn_b1,
        "nn_w2": model.nn_w2,
        "nn_b2": np.asarray([model.nn_b2]),
        "lin_w": model.lin_w,
        "lin_b": np.asarray([model.lin_b]),
    }
    return blockio.write_block_file(header, blocks)


def bug_count_from_bytes(data: bytes) -> BugCountModel:
    header, blocks = blockio.read_block_file(data)
    if header.get("kind") != "bug-count":
        raise ValueError(f"expected a bug-count file, got {header.get('kind')!r}")
    return BugCountModel(
        nn_w1=blocks["nn_w1"],
        nn_b1=blocks["nn_b1"],
        nn_w2=blocks["nn_w2"],
        nn_b2=float(blocks["nn_b2"][0]),
        lin_w=blocks["lin_w"],
        lin_b=float(blocks["lin_b"][0]),
    )
