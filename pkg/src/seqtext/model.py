"""Embedding -> recurrent cell -> dense relu layer -> classification head.

Binary models end in a single sigmoid unit trained with binary
cross-entropy; multiclass models end in a C-way softmax trained with
categorical cross-entropy (one-hot or sparse integer targets). Both
heads share the fused gradient at the logits: probabilities minus
targets.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple, Optional

import numpy as np

from . import cells
from .embedding import EmbeddingMatrix
from .errors import ConfigError, ShapeError
from .linalg import sigmoid
from .pipeline import PAD_INDEX

PROB_FLOOR = 1e-12

HEAD_KINDS = ("sigmoid", "softmax")
LOSS_KINDS = ("bce", "cce", "sparse_cce")


def default_loss(head: str) -> str:
    return "bce" if head == "sigmoid" else "sparse_cce"


def validate_head_loss(head: str, loss: str, n_classes: int) -> None:
    if head not in HEAD_KINDS:
        raise ConfigError(f"unknown head kind {head!r}")
    if loss not in LOSS_KINDS:
        raise ConfigError(f"unknown loss kind {loss!r}")
    if head == "sigmoid" and loss != "bce":
        raise ConfigError("a sigmoid head pairs only with the bce loss")
    if head == "softmax" and loss == "bce":
        raise ConfigError("a softmax head pairs with cce or sparse_cce, not bce")
    if head == "sigmoid" and n_classes != 2:
        raise ConfigError(f"a sigmoid head is binary; got {n_classes} classes")
    if head == "softmax" and n_classes < 2:
        raise ConfigError(f"a softmax head needs at least 2 classes, got {n_classes}")


def _centered_init(rng: np.random.Generator, rows: int, cols: int) -> np.ndarray:
    return (2.0 * rng.random((rows, cols)) - 1.0) / np.sqrt(cols)


def softmax(logits: np.ndarray) -> np.ndarray:
    """Row-wise stable softmax (max-shifted before exponentiation)."""
    z = np.asarray(logits, dtype=np.float64)
    z = z - z.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def bce_loss(y_hat, y) -> np.ndarray:
    """-y log(a) - (1-y) log(1-a), elementwise over examples.

    Each log argument is floored at 1e-12, so a perfect prediction gives
    exactly zero.
    """
    a = np.asarray(y_hat, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if not np.isin(y, (0.0, 1.0)).all():
        raise ConfigError("bce targets must be 0 or 1")
    return -(y * np.log(np.maximum(a, PROB_FLOOR))
             + (1.0 - y) * np.log(np.maximum(1.0 - a, PROB_FLOOR)))


def cce_loss(probs: np.ndarray, y) -> np.ndarray:
    """-log of the true-class probability.

    ``y`` may be integer class indices (sparse) or one-hot rows; the two
    forms agree exactly. Accepts a single probability vector or a batch.
    """
    p = np.asarray(probs, dtype=np.float64)
    squeeze = p.ndim == 1
    p = np.atleast_2d(p)
    y = np.asarray(y)
    if y.ndim == p.ndim - 1 or (squeeze and y.ndim == 0):
        idx = np.atleast_1d(y).astype(int)
        if (idx < 0).any() or (idx >= p.shape[-1]).any():
            raise ConfigError(f"class index out of range [0, {p.shape[-1]})")
        picked = p[np.arange(p.shape[0]), idx]
    else:
        onehot = np.atleast_2d(y).astype(np.float64)
        if onehot.shape != p.shape:
            raise ShapeError(f"one-hot targets {onehot.shape} do not match probabilities {p.shape}")
        picked = (onehot * p).sum(axis=-1)
    out = -np.log(np.maximum(picked, PROB_FLOOR))
    return out[0] if squeeze else out


def mse_loss(pred, target) -> np.ndarray:
    """Mean squared error per example; not used by the classification
    defaults, kept as an optional regression-style objective."""
    pred = np.asarray(pred, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    sq = (pred - target) ** 2
    return sq.mean(axis=-1) if sq.ndim > 1 else sq


def cost(losses) -> float:
    """Mean per-example loss over a batch."""
    losses = np.asarray(losses, dtype=np.float64)
    if losses.size == 0:
        raise ConfigError("cost over an empty batch is undefined")
    return float(np.mean(losses))


class ModelTrace(NamedTuple):
    indices: np.ndarray        # (batch, T) int
    cell_traces: list
    h_final: np.ndarray        # (batch, hidden)
    dense_pre: np.ndarray      # (batch, dense)
    dense_out: np.ndarray      # (batch, dense)
    probs: np.ndarray          # (batch,) sigmoid or (batch, C) softmax


@dataclass
class ClassifierModel:
    embedding: EmbeddingMatrix
    cell: object               # RnnParams | LstmParams | GruParams
    dense_W: np.ndarray        # (dense, hidden)
    dense_b: np.ndarray
    head_W: np.ndarray         # (out, dense)
    head_b: np.ndarray
    head: str                  # sigmoid | softmax
    n_classes: int
    vocab_sha: Optional[str] = None

    @classmethod
    def build(cls, embedding: EmbeddingMatrix, cell, dense_size: int, head: str,
              n_classes: int, rng: np.random.Generator,
              vocab_sha: Optional[str] = None) -> "ClassifierModel":
        """Wire the dimension chain and initialize the dense/head weights.

        Any mismatch is rejected here so forward never has to."""
        if embedding.dim != cell.input_size:
            raise ConfigError(
                f"embedding dim {embedding.dim} does not match cell input size {cell.input_size}"
            )
        if head not in HEAD_KINDS:
            raise ConfigError(f"unknown head kind {head!r}")
        if head == "sigmoid" and n_classes != 2:
            raise ConfigError(f"sigmoid head is binary; got {n_classes} classes")
        out = 1 if head == "sigmoid" else n_classes
        # The dense and head layers use a zero-centered draw: recurrent
        # activations are all positive under the positive cell init, so a
        # positive-only readout would start rank-1 with logits far from 0.
        dense_W = _centered_init(rng, dense_size, cell.hidden_size)
        dense_b = np.zeros(dense_size)
        head_W = _centered_init(rng, out, dense_size)
        head_b = np.zeros(out)
        return cls(embedding=embedding, cell=cell, dense_W=dense_W, dense_b=dense_b,
                   head_W=head_W, head_b=head_b, head=head, n_classes=n_classes,
                   vocab_sha=vocab_sha)

    def named_params(self) -> dict[str, np.ndarray]:
        """Trainable blocks, in a fixed order, keyed by dotted names."""
        out = {}
        if self.embedding.trainable:
            out["embedding.weights"] = self.embedding.weights
        for name, arr in self.cell.named_params():
            out[f"cell.{name}"] = arr
        out["dense.W"] = self.dense_W
        out["dense.b"] = self.dense_b
        out["head.W"] = self.head_W
        out["head.b"] = self.head_b
        return out

    def state_blocks(self) -> list[tuple[str, np.ndarray]]:
        """Every parameter array, trainable or not, for checkpointing."""
        out = [("embedding.weights", self.embedding.weights)]
        out += [(f"cell.{n}", a) for n, a in self.cell.state_blocks()]
        out += [("dense.W", self.dense_W), ("dense.b", self.dense_b),
                ("head.W", self.head_W), ("head.b", self.head_b)]
        return out


def forward(model: ClassifierModel, indices) -> tuple[np.ndarray, ModelTrace]:
    """Probabilities for a document batch.

    ``indices`` is (batch, T) or a single (T,) row. Sigmoid heads return
    (batch,) positive-class probabilities; softmax heads (batch, C) rows
    summing to 1.
    """
    idx = np.asarray(indices)
    single = idx.ndim == 1
    idx = np.atleast_2d(idx)
    if idx.shape[1] == 0:
        raise ShapeError("cannot classify an empty index sequence")
    emb = model.embedding.weights[idx]          # (B, T, D)
    xs = np.swapaxes(emb, 0, 1)                 # (T, B, D)
    h, traces = cells.run_sequence(xs, model.cell)
    dense_pre = h @ model.dense_W.T + model.dense_b
    dense_out = np.maximum(dense_pre, 0.0)
    logits = dense_out @ model.head_W.T + model.head_b
    if model.head == "sigmoid":
        probs = sigmoid(logits[:, 0])
    else:
        probs = softmax(logits)
    tr = ModelTrace(indices=idx, cell_traces=traces, h_final=h,
                    dense_pre=dense_pre, dense_out=dense_out, probs=probs)
    return (probs[0] if single else probs), tr


def loss_values(model: ClassifierModel, probs: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Per-example losses for this model's head."""
    if model.head == "sigmoid":
        return bce_loss(probs, y)
    return cce_loss(probs, y)


def backward(model: ClassifierModel, trace: ModelTrace, y,
             scale: Optional[float] = None) -> dict[str, np.ndarray]:
    """Gradients of the mean loss over the traced batch.

    Uses the fused head gradient (probabilities minus targets) at the
    logits, then walks the dense layer, the cell (through time) and the
    embedding rows. The pad embedding row's gradient is forced to zero.
    ``scale`` overrides the default 1/batch averaging weight.
    """
    B = trace.indices.shape[0]
    w = (1.0 / B) if scale is None else scale
    y = np.asarray(y)
    if model.head == "sigmoid":
        target = np.atleast_1d(y).astype(np.float64)
        dlogits = ((trace.probs - target) * w)[:, None]          # (B, 1)
    else:
        probs = np.atleast_2d(trace.probs)
        if y.ndim == probs.ndim:                                  # one-hot rows
            target = y.astype(np.float64)
        else:
            target = np.zeros_like(probs)
            target[np.arange(B), np.atleast_1d(y).astype(int)] = 1.0
        dlogits = (probs - target) * w                            # (B, C)

    grads: dict[str, np.ndarray] = {}
    grads["head.W"] = dlogits.T @ trace.dense_out
    grads["head.b"] = dlogits.sum(axis=0)
    ddense = dlogits @ model.head_W
    dpre = ddense * (trace.dense_pre > 0)
    grads["dense.W"] = dpre.T @ trace.h_final
    grads["dense.b"] = dpre.sum(axis=0)
    dh = dpre @ model.dense_W

    cell_grads, dxs = cells.backward_sequence(trace.cell_traces, dh, model.cell)
    for name, g in cell_grads.items():
        grads[f"cell.{name}"] = g

    if model.embedding.trainable:
        demb = np.zeros_like(model.embedding.weights)
        flat_idx = trace.indices.reshape(-1)                      # (B*T,)
        flat_dx = np.swapaxes(dxs, 0, 1).reshape(flat_idx.shape[0], -1)
        np.add.at(demb, flat_idx, flat_dx)
        demb[PAD_INDEX] = 0.0
        grads["embedding.weights"] = demb
    return grads


def predict_classes(model: ClassifierModel, probs: np.ndarray) -> np.ndarray:
    """Argmax for softmax heads; the 0.5 threshold for sigmoid heads
    (ties go to class 1)."""
    if model.head == "sigmoid":
        return (np.atleast_1d(probs) >= 0.5).astype(np.int64)
    return np.argmax(np.atleast_2d(probs), axis=-1)
