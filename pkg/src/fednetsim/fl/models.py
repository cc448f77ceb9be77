"""Model parameters, training, and evaluation.

The model family is multinomial logistic regression, with an optional
one-hidden-layer tanh MLP. Parameters live in a flat float64 vector with
shape metadata, so aggregation and wire-size accounting stay model-agnostic.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import InvalidArgs, NumericalDivergence, ShapeMismatch
from .datasets import Dataset

WIRE_HEADER_BYTES = 1024
WIRE_BYTES_PER_PARAM = 4  # parameters travel at single precision


@dataclass(frozen=True)
class ModelSpec:
    kind: str = "logreg"  # "logreg" | "mlp"
    hidden_units: int = 32

    def __post_init__(self):
        if self.kind not in ("logreg", "mlp"):
            raise InvalidArgs(f"unknown model kind {self.kind!r}")
        if self.kind == "mlp" and self.hidden_units < 1:
            raise InvalidArgs("mlp needs hidden_units >= 1")

    def layout(self, dim: int, n_classes: int) -> tuple[tuple[str, tuple[int, ...]], ...]:
        if self.kind == "logreg":
            return (("W", (dim, n_classes)), ("b", (n_classes,)))
        h = self.hidden_units
        return (("W1", (dim, h)), ("b1", (h,)), ("W2", (h, n_classes)), ("b2", (n_classes,)))


@dataclass
class ModelParams:
    """Flat parameter vector plus the layer shapes needed to unflatten it."""

    values: np.ndarray
    layout: tuple[tuple[str, tuple[int, ...]], ...]

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64).ravel()
        expected = sum(int(np.prod(shape)) for _, shape in self.layout)
        if expected != self.values.size:
            raise ShapeMismatch(f"layout wants {expected} values, got {self.values.size}")
        if not np.all(np.isfinite(self.values)):
            raise ShapeMismatch("parameters must be finite")

    @property
    def wire_bytes(self) -> int:
        return WIRE_BYTES_PER_PARAM * self.values.size + WIRE_HEADER_BYTES

    def unflatten(self) -> dict[str, np.ndarray]:
        out = {}
        offset = 0
        for name, shape in self.layout:
            size = int(np.prod(shape))
            out[name] = self.values[offset : offset + size].reshape(shape)
            offset += size
        return out

    def replace(self, values: np.ndarray) -> "ModelParams":
        return ModelParams(values, self.layout)

    def copy(self) -> "ModelParams":
        return ModelParams(self.values.copy(), self.layout)


def init_params(spec: ModelSpec, dim: int, n_classes: int, seed: int) -> ModelParams:
    """Initial global parameters: zeros for logreg, scaled Gaussian for the MLP."""
    layout = spec.layout(dim, n_classes)
    if spec.kind == "logreg":
        total = sum(int(np.prod(shape)) for _, shape in layout)
        return ModelParams(np.zeros(total), layout)
    rng = np.random.default_rng(seed)
    pieces = []
    for name, shape in layout:
        if name.startswith("W"):
            fan_in = shape[0]
            pieces.append(rng.normal(0.0, 1.0 / np.sqrt(fan_in), size=shape).ravel())
        else:
            pieces.append(np.zeros(int(np.prod(shape))))
    return ModelParams(np.concatenate(pieces), layout)


def _forward(params: ModelParams, x: np.ndarray):
    """Returns (logits, cache-for-backprop)."""
    tensors = params.unflatten()
    if "W" in tensors:
        return x @ tensors["W"] + tensors["b"], (x,)
    hidden = np.tanh(x @ tensors["W1"] + tensors["b1"])
    return hidden @ tensors["W2"] + tensors["b2"], (x, hidden)


def _log_softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=1, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))


def loss_and_grad(
    params: ModelParams,
    x: np.ndarray,
    y: np.ndarray,
    anchor: ModelParams | None = None,
    mu: float = 0.0,
) -> tuple[float, np.ndarray]:
    """Mean cross-entropy and flat gradient; optional proximal term.

    With mu > 0 the objective gains (mu/2)*||w - w_anchor||^2, whose gradient
    is mu*(w - w_anchor) on the flat vector.
    """
    n = len(y)
    logits, cache = _forward(params, x)
    log_probs = _log_softmax(logits)
    loss = -log_probs[np.arange(n), y].mean()

    grad_logits = np.exp(log_probs)
    grad_logits[np.arange(n), y] -= 1.0
    grad_logits /= n

    tensors = params.unflatten()
    if "W" in tensors:
        (xin,) = cache
        grads = {"W": xin.T @ grad_logits, "b": grad_logits.sum(axis=0)}
    else:
        xin, hidden = cache
        grads = {"W2": hidden.T @ grad_logits, "b2": grad_logits.sum(axis=0)}
        grad_hidden = (grad_logits @ tensors["W2"].T) * (1.0 - hidden**2)
        grads["W1"] = xin.T @ grad_hidden
        grads["b1"] = grad_hidden.sum(axis=0)

    flat_grad = np.concatenate([grads[name].ravel() for name, _ in params.layout])
    if mu > 0.0 and anchor is not None:
        diff = params.values - anchor.values
        loss += 0.5 * mu * float(diff @ diff)
        flat_grad += mu * diff
    return float(loss), flat_grad


def local_train(
    global_params: ModelParams,
    x: np.ndarray,
    y: np.ndarray,
    *,
    local_epochs: int,
    batch_size: int,
    lr: float,
    mu: float,
    rng: np.random.Generator,
) -> tuple[ModelParams, float]:
    """Mini-batch SGD from the global model over the client's data slice.

    Runs local_epochs full passes; the last partial batch is kept. With
    mu > 0 the FedProx proximal term anchors updates at the global model.
    Returns the trained parameters and the full-slice cross-entropy at them.
    """
    if len(y) == 0:
        raise InvalidArgs("client data slice is empty")
    n = len(y)
    w = global_params.copy()
    for epoch in range(local_epochs):
        order = rng.permutation(n)
        for batch_no, lo in enumerate(range(0, n, batch_size)):
            sel = order[lo : lo + batch_size]
            loss, grad = loss_and_grad(w, x[sel], y[sel], anchor=global_params, mu=mu)
            if not np.isfinite(loss):
                raise NumericalDivergence(epoch, batch_no)
            w = w.replace(w.values - lr * grad)
    final_loss, _ = loss_and_grad(w, x, y)
    if not np.isfinite(final_loss):
        raise NumericalDivergence(local_epochs, 0)
    return w, final_loss


def evaluate(params: ModelParams, dataset: Dataset) -> tuple[float, float]:
    """Mean cross-entropy and argmax accuracy; ties go to the smallest class id."""
    if len(dataset) == 0:
        raise InvalidArgs("cannot evaluate on an empty dataset")
    logits, _ = _forward(params, dataset.features)
    log_probs = _log_softmax(logits)
    loss = -log_probs[np.arange(len(dataset)), dataset.labels].mean()
    predictions = np.argmax(logits, axis=1)
    accuracy = float((predictions == dataset.labels).mean())
    return float(loss), accuracy
