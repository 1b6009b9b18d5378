"""A small dense network trained split across clients and a main server.

Every forward and backward pass, split or not, goes through the same
per-layer routines, so split and unsplit training follow the same floating
point path.  Aggregation is a dataset-size weighted average per layer; the
edge server and the main server run the identical routine on the identical
ordered contributions for the layers they share, which is what makes their
copies agree exactly.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

ACTIVATIONS = ("tanh", "relu", "identity")


@dataclass
class DenseLayer:
    weight: np.ndarray
    bias: np.ndarray
    activation: str = "tanh"

    def __post_init__(self):
        if self.activation not in ACTIVATIONS:
            raise ValueError(f"unknown activation {self.activation!r}")
        self.weight = np.asarray(self.weight, dtype=float)
        self.bias = np.asarray(self.bias, dtype=float)
        if self.weight.ndim != 2 or self.bias.shape != (self.weight.shape[1],):
            raise ValueError("weight must be (in, out) and bias (out,)")

    def copy(self) -> "DenseLayer":
        return DenseLayer(self.weight.copy(), self.bias.copy(), self.activation)


def _act(name, z):
    if name == "tanh":
        return np.tanh(z)
    if name == "relu":
        return np.maximum(z, 0.0)
    return z


def _act_grad(name, z, out, grad):
    if name == "tanh":
        return grad * (1.0 - out * out)
    if name == "relu":
        return grad * (z > 0)
    return grad


class LayeredModel:
    """Ordered dense layers; the last one produces logits."""

    def __init__(self, layers):
        self.layers = [layer.copy() for layer in layers]
        for a, b in zip(self.layers, self.layers[1:]):
            if a.weight.shape[1] != b.weight.shape[0]:
                raise ValueError("layer shapes do not chain")

    @classmethod
    def init(cls, sizes, activations=None, seed=None) -> "LayeredModel":
        """Scaled-normal weights, zero biases.  ``sizes`` has L + 1 entries."""
        rng = np.random.default_rng(seed)
        n = len(sizes) - 1
        if activations is None:
            activations = ["tanh"] * (n - 1) + ["identity"]
        layers = []
        for i in range(n):
            w = rng.standard_normal((sizes[i], sizes[i + 1])) / np.sqrt(sizes[i])
            layers.append(DenseLayer(w, np.zeros(sizes[i + 1]), activations[i]))
        return cls(layers)

    @property
    def num_layers(self) -> int:
        return len(self.layers)

    def copy(self) -> "LayeredModel":
        return LayeredModel(self.layers)

    def to_vector(self) -> np.ndarray:
        return np.concatenate([np.concatenate([l.weight.ravel(), l.bias]) for l in self.layers])

    def from_vector(self, vec) -> "LayeredModel":
        """New model with this one's shapes and the parameters in ``vec``."""
        vec = np.asarray(vec, dtype=float)
        layers, pos = [], 0
        for l in self.layers:
            nw, nb = l.weight.size, l.bias.size
            w = vec[pos: pos + nw].reshape(l.weight.shape)
            b = vec[pos + nw: pos + nw + nb]
            layers.append(DenseLayer(w.copy(), b.copy(), l.activation))
            pos += nw + nb
        if pos != vec.size:
            raise ValueError(f"expected {pos} parameters, got {vec.size}")
        return LayeredModel(layers)

    def forward(self, x) -> np.ndarray:
        return _forward(self.layers, np.asarray(x, dtype=float))[0]


def _forward(layers, x):
    """Outputs of the stack plus the (input, pre-activation, output) caches."""
    caches = []
    h = x
    for layer in layers:
        if h.ndim != 2 or h.shape[1] != layer.weight.shape[0]:
            raise ValueError(f"input width {h.shape[-1]} does not match layer "
                             f"width {layer.weight.shape[0]}")
        z = h @ layer.weight + layer.bias
        out = _act(layer.activation, z)
        caches.append((h, z, out))
        h = out
    return h, caches


def _backward(layers, caches, grad):
    """Parameter gradients of the stack and the gradient of its input."""
    grads = [None] * len(layers)
    for i in range(len(layers) - 1, -1, -1):
        h, z, out = caches[i]
        dz = _act_grad(layers[i].activation, z, out, grad)
        grads[i] = (h.T @ dz, dz.sum(axis=0))
        grad = dz @ layers[i].weight.T
    return grads, grad


def _apply(layers, grads, lr):
    for layer, (gw, gb) in zip(layers, grads):
        layer.weight -= lr * gw
        layer.bias -= lr * gb


def softmax_cross_entropy(logits, labels):
    """Mean loss over the batch and its gradient with respect to the logits."""
    labels = np.asarray(labels, dtype=np.int64)
    shifted = logits - logits.max(axis=1, keepdims=True)
    log_norm = np.log(np.exp(shifted).sum(axis=1, keepdims=True))
    log_prob = shifted - log_norm
    b = logits.shape[0]
    loss = -log_prob[np.arange(b), labels].mean()
    grad = np.exp(log_prob)
    grad[np.arange(b), labels] -= 1.0
    return float(loss), grad / b, np.exp(log_prob)


@dataclass
class SplitState:
    """Client k's half of the model, the server's half, and the step size."""

    cut: int
    client_layers: list
    server_layers: list
    lr: float
    _client_cache: list | None = field(default=None, repr=False)
    _server_cache: list | None = field(default=None, repr=False)
    _smashed: np.ndarray | None = field(default=None, repr=False)
    _logit_grad: np.ndarray | None = field(default=None, repr=False)

    @classmethod
    def from_model(cls, model: LayeredModel, cut: int, lr: float) -> "SplitState":
        if not 0 <= cut <= model.num_layers:
            raise ValueError(f"cut {cut} outside 0..{model.num_layers}")
        layers = model.copy().layers
        return cls(cut, layers[:cut], layers[cut:], float(lr))

    def merged(self) -> LayeredModel:
        return LayeredModel(self.client_layers + self.server_layers)


def client_forward(state: SplitState, x) -> np.ndarray:
    """Smashed data: activations at the cut (the input itself for cut 0)."""
    out, state._client_cache = _forward(state.client_layers, np.asarray(x, dtype=float))
    state._smashed = out
    return out


def server_forward_loss(state: SplitState, smashed, labels):
    """Predicted class probabilities and the mean cross-entropy of the batch."""
    logits, state._server_cache = _forward(state.server_layers, np.asarray(smashed, dtype=float))
    loss, grad, prob = softmax_cross_entropy(logits, labels)
    if not np.isfinite(loss):
        raise FloatingPointError("non-finite loss")
    state._logit_grad = grad
    return prob, loss


def split_backward_update(state: SplitState) -> SplitState:
    """One gradient step: the server side first, then the client side from
    the gradient that crosses the cut."""
    if state._server_cache is None or state._client_cache is None:
        raise RuntimeError("backward called without a cached forward pass")
    server_grads, smashed_grad = _backward(state.server_layers, state._server_cache,
                                           state._logit_grad)
    _apply(state.server_layers, server_grads, state.lr)
    client_grads, _ = _backward(state.client_layers, state._client_cache, smashed_grad)
    _apply(state.client_layers, client_grads, state.lr)
    state._client_cache = state._server_cache = state._logit_grad = None
    return state


def split_step(state: SplitState, x, labels) -> float:
    _, loss = server_forward_loss(state, client_forward(state, x), labels)
    split_backward_update(state)
    return loss


def unsplit_step(model: LayeredModel, x, labels, lr: float) -> float:
    """Reference step on the whole model in one piece."""
    logits, caches = _forward(model.layers, np.asarray(x, dtype=float))
    loss, grad, _ = softmax_cross_entropy(logits, labels)
    grads, _ = _backward(model.layers, caches, grad)
    _apply(model.layers, grads, lr)
    return loss


def loss_gradient(model: LayeredModel, x, labels) -> np.ndarray:
    """Gradient of the mean loss as one flat vector (same layout as to_vector)."""
    logits, caches = _forward(model.layers, np.asarray(x, dtype=float))
    _, grad, _ = softmax_cross_entropy(logits, labels)
    grads, _ = _backward(model.layers, caches, grad)
    return np.concatenate([np.concatenate([gw.ravel(), gb]) for gw, gb in grads])


def evaluate(model: LayeredModel, x, labels) -> tuple[float, float]:
    """(mean loss, accuracy)."""
    loss, _, prob = softmax_cross_entropy(model.forward(x), labels)
    return loss, float(np.mean(prob.argmax(axis=1) == np.asarray(labels)))


# aggregation

def _layer_of(state: SplitState, j: int) -> DenseLayer:
    """Layer j (1-based) as held by this client or by the server for it."""
    if j <= state.cut:
        return state.client_layers[j - 1]
    return state.server_layers[j - state.cut - 1]


def _weighted_layer(contribs, weights) -> DenseLayer:
    """Sum of weight * layer in the given order."""
    w = np.zeros_like(contribs[0].weight)
    b = np.zeros_like(contribs[0].bias)
    for layer, a in zip(contribs, weights):
        w = w + a * layer.weight
        b = b + a * layer.bias
    return DenseLayer(w, b, contribs[0].activation)


def aggregate_copies(states, plan, exchange: bool = True) -> tuple[dict, dict]:
    """Edge-server and main-server copies of every layer each one holds.

    The edge server holds layers 1..max(cuts), the main server layers
    min(cuts)+1..L.  With ``exchange`` both average over every participant
    for each layer, reading the other server's copies of common layers;
    without it each averages only the copies it holds itself.
    """
    states = list(states)
    if [s.cut for s in states] != [int(c) for c in plan.cuts]:
        raise ValueError("states and plan disagree on the cut vector")
    part = [k for k in range(len(states)) if plan.weights[k] > 0]
    lo, hi = int(plan.cuts.min()), int(plan.cuts.max())
    es, ms = {}, {}
    for j in range(1, plan.num_layers + 1):
        on_client = [k for k in part if j <= states[k].cut]
        on_server = [k for k in part if j > states[k].cut]
        if exchange:
            groups = {"es": part, "ms": part}
        else:
            groups = {"es": on_client, "ms": on_server}
        for side, store, held in (("es", es, j <= hi), ("ms", ms, j > lo)):
            members = groups[side]
            if not held or not members:
                continue
            weights = plan.weights[members] / plan.weights[members].sum()
            store[j] = _weighted_layer([_layer_of(states[k], j) for k in members], weights)
    return es, ms


def federated_aggregate(states, plan) -> LayeredModel:
    """Global model after aggregation with the common-layer exchange."""
    es, ms = aggregate_copies(states, plan, exchange=True)
    layers = []
    for j in range(1, plan.num_layers + 1):
        if j in es and j in ms and not (np.array_equal(es[j].weight, ms[j].weight)
                                        and np.array_equal(es[j].bias, ms[j].bias)):
            raise AssertionError(f"edge and main server disagree on layer {j}")
        layers.append(es[j] if j in es else ms[j])
    return LayeredModel(layers)


# data and training loops

def make_separable(n: int, dim: int = 2, margin: float = 1.0, seed=None):
    """Two Gaussian classes whose means sit ``2 * margin`` apart along a
    random direction; labels 0/1."""
    rng = np.random.default_rng(seed)
    direction = rng.standard_normal(dim)
    direction /= np.linalg.norm(direction)
    y = rng.integers(0, 2, n)
    x = 0.3 * rng.standard_normal((n, dim)) + np.where(y[:, None] == 1, margin, -margin) * direction
    return x, y


def dirichlet_partition(labels, num_clients: int, alpha: float, seed=None) -> list[np.ndarray]:
    """Split sample indices with per-class client shares ~ Dirichlet(alpha).

    Smaller ``alpha`` gives stronger label skew.  Redraws until every client
    has at least one sample.
    """
    if alpha <= 0:
        raise ValueError("alpha must be > 0")
    labels = np.asarray(labels)
    rng = np.random.default_rng(seed)
    for _ in range(1000):
        parts = [[] for _ in range(num_clients)]
        for c in np.unique(labels):
            idx = rng.permutation(np.flatnonzero(labels == c))
            share = rng.dirichlet(np.full(num_clients, alpha))
            bounds = (np.cumsum(share)[:-1] * idx.size).astype(int)
            for k, chunk in enumerate(np.split(idx, bounds)):
                parts[k].extend(chunk.tolist())
        if all(parts):
            return [np.sort(np.array(p, dtype=np.int64)) for p in parts]
    raise RuntimeError("could not give every client a sample")


def train_hsfl(model: LayeredModel, client_data, cuts, lr: float, rounds: int,
               local_steps: int = 1, eval_data=None, exchange: bool = True):
    """Split federated training with full-batch local steps.

    ``client_data`` is a list of (x, y).  Returns the final global model and
    the curve [(round, loss, accuracy)] on ``eval_data`` (default: pooled
    client data), starting with round 0 before any training.
    """
    if eval_data is None:
        eval_data = (np.concatenate([d[0] for d in client_data]),
                     np.concatenate([d[1] for d in client_data]))
    sizes = [len(d[1]) for d in client_data]
    from .protocol import build_aggregation_plan

    plan = build_aggregation_plan(cuts, model.num_layers, sizes)
    curve = [(0, *evaluate(model, *eval_data))]
    for r in range(1, rounds + 1):
        states = []
        for (x, y), cut in zip(client_data, cuts):
            state = SplitState.from_model(model, int(cut), lr)
            for _ in range(local_steps):
                split_step(state, x, y)
            states.append(state)
        if exchange:
            model = federated_aggregate(states, plan)
        else:
            es, ms = aggregate_copies(states, plan, exchange=False)
            model = LayeredModel([es[j] if j in es else ms[j]
                                  for j in range(1, model.num_layers + 1)])
        curve.append((r, *evaluate(model, *eval_data)))
    return model, curve


def train_centralized(model: LayeredModel, x, y, lr: float, steps: int):
    """Full-batch gradient descent on pooled data; curve as in train_hsfl."""
    model = model.copy()
    curve = [(0, *evaluate(model, x, y))]
    for s in range(1, steps + 1):
        unsplit_step(model, x, y, lr)
        curve.append((s, *evaluate(model, x, y)))
    return model, curve


def write_curve_csv(curve, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["round", "loss", "accuracy"])
        for r, loss, acc in curve:
            writer.writerow([r, repr(loss), repr(acc)])
