"""Feed-forward network description and deterministic evaluation.

Weight vectors are flat arrays in a fixed canonical order: layer 0 weights
(row-major), layer 0 biases, layer 1 weights, ... Every other module (posterior
files, weight boxes, bound propagation) indexes the same parameter space
through this ordering.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

ACTIVATIONS = ("relu", "tanh", "identity")


class ShapeError(ValueError):
    """Dimension mismatch between declared architecture and supplied data."""


@dataclass(frozen=True)
class LayerSpec:
    rows: int
    cols: int
    activation: str = "identity"
    has_bias: bool = True

    def __post_init__(self):
        if self.rows < 1 or self.cols < 1:
            raise ShapeError(f"layer shape ({self.rows}, {self.cols}) must be positive")
        if self.activation not in ACTIVATIONS:
            raise ValueError(f"unknown activation {self.activation!r}")

    @property
    def n_params(self) -> int:
        return self.rows * self.cols + (self.rows if self.has_bias else 0)


@dataclass(frozen=True)
class Network:
    layers: tuple[LayerSpec, ...]

    def __post_init__(self):
        if not self.layers:
            raise ShapeError("a network needs at least one layer")
        for k in range(len(self.layers) - 1):
            if self.layers[k].rows != self.layers[k + 1].cols:
                raise ShapeError(
                    f"layer {k} outputs {self.layers[k].rows} units but layer "
                    f"{k + 1} expects {self.layers[k + 1].cols}"
                )
            if self.layers[k].activation == "identity":
                raise ValueError(f"hidden layer {k} must use relu or tanh")
        if self.layers[-1].activation != "identity":
            raise ValueError("final layer activation must be identity; "
                             "softmax/decision rules are applied downstream")

    @property
    def input_dim(self) -> int:
        return self.layers[0].cols

    @property
    def output_dim(self) -> int:
        return self.layers[-1].rows

    @property
    def n_weights(self) -> int:
        return sum(l.n_params for l in self.layers)

    @staticmethod
    def dense(dims: list[int], activation: str = "relu") -> "Network":
        """Fully-connected net with the given unit counts, e.g. [4, 16, 5]."""
        if len(dims) < 2:
            raise ShapeError("need at least input and output dims")
        layers = []
        for k in range(len(dims) - 1):
            act = activation if k < len(dims) - 2 else "identity"
            layers.append(LayerSpec(rows=dims[k + 1], cols=dims[k], activation=act))
        return Network(layers=tuple(layers))

    def param_slices(self) -> list[tuple[slice, slice | None]]:
        """Per-layer (weight, bias) slices into the canonical flat vector."""
        out = []
        ofs = 0
        for l in self.layers:
            w = slice(ofs, ofs + l.rows * l.cols)
            ofs += l.rows * l.cols
            b = None
            if l.has_bias:
                b = slice(ofs, ofs + l.rows)
                ofs += l.rows
            out.append((w, b))
        return out

    def unpack(self, w: np.ndarray) -> list[tuple[np.ndarray, np.ndarray]]:
        """Split a flat weight vector into per-layer (W, b) arrays.

        Leading batch axes on ``w`` are preserved: shape (..., n_w) unpacks
        to W of shape (..., rows, cols) and b of shape (..., rows).
        """
        w = np.asarray(w, dtype=float)
        if w.shape[-1] != self.n_weights:
            raise ShapeError(
                f"weight vector has {w.shape[-1]} entries, network needs {self.n_weights}"
            )
        out = []
        for l, (ws, bs) in zip(self.layers, self.param_slices()):
            W = w[..., ws].reshape(*w.shape[:-1], l.rows, l.cols)
            if bs is not None:
                b = w[..., bs]
            else:
                b = np.zeros((*w.shape[:-1], l.rows))
            out.append((W, b))
        return out

    def pack(self, params: list[tuple[np.ndarray, np.ndarray]]) -> np.ndarray:
        """Inverse of unpack for unbatched parameters."""
        pieces = []
        for l, (W, b) in zip(self.layers, params):
            pieces.append(np.asarray(W, dtype=float).reshape(-1))
            if l.has_bias:
                pieces.append(np.asarray(b, dtype=float).reshape(-1))
        return np.concatenate(pieces)


def activate(kind: str, x: np.ndarray) -> np.ndarray:
    if kind == "relu":
        return np.maximum(x, 0.0)
    if kind == "tanh":
        return np.tanh(x)
    if kind == "identity":
        return x
    raise ValueError(f"unknown activation {kind!r}")


def activate_deriv(kind: str, x: np.ndarray) -> np.ndarray:
    if kind == "relu":
        return (x > 0.0).astype(float)
    if kind == "tanh":
        return 1.0 - np.tanh(x) ** 2
    if kind == "identity":
        return np.ones_like(x)
    raise ValueError(f"unknown activation {kind!r}")


def forward(net: Network, w: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Evaluate the network at a fixed weight vector; returns final logits."""
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != net.input_dim:
        raise ShapeError(f"input has {x.shape[-1]} entries, layer 0 expects {net.input_dim}")
    z = x
    for k, (W, b) in enumerate(net.unpack(w)):
        zeta = W @ z + b
        if k < len(net.layers) - 1:
            z = activate(net.layers[k].activation, zeta)
        else:
            z = zeta
    return z


def forward_batch(net: Network, w: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Paired vectorized evaluation: weight i is applied to input i.

    w: (D, n_w), x: (D, n_in) -> logits (D, n_out).
    """
    w = np.atleast_2d(np.asarray(w, dtype=float))
    z = np.atleast_2d(np.asarray(x, dtype=float))
    for k, (W, b) in enumerate(net.unpack(w)):
        zeta = np.einsum("drc,dc->dr", W, z) + b
        z = activate(net.layers[k].activation, zeta) if k < len(net.layers) - 1 else zeta
    return z


def forward_probes(net: Network, w: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Evaluate every weight vector on every probe input.

    w: (D, n_w), x: (P, n_in) -> logits (D, P, n_out).
    """
    w = np.atleast_2d(np.asarray(w, dtype=float))
    x = np.atleast_2d(np.asarray(x, dtype=float))
    z = np.broadcast_to(x, (w.shape[0], *x.shape))
    for k, (W, b) in enumerate(net.unpack(w)):
        zeta = np.einsum("drc,dpc->dpr", W, z) + b[:, None, :]
        z = activate(net.layers[k].activation, zeta) if k < len(net.layers) - 1 else zeta
    return z


def forward_trace(net: Network, w: np.ndarray, x: np.ndarray):
    """Forward pass keeping pre- and post-activations, for backprop."""
    x = np.asarray(x, dtype=float)
    zetas, zs = [], [x]
    z = x
    for k, (W, b) in enumerate(net.unpack(w)):
        zeta = z @ W.swapaxes(-1, -2) + b if z.ndim > 1 else W @ z + b
        zetas.append(zeta)
        if k < len(net.layers) - 1:
            z = activate(net.layers[k].activation, zeta)
        else:
            z = zeta
        zs.append(z)
    return zetas, zs


def backprop(net: Network, w: np.ndarray, x: np.ndarray, dy: np.ndarray):
    """Gradients of a scalar loss with output-gradient ``dy``.

    Accepts a single input (n_in,) or a batch (B, n_in) with matching dy.
    Returns (grad_x, grad_w_flat); batch contributions are summed into
    grad_w_flat while grad_x keeps the batch axis.
    """
    single = np.asarray(x).ndim == 1
    X = np.atleast_2d(np.asarray(x, dtype=float))
    dY = np.atleast_2d(np.asarray(dy, dtype=float))
    zetas, zs = forward_trace(net, w, X)
    params = net.unpack(w)
    delta = dY
    grads = [None] * len(net.layers)
    for k in range(len(net.layers) - 1, -1, -1):
        W, _ = params[k]
        gW = delta.T @ zs[k]
        gb = delta.sum(axis=0)
        grads[k] = (gW, gb)
        delta = delta @ W
        if k > 0:
            delta = delta * activate_deriv(net.layers[k - 1].activation, zetas[k - 1])
    grad_x = delta
    grad_w = net.pack(grads)
    return (grad_x[0] if single else grad_x), grad_w


def softmax(logits: np.ndarray) -> np.ndarray:
    """Numerically stabilized softmax along the last axis."""
    logits = np.asarray(logits, dtype=float)
    if not np.all(np.isfinite(logits)):
        raise ValueError("softmax requires finite logits")
    shifted = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=-1, keepdims=True)
