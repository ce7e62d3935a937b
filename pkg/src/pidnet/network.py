"""Dense and dropout layers, activations, and the forward/backward passes.

A network is described by a :class:`NetworkSpec` (topology only) and a
:class:`ModelParams` (the learned weights and biases of every dense layer).
Both passes accept either a single feature vector of shape ``(in,)`` or a
batch of shape ``(n, in)``. Batched calls return summed parameter
gradients, so a caller that folds the ``1/n`` of a mean loss into the
upstream gradient obtains the gradient of the batch-mean loss.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Sequence, Union

import numpy as np

from . import linalg
from .errors import ParameterError, ShapeError, StateError
from .linalg import Rng

ACTIVATION_KINDS = ("elu", "softplus", "sigmoid", "tanh", "relu", "identity")

_TINY = np.finfo(np.float64).smallest_subnormal


def _scalar_or_array(x, out):
    return float(out) if np.ndim(x) == 0 else out


def elu(x, alpha: float = 1.0):
    """``x`` for ``x > 0``, ``alpha * (exp(x) - 1)`` otherwise."""
    if alpha <= 0:
        raise ParameterError(f"ELU alpha must be positive, got {alpha}")
    z = np.asarray(x, dtype=np.float64)
    out = np.where(z > 0, z, alpha * np.expm1(np.minimum(z, 0.0)))
    return _scalar_or_array(x, out)


def elu_grad(x, alpha: float = 1.0):
    # x == 0 takes the negative branch: alpha * e**0 == alpha
    if alpha <= 0:
        raise ParameterError(f"ELU alpha must be positive, got {alpha}")
    z = np.asarray(x, dtype=np.float64)
    out = np.where(z > 0, 1.0, alpha * np.exp(np.minimum(z, 0.0)))
    return _scalar_or_array(x, out)


def softplus(x):
    """``log(1 + exp(x))``, stable at both tails and never exactly zero.

    Far in the negative tail the true value underflows float64; it is
    floored at the smallest subnormal so the output stays strictly
    positive.
    """
    z = np.asarray(x, dtype=np.float64)
    out = np.maximum(np.logaddexp(0.0, z), _TINY)
    return _scalar_or_array(x, out)


def sigmoid(x):
    z = np.asarray(x, dtype=np.float64)
    e = np.exp(-np.abs(z))
    out = np.where(z >= 0, 1.0 / (1.0 + e), e / (1.0 + e))
    return _scalar_or_array(x, out)


def softplus_grad(x):
    return sigmoid(x)


@dataclass(frozen=True)
class Activation:
    kind: str = "identity"
    alpha: float = 1.0

    def __post_init__(self):
        if self.kind not in ACTIVATION_KINDS:
            raise ParameterError(
                f"unknown activation {self.kind!r}; expected one of {ACTIVATION_KINDS}"
            )
        if self.alpha <= 0:
            raise ParameterError(f"activation alpha must be positive, got {self.alpha}")

    def __call__(self, z: np.ndarray) -> np.ndarray:
        k = self.kind
        if k == "elu":
            return elu(z, self.alpha)
        if k == "softplus":
            return softplus(z)
        if k == "sigmoid":
            return sigmoid(z)
        if k == "tanh":
            return np.tanh(z)
        if k == "relu":
            return np.maximum(z, 0.0)
        return z

    def grad(self, z: np.ndarray) -> np.ndarray:
        """Derivative with respect to the pre-activation ``z``."""
        k = self.kind
        if k == "elu":
            return elu_grad(z, self.alpha)
        if k == "softplus":
            return softplus_grad(z)
        if k == "sigmoid":
            s = sigmoid(z)
            return s * (1.0 - s)
        if k == "tanh":
            return 1.0 - np.tanh(z) ** 2
        if k == "relu":
            return (np.asarray(z) > 0).astype(np.float64)
        return np.ones_like(z)

    def __str__(self):
        if self.kind == "elu" and self.alpha != 1.0:
            return f"elu({self.alpha!r})"
        return self.kind

    @classmethod
    def parse(cls, text: str) -> "Activation":
        """Inverse of ``str``: ``"elu"``, ``"elu(0.5)"``, ``"softplus"``..."""
        text = text.strip().lower()
        if text.endswith(")") and "(" in text:
            kind, arg = text[:-1].split("(", 1)
            try:
                alpha = float(arg)
            except ValueError:
                raise ParameterError(f"bad activation parameter in {text!r}") from None
            return cls(kind.strip(), alpha)
        return cls(text)


@dataclass(frozen=True)
class Dense:
    """Layer descriptor: a fully connected layer of ``width`` units."""

    width: int
    activation: Activation = Activation("identity")


@dataclass(frozen=True)
class Dropout:
    """Layer descriptor: inverted dropout with drop probability ``rate``."""

    rate: float


LayerSpec = Union[Dense, Dropout]


@dataclass(frozen=True)
class NetworkSpec:
    input_width: int = 8
    layers: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "layers", tuple(self.layers))
        if self.input_width < 1:
            raise ParameterError(f"input width must be >= 1, got {self.input_width}")
        dense = [l for l in self.layers if isinstance(l, Dense)]
        if not dense:
            raise ParameterError("network needs at least one dense layer")
        for layer in self.layers:
            if isinstance(layer, Dense):
                if layer.width < 1:
                    raise ParameterError(f"dense width must be >= 1, got {layer.width}")
            elif isinstance(layer, Dropout):
                if not 0.0 <= layer.rate < 1.0:
                    raise ParameterError(f"dropout rate must be in [0, 1), got {layer.rate}")
            else:
                raise ParameterError(f"unsupported layer descriptor {layer!r}")
        if dense[-1].width != 1:
            raise ParameterError(
                f"final dense layer must have width 1 to produce a score, got {dense[-1].width}"
            )

    @property
    def dense_layers(self) -> list[Dense]:
        return [l for l in self.layers if isinstance(l, Dense)]

    def dense_shapes(self) -> list[tuple[int, int]]:
        """``(out, in)`` weight shape of each dense layer in order."""
        shapes = []
        width = self.input_width
        for layer in self.dense_layers:
            shapes.append((layer.width, width))
            width = layer.width
        return shapes

    def layer_widths(self) -> list[int]:
        """Width of the activation leaving each layer."""
        widths = []
        width = self.input_width
        for layer in self.layers:
            if isinstance(layer, Dense):
                width = layer.width
            widths.append(width)
        return widths

    @property
    def dropout_rates(self) -> list[float]:
        return [l.rate for l in self.layers if isinstance(l, Dropout)]

    def with_dropout_rates(self, rates: Sequence[float]) -> "NetworkSpec":
        rates = list(rates)
        if len(rates) != len(self.dropout_rates):
            raise ParameterError(
                f"expected {len(self.dropout_rates)} dropout rates, got {len(rates)}"
            )
        it = iter(rates)
        layers = tuple(
            Dropout(float(next(it))) if isinstance(l, Dropout) else l for l in self.layers
        )
        return replace(self, layers=layers)

    def without_dropout(self) -> "NetworkSpec":
        return self.with_dropout_rates([0.0] * len(self.dropout_rates))


def default_spec() -> NetworkSpec:
    """8 -> 64 ELU -> drop 0.25 -> 32 ELU -> drop 0.5 -> 1 Softplus."""
    elu_ = Activation("elu", 1.0)
    return NetworkSpec(
        input_width=8,
        layers=(
            Dense(64, elu_),
            Dropout(0.25),
            Dense(32, elu_),
            Dropout(0.50),
            Dense(1, Activation("softplus")),
        ),
    )


@dataclass
class ModelParams:
    """Weights ``(out, in)`` and biases ``(out,)`` of every dense layer.

    The same type holds gradients.
    """

    weights: list[np.ndarray]
    biases: list[np.ndarray]

    @classmethod
    def zeros(cls, spec: NetworkSpec) -> "ModelParams":
        shapes = spec.dense_shapes()
        return cls(
            [np.zeros(s, dtype=np.float64) for s in shapes],
            [np.zeros(s[0], dtype=np.float64) for s in shapes],
        )

    def zeros_like(self) -> "ModelParams":
        return ModelParams(
            [np.zeros_like(w) for w in self.weights], [np.zeros_like(b) for b in self.biases]
        )

    def copy(self) -> "ModelParams":
        return ModelParams([w.copy() for w in self.weights], [b.copy() for b in self.biases])

    def arrays(self) -> list[np.ndarray]:
        """All arrays in a fixed order: W0, b0, W1, b1, ..."""
        out = []
        for w, b in zip(self.weights, self.biases):
            out.extend((w, b))
        return out

    def check(self, spec: NetworkSpec) -> None:
        shapes = spec.dense_shapes()
        if len(self.weights) != len(shapes) or len(self.biases) != len(shapes):
            raise ShapeError(
                f"spec has {len(shapes)} dense layers but params hold "
                f"{len(self.weights)} weight / {len(self.biases)} bias arrays"
            )
        for i, (s, w, b) in enumerate(zip(shapes, self.weights, self.biases)):
            if w.shape != s or b.shape != (s[0],):
                raise ShapeError(
                    f"dense layer {i}: expected weights {s} and bias ({s[0]},), "
                    f"got {w.shape} and {b.shape}"
                )

    def same_shape(self, other: "ModelParams") -> bool:
        a, b = self.arrays(), other.arrays()
        return len(a) == len(b) and all(x.shape == y.shape for x, y in zip(a, b))

    def __eq__(self, other):
        if not isinstance(other, ModelParams):
            return NotImplemented
        return self.same_shape(other) and all(
            np.array_equal(x, y) for x, y in zip(self.arrays(), other.arrays())
        )


@dataclass
class DenseLayer:
    weights: np.ndarray
    bias: np.ndarray
    activation: Activation = Activation("identity")

    def __post_init__(self):
        if self.weights.ndim != 2 or self.bias.shape != (self.weights.shape[0],):
            raise ShapeError(
                f"dense layer weights {self.weights.shape} do not match bias {self.bias.shape}"
            )

    def forward(self, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Return ``(pre_activation, output)`` for a vector or a batch."""
        if x.ndim == 1:
            z = linalg.add(linalg.matvec(self.weights, x), self.bias)
        else:
            if x.ndim != 2 or x.shape[1] != self.weights.shape[1]:
                raise ShapeError(
                    f"dense layer expects inputs of width {self.weights.shape[1]}, "
                    f"got shape {x.shape}"
                )
            z = x @ self.weights.T + self.bias
        return z, self.activation(z)


@dataclass
class DropoutLayer:
    rate: float
    last_mask: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        if not 0.0 <= self.rate < 1.0:
            raise ParameterError(f"dropout rate must be in [0, 1), got {self.rate}")

    def make_mask(self, uniforms: np.ndarray) -> np.ndarray:
        """Turn uniform [0, 1) draws into a {0, 1/(1-rate)} mask."""
        return np.where(uniforms < self.rate, 0.0, 1.0 / (1.0 - self.rate))

    def forward(
        self,
        x: np.ndarray,
        rng: Rng | None = None,
        training: bool = False,
        mask: np.ndarray | None = None,
    ) -> np.ndarray:
        if not training:
            return x
        if mask is None:
            if self.rate == 0.0:
                self.last_mask = np.ones_like(x)
                return x
            if rng is None:
                raise StateError("training-mode dropout needs a random generator")
            mask = self.make_mask(rng.uniform01_array(x.size).reshape(x.shape))
        elif mask.shape != x.shape:
            raise ShapeError(f"dropout mask {mask.shape} does not match input {x.shape}")
        self.last_mask = mask
        return x * mask


def dense_forward(layer: DenseLayer, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    return layer.forward(x)


def dropout_forward(
    layer: DropoutLayer, x: np.ndarray, rng: Rng | None, training: bool
) -> np.ndarray:
    return layer.forward(x, rng, training)


@dataclass
class Tape:
    """Intermediates recorded by :func:`forward` for :func:`backward`.

    ``inputs[i]`` is the activation entering layer ``i``; ``pre`` holds the
    pre-activation of each dense layer and ``masks`` the mask applied by each
    dropout layer (``None`` when that layer acted as the identity).
    """

    inputs: list[np.ndarray]
    pre: list[np.ndarray]
    masks: list[np.ndarray | None]
    output: np.ndarray
    batched: bool


def draw_masks(spec: NetworkSpec, n_rows: int, rng: Rng) -> list[np.ndarray | None]:
    """Sample dropout masks for ``n_rows`` rows.

    One uniform draw is consumed per unit of every active dropout layer,
    row by row and within a row in layer order, so a batch consumes the
    stream exactly as the same rows fed one at a time would.
    """
    widths, layers = [], []
    for layer, width in zip(spec.layers, spec.layer_widths()):
        if isinstance(layer, Dropout):
            layers.append(DropoutLayer(layer.rate))
            widths.append(width if layer.rate > 0 else 0)
    total = sum(widths)
    if total == 0:
        return [None] * len(layers)
    u = rng.uniform01_array(n_rows * total).reshape(n_rows, total)
    masks, start = [], 0
    for layer, w in zip(layers, widths):
        masks.append(layer.make_mask(u[:, start : start + w]) if w else None)
        start += w
    return masks


def forward(
    spec: NetworkSpec,
    params: ModelParams,
    x,
    rng: Rng | None = None,
    training: bool = False,
    masks: Sequence[np.ndarray | None] | None = None,
):
    """Evaluate the network; returns ``(score, tape)``.

    ``score`` is a float for a single input vector and an ``(n,)`` array for
    a batch. In training mode dropout masks are drawn from ``rng`` unless
    ``masks`` (one entry per dropout layer, shaped like that layer's input)
    is supplied, which is how a fixed mask is replayed.
    """
    x = np.asarray(x, dtype=np.float64)
    batched = x.ndim == 2
    if x.ndim not in (1, 2) or x.shape[-1] != spec.input_width:
        raise ShapeError(
            f"network expects inputs of width {spec.input_width}, got shape {x.shape}"
        )
    params.check(spec)

    n_dropout = len(spec.dropout_rates)
    if training and masks is None and any(r > 0 for r in spec.dropout_rates):
        if rng is None:
            raise StateError("training-mode forward with dropout needs a random generator")
        drawn = draw_masks(spec, x.shape[0] if batched else 1, rng)
        masks = drawn if batched else [None if m is None else m[0] for m in drawn]
    if masks is not None and len(masks) != n_dropout:
        raise ShapeError(f"expected {n_dropout} dropout masks, got {len(masks)}")

    inputs, pre, used = [], [], []
    h = x
    di = 0
    dj = 0
    for layer in spec.layers:
        inputs.append(h)
        if isinstance(layer, Dense):
            dl = DenseLayer(params.weights[di], params.biases[di], layer.activation)
            z, h = dl.forward(h)
            pre.append(z)
            di += 1
        else:
            mask = masks[dj] if (training and masks is not None) else None
            if mask is not None:
                h = DropoutLayer(layer.rate).forward(h, training=True, mask=mask)
            used.append(mask)
            dj += 1
    score = h[:, 0] if batched else float(h[0])
    return score, Tape(inputs, pre, used, h, batched)


def backward(
    spec: NetworkSpec, params: ModelParams, tape: Tape | None, dloss_dscore
) -> ModelParams:
    """Gradients of the loss with respect to every weight and bias.

    ``dloss_dscore`` is a float for a single-vector tape or an ``(n,)`` array
    for a batched one; batched gradients are summed over rows.
    """
    if tape is None:
        raise StateError("backward called without a tape from forward")
    if len(tape.inputs) != len(spec.layers):
        raise StateError("tape was recorded for a different network spec")

    grads = params.zeros_like()
    if tape.batched:
        delta = np.asarray(dloss_dscore, dtype=np.float64).reshape(-1, 1)
    else:
        delta = np.array([float(dloss_dscore)])

    di = len(params.weights)
    dj = len(tape.masks)
    for i in range(len(spec.layers) - 1, -1, -1):
        layer = spec.layers[i]
        h_in = tape.inputs[i]
        if isinstance(layer, Dropout):
            dj -= 1
            mask = tape.masks[dj]
            if mask is not None:
                delta = delta * mask
            continue
        di -= 1
        w = params.weights[di]
        dz = delta * layer.activation.grad(tape.pre[di])
        if tape.batched:
            grads.weights[di] = dz.T @ h_in
            grads.biases[di] = dz.sum(axis=0)
            if i > 0:
                delta = dz @ w
        else:
            grads.weights[di] = linalg.outer(dz, h_in)
            grads.biases[di] = dz.copy()
            if i > 0:
                delta = linalg.transpose_matvec(w, dz)
    return grads
