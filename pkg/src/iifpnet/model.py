"""Feed-forward Leaky-ReLU regression networks.

Every layer computes ``y_l = f(W_l y_{l-1} + b_l)`` with the Leaky ReLU
``f(x) = max(x, a*x)``.  The final (single-node) layer passes through the
same activation by default so that the whole stack is one cascade of
identical elements; ``output_activation="linear"`` is available as an
alternative.
"""

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, ContractError, ParseError
from .linalg import as_matrix, as_vector

MODEL_FILE_VERSION = "1"
OUTPUT_ACTIVATIONS = ("leaky_relu", "linear")


def check_slope(a):
    a = float(a)
    if not (0.0 < a < 1.0) or not math.isfinite(a):
        raise ConfigError(f"Leaky ReLU slope must lie in (0, 1), got {a}")
    return a


def leaky_relu(v, a):
    """Elementwise ``max(x, a*x)`` for ``0 < a < 1``."""
    a = check_slope(a)
    v = np.asarray(v, dtype=np.float64)
    return np.maximum(v, a * v)


def leaky_relu_slope(z, a):
    # derivative, kink convention: slope 1 at z == 0
    return np.where(z >= 0.0, 1.0, a)


@dataclass
class LayerParams:
    weights: np.ndarray
    bias: np.ndarray

    def __post_init__(self):
        self.weights = as_matrix(self.weights, "weights")
        self.bias = as_vector(self.bias, "bias")
        if self.bias.shape[0] != self.weights.shape[0]:
            raise ContractError(
                f"bias length {self.bias.shape[0]} does not match {self.weights.shape[0]} weight rows"
            )

    @property
    def n_in(self):
        return self.weights.shape[1]

    @property
    def n_out(self):
        return self.weights.shape[0]


@dataclass
class ForwardTrace:
    """Pre-activations and activations of every layer, input excluded."""

    inputs: np.ndarray
    pre_activations: list
    activations: list

    @property
    def output(self):
        return self.activations[-1]


@dataclass
class MlpModel:
    layers: list
    slope_a: float = 0.5
    output_activation: str = "leaky_relu"
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.slope_a = check_slope(self.slope_a)
        if self.output_activation not in OUTPUT_ACTIVATIONS:
            raise ConfigError(
                f"output_activation must be one of {OUTPUT_ACTIVATIONS}, got {self.output_activation!r}"
            )
        if len(self.layers) < 1:
            raise ContractError("model needs at least one layer")
        for l in range(1, len(self.layers)):
            if self.layers[l].n_in != self.layers[l - 1].n_out:
                raise ContractError(
                    f"layer {l + 1} expects {self.layers[l].n_in} inputs but layer {l} "
                    f"produces {self.layers[l - 1].n_out}"
                )

    @property
    def depth(self):
        """Number of cascade elements N (hidden layers plus the output layer)."""
        return len(self.layers)

    @property
    def n_inputs(self):
        return self.layers[0].n_in

    @property
    def widths(self):
        return [self.n_inputs] + [layer.n_out for layer in self.layers]

    def copy(self):
        return MlpModel(
            [LayerParams(p.weights.copy(), p.bias.copy()) for p in self.layers],
            self.slope_a,
            self.output_activation,
            dict(self.meta),
        )

    def _activate(self, l, z):
        if l == len(self.layers) - 1 and self.output_activation == "linear":
            return z
        return np.maximum(z, self.slope_a * z)

    def _slope(self, l, z):
        if l == len(self.layers) - 1 and self.output_activation == "linear":
            return np.ones_like(z)
        return leaky_relu_slope(z, self.slope_a)

    def forward(self, x):
        """Evaluate the network, recording every layer.

        ``x`` may be a single input vector or a batch with one sample per
        row; the trace mirrors that shape.
        """
        x = np.asarray(x, dtype=np.float64)
        if x.ndim not in (1, 2) or x.shape[-1] != self.n_inputs:
            raise ContractError(
                f"input of shape {x.shape} does not match model input width {self.n_inputs}"
            )
        pre, act = [], []
        h = x
        for l, layer in enumerate(self.layers):
            z = h @ layer.weights.T + layer.bias
            h = self._activate(l, z)
            pre.append(z)
            act.append(h)
        return ForwardTrace(x, pre, act)

    def predict(self, x):
        """Scalar predictions for a batch (single-output models)."""
        out = self.forward(x).output
        return out[..., 0] if out.shape[-1] == 1 else out

    def mse_gradients(self, x, targets):
        """Mean-squared error and its gradient over a batch.

        Parameters
        ----------
        x : array_like, shape (batch, n_inputs)
        targets : array_like, shape (batch,) or (batch, n_outputs)

        Returns
        -------
        mse : float
        grads : list of (dW, db) tuples, one per layer
        """
        x = np.atleast_2d(np.asarray(x, dtype=np.float64))
        if x.shape[0] == 0:
            raise ContractError("gradient requested for an empty batch")
        t = np.asarray(targets, dtype=np.float64).reshape(x.shape[0], -1)
        trace = self.forward(x)
        err = trace.output - t
        mse = float(np.mean(err**2))
        delta = 2.0 * err / err.size
        grads = [None] * len(self.layers)
        for l in range(len(self.layers) - 1, -1, -1):
            delta = delta * self._slope(l, trace.pre_activations[l])
            prev = trace.activations[l - 1] if l > 0 else x
            grads[l] = (delta.T @ prev, delta.sum(axis=0))
            if l > 0:
                delta = delta @ self.layers[l].weights
        return mse, grads

    # ---- flat parameter view, used by the optimiser and gradient checks ----

    def get_flat(self):
        return np.concatenate([np.concatenate([p.weights.ravel(), p.bias]) for p in self.layers])

    def set_flat(self, theta):
        theta = np.asarray(theta, dtype=np.float64)
        i = 0
        for p in self.layers:
            nw = p.weights.size
            p.weights = theta[i : i + nw].reshape(p.weights.shape).copy()
            i += nw
            p.bias = theta[i : i + p.bias.size].copy()
            i += p.bias.size
        if i != theta.size:
            raise ContractError(f"flat parameter vector has {theta.size} entries, model needs {i}")

    @staticmethod
    def flatten_grads(grads):
        return np.concatenate([np.concatenate([dw.ravel(), db]) for dw, db in grads])


def forward(model, x):
    return model.forward(x)


def gradients(model, x, targets):
    return model.mse_gradients(x, targets)


def init_model(widths, slope_a=0.5, nu_target=1.0, seed=0, output_activation="leaky_relu"):
    """Glorot-uniform weights plus a block offset placing each layer on its passivity boundary.

    The offset adds ``n_in * nu / a`` in total, spread evenly over the block
    (first half of the rows) x (second half of the columns).  Because the
    offset of layer ``l+1`` reads only the units that the offset of layer
    ``l`` does not write, the offsets do not compound through depth.
    """
    slope_a = check_slope(slope_a)
    nus = np.broadcast_to(np.asarray(nu_target, dtype=np.float64), (len(widths) - 1,))
    rng = np.random.default_rng(seed)
    layers = []
    for l, (n_in, n_out) in enumerate(zip(widths[:-1], widths[1:])):
        limit = math.sqrt(6.0 / (n_in + n_out))
        w = rng.uniform(-limit, limit, size=(n_out, n_in))
        rows = slice(0, max(1, n_out // 2))
        cols = slice(n_in // 2, n_in)
        block = w[rows, cols]
        block += n_in * nus[l] / slope_a / block.size
        layers.append(LayerParams(w, np.zeros(n_out)))
    return MlpModel(layers, slope_a, output_activation)


def build_widths(n_inputs, hidden_layers, n_outputs=1):
    """Hidden layers as wide as the input, followed by the output layer."""
    return [n_inputs] * (hidden_layers + 1) + [n_outputs]


# ---- serialisation ----


def to_dict(model):
    return {
        "version": MODEL_FILE_VERSION,
        "slope_a": model.slope_a,
        "output_activation": model.output_activation,
        "layers": [
            {
                "rows": p.n_out,
                "cols": p.n_in,
                "weights": [float(w) for w in p.weights.ravel()],
                "bias": [float(b) for b in p.bias],
            }
            for p in model.layers
        ],
    }


def serialize(model):
    # json writes floats with repr(), which round-trips exactly
    return json.dumps(to_dict(model), indent=1)


def _number_list(values, where):
    if not isinstance(values, list):
        raise ParseError("expected a list of numbers", where)
    out = []
    for k, v in enumerate(values):
        if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v):
            raise ParseError(f"entry {v!r} is not a finite number", f"{where}[{k}]")
        out.append(float(v))
    return np.array(out, dtype=np.float64)


def from_dict(doc):
    if not isinstance(doc, dict):
        raise ParseError("model document must be an object")
    version = str(doc.get("version", MODEL_FILE_VERSION))
    if version != MODEL_FILE_VERSION:
        raise ParseError(f"unsupported model file version {version!r}", "version")
    if "slope_a" not in doc:
        raise ParseError("missing field", "slope_a")
    slope = doc["slope_a"]
    if isinstance(slope, bool) or not isinstance(slope, (int, float)):
        raise ParseError("slope_a must be a number", "slope_a")
    check_slope(slope)
    layers_doc = doc.get("layers")
    if not isinstance(layers_doc, list) or not layers_doc:
        raise ParseError("layer list is missing or empty", "layers")
    layers = []
    for l, entry in enumerate(layers_doc):
        where = f"layers[{l}]"
        if not isinstance(entry, dict):
            raise ParseError("layer entry must be an object", where)
        try:
            rows, cols = int(entry["rows"]), int(entry["cols"])
        except (KeyError, TypeError, ValueError) as exc:
            raise ParseError("rows/cols missing or not integers", where) from exc
        if rows < 1 or cols < 1:
            raise ParseError("rows and cols must be positive", where)
        w = _number_list(entry.get("weights"), f"{where}.weights")
        b = _number_list(entry.get("bias"), f"{where}.bias")
        if w.size != rows * cols:
            raise ParseError(f"expected {rows * cols} weights, found {w.size}", f"{where}.weights")
        if b.size != rows:
            raise ParseError(f"expected {rows} biases, found {b.size}", f"{where}.bias")
        if l > 0 and cols != layers[-1].n_out:
            raise ParseError(
                f"layer takes {cols} inputs but previous layer has {layers[-1].n_out} outputs", where
            )
        layers.append(LayerParams(w.reshape(rows, cols), b))
    return MlpModel(layers, float(slope), doc.get("output_activation", "leaky_relu"))


def deserialize(text):
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"invalid JSON: {exc.msg}", f"line {exc.lineno} column {exc.colno}") from exc
    return from_dict(doc)


def save_model(model, path):
    with open(path, "w") as fh:
        fh.write(serialize(model))
        fh.write("\n")


def load_model(path):
    with open(path) as fh:
        return deserialize(fh.read())
