"""Minimal deterministic inference kit for dense, recurrent and LSTM networks.

Everything here is plain 64-bit numpy.  Models are immutable after
construction; ``forward`` is pure, so the verifier side of the package can
treat a model as an opaque function from input vectors to output vectors.

Besides inference this module owns the JSON weight-file format (the contract
with the export toolchain) and the recurrent-to-feedforward unrolling
transform, which rewrites an RNN or LSTM of fixed sequence length into a
stack of dense / product layers with identity pass-through ("dummy") nodes.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field, replace

import numpy as np

FORMAT_VERSION = 1

ACTIVATION_NAMES = ("relu", "sigmoid", "tanh", "identity")
CELL_KINDS = ("recurrent-cell", "lstm-cell")
FF_KINDS = ("dense", "activation", "softmax", "product")


class FormatError(ValueError):
    """Weight file is malformed; the message names the offending field."""


class DimensionError(ValueError):
    """Layer weights are mutually inconsistent; message names the layer index."""


class ContractError(ValueError):
    """A caller violated an operation precondition (e.g. arity mismatch)."""


class UnsupportedStructureError(ValueError):
    """The model's layer arrangement is outside what an operation supports."""


def _relu(x):
    return np.maximum(x, 0.0)


def _sigmoid(x):
    return 1.0 / (1.0 + np.exp(-x))


_ACT = {"relu": _relu, "sigmoid": _sigmoid, "tanh": np.tanh, "identity": lambda x: x}


def _apply_activation(act, x):
    """Apply a named activation or a tuple of (name, width) segments."""
    if isinstance(act, str):
        return _ACT[act](x)
    out = np.empty_like(x)
    pos = 0
    for name, width in act:
        out[..., pos : pos + width] = _ACT[name](x[..., pos : pos + width])
        pos += width
    return out


def _softmax(x):
    shifted = x - np.max(x, axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / np.sum(e, axis=-1, keepdims=True)


@dataclass(frozen=True)
class Layer:
    """One network layer.

    kind: dense | activation | softmax | product | recurrent-cell | lstm-cell
    activation: name, or tuple of (name, width) segments for mixed layers
        produced by unrolling.
    params: weight matrices / bias vectors keyed by conventional names
        (dense: W, b; recurrent-cell: W_x, W_h, b; lstm-cell: W_i/W_f/W_o/W_c,
        U_i/U_f/U_o/U_c, b_i/b_f/b_o/b_c).
    pairs: for product layers, the first 2*pairs inputs are multiplied
        elementwise (x[:pairs] * x[pairs:2*pairs]); the rest pass through.
    """

    kind: str
    activation: object = None
    params: dict = field(default_factory=dict)
    pairs: int = 0

    def in_dim(self):
        if self.kind == "dense":
            return self.params["W"].shape[1]
        if self.kind == "recurrent-cell":
            return self.params["W_x"].shape[1]
        if self.kind == "lstm-cell":
            return self.params["W_i"].shape[1]
        return None  # activation / softmax / product adapt to their input

    def out_dim(self, in_dim=None):
        if self.kind == "dense":
            return self.params["W"].shape[0]
        if self.kind == "recurrent-cell":
            return self.params["W_x"].shape[0]
        if self.kind == "lstm-cell":
            return self.params["W_i"].shape[0]
        if self.kind == "product":
            return in_dim - self.pairs
        return in_dim


@dataclass(frozen=True)
class Model:
    """A layered network: for sequence models the recurrent cells come first
    (stacked), followed by a feedforward head applied to the final hidden
    state.  Pure feedforward models have sequence_length == 1."""

    input_arity: int
    sequence_length: int
    labels: tuple
    layers: tuple

    def __post_init__(self):
        object.__setattr__(self, "labels", tuple(self.labels))
        object.__setattr__(self, "layers", tuple(self.layers))
        _validate(self)

    @property
    def frame_size(self):
        return self.input_arity // self.sequence_length

    @property
    def is_recurrent(self):
        return any(l.kind in CELL_KINDS for l in self.layers)

    @property
    def output_arity(self):
        return len(self.labels)


def _check_finite(name, arr):
    if not np.all(np.isfinite(arr)):
        raise FormatError(f"non-finite value in '{name}'")


def _validate(model):
    if model.input_arity <= 0:
        raise DimensionError("input_arity must be positive")
    if model.sequence_length <= 0:
        raise DimensionError("sequence_length must be positive")
    if model.input_arity % model.sequence_length != 0:
        raise DimensionError(
            "input_arity %d not divisible by sequence_length %d"
            % (model.input_arity, model.sequence_length)
        )
    for idx, layer in enumerate(model.layers):
        if layer.kind not in FF_KINDS + CELL_KINDS:
            raise DimensionError(f"layer {idx}: unknown kind '{layer.kind}'")
        for key, arr in layer.params.items():
            _check_finite(f"layer {idx} {key}", arr)
        act = layer.activation
        if act is not None and not isinstance(act, str):
            for name, width in act:
                if name not in ACTIVATION_NAMES:
                    raise DimensionError(f"layer {idx}: unknown activation '{name}'")
        elif isinstance(act, str) and act not in ACTIVATION_NAMES:
            raise DimensionError(f"layer {idx}: unknown activation '{act}'")

    seq = model.sequence_length > 1
    cur = model.frame_size if seq else model.input_arity
    in_cell_block = seq
    for idx, layer in enumerate(model.layers):
        if layer.kind in CELL_KINDS:
            if not in_cell_block:
                raise DimensionError(
                    f"layer {idx}: recurrent cell after feedforward layers"
                )
            _validate_cell(idx, layer, cur)
            cur = layer.out_dim()
            continue
        in_cell_block = False
        cur = _validate_ff(idx, layer, cur)
    if seq and not any(l.kind in CELL_KINDS for l in model.layers):
        raise DimensionError("sequence model declares no recurrent layers")
    if cur != len(model.labels):
        raise DimensionError(
            "output arity %d does not match label count %d" % (cur, len(model.labels))
        )


def _validate_cell(idx, layer, frame):
    p = layer.params
    if layer.kind == "recurrent-cell":
        wx, wh, b = p.get("W_x"), p.get("W_h"), p.get("b")
        if wx is None or wh is None or b is None:
            raise DimensionError(f"layer {idx}: recurrent-cell needs W_x, W_h, b")
        h = wx.shape[0]
        if wx.shape[1] != frame or wh.shape != (h, h) or b.shape != (h,):
            raise DimensionError(f"layer {idx}: inconsistent recurrent-cell shapes")
    else:
        h = p["W_i"].shape[0]
        for g in "ifoc":
            w, u, b = p.get(f"W_{g}"), p.get(f"U_{g}"), p.get(f"b_{g}")
            if w is None or u is None or b is None:
                raise DimensionError(f"layer {idx}: lstm-cell missing gate '{g}'")
            if w.shape != (h, frame) or u.shape != (h, h) or b.shape != (h,):
                raise DimensionError(f"layer {idx}: inconsistent lstm gate '{g}' shapes")


def _validate_ff(idx, layer, cur):
    if layer.kind == "dense":
        w, b = layer.params.get("W"), layer.params.get("b")
        if w is None or b is None:
            raise DimensionError(f"layer {idx}: dense needs W and b")
        if w.ndim != 2 or w.shape[1] != cur or b.shape != (w.shape[0],):
            raise DimensionError(
                f"layer {idx}: dense W {w.shape} incompatible with input width {cur}"
            )
        out = w.shape[0]
    elif layer.kind == "product":
        if layer.pairs <= 0 or 2 * layer.pairs > cur:
            raise DimensionError(f"layer {idx}: product pairs out of range")
        out = cur - layer.pairs
    else:  # activation / softmax
        out = cur
    act = layer.activation
    if act is not None and not isinstance(act, str):
        if sum(w for _, w in act) != out:
            raise DimensionError(f"layer {idx}: activation segments sum != width {out}")
    if layer.kind == "activation" and act is None:
        raise DimensionError(f"layer {idx}: activation layer needs activation name")
    return out


def _run_cell(layer, seq):
    """seq: (batch, time, features) -> (batch, time, hidden)."""
    p = layer.params
    batch, steps, _ = seq.shape
    if layer.kind == "recurrent-cell":
        h = np.zeros((batch, p["W_x"].shape[0]))
        act = layer.activation or "tanh"
        out = np.empty((batch, steps, h.shape[1]))
        for t in range(steps):
            h = _apply_activation(act, seq[:, t] @ p["W_x"].T + h @ p["W_h"].T + p["b"])
            out[:, t] = h
        return out
    hdim = p["W_i"].shape[0]
    h = np.zeros((batch, hdim))
    c = np.zeros((batch, hdim))
    out = np.empty((batch, steps, hdim))
    for t in range(steps):
        x = seq[:, t]
        i = _sigmoid(x @ p["W_i"].T + h @ p["U_i"].T + p["b_i"])
        f = _sigmoid(x @ p["W_f"].T + h @ p["U_f"].T + p["b_f"])
        o = _sigmoid(x @ p["W_o"].T + h @ p["U_o"].T + p["b_o"])
        g = np.tanh(x @ p["W_c"].T + h @ p["U_c"].T + p["b_c"])
        c = f * c + i * g
        h = o * np.tanh(c)
        out[:, t] = h
    return out


def _run_ff(layer, x):
    if layer.kind == "dense":
        z = x @ layer.params["W"].T + layer.params["b"]
        return _apply_activation(layer.activation or "identity", z)
    if layer.kind == "activation":
        return _apply_activation(layer.activation, x)
    if layer.kind == "softmax":
        return _softmax(x)
    m = layer.pairs
    return np.concatenate([x[..., :m] * x[..., m : 2 * m], x[..., 2 * m :]], axis=-1)


def forward_batch(model, inputs):
    """Forward pass over a (batch, input_arity) array of inputs."""
    x = np.asarray(inputs, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != model.input_arity:
        raise ContractError(
            "expected inputs of shape (batch, %d), got %s"
            % (model.input_arity, x.shape)
        )
    if not np.all(np.isfinite(x)):
        raise ContractError("non-finite input")
    idx = 0
    if model.sequence_length > 1:
        seq = x.reshape(x.shape[0], model.sequence_length, model.frame_size)
        while idx < len(model.layers) and model.layers[idx].kind in CELL_KINDS:
            seq = _run_cell(model.layers[idx], seq)
            idx += 1
        x = seq[:, -1]
    for layer in model.layers[idx:]:
        x = _run_ff(layer, x)
    return x


def forward(model, inputs):
    """Deterministic forward pass for a single input vector."""
    x = np.asarray(inputs, dtype=np.float64)
    if x.ndim != 1:
        raise ContractError("forward expects a 1-D input vector")
    return forward_batch(model, x[None, :])[0]


# ---------------------------------------------------------------------------
# Weight-file loading / saving

def _parse_array(field_name, obj, ndim):
    try:
        arr = np.asarray(obj, dtype=np.float64)
    except (TypeError, ValueError) as exc:
        raise FormatError(f"field '{field_name}' is not numeric: {exc}") from None
    if arr.ndim != ndim:
        raise FormatError(f"field '{field_name}' must be {ndim}-dimensional")
    _check_finite(field_name, arr)
    return arr


def _parse_activation(field_name, obj):
    if obj is None or isinstance(obj, str):
        return obj
    try:
        segs = tuple((str(name), int(width)) for name, width in obj)
    except (TypeError, ValueError):
        raise FormatError(f"field '{field_name}' is not a valid activation spec") from None
    return segs


_LAYER_ARRAYS = {
    "dense": {"W": 2, "b": 1},
    "recurrent-cell": {"W_x": 2, "W_h": 2, "b": 1},
    "lstm-cell": {
        **{f"W_{g}": 2 for g in "ifoc"},
        **{f"U_{g}": 2 for g in "ifoc"},
        **{f"b_{g}": 1 for g in "ifoc"},
    },
    "activation": {},
    "softmax": {},
    "product": {},
}


def _layer_from_dict(i, obj):
    kind = obj.get("kind")
    if kind not in _LAYER_ARRAYS:
        raise FormatError(f"field 'layers[{i}].kind' has unsupported value {kind!r}")
    params = {}
    for key, ndim in _LAYER_ARRAYS[kind].items():
        if key not in obj:
            raise FormatError(f"field 'layers[{i}].{key}' is missing")
        params[key] = _parse_array(f"layers[{i}].{key}", obj[key], ndim)
    activation = _parse_activation(f"layers[{i}].activation", obj.get("activation"))
    pairs = int(obj.get("pairs", 0)) if kind == "product" else 0
    if kind == "product" and pairs <= 0:
        raise FormatError(f"field 'layers[{i}].pairs' must be a positive integer")
    return Layer(kind=kind, activation=activation, params=params, pairs=pairs)


def load_model(path):
    """Load a model from the JSON weight-file format (format_version 1)."""
    with open(path, "r", encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise FormatError(f"invalid JSON: {exc}") from None
    if doc.get("format_version") != FORMAT_VERSION:
        raise FormatError("field 'format_version' must equal %d" % FORMAT_VERSION)
    for key in ("input_arity", "sequence_length", "labels", "layers"):
        if key not in doc:
            raise FormatError(f"field '{key}' is missing")
    layers = [_layer_from_dict(i, obj) for i, obj in enumerate(doc["layers"])]
    return Model(
        input_arity=int(doc["input_arity"]),
        sequence_length=int(doc["sequence_length"]),
        labels=tuple(str(s) for s in doc["labels"]),
        layers=tuple(layers),
    )


def _layer_to_dict(layer):
    out = {"kind": layer.kind}
    if layer.activation is not None:
        act = layer.activation
        out["activation"] = act if isinstance(act, str) else [list(s) for s in act]
    if layer.kind == "product":
        out["pairs"] = layer.pairs
    for key, arr in layer.params.items():
        out[key] = arr.tolist()
    return out


def save_model(model, path):
    """Serialize a model to the weight-file format with round-trip precision."""
    doc = {
        "format_version": FORMAT_VERSION,
        "input_arity": model.input_arity,
        "sequence_length": model.sequence_length,
        "labels": list(model.labels),
        "layers": [_layer_to_dict(l) for l in model.layers],
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, sort_keys=True, indent=1)
        fh.write("\n")


# ---------------------------------------------------------------------------
# Recurrent-to-feedforward unrolling

def _seg(*parts):
    """Merge (name, width) parts, dropping zero widths and fusing neighbours."""
    merged = []
    for name, width in parts:
        if width <= 0:
            continue
        if merged and merged[-1][0] == name:
            merged[-1] = (name, merged[-1][1] + width)
        else:
            merged.append((name, width))
    if len(merged) == 1:
        return merged[0][0]
    return tuple(merged)


def _unroll_vanilla(cell, frame, hidden, length):
    """One dense layer per time step; untouched future frames pass through
    identity weights with identity activation (the dummy nodes)."""
    p = cell.params
    act = cell.activation or "tanh"
    layers = []
    for t in range(1, length + 1):
        rest = frame * (length - t)
        if t == 1:
            in_dim = frame * length
            w = np.zeros((hidden + rest, in_dim))
            w[:hidden, :frame] = p["W_x"]
            w[hidden:, frame:] = np.eye(rest)
        else:
            in_dim = hidden + frame + rest
            w = np.zeros((hidden + rest, in_dim))
            w[:hidden, :hidden] = p["W_h"]
            w[:hidden, hidden : hidden + frame] = p["W_x"]
            w[hidden:, hidden + frame :] = np.eye(rest)
        b = np.concatenate([p["b"], np.zeros(rest)])
        layers.append(
            Layer("dense", activation=_seg((act, hidden), ("identity", rest)), params={"W": w, "b": b})
        )
    return layers


def _unroll_lstm(cell, frame, hidden, length):
    """Four layers per step: gate dense (mixed activations), a product layer
    forming i*g and f*c, a combining dense producing tanh(c_t), and a second
    product forming h_t = o * tanh(c_t).  State order is [h, c, frames...]."""
    p = cell.params
    h, f = hidden, frame
    n = frame * length
    layers = []
    # bootstrap: x -> [h0=0, c0=0, x]
    boot = np.zeros((2 * h + n, n))
    boot[2 * h :, :] = np.eye(n)
    layers.append(Layer("dense", activation="identity", params={"W": boot, "b": np.zeros(2 * h + n)}))
    for t in range(1, length + 1):
        rest = f * (length - t)
        in_dim = 2 * h + f + rest  # [h, c, x_t, rest]
        xcol = 2 * h
        # gate layer -> [i, f, g, c_prev, o, rest]
        w = np.zeros((5 * h + rest, in_dim))
        b = np.zeros(5 * h + rest)
        for row, (wk, uk, bk) in enumerate(
            [("W_i", "U_i", "b_i"), ("W_f", "U_f", "b_f"), ("W_c", "U_c", "b_c")]
        ):
            w[row * h : (row + 1) * h, :h] = p[uk]
            w[row * h : (row + 1) * h, xcol : xcol + f] = p[wk]
            b[row * h : (row + 1) * h] = p[bk]
        w[3 * h : 4 * h, h : 2 * h] = np.eye(h)  # carry c_{t-1}
        w[4 * h : 5 * h, :h] = p["U_o"]
        w[4 * h : 5 * h, xcol : xcol + f] = p["W_o"]
        b[4 * h : 5 * h] = p["b_o"]
        w[5 * h :, xcol + f :] = np.eye(rest)
        layers.append(
            Layer(
                "dense",
                activation=_seg(
                    ("sigmoid", 2 * h), ("tanh", h), ("identity", h), ("sigmoid", h), ("identity", rest)
                ),
                params={"W": w, "b": b},
            )
        )
        # [i, f | g, c_prev | o, rest] -> [i*g, f*c_prev, o, rest]
        layers.append(Layer("product", pairs=2 * h))
        # -> [o, tanh(c_t), c_t, rest]
        w = np.zeros((3 * h + rest, 3 * h + rest))
        w[:h, 2 * h : 3 * h] = np.eye(h)
        w[h : 2 * h, :h] = np.eye(h)
        w[h : 2 * h, h : 2 * h] = np.eye(h)
        w[2 * h : 3 * h, :h] = np.eye(h)
        w[2 * h : 3 * h, h : 2 * h] = np.eye(h)
        w[3 * h :, 3 * h :] = np.eye(rest)
        layers.append(
            Layer(
                "dense",
                activation=_seg(("identity", h), ("tanh", h), ("identity", h + rest)),
                params={"W": w, "b": np.zeros(3 * h + rest)},
            )
        )
        # [o | tanh(c_t) | c_t, rest] -> [h_t, c_t, rest]
        layers.append(Layer("product", pairs=h))
    # drop the cell state, keep h_L
    sel = np.zeros((h, 2 * h))
    sel[:, :h] = np.eye(h)
    layers.append(Layer("dense", activation="identity", params={"W": sel, "b": np.zeros(h)}))
    return layers


def unroll_rnn(model, sequence_length):
    """Rewrite a recurrent model of fixed sequence length as an equivalent
    purely feedforward model.

    Supports a single leading recurrent or LSTM cell followed by a
    feedforward head.  Raises UnsupportedStructureError for stacked cells.
    An already-feedforward model is returned unchanged with a warning.
    """
    if not model.is_recurrent:
        warnings.warn("model is already feedforward; unroll_rnn is a no-op")
        return model
    if sequence_length != model.sequence_length:
        raise ContractError(
            "sequence_length %d does not match model's declared %d"
            % (sequence_length, model.sequence_length)
        )
    cells = [l for l in model.layers if l.kind in CELL_KINDS]
    if len(cells) > 1:
        raise UnsupportedStructureError("stacked recurrent cells are not supported")
    cell = cells[0]
    if model.layers[0] is not cell:
        raise UnsupportedStructureError("recurrent cell must be the first layer")
    frame = model.frame_size
    hidden = cell.out_dim()
    if cell.kind == "recurrent-cell":
        layers = _unroll_vanilla(cell, frame, hidden, sequence_length)
    else:
        layers = _unroll_lstm(cell, frame, hidden, sequence_length)
    layers.extend(model.layers[1:])
    return Model(
        input_arity=model.input_arity,
        sequence_length=1,
        labels=model.labels,
        layers=tuple(layers),
    )


# ---------------------------------------------------------------------------
# Sampled Lipschitz lower bound

def sampled_lipschitz(model, objective, spec, samples, seed):
    """Lower-bound estimate of the best Lipschitz constant of the scalar
    objective over the perturbation box, from sampled difference quotients
    under the sup norm.  Reproducible under a fixed seed."""
    from . import perturb  # local import: perturb depends on nnkit

    if samples < 2:
        raise ContractError("samples must be >= 2")
    fn = perturb.make_box_function(model, spec, objective)
    return sampled_lipschitz_fn(fn, samples, seed)


def sampled_lipschitz_fn(fn, samples, seed):
    """Same estimator over a bare box function (used by tests with closed
    forms).  Pairs are drawn as a uniform point plus a nearby offset so the
    estimate approaches the true maximum slope as samples grow."""
    lo = np.array([b[0] for b in fn.bounds])
    hi = np.array([b[1] for b in fn.bounds])
    width = hi - lo
    if fn.n == 0 or np.all(width == 0.0):
        warnings.warn("degenerate (zero-volume) perturbation box; returning 0")
        return 0.0
    rng = np.random.default_rng(seed)
    best = 0.0
    for _ in range(samples):
        x1 = rng.uniform(lo, hi)
        x2 = np.clip(x1 + rng.uniform(-1.0, 1.0, fn.n) * 0.01 * width, lo, hi)
        gap = np.max(np.abs(x1 - x2))
        if gap < 1e-15:
            continue
        best = max(best, abs(fn(x1) - fn(x2)) / gap)
    return best
