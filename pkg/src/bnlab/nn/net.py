"""Small dense networks with explicit forward/backward passes.

A :class:`DenseNet` is a stack of affine layers, each optionally wrapped
with a normalization (batch or layer) placed before ("pre") or after
("post") the affine map, followed by an activation.  Every batch-norm
site takes its :class:`~bnlab.nn.bn.BnMode` from the caller of
``net_forward`` -- the network itself has no train/eval switch.

Backward passes consume the tape produced by ``net_forward`` and return
the input gradient plus parameter gradients in the exact order of
``DenseNet.parameters()``.
"""

import numpy as np

from bnlab.nn import bn as bn_ops
from bnlab.nn.bn import BatchNormState, BnMode, LayerNormState

_ACTIVATIONS = ("relu", "tanh", "linear")
_NORM_POSITIONS = ("pre", "post")


def _act_forward(kind, z):
    if kind == "relu":
        return np.maximum(z, 0.0)
    if kind == "tanh":
        return np.tanh(z)
    return z


def _act_backward(kind, out, dy):
    # ``out`` is the activation output; for these activations the local
    # derivative is recoverable from the output alone.
    if kind == "relu":
        return np.where(out > 0.0, dy, 0.0)
    if kind == "tanh":
        return dy * (1.0 - out * out)
    return dy


class DenseLayer:
    """One affine map with optional normalization and an activation."""

    def __init__(self, w, b, norm=None, norm_pos="post", activation="linear"):
        if activation not in _ACTIVATIONS:
            raise ValueError(f"unknown activation {activation!r}")
        if norm_pos not in _NORM_POSITIONS:
            raise ValueError(f"norm_pos must be 'pre' or 'post', got {norm_pos!r}")
        self.w = w
        self.b = b
        self.norm = norm
        self.norm_pos = norm_pos
        self.activation = activation
        if norm is not None:
            expected = w.shape[0] if norm_pos == "pre" else w.shape[1]
            if norm.width != expected:
                raise ValueError(
                    f"norm width {norm.width} does not match layer width {expected}"
                )

    @property
    def in_dim(self):
        return self.w.shape[0]

    @property
    def out_dim(self):
        return self.w.shape[1]

    def clone(self):
        return DenseLayer(
            self.w.copy(),
            self.b.copy(),
            norm=self.norm.clone() if self.norm is not None else None,
            norm_pos=self.norm_pos,
            activation=self.activation,
        )


class DenseNet:
    def __init__(self, layers, output_scale=None):
        for prev, nxt in zip(layers, layers[1:]):
            if prev.out_dim != nxt.in_dim:
                raise ValueError(
                    f"layer widths do not chain: {prev.out_dim} -> {nxt.in_dim}"
                )
        self.layers = layers
        self.output_scale = output_scale

    @property
    def input_dim(self):
        return self.layers[0].in_dim

    @property
    def output_dim(self):
        return self.layers[-1].out_dim

    def parameters(self):
        """Live references to all learnable arrays, in a fixed order."""
        params = []
        for layer in self.layers:
            params.append(layer.w)
            params.append(layer.b)
            if layer.norm is not None:
                params.append(layer.norm.gamma)
                params.append(layer.norm.beta)
        return params

    def param_names(self):
        names = []
        for i, layer in enumerate(self.layers):
            names.append(f"layers.{i}.w")
            names.append(f"layers.{i}.b")
            if layer.norm is not None:
                names.append(f"layers.{i}.norm.gamma")
                names.append(f"layers.{i}.norm.beta")
        return names

    def bn_states(self):
        return [
            layer.norm
            for layer in self.layers
            if isinstance(layer.norm, BatchNormState)
        ]

    def state_arrays(self):
        """All arrays defining the net (parameters + running stats), by name."""
        out = dict(zip(self.param_names(), self.parameters()))
        for i, layer in enumerate(self.layers):
            if isinstance(layer.norm, BatchNormState):
                out[f"layers.{i}.norm.run_mean"] = layer.norm.run_mean
                out[f"layers.{i}.norm.run_var"] = layer.norm.run_var
        return out

    def clone(self):
        return DenseNet(
            [layer.clone() for layer in self.layers], output_scale=self.output_scale
        )


def mlp(
    in_dim,
    hidden,
    out_dim,
    rng,
    activation="relu",
    out_activation="linear",
    norm=None,
    norm_pos="post",
    momentum=0.1,
    epsilon=1e-5,
    output_scale=None,
):
    """Build a dense net; hidden layers get the requested normalization.

    Weights are initialized uniformly in +-1/sqrt(fan_in), biases at
    zero, norm scales at one -- so a fresh net is deterministic given
    ``rng`` and small enough to gradient-check quickly.
    """
    if norm not in (None, "batch", "layer"):
        raise ValueError(f"norm must be None, 'batch' or 'layer', got {norm!r}")
    dims = [in_dim, *hidden, out_dim]
    layers = []
    for i in range(len(dims) - 1):
        fan_in, fan_out = dims[i], dims[i + 1]
        bound = 1.0 / np.sqrt(fan_in)
        w = rng.uniform(-bound, bound, size=(fan_in, fan_out))
        b = np.zeros(fan_out)
        last = i == len(dims) - 2
        layer_norm = None
        if norm is not None and not last:
            width = fan_in if norm_pos == "pre" else fan_out
            if norm == "batch":
                layer_norm = BatchNormState.create(width, momentum, epsilon)
            else:
                layer_norm = LayerNormState.create(width)
        layers.append(
            DenseLayer(
                w,
                b,
                norm=layer_norm,
                norm_pos=norm_pos,
                activation="linear" if last else activation,
            )
        )
    layers[-1].activation = out_activation
    return DenseNet(layers, output_scale=output_scale)


class _LayerTape:
    __slots__ = ("x_in", "norm_tape", "act_out")

    def __init__(self, x_in, norm_tape, act_out):
        self.x_in = x_in
        self.norm_tape = norm_tape
        self.act_out = act_out


class NetTape:
    def __init__(self, layer_tapes, aux_out=None):
        self.layer_tapes = layer_tapes
        self.aux_out = aux_out
        self.consumed = False


def _norm_forward(layer, h, mode, aux, want_tape):
    """Normalize ``h`` (and the aux stream, if any) at one site."""
    if isinstance(layer.norm, BatchNormState):
        y, tape = bn_ops.bn_forward(h, layer.norm, mode, aux=aux, want_tape=want_tape)
        aux_out = tape.aux_out if (tape is not None and aux is not None) else None
        return y, tape, aux_out
    # Layer norm treats every row independently, so aux rows are simply
    # normalized on their own; modes do not apply.
    y, tape = bn_ops.ln_forward(h, layer.norm, want_tape=want_tape)
    aux_out = None
    if aux is not None:
        aux_out, _ = bn_ops.ln_forward(aux, layer.norm, want_tape=False)
    return y, tape, aux_out


def net_forward(net, x, mode=BnMode.EVAL, aux=None, want_tape=True):
    """Forward pass; returns ``(y, tape)``.

    ``aux`` is an optional block of stats-only rows that flows through
    the same layers as ``x`` (requires ``mode=STATS_ONLY_MIXED`` and at
    least one batch-norm site to be meaningful; it participates in every
    batch-norm's statistics and receives no gradient).
    """
    if x.ndim != 2 or x.shape[1] != net.input_dim:
        raise ValueError(
            f"input shape {x.shape} does not match net input dim {net.input_dim}"
        )
    if (aux is not None) != (mode is BnMode.STATS_ONLY_MIXED):
        raise ValueError("aux rows and STATS_ONLY_MIXED mode must be used together")
    if mode is BnMode.STATS_ONLY_MIXED and not want_tape:
        raise ValueError("mixed mode always needs a tape (it carries aux output)")
    h = x
    tapes = []
    for layer in net.layers:
        norm_tape = None
        if layer.norm is not None and layer.norm_pos == "pre":
            h, norm_tape, aux = _norm_forward(layer, h, mode, aux, want_tape)
        x_in = h
        h = h @ layer.w + layer.b
        if aux is not None:
            aux = aux @ layer.w + layer.b
        if layer.norm is not None and layer.norm_pos == "post":
            h, norm_tape, aux = _norm_forward(layer, h, mode, aux, want_tape)
        h = _act_forward(layer.activation, h)
        if aux is not None:
            aux = _act_forward(layer.activation, aux)
        if want_tape:
            tapes.append(_LayerTape(x_in, norm_tape, h))
    if net.output_scale is not None:
        h = h * net.output_scale
        if aux is not None:
            aux = aux * net.output_scale
    if not want_tape:
        return h, None
    return h, NetTape(tapes, aux_out=aux)


def net_backward(net, tape, dy, want_param_grads=True):
    """Backpropagate ``dy`` through a taped forward.

    Returns ``(dx, grads)`` where ``grads`` aligns with
    ``net.parameters()`` (or is None when ``want_param_grads`` is
    false, which also skips the weight-gradient matmuls -- handy when a
    frozen net is only a conduit for input gradients).
    """
    if tape is None:
        raise ValueError("forward was taken without a tape; cannot backpropagate")
    if tape.consumed:
        raise ValueError("tape already consumed")
    tape.consumed = True
    if dy.shape[1] != net.output_dim:
        raise ValueError(f"dy width {dy.shape[1]} does not match {net.output_dim}")
    if net.output_scale is not None:
        dy = dy * net.output_scale
    grads = [] if want_param_grads else None
    for layer, lt in zip(reversed(net.layers), reversed(tape.layer_tapes)):
        dy = _act_backward(layer.activation, lt.act_out, dy)
        layer_grads = []
        if layer.norm is not None and layer.norm_pos == "post":
            dy, dgamma, dbeta = _norm_backward(layer, lt.norm_tape, dy)
            if want_param_grads:
                layer_grads = [dgamma, dbeta]
        if want_param_grads:
            dw = lt.x_in.T @ dy
            db = dy.sum(axis=0)
            layer_grads = [dw, db, *layer_grads]
        dy = dy @ layer.w.T
        if layer.norm is not None and layer.norm_pos == "pre":
            dy, dgamma, dbeta = _norm_backward(layer, lt.norm_tape, dy)
            if want_param_grads:
                layer_grads.extend([dgamma, dbeta])
        if want_param_grads:
            grads = layer_grads + grads
    return dy, grads


def _norm_backward(layer, norm_tape, dy):
    if isinstance(layer.norm, BatchNormState):
        return bn_ops.bn_backward(norm_tape, dy)
    return bn_ops.ln_backward(norm_tape, dy)
