"""Minimal dense/conv network core used by every other module.

Everything runs in float64 numpy. The layer set is deliberately frozen to
dense, 2-D convolution (stride >= 1, zero padding) and the rectifier, which
is enough for the Q-networks, the reference feature network, and interval
bound propagation. Batched internals (`*_batch`) operate on arrays with a
leading batch axis; the single-sample wrappers are the public surface.

Conventions:
  - conv inputs/outputs are (H, W, C), kernels are (kh, kw, cin, cout)
  - dense weights are (out, in); a dense layer flattens its input row-major
  - gradients come back as a ParamSet of the same shape as the parameters
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

Array = np.ndarray

ACTIVATIONS = ("identity", "relu")


class ShapeMismatchError(ValueError):
    """Input/parameter shape disagreement, diagnosed with the layer index."""


class NonFiniteError(ValueError):
    """NaN or Inf encountered where finite values are required."""


def require_finite(arr: Array, what: str) -> None:
    if not np.all(np.isfinite(arr)):
        raise NonFiniteError(f"non-finite values in {what}")


# ---------------------------------------------------------------------------
# Layers and parameter sets
# ---------------------------------------------------------------------------

@dataclass
class DenseLayer:
    weight: Array  # (out, in)
    bias: Array    # (out,)
    activation: str = "identity"

    def __post_init__(self):
        self.weight = np.asarray(self.weight, dtype=np.float64)
        self.bias = np.asarray(self.bias, dtype=np.float64)
        if self.weight.ndim != 2 or self.bias.shape != (self.weight.shape[0],):
            raise ShapeMismatchError(
                f"dense layer: weight {self.weight.shape} / bias {self.bias.shape}")
        if self.activation not in ACTIVATIONS:
            raise ValueError(f"unsupported activation {self.activation!r}")

    @property
    def in_features(self) -> int:
        return self.weight.shape[1]

    @property
    def out_features(self) -> int:
        return self.weight.shape[0]


@dataclass
class ConvLayer:
    kernel: Array  # (kh, kw, cin, cout)
    bias: Array    # (cout,)
    stride: int = 1
    padding: int = 0
    activation: str = "identity"

    def __post_init__(self):
        self.kernel = np.asarray(self.kernel, dtype=np.float64)
        self.bias = np.asarray(self.bias, dtype=np.float64)
        if self.kernel.ndim != 4 or self.bias.shape != (self.kernel.shape[3],):
            raise ShapeMismatchError(
                f"conv layer: kernel {self.kernel.shape} / bias {self.bias.shape}")
        if self.stride < 1 or self.padding < 0:
            raise ValueError("conv layer needs stride >= 1 and padding >= 0")
        if self.activation not in ACTIVATIONS:
            raise ValueError(f"unsupported activation {self.activation!r}")


Layer = DenseLayer | ConvLayer


@dataclass
class ParamSet:
    """Ordered list of layers; also used as the container for gradients."""

    layers: list[Layer] = field(default_factory=list)

    def copy(self) -> "ParamSet":
        out = []
        for lay in self.layers:
            if isinstance(lay, DenseLayer):
                out.append(DenseLayer(lay.weight.copy(), lay.bias.copy(), lay.activation))
            else:
                out.append(ConvLayer(lay.kernel.copy(), lay.bias.copy(),
                                     lay.stride, lay.padding, lay.activation))
        return ParamSet(out)

    def zeros_like(self) -> "ParamSet":
        out = []
        for lay in self.layers:
            if isinstance(lay, DenseLayer):
                out.append(DenseLayer(np.zeros_like(lay.weight), np.zeros_like(lay.bias),
                                      lay.activation))
            else:
                out.append(ConvLayer(np.zeros_like(lay.kernel), np.zeros_like(lay.bias),
                                     lay.stride, lay.padding, lay.activation))
        return ParamSet(out)

    def arrays(self):
        """Yield (layer_index, field_name, array) for every parameter array."""
        for i, lay in enumerate(self.layers):
            if isinstance(lay, DenseLayer):
                yield i, "weight", lay.weight
                yield i, "bias", lay.bias
            else:
                yield i, "kernel", lay.kernel
                yield i, "bias", lay.bias

    def n_params(self) -> int:
        return sum(a.size for _, _, a in self.arrays())


def add_scaled(params: ParamSet, grads: ParamSet, scale: float) -> None:
    """params += scale * grads, in place."""
    for (_, _, p), (_, _, g) in zip(params.arrays(), grads.arrays()):
        p += scale * g


# ---------------------------------------------------------------------------
# Activations
# ---------------------------------------------------------------------------

def _act(pre: Array, tag: str) -> Array:
    if tag == "relu":
        return np.maximum(pre, 0.0)
    return pre


def _act_mask(pre: Array, tag: str) -> Array | None:
    # derivative mask; None means identity
    if tag == "relu":
        return (pre > 0.0).astype(np.float64)
    return None


# ---------------------------------------------------------------------------
# Convolution primitives (batched, NHWC)
# ---------------------------------------------------------------------------

def _conv_windows(x: Array, kh: int, kw: int, stride: int, pad: int) -> Array:
    """im2col: (B, H, W, C) -> (B*oh*ow, kh*kw*C) plus the output grid shape."""
    if pad:
        x = np.pad(x, ((0, 0), (pad, pad), (pad, pad), (0, 0)))
    win = sliding_window_view(x, (kh, kw), axis=(1, 2))[:, ::stride, ::stride]
    # win: (B, oh, ow, C, kh, kw) -> (B, oh, ow, kh, kw, C)
    b, oh, ow = win.shape[:3]
    cols = np.ascontiguousarray(win.transpose(0, 1, 2, 4, 5, 3))
    return cols.reshape(b * oh * ow, -1), (b, oh, ow)


def conv2d_forward(x: Array, kernel: Array, bias: Array | None,
                   stride: int, pad: int) -> Array:
    kh, kw, cin, cout = kernel.shape
    cols, (b, oh, ow) = _conv_windows(x, kh, kw, stride, pad)
    k2 = kernel.transpose(0, 1, 2, 3).reshape(kh * kw * cin, cout)
    y = (cols @ k2).reshape(b, oh, ow, cout)
    if bias is not None:
        y = y + bias
    return y


def conv2d_kernel_grad(x: Array, gout: Array, kernel_shape: tuple,
                       stride: int, pad: int) -> Array:
    kh, kw, cin, cout = kernel_shape
    cols, (b, oh, ow) = _conv_windows(x, kh, kw, stride, pad)
    g2 = gout.reshape(b * oh * ow, cout)
    return (cols.T @ g2).reshape(kh, kw, cin, cout)


def conv2d_input_grad(gout: Array, kernel: Array, stride: int, pad: int,
                      in_h: int, in_w: int) -> Array:
    """Gradient w.r.t. the conv input: dilate gout, full-correlate with the
    spatially flipped, channel-swapped kernel, then crop the zero padding."""
    kh, kw, cin, cout = kernel.shape
    b, oh, ow, _ = gout.shape
    hd, wd = (oh - 1) * stride + 1, (ow - 1) * stride + 1
    gd = np.zeros((b, hd, wd, cout))
    gd[:, ::stride, ::stride] = gout
    kf = np.ascontiguousarray(kernel[::-1, ::-1].transpose(0, 1, 3, 2))  # (kh,kw,cout,cin)
    full = conv2d_forward(gd, kf, None, 1, kh - 1)  # (b, hd+kh-1, wd+kw-1, cin)
    hp, wp = in_h + 2 * pad, in_w + 2 * pad
    dxp = np.zeros((b, hp, wp, cin))
    dxp[:, :full.shape[1], :full.shape[2]] = full
    return dxp[:, pad:pad + in_h, pad:pad + in_w]


# ---------------------------------------------------------------------------
# Forward / backward over a ParamSet
# ---------------------------------------------------------------------------

def _check_layer_input(i: int, lay: Layer, x: Array) -> None:
    if isinstance(lay, ConvLayer):
        if x.ndim != 4 or x.shape[3] != lay.kernel.shape[2]:
            raise ShapeMismatchError(
                f"layer {i} (conv): expected input (*, H, W, {lay.kernel.shape[2]}), "
                f"got {x.shape}")
        kh, kw = lay.kernel.shape[:2]
        oh = (x.shape[1] + 2 * lay.padding - kh) // lay.stride + 1
        ow = (x.shape[2] + 2 * lay.padding - kw) // lay.stride + 1
        if oh < 1 or ow < 1:
            raise ShapeMismatchError(f"layer {i} (conv): input {x.shape} too small "
                                     f"for kernel {lay.kernel.shape[:2]}")
    else:
        flat = int(np.prod(x.shape[1:]))
        if flat != lay.in_features:
            raise ShapeMismatchError(
                f"layer {i} (dense): expected {lay.in_features} input features, "
                f"got {flat} from shape {x.shape}")


def _forward_tape(net: ParamSet, x: Array) -> tuple[list[Array], list[dict]]:
    """Batched forward keeping everything the backward pass needs."""
    outs, tape = [], []
    cur = x
    for i, lay in enumerate(net.layers):
        _check_layer_input(i, lay, cur)
        if isinstance(lay, ConvLayer):
            entry = {"input": cur}
            pre = conv2d_forward(cur, lay.kernel, lay.bias, lay.stride, lay.padding)
        else:
            flat = cur.reshape(cur.shape[0], -1)
            entry = {"input": flat, "in_shape": cur.shape}
            pre = flat @ lay.weight.T + lay.bias
        entry["mask"] = _act_mask(pre, lay.activation)
        cur = _act(pre, lay.activation)
        outs.append(cur)
        tape.append(entry)
    return outs, tape


def forward_batch(net: ParamSet, x: Array) -> list[Array]:
    outs, _ = _forward_tape(net, np.asarray(x, dtype=np.float64))
    return outs


def forward(net: ParamSet, x: Array) -> list[Array]:
    """Run a single input through the net.

    Returns one post-activation array per layer; the last entry is the
    network output.
    """
    outs = forward_batch(net, np.asarray(x, dtype=np.float64)[None])
    squeezed = [o[0] for o in outs]
    require_finite(squeezed[-1], "network output")
    return squeezed


def _backward_tape(net: ParamSet, tape: list[dict], gout: Array) -> tuple[Array, ParamSet]:
    grads = net.zeros_like()
    g = np.asarray(gout, dtype=np.float64)
    for i in range(len(net.layers) - 1, -1, -1):
        lay, entry = net.layers[i], tape[i]
        if entry["mask"] is not None:
            g = g * entry["mask"]
        glay = grads.layers[i]
        if isinstance(lay, ConvLayer):
            xin = entry["input"]
            glay.kernel += conv2d_kernel_grad(xin, g, lay.kernel.shape,
                                              lay.stride, lay.padding)
            glay.bias += g.sum(axis=(0, 1, 2))
            g = conv2d_input_grad(g, lay.kernel, lay.stride, lay.padding,
                                  xin.shape[1], xin.shape[2])
        else:
            xin = entry["input"]
            glay.weight += g.T @ xin
            glay.bias += g.sum(axis=0)
            g = (g @ lay.weight).reshape(entry["in_shape"])
    return g, grads


def backprop_batch(net: ParamSet, x: Array, gout: Array) -> tuple[Array, ParamSet]:
    x = np.asarray(x, dtype=np.float64)
    outs, tape = _forward_tape(net, x)
    if np.shape(gout) != outs[-1].shape:
        raise ShapeMismatchError(
            f"output grad shape {np.shape(gout)} != output shape {outs[-1].shape}")
    return _backward_tape(net, tape, gout)


def backprop(net: ParamSet, x: Array, output_grad: Array) -> tuple[Array, ParamSet]:
    """Exact reverse-mode gradients of <output, output_grad> for one input.

    Returns (input_grad, parameter_grads).
    """
    gin, grads = backprop_batch(net, np.asarray(x, dtype=np.float64)[None],
                                np.asarray(output_grad, dtype=np.float64)[None])
    return gin[0], grads


# ---------------------------------------------------------------------------
# Interval bound propagation
# ---------------------------------------------------------------------------

@dataclass
class Interval:
    lower: Array
    upper: Array

    def __post_init__(self):
        self.lower = np.asarray(self.lower, dtype=np.float64)
        self.upper = np.asarray(self.upper, dtype=np.float64)
        if self.lower.shape != self.upper.shape:
            raise ShapeMismatchError(
                f"interval bounds differ in shape: {self.lower.shape} vs {self.upper.shape}")
        if np.any(self.lower > self.upper):
            raise ValueError("interval has lower > upper")


def _ibp_tape(net: ParamSet, lo: Array, hi: Array) -> tuple[Array, Array, list[dict]]:
    """Center/radius propagation: center through the linear map, radius
    through its elementwise absolute value; rectifier applies to both bounds."""
    tape = []
    for i, lay in enumerate(net.layers):
        _check_layer_input(i, lay, lo)
        mu, rad = (lo + hi) / 2.0, (hi - lo) / 2.0
        if isinstance(lay, ConvLayer):
            entry = {"mu": mu, "rad": rad}
            pmu = conv2d_forward(mu, lay.kernel, lay.bias, lay.stride, lay.padding)
            prad = conv2d_forward(rad, np.abs(lay.kernel), None, lay.stride, lay.padding)
        else:
            entry = {"mu": mu.reshape(mu.shape[0], -1),
                     "rad": rad.reshape(rad.shape[0], -1),
                     "in_shape": lo.shape}
            pmu = entry["mu"] @ lay.weight.T + lay.bias
            prad = entry["rad"] @ np.abs(lay.weight).T
        pl, pu = pmu - prad, pmu + prad
        entry["mask_l"] = _act_mask(pl, lay.activation)
        entry["mask_u"] = _act_mask(pu, lay.activation)
        lo, hi = _act(pl, lay.activation), _act(pu, lay.activation)
        tape.append(entry)
    return lo, hi, tape


def ibp_forward_batch(net: ParamSet, lo: Array, hi: Array) -> tuple[Array, Array]:
    out_lo, out_hi, _ = _ibp_tape(net, np.asarray(lo, dtype=np.float64),
                                  np.asarray(hi, dtype=np.float64))
    return out_lo, out_hi


def ibp_forward(net: ParamSet, box: Interval) -> Interval:
    """Sound elementwise output bounds for every input inside `box`."""
    lo, hi = ibp_forward_batch(net, box.lower[None], box.upper[None])
    return Interval(lo[0], hi[0])


def ibp_backprop_batch(net: ParamSet, lo: Array, hi: Array,
                       glo: Array, ghi: Array) -> ParamSet:
    """Parameter gradients of <lower, glo> + <upper, ghi> for the IBP pass.

    The bounds are piecewise-linear in the parameters; at |W| the subgradient
    sign(W) is used.
    """
    _, _, tape = _ibp_tape(net, np.asarray(lo, dtype=np.float64),
                           np.asarray(hi, dtype=np.float64))
    grads = net.zeros_like()
    gl, gu = np.asarray(glo, dtype=np.float64), np.asarray(ghi, dtype=np.float64)
    for i in range(len(net.layers) - 1, -1, -1):
        lay, entry = net.layers[i], tape[i]
        if entry["mask_l"] is not None:
            gl = gl * entry["mask_l"]
            gu = gu * entry["mask_u"]
        gmu, grad_r = gl + gu, gu - gl
        glay = grads.layers[i]
        if isinstance(lay, ConvLayer):
            mu, rad = entry["mu"], entry["rad"]
            glay.kernel += conv2d_kernel_grad(mu, gmu, lay.kernel.shape,
                                              lay.stride, lay.padding)
            glay.kernel += np.sign(lay.kernel) * conv2d_kernel_grad(
                rad, grad_r, lay.kernel.shape, lay.stride, lay.padding)
            glay.bias += gmu.sum(axis=(0, 1, 2))
            dmu = conv2d_input_grad(gmu, lay.kernel, lay.stride, lay.padding,
                                    mu.shape[1], mu.shape[2])
            drad = conv2d_input_grad(grad_r, np.abs(lay.kernel), lay.stride,
                                     lay.padding, mu.shape[1], mu.shape[2])
        else:
            mu, rad = entry["mu"], entry["rad"]
            glay.weight += gmu.T @ mu + np.sign(lay.weight) * (grad_r.T @ rad)
            glay.bias += gmu.sum(axis=0)
            dmu = (gmu @ lay.weight).reshape(entry["in_shape"])
            drad = (grad_r @ np.abs(lay.weight)).reshape(entry["in_shape"])
        gl, gu = (dmu - drad) / 2.0, (dmu + drad) / 2.0
    return grads


# ---------------------------------------------------------------------------
# Initialization
# ---------------------------------------------------------------------------

def init_dense(rng: np.random.Generator, n_in: int, n_out: int,
               activation: str = "identity") -> DenseLayer:
    bound = 1.0 / math.sqrt(n_in)
    w = rng.uniform(-bound, bound, size=(n_out, n_in))
    return DenseLayer(w, np.zeros(n_out), activation)


def init_conv(rng: np.random.Generator, kh: int, kw: int, cin: int, cout: int,
              stride: int = 1, padding: int = 0,
              activation: str = "relu") -> ConvLayer:
    bound = 1.0 / math.sqrt(kh * kw * cin)
    k = rng.uniform(-bound, bound, size=(kh, kw, cin, cout))
    return ConvLayer(k, np.zeros(cout), stride, padding, activation)


def conv_output_hw(h: int, w: int, lay: ConvLayer) -> tuple[int, int]:
    kh, kw = lay.kernel.shape[:2]
    return ((h + 2 * lay.padding - kh) // lay.stride + 1,
            (w + 2 * lay.padding - kw) // lay.stride + 1)


def qnet_params(obs_shape: tuple[int, int, int], n_actions: int, seed: int) -> ParamSet:
    """Fan-in uniform initialized Q-network: two strided conv layers feeding
    a rectified hidden dense layer and a linear head of size n_actions."""
    h, w, c = obs_shape
    rng = np.random.default_rng([seed, 101])
    conv1 = init_conv(rng, 6, 6, c, 8, stride=3, activation="relu")
    h1, w1 = conv_output_hw(h, w, conv1)
    conv2 = init_conv(rng, 3, 3, 8, 16, stride=2, activation="relu")
    h2, w2 = conv_output_hw(h1, w1, conv2)
    if h2 < 1 or w2 < 1:
        raise ShapeMismatchError(
            f"observation {h}x{w} too small for the convolution stack "
            "(needs at least 12x12)")
    dense1 = init_dense(rng, h2 * w2 * 16, 64, activation="relu")
    head = init_dense(rng, 64, n_actions, activation="identity")
    return ParamSet([conv1, conv2, dense1, head])


# ---------------------------------------------------------------------------
# Optimizers
# ---------------------------------------------------------------------------

@dataclass
class OptimizerConfig:
    kind: str = "adam"   # "sgd" | "adam"
    lr: float = 5e-4
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    def __post_init__(self):
        if self.kind not in ("sgd", "adam"):
            raise ValueError(f"unknown optimizer kind {self.kind!r}")
        if self.lr <= 0:
            raise ValueError("learning rate must be positive")


class Optimizer:
    """Plain gradient step or bias-corrected adaptive-moment step.

    Updates are applied in place and are deterministic given the state.
    Non-finite gradients abort the run.
    """

    def __init__(self, config: OptimizerConfig):
        self.config = config
        self.t = 0
        self._m: ParamSet | None = None
        self._v: ParamSet | None = None

    def step(self, params: ParamSet, grads: ParamSet) -> ParamSet:
        for _, name, g in grads.arrays():
            require_finite(g, f"gradient ({name})")
        cfg = self.config
        if cfg.kind == "sgd":
            add_scaled(params, grads, -cfg.lr)
            return params
        if self._m is None:
            self._m = params.zeros_like()
            self._v = params.zeros_like()
        self.t += 1
        bc1 = 1.0 - cfg.beta1 ** self.t
        bc2 = 1.0 - cfg.beta2 ** self.t
        for (_, _, p), (_, _, g), (_, _, m), (_, _, v) in zip(
                params.arrays(), grads.arrays(), self._m.arrays(), self._v.arrays()):
            m *= cfg.beta1
            m += (1.0 - cfg.beta1) * g
            v *= cfg.beta2
            v += (1.0 - cfg.beta2) * g * g
            p -= cfg.lr * (m / bc1) / (np.sqrt(v / bc2) + cfg.eps)
        return params


def optimizer_step(params: ParamSet, grads: ParamSet,
                   config: OptimizerConfig) -> ParamSet:
    """One-shot update (fresh state): the plain rule, or the first
    adaptive-moment step."""
    return Optimizer(config).step(params, grads)


# ---------------------------------------------------------------------------
# Text serialization (versioned; >= 17 significant digits)
# ---------------------------------------------------------------------------

PARAMSET_FORMAT_VERSION = 1
_VALUES_PER_LINE = 8


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def _emit_array(lines: list[str], name: str, arr: Array) -> None:
    flat = arr.ravel()
    lines.append(f"{name} {flat.size}")
    for i in range(0, flat.size, _VALUES_PER_LINE):
        lines.append(" ".join(_fmt(v) for v in flat[i:i + _VALUES_PER_LINE]))


def serialize_params(net: ParamSet, kind: str = "qnet") -> str:
    """Row-major decimal text encoding; round-trips bit-exactly."""
    lines = [f"paramset v{PARAMSET_FORMAT_VERSION} kind={kind}",
             f"layers {len(net.layers)}"]
    for i, lay in enumerate(net.layers):
        if isinstance(lay, DenseLayer):
            lines.append(f"layer {i} dense in {lay.in_features} out {lay.out_features} "
                         f"activation {lay.activation}")
            _emit_array(lines, "weight", lay.weight)
        else:
            kh, kw, cin, cout = lay.kernel.shape
            lines.append(f"layer {i} conv kh {kh} kw {kw} cin {cin} cout {cout} "
                         f"stride {lay.stride} pad {lay.padding} "
                         f"activation {lay.activation}")
            _emit_array(lines, "kernel", lay.kernel)
        _emit_array(lines, "bias", lay.bias)
    lines.append("end")
    return "\n".join(lines) + "\n"


class ParamSetFormatError(ValueError):
    pass


def _read_array(lines: list[str], pos: int, name: str, shape: tuple) -> tuple[Array, int]:
    header = lines[pos].split()
    if len(header) != 2 or header[0] != name:
        raise ParamSetFormatError(f"expected '{name} <count>' at line {pos + 1}")
    count = int(header[1])
    if count != int(np.prod(shape)):
        raise ParamSetFormatError(f"{name}: count {count} does not match shape {shape}")
    pos += 1
    vals: list[float] = []
    while len(vals) < count:
        if pos >= len(lines):
            raise ParamSetFormatError(f"truncated while reading {name}")
        vals.extend(float(t) for t in lines[pos].split())
        pos += 1
    if len(vals) != count:
        raise ParamSetFormatError(f"{name}: got {len(vals)} values, expected {count}")
    return np.array(vals, dtype=np.float64).reshape(shape), pos


def parse_params(text: str) -> tuple[ParamSet, str]:
    """Inverse of serialize_params; returns (params, kind)."""
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines or not lines[0].startswith("paramset "):
        raise ParamSetFormatError("missing paramset header")
    head = lines[0].split()
    if head[1] != f"v{PARAMSET_FORMAT_VERSION}":
        raise ParamSetFormatError(f"unsupported paramset version {head[1]!r}")
    kind = "unknown"
    for tok in head[2:]:
        if tok.startswith("kind="):
            kind = tok[5:]
    if len(lines) < 2 or not lines[1].startswith("layers "):
        raise ParamSetFormatError("missing layer count")
    n_layers = int(lines[1].split()[1])
    pos, layers = 2, []
    for i in range(n_layers):
        if pos >= len(lines):
            raise ParamSetFormatError(f"truncated before layer {i}")
        toks = lines[pos].split()
        if toks[0] != "layer" or int(toks[1]) != i:
            raise ParamSetFormatError(f"bad layer header at line {pos + 1}")
        kind_tok = toks[2]
        fields = dict(zip(toks[3::2], toks[4::2]))
        pos += 1
        if kind_tok == "dense":
            shape = (int(fields["out"]), int(fields["in"]))
            w, pos = _read_array(lines, pos, "weight", shape)
            b, pos = _read_array(lines, pos, "bias", (shape[0],))
            layers.append(DenseLayer(w, b, fields["activation"]))
        elif kind_tok == "conv":
            shape = (int(fields["kh"]), int(fields["kw"]),
                     int(fields["cin"]), int(fields["cout"]))
            k, pos = _read_array(lines, pos, "kernel", shape)
            b, pos = _read_array(lines, pos, "bias", (shape[3],))
            layers.append(ConvLayer(k, b, int(fields["stride"]), int(fields["pad"]),
                                    fields["activation"]))
        else:
            raise ParamSetFormatError(f"unknown layer kind {kind_tok!r}")
    if pos >= len(lines) or lines[pos] != "end":
        raise ParamSetFormatError("missing end marker (file truncated?)")
    return ParamSet(layers), kind
