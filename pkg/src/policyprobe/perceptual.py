"""Perceptual similarity distance over a fixed reference feature network.

The distance between two observations is computed from the internal
activations of a small frozen convolutional net: at every layer and spatial
site the channel vector is normalized to unit length, the squared weighted
difference between the two inputs is averaged over space, and the per-layer
averages are summed:

    d(s1, s2) = sum_l (1/(H_l*W_l)) * sum_{h,w} || w_l . (y1_lhw - y2_lhw) ||^2

with y the unit-normalized activations and w_l per-channel weights (all ones
by default). The network itself is never trained; its weights come from a
fixed seed and ship as a versioned text asset so distances are bit-comparable
across machines. Observations are area-resampled to the net's fixed 36x36
grayscale input.
"""

from __future__ import annotations

from dataclasses import dataclass
from importlib import resources

import numpy as np

from . import nn

Array = np.ndarray

INPUT_SIZE = 36
PIXEL_SCALE = 255.0
FEATURENET_SEED = 2024
FEATURENET_VERSION = "featurenet_v1"
_CHANNELS = (8, 16, 16)


@dataclass
class FeatureNet:
    params: nn.ParamSet
    channel_weights: list[Array]   # w_l, one nonnegative vector per layer
    version: str = FEATURENET_VERSION
    input_size: int = INPUT_SIZE

    def __post_init__(self):
        if len(self.channel_weights) != len(self.params.layers):
            raise ValueError("one channel weight vector per layer required")
        for lay, w in zip(self.params.layers, self.channel_weights):
            w = np.asarray(w, dtype=np.float64)
            if np.any(w < 0):
                raise ValueError("channel weights must be nonnegative")
            if w.shape != (lay.kernel.shape[3],):
                raise ValueError("channel weight length must match layer channels")


def build_reference_params(seed: int = FEATURENET_SEED) -> nn.ParamSet:
    """The reference net's weights: three stride-2 rectified conv layers,
    deterministic in the seed."""
    rng = np.random.default_rng([seed, 71])
    layers: list[nn.Layer] = []
    cin = 1
    for cout in _CHANNELS:
        layers.append(nn.init_conv(rng, 3, 3, cin, cout, stride=2, padding=1,
                                   activation="relu"))
        cin = cout
    return nn.ParamSet(layers)


def _default_weights(params: nn.ParamSet) -> list[Array]:
    return [np.ones(lay.kernel.shape[3]) for lay in params.layers]


def load_reference_featurenet() -> FeatureNet:
    """The shipped, versioned reference net."""
    asset = resources.files("policyprobe").joinpath(
        f"assets/{FEATURENET_VERSION}.txt")
    params, kind = nn.parse_params(asset.read_text())
    if kind != "featurenet":
        raise ValueError(f"asset has kind {kind!r}, expected 'featurenet'")
    return FeatureNet(params, _default_weights(params))


def make_featurenet(seed: int = FEATURENET_SEED) -> FeatureNet:
    """Regenerate the reference net from its seed (bit-identical to the
    shipped asset)."""
    params = build_reference_params(seed)
    return FeatureNet(params, _default_weights(params))


# ---------------------------------------------------------------------------
# Resampling
# ---------------------------------------------------------------------------

def _overlap_matrix(n_out: int, n_in: int) -> Array:
    """Row i averages input cells by their overlap with output cell i."""
    ratio = n_in / n_out
    mat = np.zeros((n_out, n_in))
    for i in range(n_out):
        lo, hi = i * ratio, (i + 1) * ratio
        k0, k1 = int(np.floor(lo)), int(np.ceil(hi))
        for k in range(k0, min(k1, n_in)):
            mat[i, k] = max(0.0, min(hi, k + 1) - max(lo, k)) / ratio
    return mat


def area_resample(obs: Array, size: int = INPUT_SIZE) -> Array:
    """Box-overlap (area-average) resample of (H, W, C) to (size, size, C).

    Exact pass-through when the input is already the target size. Channels
    beyond the first are averaged into one grayscale channel first.
    """
    obs = np.asarray(obs, dtype=np.float64)
    if obs.ndim == 2:
        obs = obs[:, :, None]
    if obs.ndim != 3:
        raise ValueError(f"observation must be (H, W, C), got {obs.shape}")
    if obs.shape[2] > 1:
        obs = obs.mean(axis=2, keepdims=True)
    if obs.shape[:2] == (size, size):
        return obs
    rows = _overlap_matrix(size, obs.shape[0])
    cols = _overlap_matrix(size, obs.shape[1])
    return np.einsum("ri,ijc,sj->rsc", rows, obs, cols)


# ---------------------------------------------------------------------------
# Metric
# ---------------------------------------------------------------------------

def _unit_normalize(act: Array) -> Array:
    """Scale each spatial site's channel vector to unit length; zero stays
    zero."""
    norms = np.sqrt((act ** 2).sum(axis=-1, keepdims=True))
    return np.divide(act, norms, out=np.zeros_like(act), where=norms > 0)


def normalized_activations(fnet: FeatureNet, s: Array) -> list[Array]:
    """Per-layer channel-unit-normalized activations for one observation."""
    x = area_resample(s, fnet.input_size) / PIXEL_SCALE
    acts = nn.forward(fnet.params, x)
    return [_unit_normalize(a) for a in acts]


def lpips(fnet: FeatureNet, s1: Array, s2: Array) -> float:
    """The perceptual distance; symmetric, nonnegative, zero at identity."""
    s1 = np.asarray(s1, dtype=np.float64)
    s2 = np.asarray(s2, dtype=np.float64)
    if s1.shape != s2.shape:
        raise ValueError(f"shape mismatch: {s1.shape} vs {s2.shape}")
    y1 = normalized_activations(fnet, s1)
    y2 = normalized_activations(fnet, s2)
    total = 0.0
    for a1, a2, w in zip(y1, y2, fnet.channel_weights):
        h, wdim = a1.shape[:2]
        diff = (a1 - a2) * w
        total += float((diff ** 2).sum() / (h * wdim))
    return total
