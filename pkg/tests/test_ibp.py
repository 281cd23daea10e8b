"""Interval bound propagation: soundness by Monte-Carlo enclosure, exactness
at radius zero, monotone nesting, and gradients of bound-built losses."""

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from policyprobe import nn
from tests.test_nn import dense_net, small_net


def random_net(rng, depth=2):
    layers = []
    n_in = 12
    for _ in range(depth):
        n_out = int(rng.integers(3, 9))
        layers.append(nn.DenseLayer(rng.normal(0, 0.6, (n_out, n_in)),
                                    rng.normal(0, 0.2, n_out),
                                    activation="relu"))
        n_in = n_out
    layers.append(nn.DenseLayer(rng.normal(0, 0.6, (3, n_in)),
                                rng.normal(0, 0.2, 3),
                                activation="identity"))
    return nn.ParamSet(layers)


def test_ibp_encloses_sampled_points_dense(rng):
    for trial in range(30):
        net = random_net(rng)
        center = rng.normal(size=12)
        eps = float(rng.uniform(0.01, 0.3))
        box = nn.Interval(center - eps, center + eps)
        bounds = nn.ibp_forward(net, box)
        for _ in range(200):
            x = center + rng.uniform(-eps, eps, size=12)
            y = nn.forward(net, x)[-1]
            assert np.all(y >= bounds.lower - 1e-9)
            assert np.all(y <= bounds.upper + 1e-9)


def test_ibp_encloses_sampled_points_conv(rng):
    net = small_net()
    center = rng.uniform(0.2, 0.8, size=(9, 9, 1))
    eps = 0.05
    bounds = nn.ibp_forward(net, nn.Interval(center - eps, center + eps))
    for _ in range(300):
        x = center + rng.uniform(-eps, eps, size=center.shape)
        y = nn.forward(net, x)[-1]
        assert np.all(y >= bounds.lower - 1e-9)
        assert np.all(y <= bounds.upper + 1e-9)


def test_zero_radius_bounds_equal_forward(rng):
    net = random_net(rng)
    x = rng.normal(size=12)
    bounds = nn.ibp_forward(net, nn.Interval(x.copy(), x.copy()))
    y = nn.forward(net, x)[-1]
    assert np.allclose(bounds.lower, y, atol=1e-12)
    assert np.allclose(bounds.upper, y, atol=1e-12)


@given(seed=st.integers(0, 10_000))
@settings(max_examples=30, deadline=None)
def test_bounds_nest_as_radius_grows(seed):
    rng = np.random.default_rng(seed)
    net = random_net(rng)
    x = rng.normal(size=12)
    prev = None
    for eps in (0.0, 0.05, 0.1, 0.2):
        b = nn.ibp_forward(net, nn.Interval(x - eps, x + eps))
        assert np.all(b.upper >= b.lower)
        if prev is not None:
            assert np.all(b.lower <= prev.lower + 1e-12)
            assert np.all(b.upper >= prev.upper - 1e-12)
        prev = b


def test_interval_rejects_crossed_bounds():
    with pytest.raises(ValueError):
        nn.Interval(np.array([1.0]), np.array([0.0]))


def test_batch_ibp_agrees_with_single(rng):
    net = small_net()
    centers = rng.uniform(0.2, 0.8, size=(3, 9, 9, 1))
    lo, hi = centers - 0.03, centers + 0.03
    blo, bhi = nn.ibp_forward_batch(net, lo, hi)
    for i in range(3):
        single = nn.ibp_forward(net, nn.Interval(lo[i], hi[i]))
        assert np.allclose(blo[i], single.lower, atol=1e-12)
        assert np.allclose(bhi[i], single.upper, atol=1e-12)


# ---------------------------------------------------------------------------
# Gradients through the bounds
# ---------------------------------------------------------------------------

def bound_loss(net, lo, hi, glo, ghi):
    blo, bhi = nn.ibp_forward_batch(net, lo, hi)
    return float((blo * glo).sum() + (bhi * ghi).sum())


def test_ibp_backprop_matches_finite_differences(rng):
    net = dense_net()
    lo = rng.normal(size=(2, 10)) - 0.1
    hi = lo + rng.uniform(0.05, 0.2, size=(2, 10))
    glo = rng.normal(size=(2, 3))
    ghi = rng.normal(size=(2, 3))
    grads = nn.ibp_backprop_batch(net, lo, hi, glo, ghi)
    h = 1e-6
    for (_, name, arr), (_, _, garr) in zip(net.arrays(), grads.arrays()):
        flat = arr.reshape(-1)
        for k in range(0, flat.size, max(1, flat.size // 7)):
            old = flat[k]
            flat[k] = old + h
            up = bound_loss(net, lo, hi, glo, ghi)
            flat[k] = old - h
            down = bound_loss(net, lo, hi, glo, ghi)
            flat[k] = old
            fd = (up - down) / (2 * h)
            assert abs(fd - garr.reshape(-1)[k]) < 2e-5, (name, k)


def test_ibp_backprop_conv_matches_finite_differences(rng):
    net = small_net()
    centers = rng.uniform(0.3, 0.7, size=(2, 9, 9, 1))
    lo, hi = centers - 0.02, centers + 0.02
    glo = rng.normal(size=(2, 5))
    ghi = rng.normal(size=(2, 5))
    grads = nn.ibp_backprop_batch(net, lo, hi, glo, ghi)
    h = 1e-6
    for (_, name, arr), (_, _, garr) in zip(net.arrays(), grads.arrays()):
        flat = arr.reshape(-1)
        for k in range(0, flat.size, max(1, flat.size // 5)):
            old = flat[k]
            flat[k] = old + h
            up = bound_loss(net, lo, hi, glo, ghi)
            flat[k] = old - h
            down = bound_loss(net, lo, hi, glo, ghi)
            flat[k] = old
            fd = (up - down) / (2 * h)
            assert abs(fd - garr.reshape(-1)[k]) < 2e-5, (name, k)
