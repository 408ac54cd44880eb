import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from paqe.errors import ContractError, WeightFormatError
from paqe.nn import (DESK_NET, PAPER_NET, Adam, BatchNorm2d, Conv2d, NetConfig, QENetwork, conv2d_forward,
                     dumps_weights, l1_loss, load_weights, loads_weights, save_weights)
from paqe.nn.layers import col2im3x3, im2col3x3, to_nchw, to_nhwc


def direct_conv(x, w, b, relu):
    """Plain nested-sum 3x3 convolution with zero padding, float64."""
    bsz, cin, h, wd = x.shape
    cout = w.shape[0]
    xp = np.zeros((bsz, cin, h + 2, wd + 2))
    xp[:, :, 1:-1, 1:-1] = x
    out = np.zeros((bsz, cout, h, wd))
    for n in range(bsz):
        for o in range(cout):
            for i in range(h):
                for j in range(wd):
                    out[n, o, i, j] = b[o] + np.sum(w[o] * xp[n, :, i:i + 3, j:j + 3])
    return np.maximum(out, 0) if relu else out


@pytest.mark.parametrize("relu", [False, True])
def test_conv_matches_direct_sum(rng, relu):
    layer = Conv2d(3, 5, relu=relu, rng=rng)
    layer.bias[:] = rng.standard_normal(5)
    x = rng.standard_normal((2, 3, 6, 7)).astype(np.float32)
    got = conv2d_forward(x, layer)
    want = direct_conv(x.astype(np.float64), layer.weight.astype(np.float64), layer.bias, relu)
    assert np.max(np.abs(got - want)) <= 1e-5


def test_col2im_is_adjoint_of_im2col(rng):
    x = rng.standard_normal((2, 5, 4, 3))
    y = rng.standard_normal((2 * 5 * 4, 27))
    assert np.isclose(np.sum(im2col3x3(x) * y), np.sum(x * col2im3x3(y, x.shape)))


def test_conv_backward_matches_finite_differences(rng):
    layer = Conv2d(2, 3, relu=False, rng=rng, dtype=np.float64)
    x = rng.standard_normal((2, 4, 4, 2))
    r = rng.standard_normal((2, 4, 4, 3))
    layer.forward(x, cache=True)
    dx = layer.backward(r)
    h = 1e-6
    for idx in [(0, 0, 0, 0), (1, 2, 3, 1), (0, 3, 1, 0)]:
        xp, xm = x.copy(), x.copy()
        xp[idx] += h
        xm[idx] -= h
        fd = (np.sum(layer.forward(xp) * r) - np.sum(layer.forward(xm) * r)) / (2 * h)
        assert dx[idx] == pytest.approx(fd, rel=1e-6)
    w_idx = (1, 0, 2, 1)
    old = layer.weight[w_idx]
    layer.weight[w_idx] = old + h
    fp = np.sum(layer.forward(x) * r)
    layer.weight[w_idx] = old - h
    fm = np.sum(layer.forward(x) * r)
    layer.weight[w_idx] = old
    assert layer.grads["weight"][w_idx] == pytest.approx((fp - fm) / (2 * h), rel=1e-6)


def test_batchnorm_train_statistics_and_running_update(rng):
    bn = BatchNorm2d(3, dtype=np.float64)
    x = rng.standard_normal((4, 5, 5, 3)) * 3 + 2
    y = bn.forward(x, train=True)
    assert np.allclose(y.mean(axis=(0, 1, 2)), 0, atol=1e-12)
    assert np.allclose(y.var(axis=(0, 1, 2)), 1, atol=1e-3)
    n = 100
    assert np.allclose(bn.running_mean, 0.1 * x.mean(axis=(0, 1, 2)))
    assert np.allclose(bn.running_var, 0.9 + 0.1 * x.var(axis=(0, 1, 2)) * n / (n - 1))
    with pytest.raises(ContractError):
        bn.forward(x[:1], train=True)


def test_batchnorm_backward_matches_finite_differences(rng):
    bn = BatchNorm2d(2, dtype=np.float64)
    bn.gamma[:] = [1.5, 0.5]
    x = rng.standard_normal((3, 2, 2, 2))
    r = rng.standard_normal(x.shape)
    bn.forward(x, train=True, cache=True)
    dx = bn.backward(r)
    h = 1e-6
    num = np.zeros_like(x)
    for idx in np.ndindex(x.shape):
        xp, xm = x.copy(), x.copy()
        xp[idx] += h
        xm[idx] -= h
        num[idx] = (np.sum(bn.forward(xp, True) * r) - np.sum(bn.forward(xm, True) * r)) / (2 * h)
    assert np.allclose(dx, num, atol=1e-7)


def test_conv_count_and_profiles():
    for n in (0, 2, 16):
        cfg = NetConfig(3, 4, n)
        assert len(QENetwork(cfg, seed=None).convs()) == 2 * n + 5 == cfg.receptive_radius
    assert (PAPER_NET.channels, PAPER_NET.n_blocks) == (256, 16)
    assert (DESK_NET.channels, DESK_NET.n_blocks) == (16, 2)
    with pytest.raises(ContractError):
        NetConfig(in_channels=4)


def test_zero_network_outputs_zero(rng):
    net = QENetwork(NetConfig(3, 4, 1), seed=None)
    assert not net.forward(rng.random((1, 3, 8, 8))).any()


def test_identity_init_passes_reconstruction_through(rng):
    for cin in (2, 3):
        net = QENetwork(NetConfig(cin, 8, 2), seed=5, identity=True)
        x = rng.random((2, cin, 12, 12)).astype(np.float32)
        assert np.array_equal(net.forward(x)[:, 0], x[:, cin - 2])


def test_network_input_arity_and_shape(rng):
    net = QENetwork(NetConfig(2, 4, 1), seed=0)
    assert net.forward(rng.random((1, 2, 6, 10))).shape == (1, 1, 6, 10)
    with pytest.raises(ContractError):
        net.forward(rng.random((1, 3, 6, 10)))
    with pytest.raises(ValueError):
        net.forward(rng.random((1, 2, 6, 10)), mode="eval")


def test_nchw_layout_helpers(rng):
    x = rng.random((2, 3, 4, 5))
    assert np.array_equal(to_nchw(to_nhwc(x)), x)


def test_l1_loss():
    loss, g = l1_loss(np.array([1.0, 2.0, 3.0, 4.0]), np.array([1.0, 0.0, 5.0, 4.0]))
    assert loss == 1.0
    assert g.tolist() == [0.0, 0.25, -0.25, 0.0]


def test_adam_first_step_moves_by_lr():
    p = np.array([1.0, -2.0, 3.0])
    opt = Adam([p], lr=0.1)
    opt.step([np.array([0.5, -4.0, 0.0])])
    # bias-corrected first step is lr * sign(g) (zero gradient stays put)
    assert np.allclose(p, [0.9, -1.9, 3.0], atol=1e-6)


def test_adam_minimizes_quadratic():
    p = np.array([5.0, -3.0])
    opt = Adam([p], lr=0.05)
    for _ in range(2000):
        opt.step([2 * p])
    assert np.all(np.abs(p) < 1e-2)


def test_weight_round_trip_bit_exact(tmp_path):
    net = QENetwork(NetConfig(3, 6, 2), seed=3)
    net.bn.running_mean[:] = np.arange(6) / 7
    path = tmp_path / "w.paqe"
    save_weights(net, path)
    back = load_weights(path)
    assert back.config == net.config
    for (ka, a), (kb, b) in zip(net.named_tensors(), back.named_tensors()):
        assert ka == kb and np.array_equal(a, b)
    assert dumps_weights(back) == path.read_bytes()


def test_weight_format_errors():
    blob = dumps_weights(QENetwork(NetConfig(2, 4, 1), seed=0))
    with pytest.raises(WeightFormatError):
        loads_weights(b"XXXX" + blob[4:])
    with pytest.raises(WeightFormatError):
        loads_weights(blob[:-4])
    with pytest.raises(WeightFormatError):
        loads_weights(blob + b"\x00")


@settings(max_examples=15)
@given(seed=st.integers(0, 1000), h=st.integers(4, 12), w=st.integers(4, 12))
def test_output_is_non_negative(seed, h, w):
    rng = np.random.default_rng(seed)
    net = QENetwork(NetConfig(3, 4, 1), seed=seed)
    assert (net.forward(rng.standard_normal((1, 3, h, w))) >= 0).all()
