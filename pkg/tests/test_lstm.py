import numpy as np
import pytest

from stormgrid.lstm import (
    LstmLayerParams,
    LstmNetwork,
    ShapeMismatchError,
    backward,
    forward,
    init_network,
    init_state,
    load_checkpoint,
    lstm_step,
    mse_loss,
    save_checkpoint,
    sgd_step,
    snapshot_params,
    restore_params,
)

from .oracles import finite_diff_grads, max_relative_error


def scalar_cell_network():
    """n_x = n_h = n_y = 1 network with hand-set weights, matched by the
    frozen high-precision oracle values below."""
    U = np.array([[0.6], [-0.4], [0.3], [0.8]])  # i, f, o, g
    W = np.array([[0.5], [0.2], [-0.7], [0.9]])
    b = np.array([0.1, 1.0, -0.2, 0.05])
    return LstmNetwork(
        n_x=1,
        n_h=1,
        n_y=1,
        layers=[LstmLayerParams(U, W, b)],
        V=np.array([[1.2]]),
        b_y=np.array([-0.1]),
        dropout=0.0,
        seed=0,
        rng=np.random.default_rng(0),
    )


def test_scalar_cell_matches_hand_computation():
    net = scalar_cell_network()
    x = np.array([[0.5], [-0.25]])
    y, trace = forward(net, x, training=False)
    # frozen from a 30-digit mpmath evaluation of the same weights
    assert y[0, 0] == pytest.approx(0.044669455447899977, abs=1e-12)
    assert y[1, 0] == pytest.approx(-0.01702459605580011, abs=1e-12)
    assert trace.cell[0][0, 0] == pytest.approx(0.25258572825689835, abs=1e-12)
    assert trace.hidden[0][0, 0] == pytest.approx(0.12058266801713155, abs=1e-12)
    assert trace.cell[0][1, 0] == pytest.approx(0.16980689133971796, abs=1e-12)
    assert trace.hidden[0][1, 0] == pytest.approx(0.069144799060744038, abs=1e-12)


def test_zero_weight_network_outputs_zero():
    net = init_network(n_x=3, n_h=4, n_y=2, dropout=0.0, seed=1)
    for p in net.param_arrays():
        p[...] = 0.0
    y, _ = forward(net, np.random.default_rng(0).normal(size=(5, 3)))
    assert np.all(y == 0.0)


def test_inference_is_deterministic():
    net = init_network(n_x=4, n_h=8, n_y=2, dropout=0.3, seed=7)
    x = np.random.default_rng(3).normal(size=(6, 4))
    y1, _ = forward(net, x, training=False)
    y2, _ = forward(net, x, training=False)
    np.testing.assert_array_equal(y1, y2)


def test_outputs_inside_open_unit_interval():
    net = init_network(n_x=3, n_h=16, n_y=2, dropout=0.0, seed=9)
    x = np.random.default_rng(1).normal(size=(50, 3)) * 10.0
    y, _ = forward(net, x)
    assert np.all(np.abs(y) < 1.0)


def test_init_determinism_and_shapes():
    a = init_network(n_x=7, n_h=32, n_y=2, seed=42)
    b = init_network(n_x=7, n_h=32, n_y=2, seed=42)
    for pa, pb in zip(a.param_arrays(), b.param_arrays()):
        np.testing.assert_array_equal(pa, pb)
    assert a.layers[0].U.shape == (128, 7)
    assert a.layers[1].U.shape == (128, 32)
    assert a.layers[2].U.shape == (128, 32)
    assert a.V.shape == (2, 32)
    # forget-gate bias 1, others 0
    for layer in a.layers:
        _, _, b_f = layer.gate("f")
        assert np.all(b_f == 1.0)
        for g in "iog":
            assert np.all(layer.gate(g)[2] == 0.0)


def test_init_weight_mean_near_zero():
    net = init_network(n_x=16, n_h=32, n_y=4, seed=123)
    draws = np.concatenate([layer.U.ravel() for layer in net.layers])
    lim = np.sqrt(6.0 / (16 + 32))
    se = (2 * lim) / np.sqrt(12.0) / np.sqrt(draws.size)  # uniform sigma / sqrt(n)
    assert abs(draws.mean()) < 3.0 * se * 3  # 3 SE with slack for mixed limits


def test_init_rejects_bad_arguments():
    with pytest.raises(ValueError):
        init_network(n_x=0, n_h=4, n_y=1)
    with pytest.raises(ValueError):
        init_network(n_x=2, n_h=4, n_y=1, dropout=1.0)
    with pytest.raises(ValueError):
        init_network(n_x=2, n_h=4, n_y=1, n_layers=2)
    net = init_network(n_x=2, n_h=4, n_y=1, n_layers=2, allow_depth_override=True)
    assert len(net.layers) == 2


def test_forward_shape_validation():
    net = init_network(n_x=3, n_h=4, n_y=2, seed=0)
    with pytest.raises(ShapeMismatchError):
        forward(net, np.zeros((5, 4)))


def test_mse_closed_forms():
    a = np.ones((3, 2))
    loss, grad = mse_loss(a, a)
    assert loss == 0.0
    assert np.all(grad == 0.0)
    loss, grad = mse_loss(a + 1.0, a)
    assert loss == 1.0
    np.testing.assert_allclose(grad, np.full((3, 2), 2.0 / 6.0))
    with pytest.raises(ShapeMismatchError):
        mse_loss(np.zeros((2, 2)), np.zeros((3, 2)))


def test_mse_against_plain_python():
    rng = np.random.default_rng(5)
    p = rng.normal(size=(3, 2))
    t = rng.normal(size=(3, 2))
    acc = 0.0
    for i in range(3):
        for j in range(2):
            acc += (p[i, j] - t[i, j]) ** 2
    expect = acc / 6.0
    loss, grad = mse_loss(p, t)
    assert loss == pytest.approx(expect, abs=1e-12)
    assert grad[1, 1] == pytest.approx(2.0 * (p[1, 1] - t[1, 1]) / 6.0, abs=1e-15)


def test_backward_zero_output_grads():
    net = init_network(n_x=3, n_h=4, n_y=2, dropout=0.0, seed=3)
    x = np.random.default_rng(0).normal(size=(5, 3))
    _, trace = forward(net, x)
    grads = backward(net, trace, np.zeros((5, 2)))
    for g in grads.arrays():
        assert np.all(g == 0.0)


def test_head_gradient_single_step_outer_product():
    net = init_network(n_x=2, n_h=3, n_y=2, dropout=0.0, seed=11)
    x = np.random.default_rng(2).normal(size=(1, 2))
    y, trace = forward(net, x)
    dy = np.array([[0.3, -0.7]])
    grads = backward(net, trace, dy)
    dz = dy[0] * (1.0 - y[0] ** 2)
    np.testing.assert_allclose(grads.V, np.outer(dz, trace.hidden[-1][0]), atol=1e-14)
    np.testing.assert_allclose(grads.b_y, dz, atol=1e-14)


def test_bptt_matches_finite_differences():
    rng = np.random.default_rng(99)
    for seed in range(3):
        net = init_network(n_x=3, n_h=4, n_y=2, dropout=0.0, seed=seed)
        x = rng.normal(size=(5, 3))
        t = rng.uniform(-0.8, 0.8, size=(5, 2))
        y, trace = forward(net, x)
        _, dY = mse_loss(y, t)
        analytic = backward(net, trace, dY).arrays()
        numeric = finite_diff_grads(net, x, t, eps=1e-5)
        assert max_relative_error(analytic, numeric) < 1e-4


def test_bptt_through_dropout_masks():
    # identical masks on every evaluation via an explicit generator
    net = init_network(n_x=3, n_h=4, n_y=1, dropout=0.25, seed=5)
    rng = np.random.default_rng(17)
    x = rng.normal(size=(4, 3))
    t = rng.uniform(-0.5, 0.5, size=(4, 1))
    y, trace = forward(net, x, training=True, rng=np.random.default_rng(123))
    _, dY = mse_loss(y, t)
    analytic = backward(net, trace, dY).arrays()
    numeric = finite_diff_grads(net, x, t, eps=1e-5, rng_seed=123)
    assert max_relative_error(analytic, numeric) < 1e-4


def test_dropout_preserves_expectation():
    net = init_network(n_x=1000, n_h=4, n_y=1, dropout=0.1, seed=0)
    x = np.ones(1000)
    rng = np.random.default_rng(42)
    keep = 0.9
    total = np.zeros(1000)
    n = 100  # 100 masks x 1000 elements = 1e5 samples
    for _ in range(n):
        mask = (rng.random(x.shape) < keep) / keep
        total += x * mask
    assert abs(total.mean() / n - 1.0) < 0.01


def test_sgd_closed_forms():
    net = init_network(n_x=2, n_h=2, n_y=1, dropout=0.0, seed=0)
    for p in net.param_arrays():
        p[...] = 1.0
    grads = backward(
        net, forward(net, np.zeros((1, 2)))[1], np.zeros((1, 1))
    )  # zero grads, right shapes
    sgd_step(net, grads, lr=0.1)
    assert all(np.all(p == 1.0) for p in net.param_arrays())

    grads.b_y[...] = 2.0
    sgd_step(net, grads, lr=0.1, clip_norm=None)
    assert net.b_y[0] == pytest.approx(0.8)

    with pytest.raises(ValueError):
        sgd_step(net, grads, lr=0.0)


def test_sgd_clip_scales_update():
    net = init_network(n_x=2, n_h=2, n_y=2, dropout=0.0, seed=1)
    before = snapshot_params(net)
    grads = backward(net, forward(net, np.zeros((1, 2)))[1], np.zeros((1, 2)))
    grads.b_y[...] = [6.0, 8.0]  # global norm 10
    assert grads.global_norm() == pytest.approx(10.0)
    sgd_step(net, grads, lr=1.0, clip_norm=1.0)
    after = net.param_arrays()
    delta = before[-1] - after[-1]
    np.testing.assert_allclose(delta, [0.6, 0.8], atol=1e-12)  # 10x smaller


def test_long_rollout_states_stay_finite():
    net = init_network(n_x=3, n_h=8, n_y=2, dropout=0.0, seed=2)
    rng = np.random.default_rng(0)
    state = init_state(net)
    for _ in range(10_000):
        y, state, _ = lstm_step(net, state, rng.normal(size=3))
    assert np.isfinite(y).all()
    for h, c in state:
        assert np.isfinite(h).all() and np.isfinite(c).all()


def test_snapshot_restore_roundtrip():
    net = init_network(n_x=2, n_h=3, n_y=1, seed=8)
    snap = snapshot_params(net)
    for p in net.param_arrays():
        p += 1.0
    restore_params(net, snap)
    for p, s in zip(net.param_arrays(), snap):
        np.testing.assert_array_equal(p, s)


def test_checkpoint_roundtrip_bit_exact(tmp_path):
    net = init_network(n_x=7, n_h=16, n_y=2, dropout=0.1, seed=77)
    net.output_scale = np.array([3.0, 4.0])
    net.feature_columns = ("wind", "lat")
    path = tmp_path / "model.npz"
    save_checkpoint(str(path), net, extra={"note": "roundtrip"})
    loaded, extra = load_checkpoint(str(path))
    assert extra == {"note": "roundtrip"}
    assert loaded.feature_columns == ("wind", "lat")
    assert (loaded.n_x, loaded.n_h, loaded.n_y) == (7, 16, 2)
    for a, b in zip(net.param_arrays(), loaded.param_arrays()):
        np.testing.assert_array_equal(a, b)
    np.testing.assert_array_equal(net.output_scale, loaded.output_scale)


def test_checkpoint_bytes_deterministic(tmp_path):
    import time

    net = init_network(n_x=3, n_h=4, n_y=2, seed=5)
    p1, p2 = tmp_path / "a.npz", tmp_path / "b.npz"
    save_checkpoint(str(p1), net, extra={"k": 1})
    time.sleep(1.1)
    save_checkpoint(str(p2), net, extra={"k": 1})
    assert p1.read_bytes() == p2.read_bytes()
