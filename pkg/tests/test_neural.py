import numpy as np
import pytest

from morl_nfq.neural import (
    Mlp,
    MlpArchitecture,
    TrainConfig,
    TrainingDiverged,
    load_mlp,
    mlp_forward,
    mlp_init,
    mlp_loss_grad,
    save_mlp,
    train,
)
from morl_nfq.optim import gradient_descent, lbfgs


def central_differences(arch, p, X, Y, h=1e-5):
    grad = np.zeros_like(p)
    for i in range(len(p)):
        e = np.zeros_like(p)
        e[i] = h
        grad[i] = (mlp_loss_grad(arch, p + e, X, Y)[0] - mlp_loss_grad(arch, p - e, X, Y)[0]) / (2 * h)
    return grad


def max_relative_error(a, b):
    return float(np.max(np.abs(a - b) / np.maximum(np.abs(a) + np.abs(b), 1e-6)))


def test_parameter_count():
    assert MlpArchitecture(7, (10, 10), 2).n_params == 7 * 10 + 10 + 10 * 10 + 10 + 10 * 2 + 2 == 212


def test_invalid_architecture():
    with pytest.raises(ValueError):
        MlpArchitecture(0, (5,), 2)
    with pytest.raises(ValueError):
        TrainConfig(max_iterations=0)


def test_init_is_seeded():
    arch = MlpArchitecture(4, (6,), 2)
    a = mlp_init(arch, TrainConfig(init_seed=3))
    b = mlp_init(arch, TrainConfig(init_seed=3))
    np.testing.assert_array_equal(a.params, b.params)
    assert np.all(np.abs(a.params) <= 0.5)


def test_zero_init_outputs_zero():
    net = mlp_init(MlpArchitecture(4, (6, 3), 2), TrainConfig(init_scale=0.0))
    np.testing.assert_array_equal(mlp_forward(net, np.ones(4)), np.zeros(2))


def test_single_layer_is_affine():
    arch = MlpArchitecture(2, (), 2)
    W = np.array([[1.0, 2.0], [3.0, 4.0]])
    b = np.array([0.5, -1.0])
    net = Mlp(arch, np.concatenate([W.ravel(), b]))
    x = np.array([2.0, -1.0])
    # x @ W + b = (2 - 3 + 0.5, 4 - 4 - 1)
    np.testing.assert_allclose(net(x), [-0.5, -1.0])


def test_batched_forward_matches_per_sample():
    rng = np.random.default_rng(0)
    net = mlp_init(MlpArchitecture(5, (8, 4), 3), TrainConfig(init_seed=1))
    X = rng.normal(size=(17, 5))
    looped = np.array([net(x) for x in X])
    np.testing.assert_allclose(net(X), looped, rtol=1e-12, atol=1e-14)


def test_dimension_mismatch():
    net = mlp_init(MlpArchitecture(5, (3,), 1))
    with pytest.raises(ValueError, match="dimension"):
        net(np.ones(4))


def test_loss_vanishes_at_own_outputs():
    rng = np.random.default_rng(1)
    arch = MlpArchitecture(3, (4,), 2)
    net = mlp_init(arch, TrainConfig(init_seed=2))
    X = rng.normal(size=(10, 3))
    loss, grad = mlp_loss_grad(arch, net.params, X, net(X))
    assert loss == 0.0
    assert np.all(grad == 0.0)


def test_loss_scales_quadratically_in_targets():
    arch = MlpArchitecture(3, (4,), 2)
    zero = np.zeros(arch.n_params)
    X = np.ones((5, 3))
    Y = np.arange(10.0).reshape(5, 2)
    l1, _ = mlp_loss_grad(arch, zero, X, Y)
    l2, _ = mlp_loss_grad(arch, zero, X, 2 * Y)
    assert l2 == pytest.approx(4 * l1)
    assert l1 == pytest.approx(np.mean(Y**2))


def test_gradient_matches_finite_differences():
    rng = np.random.default_rng(7)
    arch = MlpArchitecture(6, (8, 5), 2)
    p = rng.normal(scale=0.5, size=arch.n_params)
    X = rng.normal(size=(20, 6))
    Y = rng.normal(size=(20, 2))
    _, g = mlp_loss_grad(arch, p, X, Y)
    assert max_relative_error(g, central_differences(arch, p, X, Y)) < 1e-4


def test_constant_targets_are_learned():
    rng = np.random.default_rng(4)
    X = rng.random((40, 3))
    net = train(MlpArchitecture(3, (5,), 2), X, np.tile([2.5, -1.0], (40, 1)), TrainConfig(init_seed=1))
    assert np.max(np.abs(net(X) - [2.5, -1.0])) < 1e-3


def test_xor_regression_with_two_hidden_units():
    X = np.array([[0, 0], [0, 1], [1, 0], [1, 1]], dtype=float)
    Y = np.array([0.0, 1.0, 1.0, 0.0])
    net = train(MlpArchitecture(2, (2,), 1), X, Y, TrainConfig(max_iterations=500, init_scale=1.0, init_seed=1))
    assert net.final_loss < 1e-3


def test_training_is_deterministic():
    rng = np.random.default_rng(9)
    X, Y = rng.random((30, 4)), rng.random((30, 2))
    cfg = TrainConfig(max_iterations=50, init_seed=5)
    a = train(MlpArchitecture(4, (6,), 2), X, Y, cfg)
    b = train(MlpArchitecture(4, (6,), 2), X, Y, cfg)
    np.testing.assert_array_equal(a.params, b.params)


def test_float32_training_close_to_float64():
    rng = np.random.default_rng(10)
    X, Y = rng.random((50, 3)), rng.random((50, 2))
    arch = MlpArchitecture(3, (6,), 2)
    a = train(arch, X, Y, TrainConfig(max_iterations=100, dtype="float64"))
    b = train(arch, X, Y, TrainConfig(max_iterations=100, dtype="float32"))
    assert b.final_loss == pytest.approx(a.final_loss, abs=5e-3)


def test_gradient_descent_loss_non_increasing_with_small_step():
    rng = np.random.default_rng(11)
    X, Y = rng.random((25, 3)), rng.random((25, 2))
    trace = []
    train(MlpArchitecture(3, (5,), 2), X, Y,
          TrainConfig(optimizer="gradient", step_size=0.05, max_iterations=300), trace=trace)
    assert len(trace) == 301
    assert all(b <= a + 1e-15 for a, b in zip(trace, trace[1:]))


def test_divergence_is_reported():
    rng = np.random.default_rng(12)
    X, Y = rng.random((10, 2)), 1e3 * rng.random((10, 1))
    with pytest.raises(TrainingDiverged, match="training diverged"):
        train(MlpArchitecture(2, (), 1), X, Y,
              TrainConfig(optimizer="gradient", step_size=1e8, max_iterations=500))


def test_lbfgs_solves_quadratic():
    rng = np.random.default_rng(13)
    M = rng.normal(size=(6, 6))
    A = M @ M.T + 6 * np.eye(6)
    b = rng.normal(size=6)

    def f(x):
        return 0.5 * x @ A @ x - b @ x, A @ x - b

    res = lbfgs(f, np.zeros(6), gradient_tolerance=1e-8, max_iterations=200)
    np.testing.assert_allclose(res.x, np.linalg.solve(A, b), atol=1e-8)
    assert res.converged


def test_lbfgs_rosenbrock():
    def rosen(x):
        a, b = x
        f = (1 - a) ** 2 + 100 * (b - a * a) ** 2
        g = np.array([-2 * (1 - a) - 400 * a * (b - a * a), 200 * (b - a * a)])
        return f, g

    res = lbfgs(rosen, np.array([-1.2, 1.0]), max_iterations=500, gradient_tolerance=1e-8)
    np.testing.assert_allclose(res.x, [1.0, 1.0], atol=1e-5)


def test_gradient_descent_reaches_quadratic_minimum():
    A = np.diag([1.0, 3.0])

    def f(x):
        return 0.5 * x @ A @ x, A @ x

    res = gradient_descent(f, np.array([1.0, 1.0]), step_size=0.3, max_iterations=500, gradient_tolerance=1e-10)
    assert res.converged and np.allclose(res.x, 0.0, atol=1e-9)


def test_snapshot_round_trip(tmp_path):
    net = mlp_init(MlpArchitecture(7, (10, 10), 2), TrainConfig(init_seed=4))
    save_mlp(net, tmp_path / "q.txt")
    back = load_mlp(tmp_path / "q.txt")
    assert back.arch == net.arch
    np.testing.assert_array_equal(back.params, net.params)
    assert (tmp_path / "q.txt").read_text().startswith("mlp 7 10 10 2\n")
