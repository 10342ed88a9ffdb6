import numpy as np
import pytest

from ntkdistill.kernel import empirical_ntk_diag, empirical_ntk_gram
from ntkdistill.network import (
    Checkpoint,
    DistillTargets,
    NetConfig,
    SquaredTargets,
    TrainConfig,
    default_checkpoint_epochs,
    feature,
    feature_dot,
    features,
    flatten,
    forward,
    init_params,
    linear_logit,
    load_checkpoint,
    param_count,
    save_checkpoint,
    train_linearized,
    train_teacher,
    unflatten,
    weighted_feature_sum,
)
from ntkdistill.distillation import DistillParams


CFG = NetConfig(input_dim=2, hidden_layers=3, width=8)


def straight_line_forward(cfg, params, x):
    # independent re-implementation of the forward pass, scalar loops only
    layers = unflatten(cfg, params)
    a = list(x)
    fan = cfg.input_dim
    for li, (w, b) in enumerate(layers):
        h = []
        for i in range(w.shape[0]):
            acc = 0.0
            for j in range(w.shape[1]):
                acc += w[i, j] * a[j]
            h.append(cfg.weight_scale * acc / np.sqrt(fan) + cfg.bias_scale * b[i])
        if li < len(layers) - 1:
            a = [max(0.0, v) for v in h]
        else:
            a = h
        fan = cfg.width
    return a[0]


def test_param_count_hand_check():
    assert param_count(CFG) == 177


def test_init_deterministic():
    assert np.array_equal(init_params(CFG, 5), init_params(CFG, 5))
    assert not np.array_equal(init_params(CFG, 5), init_params(CFG, 6))


def test_init_standard_normal_moments():
    big = NetConfig(2, 2, 1000)  # ~ 1e6 parameters
    p = init_params(big, 0)
    assert p.size > 10**6
    assert abs(p.mean()) < 0.01
    assert abs(p.std() - 1.0) < 0.01


def test_layout_round_trips():
    p = init_params(CFG, 3)
    assert np.array_equal(flatten(unflatten(CFG, p)), p)


def test_forward_zero_params():
    assert forward(CFG, np.zeros(param_count(CFG)), np.array([1.0, -2.0])) == 0.0


def test_forward_zero_input_zero_biases():
    p = init_params(CFG, 0)
    layers = unflatten(CFG, p)
    for _, b in layers:
        b[:] = 0.0  # views into p
    assert forward(CFG, p, np.zeros(2)) == 0.0


def test_forward_matches_straight_line_evaluator():
    rng = np.random.default_rng(9)
    for _ in range(5):
        p = init_params(CFG, rng)
        x = rng.normal(size=2)
        assert forward(CFG, p, x) == pytest.approx(
            straight_line_forward(CFG, p, x), abs=1e-12
        )


def test_forward_batch_matches_single():
    rng = np.random.default_rng(2)
    p = init_params(CFG, 1)
    xs = rng.normal(size=(6, 2))
    batch = forward(CFG, p, xs)
    assert batch.shape == (6,)
    for i in range(6):
        assert batch[i] == pytest.approx(forward(CFG, p, xs[i]), abs=1e-14)


def test_feature_finite_differences():
    rng = np.random.default_rng(4)
    p = init_params(CFG, 11)
    x = rng.normal(size=2)
    phi = feature(CFG, p, x)
    eps = 1e-4
    idx = rng.choice(p.size, size=120, replace=False)
    for i in idx:
        up, down = p.copy(), p.copy()
        up[i] += eps
        down[i] -= eps
        fd = (forward(CFG, up, x) - forward(CFG, down, x)) / (2 * eps)
        assert phi[i] == pytest.approx(fd, rel=1e-5, abs=1e-9)


def test_feature_output_bias_coordinate():
    cfg = NetConfig(2, 2, 4, bias_scale=0.7)
    p = init_params(cfg, 0)
    phi = feature(cfg, p, np.array([0.3, -1.2]))
    assert phi[-1] == pytest.approx(0.7, abs=1e-15)


def test_feature_norm_equals_kernel_diagonal():
    p = init_params(CFG, 8)
    x = np.array([[1.5, -0.5]])
    phi = feature(CFG, p, x[0])
    assert phi @ phi == pytest.approx(empirical_ntk_diag(CFG, p, x)[0], rel=1e-12)


def test_weighted_feature_sum_matches_features():
    rng = np.random.default_rng(1)
    p = init_params(CFG, 2)
    xs = rng.normal(size=(5, 2))
    c = rng.normal(size=5)
    f = features(CFG, p, xs)
    assert np.allclose(weighted_feature_sum(CFG, p, xs, c), f.T @ c, atol=1e-12)


def test_feature_dot_matches_features():
    rng = np.random.default_rng(6)
    p = init_params(CFG, 2)
    xs = rng.normal(size=(5, 2))
    delta = rng.normal(size=p.size)
    f = features(CFG, p, xs)
    assert np.allclose(feature_dot(CFG, p, delta, xs), f @ delta, atol=1e-12)


def test_linear_logit_trivial_cases():
    rng = np.random.default_rng(3)
    p = init_params(CFG, 7)
    x = rng.normal(size=2)
    z0 = forward(CFG, p, x)
    assert linear_logit(CFG, p, np.zeros(p.size), x) == pytest.approx(z0)
    phi = feature(CFG, p, x)
    c = 2.5
    delta = c * phi / (phi @ phi)
    assert linear_logit(CFG, p, delta, x) == pytest.approx(z0 + c, rel=1e-12)


def test_linearization_fidelity_at_large_width():
    # small parameter displacements barely bend a wide network
    cfg = NetConfig(2, 2, 4096)
    p0 = init_params(cfg, 0)
    rng = np.random.default_rng(1)
    delta = rng.standard_normal(p0.size)
    delta *= 0.3 / np.linalg.norm(delta)
    xs = rng.normal(scale=5.0, size=(16, 2))
    lin = linear_logit(cfg, p0, delta, xs)
    full = forward(cfg, p0 + delta, xs)
    rel = np.abs(full - lin) / (np.abs(lin) + 1.0)
    assert np.max(rel) <= 0.05


class _ToyTask:
    """Linearly separable labels with N(0, 25) inputs."""

    def sample_inputs(self, n, rng):
        return rng.normal(scale=5.0, size=(n, 2))

    def hard_labels(self, x, rng=None):
        return (x[:, 0] + x[:, 1] > 0).astype(float)


def test_train_teacher_zero_epochs_returns_init():
    tc = TrainConfig(learning_rate=0.01, batch_size=16, epochs=0)
    ckpts = train_teacher(NetConfig(2, 2, 16), _ToyTask(), tc, seed=0)
    assert len(ckpts) == 1 and ckpts[0].epoch == 0
    assert np.array_equal(ckpts[0].params, init_params(NetConfig(2, 2, 16), np.random.default_rng(np.random.SeedSequence(0).spawn(2)[0])))


def test_train_teacher_deterministic():
    tc = TrainConfig(learning_rate=0.01, batch_size=32, epochs=20)
    a = train_teacher(NetConfig(2, 2, 16), _ToyTask(), tc, seed=3)
    b = train_teacher(NetConfig(2, 2, 16), _ToyTask(), tc, seed=3)
    assert [c.epoch for c in a] == [c.epoch for c in b]
    for ca, cb in zip(a, b):
        assert np.array_equal(ca.params, cb.params)


def test_train_teacher_learns_separable_task():
    cfg = NetConfig(2, 2, 32)
    tc = TrainConfig(learning_rate=0.01, batch_size=128, epochs=2000)
    ckpts = train_teacher(cfg, _ToyTask(), tc, seed=1, checkpoint_epochs=[2000])
    final = ckpts[-1].params
    rng = np.random.default_rng(99)
    x = rng.normal(scale=5.0, size=(2000, 2))
    y = (x[:, 0] + x[:, 1] > 0).astype(float)
    acc = np.mean((forward(cfg, final, x) > 0) == (y > 0.5))
    assert acc >= 0.99


def test_default_checkpoint_epochs():
    assert default_checkpoint_epochs(10) == [1, 2, 4, 8, 10]
    assert default_checkpoint_epochs(8) == [1, 2, 4, 8]
    assert default_checkpoint_epochs(0) == []


def test_checkpoint_roundtrip(tmp_path):
    cfg = NetConfig(2, 2, 4, weight_scale=1.5, bias_scale=0.5)
    ck = Checkpoint(cfg, seed=7, epoch=12, params=init_params(cfg, 7))
    path = tmp_path / "teacher.npz"
    save_checkpoint(path, ck)
    back = load_checkpoint(path)
    assert back.config == cfg
    assert back.seed == 7 and back.epoch == 12
    assert np.array_equal(back.params, ck.params)


def test_train_linearized_fixed_point():
    # targets equal to current outputs: zero gradient, delta stays zero
    cfg = NetConfig(2, 2, 32)
    p0 = init_params(cfg, 0)
    rng = np.random.default_rng(0)
    x = rng.normal(scale=5.0, size=(8, 2))
    targets = forward(cfg, p0, x)
    tc = TrainConfig(learning_rate=0.05, batch_size=8, epochs=50, online_batch=False)
    res = train_linearized(cfg, p0, SquaredTargets(targets), tc, data=x)
    assert np.allclose(res.delta, 0.0)
    assert res.grad_norm == 0.0


def test_train_linearized_matches_kernel_solve():
    # gradient training on fixed data lands on the kernel-solve interpolant
    cfg = NetConfig(2, 2, 128)
    p0 = init_params(cfg, 5)
    rng = np.random.default_rng(5)
    n = 16
    x = rng.normal(scale=5.0, size=(n, 2))
    targets = np.cos(0.4 * x[:, 0]) * 2.0
    z0 = forward(cfg, p0, x)
    gram = empirical_ntk_gram(cfg, p0, x)
    delta_solve = weighted_feature_sum(cfg, p0, x, gram.solve(targets - z0))

    # a dominant adam_eps makes the update effectively momentum gradient
    # descent: span-preserving, so it converges to the kernel interpolant
    tc = TrainConfig(
        learning_rate=5.0, batch_size=n, epochs=8000, online_batch=False, adam_eps=30.0
    )
    res = train_linearized(
        cfg, p0, SquaredTargets(targets), tc, data=x, grad_tol=1e-4
    )
    assert res.converged
    trained = z0 + feature_dot(cfg, p0, res.delta, x)
    assert np.max(np.abs(trained - targets)) <= 1e-3

    probes = rng.normal(scale=5.0, size=(40, 2))
    via_solve = linear_logit(cfg, p0, delta_solve, probes)
    via_train = linear_logit(cfg, p0, res.delta, probes)
    assert np.max(np.abs(via_train - via_solve)) <= 1e-2


def test_train_linearized_distill_objective_reaches_effective_logits():
    from ntkdistill.distillation import effective_logits

    cfg = NetConfig(2, 2, 64)
    p0 = init_params(cfg, 2)
    rng = np.random.default_rng(2)
    n = 8
    x = rng.normal(scale=5.0, size=(n, 2))
    z_t = rng.normal(scale=2.0, size=n)
    y = (z_t + rng.normal(scale=0.5, size=n) > 0).astype(float)
    dp = DistillParams(soft_ratio=0.7, temperature=2.0)
    tc = TrainConfig(learning_rate=0.2, batch_size=n, epochs=20000, online_batch=False)
    res = train_linearized(cfg, p0, DistillTargets(dp, z_t, y), tc, data=x)
    z = forward(cfg, p0, x) + feature_dot(cfg, p0, res.delta, x)
    assert np.allclose(z, effective_logits(z_t, y, dp), atol=5e-3)


def test_train_linearized_online_needs_rng():
    cfg = NetConfig(2, 2, 8)
    tc = TrainConfig(learning_rate=0.01, batch_size=4, epochs=2)
    with pytest.raises(ValueError):
        train_linearized(cfg, init_params(cfg, 0), SquaredTargets(lambda x: x[:, 0]), tc,
                         sampler=lambda n, rng: rng.normal(size=(n, 2)))


def test_config_validation():
    with pytest.raises(ValueError):
        NetConfig(0, 1, 4)
    with pytest.raises(ValueError):
        NetConfig(2, 1, 4, weight_scale=0.0)
    with pytest.raises(ValueError):
        TrainConfig(learning_rate=0.0, batch_size=1, epochs=1)
