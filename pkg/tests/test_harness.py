import copy

import numpy as np
import pytest

from switchnorm import ParameterError, Rng, TrainingError
from switchnorm.harness import (SGD, TaskConfig, ToyNet, TrainConfig, batch_size_sweep, gradcheck,
                                minibatches, run_experiment, synth_dataset, train)
from switchnorm.harness.gradcheck import GROUPS, relative_error
from switchnorm.harness.net import conv3x3_forward, softmax_cross_entropy
from switchnorm.harness.train import evaluate


def small_net(seed=0, depth=1, width=4, classes=2, c_in=3):
    return ToyNet(Rng(seed), c_in, classes, width=width, depth=depth)


class TestData:
    def test_deterministic(self):
        a = synth_dataset(Rng(5), 3, 30, 2, 4, 4, 0.5)
        b = synth_dataset(Rng(5), 3, 30, 2, 4, 4, 0.5)
        assert a.x.tobytes() == b.x.tobytes() and np.array_equal(a.y, b.y)

    def test_balanced(self):
        d = synth_dataset(Rng(1), 2, 256, 3, 4, 4)
        assert np.bincount(d.y).tolist() == [128, 128]

    def test_needs_two_classes(self):
        with pytest.raises(ParameterError):
            synth_dataset(Rng(1), 1, 10, 3, 4, 4)

    def test_noise_free_separable(self):
        data = synth_dataset(Rng(2), 2, 64, 3, 4, 4, noise=0.0)
        net = small_net(seed=3, depth=1, width=4)
        cfg = TrainConfig(minibatch_size=16, steps=200, lr=0.05, seed=3)
        net, log = train(net, cfg, data)
        states = net.calibrate(minibatches(data, 16, Rng(4)), 8)
        assert evaluate(net, data, states) == 1.0

    def test_minibatches_cover_epoch(self):
        data = synth_dataset(Rng(1), 2, 10, 1, 1, 1)
        stream = minibatches(data, 3, Rng(0))
        seen = np.concatenate([next(stream).x.ravel() for _ in range(3)])
        assert len(set(seen.tolist())) == 9


class TestConv:
    def test_matches_loops(self):
        rng = Rng(7)
        x = rng.normal(2 * 3 * 4 * 5).reshape(2, 3, 4, 5)
        w = rng.normal(2 * 3 * 9).reshape(2, 3, 3, 3)
        out = conv3x3_forward(x, w)
        ref = np.zeros_like(out)
        for n in range(2):
            for o in range(2):
                for i in range(4):
                    for j in range(5):
                        for c in range(3):
                            for di in range(3):
                                for dj in range(3):
                                    ii, jj = i + di - 1, j + dj - 1
                                    if 0 <= ii < 4 and 0 <= jj < 5:
                                        ref[n, o, i, j] += w[o, c, di, dj] * x[n, c, ii, jj]
        np.testing.assert_allclose(out, ref, rtol=0, atol=1e-12)


def test_softmax_cross_entropy_gradient():
    rng = Rng(3)
    logits = rng.normal(12).reshape(4, 3)
    labels = np.array([0, 2, 1, 2])
    _, grad = softmax_cross_entropy(logits, labels)
    h = 1e-6
    for idx in np.ndindex(logits.shape):
        up, down = logits.copy(), logits.copy()
        up[idx] += h
        down[idx] -= h
        num = (softmax_cross_entropy(up, labels)[0] - softmax_cross_entropy(down, labels)[0]) / 2 / h
        assert abs(num - grad[idx]) < 1e-8


def test_network_gradients_match_finite_differences():
    rng = Rng(11)
    net = small_net(seed=11, depth=2, width=3, classes=3, c_in=2)
    for p in net.sn:
        p.lambda_mu[:] = rng.normal(3)
        p.lambda_var[:] = rng.normal(3)
        p.beta[:] = 0.3 * rng.normal(3)
    x = rng.normal(4 * 2 * 4 * 4).reshape(4, 2, 4, 4)
    y = np.array([0, 1, 2, 1])

    def loss():
        return softmax_cross_entropy(net.forward(x), y)[0]

    _, d_logits = softmax_cross_entropy(net.forward(x), y)
    grads = net.backward(d_logits)
    h = 1e-6
    for name, _, arr in net.parameters():
        num = np.zeros_like(arr)
        for idx in np.ndindex(arr.shape):
            orig = arr[idx]
            arr[idx] = orig + h
            up = loss()
            arr[idx] = orig - h
            down = loss()
            arr[idx] = orig
            num[idx] = (up - down) / (2 * h)
        np.testing.assert_allclose(grads[name], num, rtol=1e-5, atol=1e-8, err_msg=name)


class TestOptimizer:
    def test_group_decay(self):
        a, b = np.array([1.0, 2.0]), np.array([3.0])
        opt = SGD([("a", "main", a), ("b", "lambda", b)], lr=0.1, momentum=0.9,
                  weight_decay={"main": 0.5, "lambda": 0.0})
        opt.step({"a": np.array([1.0, 1.0]), "b": np.array([1.0])})
        np.testing.assert_allclose(a, [1 - 0.1 * 1.5, 2 - 0.1 * 2.0])
        np.testing.assert_allclose(b, [3 - 0.1])
        opt.step({"a": np.zeros(2), "b": np.zeros(1)})
        # velocity carries 0.9 of the previous step plus fresh decay
        np.testing.assert_allclose(b, [2.9 - 0.1 * 0.9])


class TestTrain:
    data = synth_dataset(Rng(0), 2, 32, 3, 4, 4, 1.0)

    def test_zero_lr_is_null_update(self):
        net = small_net()
        before = [arr.copy() for _, _, arr in net.parameters()]
        cfg = TrainConfig(minibatch_size=8, steps=5, lr=0.0, weight_decay_main=0,
                          weight_decay_affine=0, seed=1)
        train(net, cfg, self.data)
        for b, (_, _, arr) in zip(before, net.parameters()):
            assert np.array_equal(b, arr)

    def test_single_step_update(self):
        net = small_net(seed=4)
        ref = copy.deepcopy(net)
        cfg = TrainConfig(minibatch_size=8, steps=1, lr=0.1, weight_decay_main=1e-3,
                          weight_decay_affine=1e-2, weight_decay_lambda=0.5, seed=1)
        batch = next(minibatches(self.data, 8, Rng(123)))
        _, d_logits = softmax_cross_entropy(ref.forward(batch.x), batch.y)
        grads = ref.backward(d_logits)
        decay = {"main": 1e-3, "affine": 1e-2, "lambda": 0.5}
        train(net, cfg, self.data, Rng(123))
        for (name, group, new), (_, _, old) in zip(net.parameters(), ref.parameters()):
            expected = old - 0.1 * (grads[name] + decay[group] * old)
            np.testing.assert_array_equal(new, expected, err_msg=name)

    def test_divergence_reports_step(self):
        data = copy.deepcopy(self.data)
        data.x[:] = np.nan
        with pytest.raises(TrainingError) as err:
            train(small_net(), TrainConfig(minibatch_size=4, steps=3), data)
        assert err.value.step == 0

    def test_log_contents(self, tmp_path):
        net, log = train(small_net(depth=2), TrainConfig(minibatch_size=4, steps=3), self.data)
        path = tmp_path / "m.csv"
        log.write_csv(path)
        lines = path.read_text().splitlines()
        assert lines[0] == "step,loss,acc,layer,stat,w_in,w_ln,w_bn"
        assert len(lines) == 1 + 3 * 2 * 2

    def test_deterministic_log(self, tmp_path):
        paths = []
        for k in range(2):
            _, log = train(small_net(seed=2), TrainConfig(minibatch_size=4, steps=10, seed=5),
                           self.data)
            paths.append(tmp_path / f"{k}.csv")
            log.write_csv(paths[-1])
        assert paths[0].read_bytes() == paths[1].read_bytes()

    def test_single_sample_batches(self):
        # the loop checks BN == IN statistics at every step
        _, log = train(small_net(depth=2), TrainConfig(minibatch_size=1, steps=20), self.data)
        assert len(log.steps) == 20

    def test_sparse_layer_frozen(self):
        from switchnorm import sn_sparsify
        net = small_net(depth=2)
        net.sn[0] = sn_sparsify(net.sn[0])
        lam = net.sn[0].lambda_mu.copy()
        train(net, TrainConfig(minibatch_size=4, steps=5), self.data)
        assert np.array_equal(net.sn[0].lambda_mu, lam)
        assert "sn0.lambda_mu" not in [n for n, _, _ in net.parameters()]

    def test_config_validation(self):
        with pytest.raises(ParameterError):
            TrainConfig(lr=-1)
        with pytest.raises(ParameterError):
            TrainConfig(weight_decay_lambda=-1e-4)
        with pytest.raises(ParameterError):
            TrainConfig(minibatch_size=0)


def test_default_config_fits_training_data():
    result = run_experiment(TrainConfig(seed=0))
    assert result.acc_train > 0.95


def test_simplex_after_updates():
    net, log = train(small_net(depth=2), TrainConfig(minibatch_size=4, steps=50, lr=0.5),
                     synth_dataset(Rng(0), 2, 32, 3, 4, 4))
    for layers in log.weights:
        for w_mu, w_var in layers:
            for w in (w_mu, w_var):
                assert np.all((w >= 0) & (w <= 1)) and abs(w.sum() - 1) < 1e-10


class TestGradcheck:
    def test_reference_run(self):
        result = gradcheck((2, 3, 4, 4), seed=7, eps_fd=1e-5)
        assert set(result.errors) == set(GROUPS)
        assert result.passed(1e-5)

    def test_gamma_zero_input_group(self):
        result = gradcheck((2, 3, 4, 4), seed=7, gamma_zero=True)
        assert np.all(result.analytic["input"] == 0)
        assert np.all(result.numeric["input"] == 0)

    @pytest.mark.parametrize("scope", ["in", "ln", "bn"])
    def test_saturated(self, scope):
        result = gradcheck((2, 3, 3, 3), seed=1, saturate=scope)
        for group in ("lambda_mu", "lambda_var"):
            assert np.abs(result.analytic[group]).max() < 1e-12
            assert np.abs(result.numeric[group]).max() < 1e-8
        assert result.errors["input"] < 1e-5

    def test_rejects_step(self):
        with pytest.raises(ParameterError):
            gradcheck(eps_fd=0.0)

    def test_relative_error(self):
        assert relative_error(np.array([1.0, 0.0]), np.array([1.0, 0.0])) == 0.0
        assert relative_error(np.array([2.0]), np.array([1.0])) == 0.5


def test_sweep_structure():
    template = TrainConfig(steps=2)
    task = TaskConfig(train_samples=64, test_samples=16)
    report = batch_size_sweep(template, [2, 32], range(5), task)
    assert len(report.runs) == 10
    assert all(len(r.w_mu) == task.depth and len(r.w_var) == task.depth for r in report.runs)
    line = report.summary()
    assert line.startswith("w_bn_large=") and " w_bn_small=" in line
    assert line.endswith(("direction=pass", "direction=fail"))


def test_sweep_needs_sizes_and_seeds():
    with pytest.raises(ParameterError):
        batch_size_sweep(TrainConfig(steps=1), [2], [0, 1, 2])
    with pytest.raises(ParameterError):
        batch_size_sweep(TrainConfig(steps=1), [2, 4], [0, 1])


@pytest.fixture(scope="module")
def decayed_run():
    return run_experiment(TrainConfig(seed=2, lr_decay_at=700), checkpoint_every=100)


def test_batch_average_holds_at_checkpoints_after_decay(decayed_run):
    late = [(s, ba, ma) for s, ba, ma in decayed_run.checkpoints if s > 700]
    assert late
    for step, ba, ma in late:
        assert ba >= ma - 0.005, step


@pytest.mark.xfail(strict=True, reason="while lr is still high the moving average can lead "
                                       "batch averaging by more than 0.5% (step 300, seed 2)")
def test_batch_average_holds_at_every_checkpoint(decayed_run):
    for step, ba, ma in decayed_run.checkpoints:
        assert ba >= ma - 0.005, step
