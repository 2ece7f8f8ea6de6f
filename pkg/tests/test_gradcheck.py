"""
Autodiff against central finite differences, per layer type and on the
full objective of a small mixed batch.
"""
import numpy as np
import pytest

from diffcore import ops
from diffcore.gradcheck import check_gradients, relative_error
from diffcore.model import init_small_convnet, run_network
from diffcore.tensor import Tensor
from losses.terms import (
    LossParts,
    cam_loss,
    consistency_loss,
    srm_mix_loss,
    supervised_loss,
    total_loss,
)

TOLERANCE = 1e-3


def projection(rng, shape):
    """Fixed random weights that turn a tensor into a scalar loss."""
    return Tensor(rng.standard_normal(shape))


def assert_gradients(loss_fn, params, seed=0, **kwargs):
    report = check_gradients(loss_fn, params, np.random.default_rng(seed), **kwargs)
    assert len(report.errors) == kwargs.get('directions', 100)
    assert report.worst <= TOLERANCE, report.worst


class TestLayers:

    @pytest.mark.parametrize('stride', [1, 2])
    def test_conv2d(self, stride):
        rng = np.random.default_rng(10)
        params = {'x': rng.standard_normal((2, 3, 6, 6)), 'w': rng.standard_normal((4, 3, 3, 3))}
        ho = 6 // stride
        weights = projection(rng, (2, 4, ho, ho))

        def loss_fn(tape, p):
            return ops.total(ops.mul(ops.conv2d(p['x'], p['w'], stride=stride), weights))

        assert_gradients(loss_fn, params)

    @pytest.mark.parametrize('train', [True, False])
    def test_batch_norm(self, train):
        rng = np.random.default_rng(11)
        params = {
            'x': rng.standard_normal((4, 3, 3, 3)),
            'gamma': rng.uniform(0.5, 1.5, 3),
            'beta': rng.standard_normal(3),
        }
        running_mean, running_var = rng.standard_normal(3), rng.uniform(0.5, 2.0, 3)
        weights = projection(rng, (4, 3, 3, 3))

        def loss_fn(tape, p):
            out, _, _ = ops.batch_norm(p['x'], p['gamma'], p['beta'], running_mean, running_var, train)
            return ops.total(ops.mul(out, weights))

        assert_gradients(loss_fn, params)

    def test_relu(self):
        rng = np.random.default_rng(12)
        params = {'x': rng.standard_normal((5, 7))}
        weights = projection(rng, (5, 7))

        def loss_fn(tape, p):
            return ops.total(ops.mul(ops.relu(p['x']), weights))

        assert_gradients(loss_fn, params)

    def test_global_avg_pool(self):
        rng = np.random.default_rng(13)
        params = {'x': rng.standard_normal((2, 3, 4, 4))}
        weights = projection(rng, (2, 3))

        def loss_fn(tape, p):
            return ops.total(ops.mul(ops.global_avg_pool(p['x']), weights))

        assert_gradients(loss_fn, params)

    def test_linear(self):
        rng = np.random.default_rng(14)
        params = {
            'x': rng.standard_normal((3, 5)),
            'w': rng.standard_normal((4, 5)),
            'b': rng.standard_normal(4),
        }
        weights = projection(rng, (3, 4))

        def loss_fn(tape, p):
            return ops.total(ops.mul(ops.linear(p['x'], p['w'], p['b']), weights))

        assert_gradients(loss_fn, params)

    def test_softmax_cross_entropy(self):
        rng = np.random.default_rng(15)
        params = {'z': rng.standard_normal((4, 5))}
        targets = Tensor(rng.dirichlet(np.ones(5), size=4))

        def loss_fn(tape, p):
            logp = ops.log_clamped(ops.softmax(p['z']), 1e-12)
            return ops.scale(ops.total(ops.mul(logp, targets)), -1.0)

        assert_gradients(loss_fn, params)

    def test_squared_distance(self):
        rng = np.random.default_rng(16)
        params = {'a': rng.standard_normal((3, 4))}
        target = Tensor(rng.standard_normal((3, 4)))

        def loss_fn(tape, p):
            return ops.total(ops.square(ops.sub(p['a'], target)))

        assert_gradients(loss_fn, params)


class TestTotalLoss:

    def test_mixed_batch(self):
        """Labeled, strong, SRM and CAM rows through SmallConvNet and the summed loss."""
        rng = np.random.default_rng(20)
        net = init_small_convnet(rng, 3, 3, widths=(4, 4, 4)).astype(np.float64)
        batch = rng.uniform(0.0, 1.0, size=(4, 3, 8, 8))
        srm_label = np.array([[0.0, 0.75, 0.25]])
        cam_label = np.array([[0.2, 0.5, 0.3]])

        def loss_fn(tape, leaves):
            probs, _ = run_network(net, batch, train=True, param=leaves.__getitem__)
            parts = LossParts(
                l_s=supervised_loss(ops.take_rows(probs, 0, 1), np.array([2])),
                l_u=consistency_loss(ops.take_rows(probs, 1, 2), np.array([1]), np.array([0]), 1),
                l_m=srm_mix_loss(ops.take_rows(probs, 2, 3), srm_label, 1),
                l_cm=cam_loss(ops.take_rows(probs, 3, 4), cam_label, 1),
            )
            return total_loss(parts)

        params = {name: net[name] for name in net.trainable()}
        assert_gradients(loss_fn, params, h=1e-3)


def test_relative_error_floor():
    assert relative_error(1e-12, 0.0) == pytest.approx(1e-6)
    assert relative_error(2.0, 1.0) == pytest.approx(0.5)
