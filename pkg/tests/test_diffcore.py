import math
from unittest import TestCase

import numpy as np

from tcezsl.diffcore import (
    AdamState,
    DenseLayer,
    Mlp,
    adam_step,
    euclidean_distance,
    mlp_backward,
    mlp_forward,
    softmax,
    softmax_cross_entropy,
    variance,
)
from tcezsl.errors import NumericError, PreconditionError, ShapeError
from tests import numeric_grad, relative_error


class TestPrimitives(TestCase):
    def test_cross_entropy(self):
        loss, grad = softmax_cross_entropy(np.zeros(4), 2)
        self.assertAlmostEqual(loss, math.log(4))
        self.assertTrue(np.allclose(grad, [0.25, 0.25, -0.75, 0.25]))

        losses, grads = softmax_cross_entropy(np.array([[1000.0, 0.0], [0.0, 0.0]]), [0, 1])
        self.assertAlmostEqual(losses[0], 0.0)
        self.assertAlmostEqual(losses[1], math.log(2))
        self.assertEqual(grads.shape, (2, 2))
        self.assertRaises(IndexError, softmax_cross_entropy, np.zeros(3), 3)
        self.assertRaises(ShapeError, softmax_cross_entropy, np.zeros((2, 3)), [0])

    def test_cross_entropy_gradient_rows_sum_to_zero(self):
        rng = np.random.default_rng(4)
        _, grads = softmax_cross_entropy(3.0 * rng.standard_normal((6, 5)), [0, 1, 2, 3, 4, 0])
        self.assertTrue(np.allclose(grads.sum(axis=1), 0.0, atol=1e-12))

    def test_softmax_is_stable(self):
        p = softmax(np.array([1e4, 1e4, 0.0]))
        self.assertTrue(np.allclose(p, [0.5, 0.5, 0.0]))

    def test_distance(self):
        d, gu, gv = euclidean_distance(np.array([0.0, 0.0]), np.array([3.0, 4.0]))
        self.assertEqual(d, 5.0)
        self.assertTrue(np.allclose(gu, [-0.6, -0.8]))
        self.assertTrue(np.allclose(gv, [0.6, 0.8]))

        d, gu, _ = euclidean_distance(np.ones(3), np.ones(3))
        self.assertEqual(d, 0.0)
        self.assertFalse(np.any(gu))
        self.assertRaises(ShapeError, euclidean_distance, np.ones(2), np.ones(3))

    def test_distance_is_a_metric(self):
        rng = np.random.default_rng(5)
        u, v, w = rng.standard_normal((3, 50, 7))
        uv, _, _ = euclidean_distance(u, v)
        vu, _, _ = euclidean_distance(v, u)
        vw, _, _ = euclidean_distance(v, w)
        uw, _, _ = euclidean_distance(u, w)
        self.assertTrue(np.array_equal(uv, vu))
        self.assertTrue(np.all(uw <= uv + vw + 1e-12))

    def test_distance_matches_direct_sum(self):
        rng = np.random.default_rng(6)
        u, v = rng.standard_normal((2, 256))
        d, _, _ = euclidean_distance(u, v)
        expected = math.sqrt(sum((a - b) ** 2 for a, b in zip(u.tolist(), v.tolist())))
        self.assertLess(abs(d - expected), 1e-10)

    def test_variance(self):
        value, grad = variance([1.0, 3.0])
        self.assertEqual(value, 1.0)
        self.assertTrue(np.allclose(grad, [-1.0, 1.0]))
        self.assertRaises(PreconditionError, variance, [1.0])

    def test_variance_of_one_to_hundred(self):
        values = [float(i) for i in range(1, 101)]
        value, _ = variance(values)
        self.assertAlmostEqual(value, 833.25, places=9)

        shifted, grad = variance([v + 1000.0 for v in values])
        self.assertAlmostEqual(shifted, value, places=6)
        self.assertAlmostEqual(float(grad.sum()), 0.0, places=9)

        rng = np.random.default_rng(7)
        sample = rng.standard_normal(100).tolist()
        mean = sum(sample) / 100
        expected = sum((s - mean) ** 2 for s in sample) / 100
        self.assertLess(abs(variance(sample)[0] - expected), 1e-10)


class TestMlp(TestCase):
    def test_construction_errors(self):
        rng = np.random.default_rng(0)
        a = DenseLayer.init(3, 4, rng)
        b = DenseLayer.init(5, 2, rng)
        self.assertRaises(ShapeError, Mlp, [a, b], ['relu', 'identity'])
        self.assertRaises(ShapeError, Mlp, [], [])
        self.assertRaises(ShapeError, Mlp, [a], ['relu', 'relu'])
        self.assertRaises(ValueError, Mlp, [a], ['tanh'])
        c = DenseLayer.init(4, 4, rng)
        self.assertRaises(ShapeError, Mlp, [a, c], ['softmax', 'identity'])
        self.assertRaises(NumericError, DenseLayer, [[np.inf]], [0.0])
        self.assertRaises(ShapeError, DenseLayer, [[1.0, 2.0]], [0.0, 0.0])

    def test_forward_shapes(self):
        net = Mlp.build([3, 5, 2], np.random.default_rng(0))
        y, _ = net.forward(np.ones(3))
        self.assertEqual(y.shape, (2,))
        y, _ = net.forward(np.ones((4, 3)))
        self.assertEqual(y.shape, (4, 2))
        self.assertRaises(ShapeError, net.forward, np.ones(4))
        self.assertEqual(sorted(net.parameters('net.')), ['net.0.bias', 'net.0.weight', 'net.1.bias', 'net.1.weight'])

    def test_backward_needs_own_tape(self):
        rng = np.random.default_rng(0)
        net = Mlp.build([3, 2], rng)
        other = Mlp.build([3, 2], rng)
        _, tape = other.forward(np.ones(3))
        self.assertRaises(PreconditionError, net.backward, tape, np.ones(2))
        self.assertRaises(PreconditionError, net.backward, None, np.ones(2))
        _, tape = net.forward(np.ones((2, 3)))
        self.assertRaises(ShapeError, net.backward, tape, np.ones((2, 3)))

    def test_stale_tape_is_rejected(self):
        net = Mlp.build([3, 4, 2], np.random.default_rng(0))
        _, tape = mlp_forward(net, np.ones((2, 3)))
        net.layers[0].weight += 0.1
        net.mark_updated()
        with self.assertRaises(PreconditionError):
            mlp_backward(net, tape, np.ones((2, 2)))
        _, tape = mlp_forward(net, np.ones((2, 3)))
        grads, _ = mlp_backward(net, tape, np.ones((2, 2)))
        self.assertEqual(grads['0.weight'].shape, (4, 3))

    def check_gradients(self, output):
        rng = np.random.default_rng(1)
        net = Mlp.build([4, 6, 3], rng, output=output)
        x = rng.standard_normal((5, 4))
        up = rng.standard_normal((5, 3))

        def value():
            y, _ = net.forward(x)
            return float(np.sum(y * up))

        _, tape = mlp_forward(net, x)
        grads, dx = mlp_backward(net, tape, up)
        for name, param in net.parameters().items():
            self.assertLess(relative_error(grads[name], numeric_grad(value, param)), 1e-6, name)
        self.assertLess(relative_error(dx, numeric_grad(value, x)), 1e-6)

    def test_identity_output_gradients(self):
        self.check_gradients('identity')

    def test_softmax_output_gradients(self):
        self.check_gradients('softmax')


class TestAdam(TestCase):
    def test_first_step_moves_by_lr(self):
        params = {'w': np.array([1.0, -1.0]), 'b': np.zeros(1)}
        state = AdamState(params, lr=0.1)
        adam_step(params, {'w': np.array([2.0, -3.0]), 'b': np.zeros(1)}, state)
        self.assertTrue(np.allclose(params['w'], [0.9, -0.9]))
        self.assertTrue(np.array_equal(params['b'], [0.0]))
        self.assertEqual(state.step_count, 1)

    def test_lr_groups(self):
        params = {'attr_table': np.ones(2), 'g_a.0.weight': np.ones(2)}
        state = AdamState(params, lr=0.1, lr_groups={'attr_table': 0.01})
        grads = {k: np.ones(2) for k in params}
        adam_step(params, grads, state)
        self.assertTrue(np.allclose(params['attr_table'], 0.99))
        self.assertTrue(np.allclose(params['g_a.0.weight'], 0.9))
        self.assertEqual(state.lr_for('attr_table'), 0.01)
        self.assertEqual(state.lr_for('obj_table'), 0.1)

    def test_zero_lr_leaves_params(self):
        params = {'w': np.array([0.5, 2.0])}
        state = AdamState(params, lr=0.0, weight_decay=0.1)
        adam_step(params, {'w': np.array([1.0, 1.0])}, state)
        self.assertTrue(np.array_equal(params['w'], [0.5, 2.0]))

    def test_weight_decay_pulls_to_zero(self):
        params = {'w': np.array([2.0])}
        state = AdamState(params, lr=0.1, weight_decay=1.0)
        adam_step(params, {'w': np.zeros(1)}, state)
        self.assertTrue(np.allclose(params['w'], [1.9]))

    def test_errors(self):
        params = {'w': np.ones(2)}
        self.assertRaises(ValueError, AdamState, params, lr=-1.0)
        state = AdamState(params)
        self.assertRaises(ShapeError, adam_step, params, {'v': np.ones(2)}, state)
        self.assertRaises(ShapeError, adam_step, params, {'w': np.ones(3)}, state)
        with self.assertRaises(NumericError) as cm:
            adam_step(params, {'w': np.array([np.nan, 0.0])}, state)
        self.assertEqual(cm.exception.term, 'w')
        self.assertEqual(state.step_count, 0)

    def test_two_steps_match_reference(self):
        lr, beta1, beta2, eps = 0.01, 0.9, 0.999, 1e-8
        steps = [[0.2, -0.4], [-0.1, 0.3]]
        params = {'w': np.array([0.5, -1.5])}
        state = AdamState(params, lr=lr)
        for g in steps:
            adam_step(params, {'w': np.array(g)}, state)

        w = [0.5, -1.5]
        m = [0.0, 0.0]
        v = [0.0, 0.0]
        for t, g in enumerate(steps, 1):
            for i in range(2):
                m[i] = beta1 * m[i] + (1 - beta1) * g[i]
                v[i] = beta2 * v[i] + (1 - beta2) * g[i] * g[i]
                m_hat = m[i] / (1 - beta1 ** t)
                v_hat = v[i] / (1 - beta2 ** t)
                w[i] -= lr * m_hat / (math.sqrt(v_hat) + eps)
        for got, expected in zip(params['w'].tolist(), w):
            self.assertAlmostEqual(got, expected, places=12)

    def test_identical_runs_are_bitwise_equal(self):
        def run():
            rng = np.random.default_rng(9)
            params = {'a': rng.standard_normal((3, 2)), 'b': rng.standard_normal(4)}
            state = AdamState(params, lr=0.05, lr_groups={'b': 0.01}, weight_decay=1e-3)
            for _ in range(5):
                grads = {k: rng.standard_normal(p.shape) for k, p in params.items()}
                adam_step(params, grads, state)
            return params

        first, second = run(), run()
        for name in first:
            self.assertEqual(first[name].tobytes(), second[name].tobytes(), name)
