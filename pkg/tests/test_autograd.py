"""
Finite-difference checks for the autodiff tape and the layers built on it.
"""

import numpy as np
import pytest

from HierarchicalCutSelector.exceptions import NonFiniteDetected, ShapeMismatch
from HierarchicalCutSelector.neural.autograd import (
    Tensor,
    check_finite,
    clip,
    concat,
    gradients,
    leaves,
    masked_log_softmax,
    stack,
)
from HierarchicalCutSelector.neural.layers import AdditiveAttention, Linear, Lstm, Mlp

EPS = 1e-6


def _numeric_gradients(fn, params):
    """Central differences of the scalar ``fn(leaves)`` for every entry of every parameter."""
    grads = {}
    for name, value in params.items():
        grad = np.zeros_like(value)
        for idx in np.ndindex(value.shape):
            plus = {k: v.copy() for k, v in params.items()}
            minus = {k: v.copy() for k, v in params.items()}
            plus[name][idx] += EPS
            minus[name][idx] -= EPS
            grad[idx] = (fn(leaves(plus, False)).item() - fn(leaves(minus, False)).item()) / (2 * EPS)
        grads[name] = grad
    return grads


def _assert_matches_finite_differences(fn, params):
    P = leaves(params)
    fn(P).backward()
    analytic = gradients(P)
    numeric = _numeric_gradients(fn, params)
    for name in params:
        assert analytic[name] == pytest.approx(numeric[name], rel=1e-4, abs=1e-6), name


@pytest.fixture
def rng():
    return np.random.default_rng(11)


# ---------------------------------------------------------------------------
# Elementary operations
# ---------------------------------------------------------------------------

class TestOperations:

    def test_arithmetic_chain(self, rng):
        params = {'a': rng.normal(size=3), 'b': rng.uniform(0.5, 2.0, size=3)}

        def fn(P):
            return ((P['a'] * P['b'] - P['a'] / P['b']).tanh() + (P['b'].log() * 0.5).exp()).sum()

        _assert_matches_finite_differences(fn, params)

    def test_matmul_shapes(self, rng):
        params = {'W': rng.normal(size=(3, 2)), 'x': rng.normal(size=3), 'M': rng.normal(size=(2, 3))}

        def fn(P):
            v = P['x'] @ P['W']
            return ((P['M'] @ P['W']) @ v).sigmoid().sum() + (v @ v)

        _assert_matches_finite_differences(fn, params)

    def test_indexing_concat_stack(self, rng):
        params = {'u': rng.normal(size=4), 'v': rng.normal(size=2)}

        def fn(P):
            joined = concat([P['u'][1:3], P['v']])
            rows = stack([joined, joined * 2.0])
            return (rows @ Tensor(np.arange(4.0))).sum() + P['u'][0] * P['u'][0]

        _assert_matches_finite_differences(fn, params)

    def test_masked_log_softmax(self, rng):
        params = {'z': rng.normal(size=5)}
        allowed = np.array([True, False, True, True, False])
        weights = Tensor(np.array([0.3, 0.0, -1.0, 2.0, 0.0]))

        def fn(P):
            out = masked_log_softmax(P['z'], allowed)
            return (out[np.array([0, 2, 3])] * weights[np.array([0, 2, 3])]).sum()

        _assert_matches_finite_differences(fn, params)

    def test_masked_log_softmax_normalises(self, rng):
        allowed = np.array([True, True, False, True])
        out = masked_log_softmax(Tensor(rng.normal(size=4)), allowed).value
        assert out[2] == -np.inf
        assert np.exp(out[allowed]).sum() == pytest.approx(1.0)

    def test_masked_log_softmax_needs_an_allowed_entry(self):
        with pytest.raises(ValueError):
            masked_log_softmax(Tensor(np.zeros(2)), np.array([False, False]))

    def test_clip_blocks_gradient(self):
        x = Tensor(np.array([-2.0, 0.5, 3.0]), requires_grad=True)
        clip(x, -1.0, 1.0).sum().backward()
        assert np.array_equal(x.grad, [0.0, 1.0, 0.0])

    def test_shared_node_accumulates(self):
        x = Tensor(np.array(3.0), requires_grad=True)
        (x * x + x).backward()
        assert float(x.grad) == pytest.approx(7.0)


# ---------------------------------------------------------------------------
# Errors
# ---------------------------------------------------------------------------

class TestErrors:

    def test_backward_needs_scalar(self):
        with pytest.raises(ShapeMismatch):
            Tensor(np.ones(2), requires_grad=True).backward()

    def test_matmul_mismatch(self):
        with pytest.raises(ShapeMismatch):
            Tensor(np.ones(3)) @ Tensor(np.ones((2, 2)))

    def test_broadcast_mismatch(self):
        with pytest.raises(ShapeMismatch):
            Tensor(np.ones(3)) + Tensor(np.ones(2))

    def test_check_finite(self):
        check_finite({'a': np.ones(2)}, 'ok')
        with pytest.raises(NonFiniteDetected):
            check_finite({'a': np.array([1.0, np.nan])}, 'bad')
        with pytest.raises(NonFiniteDetected):
            check_finite(Tensor(np.inf), 'bad')

    def test_unused_parameter_gets_zero_gradient(self):
        P = leaves({'used': np.ones(2), 'unused': np.ones(3)})
        P['used'].sum().backward()
        grads = gradients(P)
        assert np.array_equal(grads['unused'], np.zeros(3))


# ---------------------------------------------------------------------------
# Layers
# ---------------------------------------------------------------------------

class TestLayers:

    def test_linear_and_mlp(self, rng):
        mlp = Mlp('m', [3, 4, 2])
        params = mlp.init(rng)
        X = rng.normal(size=(5, 3))
        _assert_matches_finite_differences(lambda P: mlp(P, X).tanh().sum(), params)
        assert mlp.predict(params, X) == pytest.approx(mlp(leaves(params, False), X).value)

    def test_linear_rejects_wrong_width(self, rng):
        layer = Linear('l', 3, 2)
        with pytest.raises(ShapeMismatch):
            layer(leaves(layer.init(rng)), np.ones(4))

    def test_lstm(self, rng):
        lstm = Lstm('enc', 3, 2)
        params = lstm.init(rng)
        xs = rng.normal(size=(4, 3))

        def fn(P):
            outputs, (h, c) = lstm(P, xs)
            return (outputs[1] * 0.5).sum() + h.sum() + c.sum()

        _assert_matches_finite_differences(fn, params)

    def test_lstm_forget_bias(self, rng):
        params = Lstm('enc', 3, 2).init(rng)
        assert np.all(params['enc.b'][2:4] > 0.0)

    def test_lstm_empty_sequence(self, rng):
        lstm = Lstm('enc', 3, 2)
        outputs, (h, _) = lstm(leaves(lstm.init(rng)), np.zeros((0, 3)))
        assert outputs == []
        assert np.array_equal(h.value, np.zeros(2))

    def test_attention(self, rng):
        attention = AdditiveAttention('att', 3)
        params = attention.init(rng)
        encoded = [Tensor(rng.normal(size=3)) for _ in range(4)]
        query = Tensor(rng.normal(size=3))
        allowed = np.array([True, True, False, True])

        def fn(P):
            scores = attention(P, attention.keys(P, encoded), query)
            return masked_log_softmax(scores, allowed)[1]

        _assert_matches_finite_differences(fn, params)
