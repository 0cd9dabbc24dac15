"""Tests for the reverse-mode tape."""

import math
from collections.abc import Callable

import numpy as np
import pytest

from idg_lab.autodiff import tensor as T
from idg_lab.autodiff.tensor import Tape, Tensor
from idg_lab.utils.error_handler import FullyMaskedSliceError, NonScalarOutputError, ShapeMismatchError

Builder = Callable[[Tape, dict[str, Tensor]], Tensor]


def value_and_grads(build: Builder, params: dict[str, np.ndarray]) -> tuple[float, dict[str, np.ndarray]]:
    tape = Tape()
    leaves = {k: tape.parameter(k, v) for k, v in params.items()}
    out = build(tape, leaves)
    return out.item(), tape.backward(out)


def numeric_grads(build: Builder, params: dict[str, np.ndarray], h: float = 1e-6) -> dict[str, np.ndarray]:
    grads = {}
    for name, array in params.items():
        g = np.zeros_like(array)
        for i in np.ndindex(array.shape):
            up = {k: v.copy() for k, v in params.items()}
            down = {k: v.copy() for k, v in params.items()}
            up[name][i] += h
            down[name][i] -= h
            g[i] = (value_and_grads(build, up)[0] - value_and_grads(build, down)[0]) / (2 * h)
        grads[name] = g
    return grads


def assert_gradients_match(build: Builder, params: dict[str, np.ndarray], rtol: float = 1e-5) -> None:
    _, analytic = value_and_grads(build, params)
    numeric = numeric_grads(build, params)
    for name in params:
        np.testing.assert_allclose(analytic[name], numeric[name], rtol=rtol, atol=1e-7)


@pytest.fixture
def rng():
    return np.random.default_rng(0)


class TestTape:
    def test_square_derivative(self):
        value, grads = value_and_grads(lambda t, p: p["x"] * p["x"], {"x": np.array(3.0)})
        assert value == 9.0
        assert grads["x"] == pytest.approx(6.0)

    def test_non_scalar_output(self):
        tape = Tape()
        x = tape.parameter("x", np.ones(3))
        with pytest.raises(NonScalarOutputError):
            tape.backward(x * 2.0)

    def test_unused_parameter_gets_zero_gradient(self):
        _, grads = value_and_grads(lambda t, p: T.sum(p["a"]), {"a": np.ones(2), "b": np.ones(3)})
        np.testing.assert_array_equal(grads["b"], np.zeros(3))

    def test_repeated_parameter_name_returns_same_leaf(self):
        tape = Tape()
        first = tape.parameter("w", np.ones(2))
        assert tape.parameter("w", np.zeros(2)) is first

    def test_shared_subexpression_accumulates(self):
        def build(tape, p):
            y = p["x"] * 2.0
            return T.sum(y * y + y)

        assert_gradients_match(build, {"x": np.array([0.3, -1.2])})

    def test_backward_can_run_twice(self):
        tape = Tape()
        x = tape.parameter("x", np.array(2.0))
        y = x * x
        first = tape.backward(y)["x"].copy()
        second = tape.backward(y)["x"]
        np.testing.assert_array_equal(first, second)

    def test_constants_get_no_gradient(self):
        tape = Tape()
        c = tape.constant(np.array([1.0, 2.0]))
        x = tape.parameter("x", np.array([0.5, 0.5]))
        tape.backward(T.sum(T.mul(c, x)))
        assert c.grad is None


class TestBroadcasting:
    def test_bias_over_leading_axis(self, rng):
        def build(tape, p):
            return T.sum(T.tanh(p["x"] + p["b"]))

        assert_gradients_match(build, {"x": rng.normal(size=(4, 3)), "b": rng.normal(size=3)})

    def test_scalar_operand(self, rng):
        assert_gradients_match(lambda t, p: T.sum(p["x"] * p["s"]), {"x": rng.normal(size=(2, 2)), "s": np.array(1.5)})

    def test_incompatible_shapes(self):
        tape = Tape()
        with pytest.raises(ShapeMismatchError):
            tape.parameter("a", np.ones((2, 3))) + tape.parameter("b", np.ones(2))

    def test_matmul_shapes(self):
        tape = Tape()
        with pytest.raises(ShapeMismatchError):
            tape.parameter("a", np.ones((2, 3))) @ tape.parameter("b", np.ones((2, 3)))


class TestOps:
    def test_logsumexp_value(self):
        tape = Tape()
        out = T.logsumexp(tape.constant(np.zeros(2)))
        assert out.item() == pytest.approx(math.log(2))

    def test_masked_logsumexp_single_entry(self):
        tape = Tape()
        a = tape.constant(np.array([[3.0, 100.0, -2.0]]))
        out = T.masked_logsumexp(a, np.array([[True, False, False]]), axis=1)
        np.testing.assert_allclose(out.data, [3.0])

    def test_masked_entry_does_not_underflow_the_rest(self):
        tape = Tape()
        a = tape.constant(np.array([[1000.0, 0.0, 0.0]]))
        out = T.masked_logsumexp(a, np.array([[False, True, True]]), axis=1)
        np.testing.assert_allclose(out.data, [math.log(2)])

    def test_fully_masked_slice(self):
        tape = Tape()
        with pytest.raises(FullyMaskedSliceError):
            T.masked_logsumexp(tape.constant(np.zeros((2, 2))), np.array([[True, False], [False, False]]))

    def test_mask_shape(self):
        tape = Tape()
        with pytest.raises(ShapeMismatchError):
            T.masked_logsumexp(tape.constant(np.zeros((2, 2))), np.ones(2, dtype=bool))

    def test_gaussian_kl_of_identical_gaussians(self, rng):
        tape = Tape()
        mu, logvar = tape.constant(rng.normal(size=(3, 2))), tape.constant(rng.normal(size=(3, 2)))
        np.testing.assert_allclose(T.gaussian_kl(mu, logvar, mu, logvar).data, np.zeros(3), atol=1e-12)

    def test_gaussian_kl_closed_form(self):
        tape = Tape()
        mu = tape.constant(np.array([[1.0, -2.0]]))
        zero = tape.constant(np.zeros(2))
        out = T.gaussian_kl(mu, tape.constant(np.zeros((1, 2))), zero, zero)
        np.testing.assert_allclose(out.data, [0.5 * (1.0 + 4.0)])

    def test_softmax_cross_entropy_value(self):
        tape = Tape()
        logits = tape.constant(np.array([[0.0, 0.0], [10.0, 0.0]]))
        out = T.softmax_cross_entropy(logits, np.array([1, 0]))
        np.testing.assert_allclose(out.data, [math.log(2), math.log1p(math.exp(-10.0))])

    def test_softmax_cross_entropy_label_shape(self):
        tape = Tape()
        with pytest.raises(ShapeMismatchError):
            T.softmax_cross_entropy(tape.constant(np.zeros((2, 3))), np.array([0]))

    def test_concat_and_columns_invert(self, rng):
        tape = Tape()
        a = tape.constant(rng.normal(size=(2, 3)))
        b = tape.constant(rng.normal(size=(2, 1)))
        joined = T.concat([a, b], axis=1)
        np.testing.assert_array_equal(T.columns(joined, 0, 3).data, a.data)

    def test_columns_range(self):
        tape = Tape()
        with pytest.raises(ShapeMismatchError):
            T.columns(tape.constant(np.zeros((2, 3))), 2, 5)


class TestGradients:
    @pytest.mark.parametrize("op", [T.exp, T.tanh, T.sigmoid], ids=["exp", "tanh", "sigmoid"])
    def test_unary(self, op, rng):
        assert_gradients_match(lambda t, p: T.sum(op(p["x"])), {"x": rng.normal(size=(3, 2))})

    def test_log(self, rng):
        assert_gradients_match(lambda t, p: T.sum(T.log(p["x"])), {"x": rng.uniform(0.5, 2.0, size=4)})

    def test_relu_away_from_kink(self):
        x = np.array([-1.0, -0.3, 0.4, 2.0])
        assert_gradients_match(lambda t, p: T.sum(T.relu(p["x"]) * T.relu(p["x"])), {"x": x})

    def test_matmul_and_transpose(self, rng):
        def build(tape, p):
            return T.sum(T.tanh(p["a"] @ T.transpose(p["b"])))

        assert_gradients_match(build, {"a": rng.normal(size=(3, 4)), "b": rng.normal(size=(2, 4))})

    @pytest.mark.parametrize("axis", [0, 1, None])
    def test_mean_and_sum(self, axis, rng):
        def build(tape, p):
            m = T.mean(T.exp(p["x"]), axis=axis)
            return T.sum(m * m) if m.ndim else m * m

        assert_gradients_match(build, {"x": rng.normal(size=(3, 2))})

    def test_logsumexp(self, rng):
        assert_gradients_match(lambda t, p: T.sum(T.logsumexp(p["x"], axis=1)), {"x": rng.normal(size=(3, 4))})

    def test_masked_logsumexp(self, rng):
        mask = np.array([[True, False, True], [False, True, True]])

        def build(tape, p):
            return T.sum(T.masked_logsumexp(p["x"], mask, axis=1))

        x = rng.normal(size=(2, 3))
        assert_gradients_match(build, {"x": x})
        _, grads = value_and_grads(build, {"x": x})
        assert grads["x"][0, 1] == 0.0

    def test_softmax_cross_entropy(self, rng):
        labels = np.array([0, 2, 1])

        def build(tape, p):
            return T.mean(T.softmax_cross_entropy(p["x"], labels))

        assert_gradients_match(build, {"x": rng.normal(size=(3, 3))})

    def test_gather_with_repeats(self, rng):
        rows = np.array([0, 2, 0])
        assert_gradients_match(lambda t, p: T.sum(T.exp(T.gather(p["x"], rows))), {"x": rng.normal(size=(3, 2))})

    def test_concat_columns(self, rng):
        def build(tape, p):
            joined = T.concat([p["a"], p["b"]], axis=1)
            return T.sum(T.tanh(T.columns(joined, 1, 3)))

        assert_gradients_match(build, {"a": rng.normal(size=(2, 2)), "b": rng.normal(size=(2, 2))})

    def test_gaussian_kl(self, rng):
        def build(tape, p):
            return T.sum(T.gaussian_kl(p["mq"], p["lq"], p["mp"], p["lp"]))

        params = {
            "mq": rng.normal(size=(3, 2)),
            "lq": rng.normal(size=(3, 2)),
            "mp": rng.normal(size=2),
            "lp": rng.normal(size=2),
        }
        assert_gradients_match(build, params)

    def test_reverse_subtraction_and_addition(self, rng):
        def build(tape, p):
            return T.sum((1.0 - p["x"]) * (2.0 + p["x"]))

        assert_gradients_match(build, {"x": rng.normal(size=3)})
