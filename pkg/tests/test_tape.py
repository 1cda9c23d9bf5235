import numpy as np
import pytest

from helpers import FD_RTOL, central_differences, relative_errors
from sfplab import numkernel as nk
from sfplab import tape as T
from sfplab.errors import DegenerateError, UsageError


def _check(build, params, floor=1e-6):
    """Compare backprop through ``build`` with central differences."""
    params = {k: np.array(v, dtype=np.float64) for k, v in params.items()}

    def value(p):
        tape = T.GradTape()
        pv = {k: tape.param(k, v) for k, v in p.items()}
        return float(build(pv).value)

    tape = T.GradTape()
    pv = {k: tape.param(k, v) for k, v in params.items()}
    analytic = T.backprop(tape, build(pv))
    numeric = central_differences(value, params)
    for name, err in relative_errors(analytic, numeric, floor).items():
        assert err.max() < FD_RTOL, (name, err.max())


def test_sum_adjoint_is_ones():
    tape = T.GradTape()
    x = tape.param("x", np.arange(6.0).reshape(2, 3))
    g = T.backprop(tape, T.tsum(x))
    np.testing.assert_array_equal(g["x"], np.ones((2, 3)))


def test_square_adjoint_is_twice_x():
    tape = T.GradTape()
    xv = np.array([1.5, -2.0, 0.25])
    x = tape.param("x", xv)
    g = T.backprop(tape, T.tsum(x * x))
    np.testing.assert_array_equal(g["x"], 2 * xv)


def test_unused_param_gets_zero_adjoint():
    tape = T.GradTape()
    x = tape.param("x", np.ones(2))
    tape.param("unused", np.ones(3))
    g = T.backprop(tape, T.tsum(x))
    assert set(g) == {"x", "unused"}
    np.testing.assert_array_equal(g["unused"], 0.0)


def test_loss_from_other_tape_rejected():
    t1, t2 = T.GradTape(), T.GradTape()
    x = t1.param("x", np.ones(2))
    with pytest.raises(UsageError):
        T.backprop(t2, T.tsum(x))


def test_cleared_tape_rejects_old_loss():
    tape = T.GradTape()
    loss = T.tsum(tape.param("x", np.ones(2)))
    tape.clear()
    with pytest.raises(UsageError):
        T.backprop(tape, loss)


def test_non_scalar_loss_rejected():
    tape = T.GradTape()
    x = tape.param("x", np.ones(2))
    with pytest.raises(UsageError):
        T.backprop(tape, x * 2.0)


def test_forward_values_match_kernel(rng):
    tape = T.GradTape()
    s = rng.normal(size=(4, 4))
    x = rng.normal(size=(3, 5))
    g = rng.normal(size=5)
    np.testing.assert_array_equal(T.masked_softmax(tape.constant(s), nk.causal_mask(4)).value,
                                  nk.masked_softmax(s, nk.causal_mask(4)))
    np.testing.assert_allclose(T.rms_norm(tape.constant(x), tape.constant(g)).value, nk.rms_norm(x, g), rtol=1e-15)
    np.testing.assert_allclose(T.gelu(tape.constant(x)).value, nk.gelu_tanh(x), rtol=1e-15)


class TestFiniteDifferences:
    def test_matmul_batched(self, rng):
        w = rng.normal(size=(4, 3))
        _check(lambda p: T.tsum(T.gelu(p["a"] @ p["w"])), {"a": rng.normal(size=(2, 5, 4)), "w": w})

    def test_attention_matmul(self, rng):
        _check(lambda p: T.tsum(T.gelu(p["q"] @ p["k"])),
               {"q": rng.normal(size=(2, 3, 4, 2)), "k": rng.normal(size=(2, 3, 2, 4))})

    def test_masked_softmax(self, rng):
        weights = rng.normal(size=(5, 5))
        _check(lambda p: T.tsum(T.masked_softmax(p["s"], nk.causal_mask(5)) * weights),
               {"s": rng.normal(size=(5, 5))})

    def test_rms_norm(self, rng):
        weights = rng.normal(size=(3, 6))
        _check(lambda p: T.tsum(T.rms_norm(p["x"], p["g"]) * weights),
               {"x": rng.normal(size=(3, 6)), "g": rng.normal(size=6)})

    def test_gelu(self, rng):
        _check(lambda p: T.tsum(T.gelu(p["x"]) * p["x"]), {"x": rng.normal(size=(4, 4)) * 2})

    def test_embedding_and_gather(self, rng):
        ids = np.array([[0, 2, 2], [1, 0, 3]])
        weights = rng.normal(size=(2, 4))
        _check(lambda p: T.tsum(T.gather(T.take_rows(p["e"], ids) + p["pos"], [0, 1], [2, 1]) * weights),
               {"e": rng.normal(size=(5, 4)), "pos": rng.normal(size=(3, 4))})

    def test_reshape_transpose(self, rng):
        weights = rng.normal(size=(3, 2, 2))
        _check(lambda p: T.tsum(T.gelu(T.transpose(T.reshape(p["x"], (2, 2, 3)), (2, 0, 1))) * weights),
               {"x": rng.normal(size=(4, 3))})

    def test_l2_normalize(self, rng):
        weights = rng.normal(size=(3, 4))
        _check(lambda p: T.tsum(T.l2_normalize(p["x"]) * weights), {"x": rng.normal(size=(3, 4))})

    def test_cross_entropy(self, rng):
        _check(lambda p: T.cross_entropy(p["z"], [2, 0, 1], [0.5, 0.25, 0.25]), {"z": rng.normal(size=(3, 4))})

    def test_sub_neg_scale(self, rng):
        _check(lambda p: T.tsum(T.scale(p["a"] - p["b"], 3.0) * (p["a"] - p["b"])),
               {"a": rng.normal(size=3), "b": rng.normal(size=3)})


def test_zero_norm_row_raises():
    tape = T.GradTape()
    with pytest.raises(DegenerateError):
        T.l2_normalize(tape.constant(np.zeros((1, 3))))
