"""
Tests for the tensor substrate: forward values of every op, the backward pass
and the finite-difference checker.
"""

import math

import numpy as np
import pytest

from src.autodiff import functions as F
from src.autodiff.gradcheck import grad_check
from src.autodiff.tensor import Tape, Tensor, default_dtype, precision
from src.pipeline.errors import NumericalError, ShapeError


# =============================================================================
# Tensor
# =============================================================================

class TestTensor:
    """Immutability, finiteness and precision switching."""

    def test_payload_is_read_only(self):
        x = Tensor([1.0, 2.0])
        with pytest.raises(ValueError):
            x.data[0] = 5.0

    def test_numpy_returns_writable_copy(self):
        x = Tensor([1.0, 2.0])
        copy = x.numpy()
        copy[0] = 5.0
        assert x.data[0] == 1.0

    def test_non_finite_rejected(self):
        with pytest.raises(NumericalError):
            Tensor([1.0, np.nan])

    def test_default_is_float32(self):
        assert Tensor([1.0]).data.dtype == np.float32

    def test_precision_context(self):
        with precision(np.float64):
            assert default_dtype() == np.float64
            assert Tensor([1.0]).data.dtype == np.float64
        assert default_dtype() == np.float32

    def test_unsupported_precision(self):
        with pytest.raises(ShapeError):
            with precision(np.float16):
                pass

    def test_item_needs_single_element(self):
        with pytest.raises(ShapeError):
            Tensor([1.0, 2.0]).item()


# =============================================================================
# Elementwise
# =============================================================================

class TestElementwise:
    def test_add_identity(self):
        np.testing.assert_array_equal(F.add(Tensor([1, 2]), Tensor([0, 0])).data, [1, 2])

    def test_mul(self):
        np.testing.assert_array_equal(F.mul(Tensor([2, 3]), Tensor([4, 5])).data, [8, 15])

    def test_scale_by_zero(self):
        np.testing.assert_array_equal(F.scale(Tensor([1, -1]), 0).data, [0, 0])

    def test_operator_sugar(self):
        a, b = Tensor([1.0, 2.0]), Tensor([3.0, 5.0])
        np.testing.assert_array_equal((a - b).data, [-2, -3])
        np.testing.assert_array_equal((2 * a).data, [2, 4])
        np.testing.assert_array_equal((-a).data, [-1, -2])

    def test_shape_mismatch_names_both_shapes(self):
        with pytest.raises(ShapeError, match=r"\(2,\).*\(3,\)"):
            F.add(Tensor([1, 2]), Tensor([1, 2, 3]))

    def test_unknown_kind(self):
        with pytest.raises(ShapeError):
            F.elementwise(Tensor([1]), Tensor([1]), "div")


# =============================================================================
# Products and layout
# =============================================================================

class TestMatmul:
    def test_identity(self):
        a = Tensor([[1, 2], [3, 4]])
        np.testing.assert_array_equal(F.matmul(a, Tensor(np.eye(2))).data, [[1, 2], [3, 4]])

    def test_row_times_column(self):
        np.testing.assert_array_equal(F.matmul(Tensor([[1, 2]]), Tensor([[3], [4]])).data, [[11]])

    def test_zero(self):
        out = F.matmul(Tensor([[1, 2], [3, 4]]), Tensor(np.zeros((2, 3))))
        np.testing.assert_array_equal(out.data, np.zeros((2, 3)))

    def test_matches_loop_oracle(self, rng):
        a, b = rng.standard_normal((3, 4)), rng.standard_normal((4, 2))
        expected = np.zeros((3, 2))
        for i in range(3):
            for j in range(2):
                for k in range(4):
                    expected[i, j] += a[i, k] * b[k, j]
        np.testing.assert_allclose(F.matmul(Tensor(a), Tensor(b)).data, expected, rtol=1e-5, atol=1e-5)

    def test_batched_shared_right_operand(self, rng):
        a, b = rng.standard_normal((2, 3, 4)), rng.standard_normal((4, 5))
        assert F.matmul(Tensor(a), Tensor(b)).shape == (2, 3, 5)

    def test_inner_dimension_mismatch(self):
        with pytest.raises(ShapeError):
            F.matmul(Tensor(np.ones((2, 3))), Tensor(np.ones((2, 3))))


class TestLayout:
    def test_transpose_and_reshape(self):
        x = Tensor(np.arange(6.0).reshape(2, 3))
        assert F.transpose(x, (1, 0)).shape == (3, 2)
        assert F.reshape(x, (3, 2)).shape == (3, 2)

    def test_broadcast_to(self):
        out = F.broadcast_to(Tensor([[1.0, 2.0]]), (3, 2))
        np.testing.assert_array_equal(out.data, [[1, 2]] * 3)

    def test_embedding_rows(self):
        table = Tensor([[0.0, 0.0], [1.0, 1.0], [2.0, 2.0]])
        np.testing.assert_array_equal(F.embedding(table, np.array([2, 0])).data, [[2, 2], [0, 0]])


# =============================================================================
# Row-wise maps and activations
# =============================================================================

class TestRowMaps:
    def test_normalize_unit_row_unchanged(self):
        np.testing.assert_allclose(F.row_l2_normalize(Tensor([[1.0, 0.0]])).data, [[1, 0]])

    def test_normalize_three_four(self):
        np.testing.assert_allclose(F.row_l2_normalize(Tensor([[3.0, 4.0]])).data, [[0.6, 0.8]], rtol=1e-6)

    def test_normalize_zero_row_passes_through(self):
        np.testing.assert_array_equal(F.row_l2_normalize(Tensor([[0.0, 0.0]])).data, [[0, 0]])

    def test_softmax_symmetric(self):
        np.testing.assert_allclose(F.row_softmax(Tensor([[0.0, 0.0]]), 1.0).data, [[0.5, 0.5]])

    def test_softmax_one_zero(self):
        np.testing.assert_allclose(F.row_softmax(Tensor([[1.0, 0.0]]), 1.0).data, [[0.7311, 0.2689]], atol=1e-4)

    def test_softmax_rows_sum_to_one(self, rng):
        p = F.row_softmax(Tensor(rng.standard_normal((4, 5))), 0.3).data
        np.testing.assert_allclose(p.sum(axis=-1), 1.0, rtol=1e-6)

    def test_softmax_rejects_nonpositive_temperature(self):
        with pytest.raises(ShapeError):
            F.row_softmax(Tensor([[1.0, 0.0]]), 0.0)


class TestActivations:
    @pytest.mark.parametrize("kind", ["silu", "gelu", "tanh"])
    def test_zero_is_fixed_point(self, kind):
        assert F.activation(Tensor([0.0]), kind).data[0] == 0.0

    def test_silu_one(self):
        assert F.silu(Tensor([1.0])).data[0] == pytest.approx(0.7311, abs=1e-4)

    def test_unknown_kind(self):
        with pytest.raises(ShapeError):
            F.activation(Tensor([0.0]), "relu")


class TestLayerNorm:
    def test_constant_row_gives_zero(self):
        out = F.layer_norm(Tensor([[3.0, 3.0, 3.0]]), Tensor(np.ones(3)), Tensor(np.zeros(3)))
        np.testing.assert_allclose(out.data, 0.0, atol=1e-6)

    def test_plus_minus_one(self):
        out = F.layer_norm(Tensor([[1.0, -1.0]]), Tensor(np.ones(2)), Tensor(np.zeros(2)))
        np.testing.assert_allclose(out.data, [[1.0, -1.0]], atol=1e-5)

    def test_zero_gain_gives_bias(self, rng):
        bias = np.array([0.5, -2.0, 1.0])
        out = F.layer_norm(Tensor(rng.standard_normal((4, 3))), Tensor(np.zeros(3)), Tensor(bias))
        np.testing.assert_allclose(out.data, np.broadcast_to(bias, (4, 3)), rtol=1e-6)

    def test_gain_shape_checked(self):
        with pytest.raises(ShapeError):
            F.layer_norm(Tensor(np.ones((2, 3))), Tensor(np.ones(2)), Tensor(np.zeros(3)))


# =============================================================================
# Reductions and masking
# =============================================================================

class TestReduce:
    def test_mean(self):
        assert F.mean(Tensor([2.0, 4.0])).item() == 3.0

    def test_sum_of_zeros(self):
        assert F.sum(Tensor(np.zeros(5))).item() == 0.0

    def test_mean_over_singleton_axis(self, rng):
        x = rng.standard_normal((3, 1, 4))
        np.testing.assert_allclose(F.mean(Tensor(x), axes=1).data, x[:, 0, :], rtol=1e-6)

    def test_invalid_axis(self):
        with pytest.raises(ShapeError):
            F.sum(Tensor(np.ones((2, 2))), axes=2)


class TestOffDiagonal:
    def test_two_by_two(self):
        out = F.extract_offdiagonal(Tensor([[1.0, 7.0], [9.0, 1.0]]))
        np.testing.assert_array_equal(out.data, [[7], [9]])

    def test_identity_gives_zeros(self):
        np.testing.assert_array_equal(F.extract_offdiagonal(Tensor(np.eye(3))).data, np.zeros((3, 2)))

    def test_index_enumeration(self):
        s = np.array([[10 * i + j for j in range(3)] for i in range(3)], dtype=float)
        out = F.extract_offdiagonal(Tensor(s))
        np.testing.assert_array_equal(out.data, [[1, 2], [10, 12], [20, 21]])

    def test_rejects_non_square_and_single_token(self):
        with pytest.raises(ShapeError):
            F.extract_offdiagonal(Tensor(np.ones((2, 3))))
        with pytest.raises(ShapeError):
            F.extract_offdiagonal(Tensor(np.ones((1, 1))))


# =============================================================================
# Backward
# =============================================================================

class TestBackward:
    def test_leaf_root(self):
        tape = Tape()
        x = tape.watch(np.array(3.0))
        assert tape.backward(x).of(x) == 1.0

    def test_sum_of_squares(self):
        tape = Tape()
        x = tape.watch(np.array([1.0, 2.0]))
        grads = tape.backward(F.sum(F.mul(x, x)))
        np.testing.assert_allclose(grads.of(x), [2.0, 4.0])

    def test_detached_leaf_gets_zero(self):
        tape = Tape()
        x = tape.watch(np.array([1.0, 2.0]))
        y = tape.watch(np.array([5.0, 6.0]))
        root = F.sum(F.mul(x, y.detach()))
        grads = tape.backward(root)
        np.testing.assert_array_equal(grads.of(y), [0.0, 0.0])
        np.testing.assert_allclose(grads.of(x), [5.0, 6.0])

    def test_fan_out_accumulates(self):
        tape = Tape()
        x = tape.watch(np.array([1.0, -2.0]))
        grads = tape.backward(F.sum(F.add(x, F.scale(x, 3.0))))
        np.testing.assert_allclose(grads.of(x), [4.0, 4.0])

    def test_non_scalar_root(self):
        tape = Tape()
        x = tape.watch(np.array([1.0, 2.0]))
        with pytest.raises(ShapeError):
            tape.backward(F.mul(x, x))

    def test_mixing_tapes_rejected(self):
        a = Tape().watch(np.array([1.0]))
        b = Tape().watch(np.array([2.0]))
        with pytest.raises(ShapeError):
            F.add(a, b)

    def test_constants_are_not_recorded(self):
        assert not F.add(Tensor([1.0]), Tensor([2.0])).recorded


# =============================================================================
# Finite-difference checker
# =============================================================================

def _wrong_square(x):
    """x·x forward with a deliberately wrong backward (x instead of 2x)."""
    value = x.data * x.data
    return x.tape.record("wrong_square", value, (x,), lambda g: (g * x.data,))


class TestGradCheck:
    def test_linear_function_is_exact(self, rng):
        report = grad_check(lambda xs: F.sum(xs[0]), [rng.standard_normal((3, 2))])
        assert report.passed
        assert report.max_rel_error < 1e-9

    def test_struc_mse_on_random_features(self, rng):
        from src.align.losses import gram_offdiag, normalize, struc_mse_loss, student_features, teacher_features

        teacher = rng.standard_normal((3, 2))

        def fn(xs):
            z_t = normalize(teacher_features(Tensor(teacher)))
            z_s = normalize(student_features(xs[0]))
            return struc_mse_loss(gram_offdiag(z_t), gram_offdiag(z_s))

        report = grad_check(fn, [rng.standard_normal((3, 2))], step=1e-3, tol=1e-3, op_name="struc_mse")
        assert report.passed, report

    def test_wrong_gradient_fails(self, rng):
        def fn(xs):
            x = xs[0]
            if x.recorded:
                return F.sum(_wrong_square(x))
            return F.sum(F.mul(x, x))

        report = grad_check(fn, [rng.uniform(0.5, 1.5, size=4)], op_name="wrong")
        assert not report.passed

    def test_non_finite_evaluation_reports_failure(self):
        report = grad_check(lambda xs: F.sum(F.scale(xs[0], 1e308)), [np.array([1e10])])
        assert not report.passed
        assert math.isinf(report.max_rel_error)
        assert report.diagnostic

    def test_runs_in_float64(self):
        seen = []

        def fn(xs):
            seen.append(xs[0].data.dtype)
            return F.sum(xs[0])

        grad_check(fn, [np.ones(2, dtype=np.float32)])
        assert set(seen) == {np.dtype(np.float64)}
