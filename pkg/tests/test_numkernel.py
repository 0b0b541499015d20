import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pointmeta.errors import (
    DimensionError,
    MissingWeightError,
    NumericError,
    ParameterError,
)
from pointmeta.numkernel import (
    MlpSpec,
    apply_mlp,
    as_tensor,
    concat,
    matmul,
    reduce,
    softmax_axis,
)

from conftest import identity_mlp_weights
from oracles import matmul_triple_loop, softmax_naive


class TestMatmul:
    def test_identity(self):
        out = matmul([[1, 0], [0, 1]], [[3], [4]])
        assert np.array_equal(out, [[3], [4]])

    def test_small_product(self):
        assert np.array_equal(matmul([[1, 2]], [[3], [4]]), [[11]])

    def test_matches_triple_loop_oracle(self, rng):
        a = rng.random((5, 4), dtype=np.float32)
        b = rng.random((4, 3), dtype=np.float32)
        assert np.max(np.abs(matmul(a, b) - matmul_triple_loop(a, b))) < 1e-6

    def test_shape_mismatch_names_both_shapes(self):
        with pytest.raises(DimensionError, match=r"\(2, 3\).*\(2, 2\)"):
            matmul(np.ones((2, 3)), np.ones((2, 2)))

    def test_associativity_on_random_chains(self, rng):
        for _ in range(10):
            a, b, c = (rng.normal(size=(8, 8)).astype(np.float32) for _ in range(3))
            lhs = matmul(matmul(a, b), c)
            rhs = matmul(a, matmul(b, c))
            assert np.max(np.abs(lhs - rhs)) < 1e-4


class TestApplyMlp:
    def test_identity_layer_is_exact_identity(self, rng):
        spec = MlpSpec((6, 6), activation="none")
        x = rng.normal(size=(9, 6)).astype(np.float32)
        assert np.array_equal(apply_mlp(x, spec, identity_mlp_weights(6)), x)

    def test_relu_clamps_negative(self):
        spec = MlpSpec((1, 1), with_norm=False)
        w = {"l0.weight": np.array([[-1.0]], np.float32), "l0.bias": np.zeros(1, np.float32)}
        assert apply_mlp(np.array([[2.0]], np.float32), spec, w)[0, 0] == 0.0

    def test_two_layer_matches_manual_composition(self, rng):
        spec = MlpSpec((4, 7, 3), with_norm=False)
        w = {
            "l0.weight": rng.normal(size=(4, 7)).astype(np.float32),
            "l0.bias": rng.normal(size=7).astype(np.float32),
            "l1.weight": rng.normal(size=(7, 3)).astype(np.float32),
            "l1.bias": rng.normal(size=3).astype(np.float32),
        }
        x = rng.normal(size=(5, 4)).astype(np.float32)
        h = np.maximum(x.astype(np.float64) @ w["l0.weight"] + w["l0.bias"], 0)
        ref = np.maximum(h @ w["l1.weight"] + w["l1.bias"], 0)
        assert np.max(np.abs(apply_mlp(x, spec, w) - ref)) < 1e-6

    def test_final_activation_off_keeps_sign(self, rng):
        spec = MlpSpec((3, 3), final_activation=False)
        w = identity_mlp_weights(3)
        x = np.array([[-1.0, 0.5, -2.0]], np.float32)
        assert np.array_equal(apply_mlp(x, spec, w), x)

    def test_missing_weight_named(self):
        spec = MlpSpec((2, 2), with_norm=False)
        with pytest.raises(MissingWeightError, match="l0.weight"):
            apply_mlp(np.ones((1, 2), np.float32), spec, {})

    def test_input_dim_mismatch(self):
        spec = MlpSpec((4, 2))
        with pytest.raises(DimensionError):
            apply_mlp(np.ones((3, 3), np.float32), spec, identity_mlp_weights(4))

    def test_leading_dims_are_batch_like(self, rng):
        spec = MlpSpec((4, 4), activation="none")
        w = identity_mlp_weights(4)
        x = rng.normal(size=(2, 5, 3, 4)).astype(np.float32)
        assert np.array_equal(apply_mlp(x, spec, w), x)

    def test_spec_validation(self):
        with pytest.raises(ParameterError):
            MlpSpec((4,))
        with pytest.raises(ParameterError):
            MlpSpec((4, 0))
        with pytest.raises(ParameterError):
            MlpSpec((4, 4), activation="gelu")

    def test_param_count_closed_form(self):
        assert MlpSpec((32, 64)).param_count() == 32 * 64 + 64 + 128
        assert MlpSpec((32, 128, 32)).param_count() == (
            32 * 128 + 128 + 256 + 128 * 32 + 32 + 64
        )


class TestSoftmax:
    def test_uniform_input(self):
        out = softmax_axis(np.array([1.0, 1.0, 1.0], np.float32), 0, 1.0)
        assert np.allclose(out, 1 / 3, atol=1e-7)

    def test_limit_behavior(self):
        out = softmax_axis(np.array([0.0, 10.0], np.float32), 0, 1e-4)
        assert out[0] < 1e-8 and abs(out[1] - 1) < 1e-6

    def test_matches_naive_oracle(self, rng):
        x = rng.normal(size=32).astype(np.float32)
        out = softmax_axis(x, 0, 0.7)
        assert abs(out.sum() - 1) < 1e-6
        assert np.max(np.abs(out - softmax_naive(x, 0, 0.7))) < 1e-6

    def test_non_positive_temperature(self):
        with pytest.raises(ParameterError):
            softmax_axis(np.ones(3, np.float32), 0, 0.0)

    @settings(max_examples=60, deadline=None)
    @given(
        st.lists(st.floats(-50, 50, width=32), min_size=2, max_size=24),
        st.floats(0.05, 5.0),
    )
    def test_sums_to_one_property(self, values, temperature):
        out = softmax_axis(np.array(values, np.float32), 0, temperature)
        assert abs(out.sum() - 1) < 1e-6

    def test_weighted_sum_approaches_max(self, rng):
        # unique per-slice max with gap >= 0.1: softmax-weighted average
        # converges to the max as the temperature goes to 0
        x = rng.normal(size=(64, 16)).astype(np.float32)
        x[np.arange(64), rng.integers(0, 16, 64)] += 1.0
        w = softmax_axis(x, 1, 1e-4)
        approx = (w * x).sum(axis=1)
        assert np.max(np.abs(approx - x.max(axis=1))) <= 1e-4

    def test_other_axes_independent(self, rng):
        x = rng.normal(size=(4, 6)).astype(np.float32)
        full = softmax_axis(x, 1)
        rowwise = np.stack([softmax_axis(x[i], 0) for i in range(4)])
        assert np.max(np.abs(full - rowwise)) < 1e-7


class TestReduce:
    def test_max_with_argmax(self):
        val, arg = reduce(np.array([3.0, -1.0, 7.0], np.float32), 0, "max", return_argmax=True)
        assert val == 7.0 and arg == 2

    def test_mean(self):
        assert reduce(np.array([2.0, 4.0], np.float32), 0, "mean") == 3.0

    def test_sum_matches_sequential_oracle(self, rng):
        x = rng.normal(size=32).astype(np.float32)
        seq = 0.0
        for v in x:
            seq += float(v)
        assert abs(reduce(x, 0, "sum") - seq) < 1e-5

    def test_empty_axis_rejected(self):
        with pytest.raises(ParameterError):
            reduce(np.zeros((3, 0), np.float32), 1, "max")

    @settings(max_examples=50, deadline=None)
    @given(st.lists(st.floats(-100, 100, width=32), min_size=1, max_size=16), st.randoms())
    def test_max_permutation_invariant_property(self, values, pyrng):
        x = np.array(values, np.float32)
        perm = list(range(len(values)))
        pyrng.shuffle(perm)
        assert reduce(x, 0, "max") == reduce(x[perm], 0, "max")


class TestConcat:
    def test_single_part(self, rng):
        a = rng.normal(size=(3, 2)).astype(np.float32)
        assert np.array_equal(concat([a], 0), a)

    def test_two_scalars_rows(self):
        out = concat([np.array([1.0], np.float32), np.array([2.0], np.float32)], 0)
        assert np.array_equal(out, [1.0, 2.0])

    def test_slice_round_trip(self, rng):
        a = rng.normal(size=(4, 5, 3)).astype(np.float32)
        b = rng.normal(size=(4, 5, 2)).astype(np.float32)
        out = concat([a, b], -1)
        assert out.shape == (4, 5, 5)
        assert np.array_equal(out[..., :3], a)
        assert np.array_equal(out[..., 3:], b)

    def test_off_axis_disagreement(self):
        with pytest.raises(DimensionError):
            concat([np.ones((2, 3), np.float32), np.ones((3, 3), np.float32)], 1)


class TestFiniteness:
    def test_as_tensor_rejects_nan(self):
        with pytest.raises(NumericError):
            as_tensor([1.0, np.nan])

    @pytest.mark.filterwarnings("ignore:overflow encountered")
    def test_overflow_detected(self):
        spec = MlpSpec((1, 1), with_norm=False, activation="none")
        w = {
            "l0.weight": np.array([[3e38]], np.float32),
            "l0.bias": np.zeros(1, np.float32),
        }
        with pytest.raises(NumericError):
            apply_mlp(np.array([[3e38]], np.float32), spec, w)
