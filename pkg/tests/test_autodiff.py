"""
Tests for the autodiff engine: primitives, reverse pass and numerical guards
"""
import numpy as np
import pytest

from src.autodiff import (
    ComputationRecord,
    Tensor,
    avg_pool1d,
    backward,
    clamp,
    concat,
    conv1d,
    elementwise,
    exp,
    grad,
    log,
    matmul,
    relu,
    sign,
    softmax_cross_entropy,
    tanh,
    upsample_nearest1d,
)
from src.errors import ContractError, DimensionError, LabelError, NumericalError


class TestForward:
    """Primitive outputs on hand-computed inputs"""

    def test_matmul_small(self):
        out = matmul([[1.0, 2.0]], [[3.0], [4.0]])
        assert out.data.tolist() == [[11.0]]

    def test_matmul_identity(self):
        a = np.arange(6.0).reshape(2, 3)
        assert np.array_equal(matmul(a, np.eye(3)).data, a)

    def test_matmul_shape_mismatch(self):
        with pytest.raises(DimensionError):
            matmul(np.ones((2, 3)), np.ones((2, 3)))

    def test_conv1d_unit_kernel(self):
        x = Tensor([[[1.0, 2.0, 3.0]]])
        out = conv1d(x, Tensor([[[1.0]]]))
        assert out.data.tolist() == [[[1.0, 2.0, 3.0]]]

    def test_conv1d_pair_kernel(self):
        x = Tensor([[[1.0, 2.0, 3.0]]])
        out = conv1d(x, Tensor([[[1.0, 1.0]]]))
        assert out.data.tolist() == [[[3.0, 5.0]]]

    def test_conv1d_stride_and_padding_length(self):
        x = Tensor(np.ones((2, 3, 9)))
        out = conv1d(x, Tensor(np.ones((4, 3, 3))), stride=2, padding=1)
        assert out.shape == (2, 4, 5)

    def test_conv1d_kernel_wider_than_input(self):
        with pytest.raises(DimensionError):
            conv1d(Tensor(np.ones((1, 1, 2))), Tensor(np.ones((1, 1, 5))), padding=1)

    def test_conv1d_channel_mismatch(self):
        with pytest.raises(DimensionError):
            conv1d(Tensor(np.ones((1, 2, 6))), Tensor(np.ones((1, 3, 3))))

    def test_elementwise_dispatch(self):
        x = np.array([-2.0, 0.0, 0.5, 2.0])
        assert elementwise("relu", x).data.tolist() == [0.0, 0.0, 0.5, 2.0]
        assert elementwise("sign", x).data.tolist() == [-1.0, 0.0, 1.0, 1.0]
        assert elementwise("clamp", x, lo=-1.0, hi=1.0).data.tolist() == [-1.0, 0.0, 0.5, 1.0]
        assert elementwise("add", x, x).data.tolist() == [-4.0, 0.0, 1.0, 4.0]

    def test_elementwise_unknown_op(self):
        with pytest.raises(ContractError):
            elementwise("cosh", [1.0])

    def test_log_of_non_positive(self):
        with pytest.raises(NumericalError):
            log(Tensor([1.0, 0.0]))

    def test_overflow_is_reported(self):
        with pytest.raises(NumericalError):
            exp(Tensor([1000.0]))

    def test_division_by_zero(self):
        with pytest.raises(NumericalError):
            Tensor([1.0]) / Tensor([0.0])

    def test_upsample_edge_extension(self):
        x = Tensor([[[1.0, 2.0, 3.0]]])
        out = upsample_nearest1d(x, 7)
        assert out.data.tolist() == [[[1.0, 1.0, 2.0, 2.0, 3.0, 3.0, 3.0]]]

    def test_avg_pool_drops_odd_tail(self):
        out = avg_pool1d(Tensor([[[1.0, 3.0, 5.0, 7.0, 100.0]]]))
        assert out.data.tolist() == [[[2.0, 6.0]]]

    def test_broadcast_rules(self):
        assert (Tensor(np.ones((2, 3))) + Tensor(np.ones(3))).shape == (2, 3)
        assert (Tensor(np.ones((2, 3))) * 2.0).shape == (2, 3)
        with pytest.raises(DimensionError):
            Tensor(np.ones((2, 3))) + Tensor(np.ones(2))


class TestCrossEntropy:

    def test_uniform_logits(self):
        loss = softmax_cross_entropy(Tensor(np.zeros((3, 4))), [0, 1, 3])
        assert loss.item() == pytest.approx(np.log(4.0), abs=1e-12)

    def test_saturated_logits_stay_finite(self):
        loss = softmax_cross_entropy(Tensor([[1000.0, 0.0]]), [0])
        assert abs(loss.item()) < 1e-12

    def test_matches_direct_formula(self):
        rng = np.random.default_rng(3)
        z = rng.normal(size=(5, 3))
        y = np.array([0, 2, 1, 1, 0])
        direct = np.mean(np.log(np.exp(z).sum(axis=1)) - z[np.arange(5), y])
        assert softmax_cross_entropy(Tensor(z), y).item() == pytest.approx(direct, abs=1e-10)

    def test_label_out_of_range(self):
        with pytest.raises(LabelError):
            softmax_cross_entropy(Tensor(np.zeros((2, 3))), [0, 3])

    def test_label_count_mismatch(self):
        with pytest.raises(DimensionError):
            softmax_cross_entropy(Tensor(np.zeros((2, 3))), [0])


class TestBackward:

    def test_sum_gradient_is_ones(self):
        x = Tensor([1.0, 2.0, 3.0], requires_grad=True)
        backward(x.sum())
        assert x.grad.tolist() == [1.0, 1.0, 1.0]

    def test_square_gradient(self):
        x = Tensor([1.0, 2.0, 3.0], requires_grad=True)
        backward((x * x).sum())
        assert x.grad.tolist() == [2.0, 4.0, 6.0]

    def test_gradients_accumulate(self):
        x = Tensor([1.0, 2.0], requires_grad=True)
        backward(x.sum())
        backward(x.sum())
        assert x.grad.tolist() == [2.0, 2.0]

    def test_non_scalar_root(self):
        x = Tensor([1.0, 2.0], requires_grad=True)
        with pytest.raises(ContractError):
            backward(x * 2.0)

    def test_clamp_gradient_outside_interval(self):
        x = Tensor([-2.0, 0.5, 2.0], requires_grad=True)
        backward(clamp(x, -1.0, 1.0).sum())
        assert x.grad.tolist() == [0.0, 1.0, 0.0]

    def test_sign_gradient_is_zero(self):
        x = Tensor([-2.0, 0.5, 2.0], requires_grad=True)
        backward((sign(x) * x).sum())
        assert x.grad.tolist() == [-1.0, 1.0, 1.0]

    def test_chain_rule_scalar(self):
        x = Tensor([0.3], requires_grad=True)
        backward(tanh(exp(x)).sum())
        e = np.exp(0.3)
        assert x.grad[0] == pytest.approx((1.0 - np.tanh(e) ** 2) * e, abs=1e-12)

    def test_shared_subexpression(self):
        x = Tensor([2.0], requires_grad=True)
        y = x * 3.0
        backward((y * y + y).sum())
        assert x.grad[0] == pytest.approx(2 * 6.0 * 3.0 + 3.0)

    def test_grad_leaves_dot_grad_untouched(self):
        x = Tensor([1.0, 2.0], requires_grad=True)
        (g,) = grad((x * x).sum(), [x])
        assert g.tolist() == [2.0, 4.0]
        assert x.grad is None

    def test_grad_of_unreached_tensor_is_zero(self):
        x = Tensor([1.0], requires_grad=True)
        other = Tensor([5.0, 6.0], requires_grad=True)
        (g,) = grad(x.sum(), [other])
        assert g.tolist() == [0.0, 0.0]

    def test_repeat_is_bit_identical(self):
        rng = np.random.default_rng(0)
        a = rng.normal(size=(4, 5))
        w = rng.normal(size=(5, 3))
        results = []
        for _ in range(2):
            t = Tensor(a, requires_grad=True)
            backward(softmax_cross_entropy(tanh(t @ Tensor(w)), [0, 1, 2, 0]))
            results.append(t.grad)
        assert np.array_equal(results[0], results[1])

    def test_record_is_topologically_ordered(self):
        x = Tensor(np.ones((2, 2)), requires_grad=True)
        y = relu(x @ x) + x
        record = ComputationRecord.from_root(y.sum())
        produced = set()
        for entry in record.entries:
            for t in entry.inputs:
                assert t.creator is None or id(t) in produced
            produced.add(id(entry.output))
        assert [leaf is x for leaf in record.leaves] == [True]


class TestGradientCheck:
    """Analytic gradients against central differences"""

    @pytest.mark.parametrize("seed", range(20))
    def test_matmul_both_operands(self, gradcheck, seed):
        rng = np.random.default_rng(300 + seed)
        a = rng.normal(size=(3, 4))
        b = rng.normal(size=(4, 2))
        weight = rng.normal(size=(3, 2))
        assert gradcheck(lambda t: ((t @ Tensor(b)) * weight).sum(), a) < 1e-6
        assert gradcheck(lambda t: ((Tensor(a) @ t) * weight).sum(), b) < 1e-6

    @pytest.mark.parametrize("stride,padding", [(1, 1), (2, 1), (1, 0), (2, 2)])
    @pytest.mark.parametrize("seed", range(20))
    def test_conv1d_input_and_kernel(self, gradcheck, stride, padding, seed):
        rng = np.random.default_rng(400 + seed)
        x = rng.normal(size=(2, 3, 8))
        kernel = rng.normal(size=(4, 3, 3))
        out_len = (8 + 2 * padding - 3) // stride + 1
        weight = rng.normal(size=(2, 4, out_len))
        assert gradcheck(lambda t: (conv1d(t, Tensor(kernel), stride, padding) * weight).sum(), x) < 1e-6
        assert gradcheck(lambda t: (conv1d(Tensor(x), t, stride, padding) * weight).sum(), kernel) < 1e-6

    @pytest.mark.parametrize("seed", range(20))
    def test_conv1d_bias(self, gradcheck, seed):
        rng = np.random.default_rng(500 + seed)
        x = rng.normal(size=(2, 2, 6))
        kernel = rng.normal(size=(3, 2, 3))
        weight = rng.normal(size=(2, 3, 6))
        check = gradcheck(lambda b: (conv1d(Tensor(x), Tensor(kernel), padding=1, bias=b) * weight).sum(), rng.normal(size=3))
        assert check < 1e-6

    @pytest.mark.parametrize("seed", range(20))
    def test_composite_primitives(self, gradcheck, seed):
        rng = np.random.default_rng(seed)
        x = rng.normal(size=(4, 6))
        # keep relu inputs away from its kink
        x = x + 0.2 * np.sign(x)
        labels = rng.integers(0, 3, size=4)
        w = rng.normal(size=(6, 3))
        positive = rng.uniform(0.5, 2.0, size=(4, 3))

        def f(t):
            h = relu(t) * 0.5 + tanh(t)
            z = h @ Tensor(w)
            z = z / Tensor(positive) + exp(z * 0.1)
            return softmax_cross_entropy(z, labels) + (z * z + 1.0).sqrt().mean() + z.max(axis=1).sum()

        assert gradcheck(f, x) < 1e-5

    @pytest.mark.parametrize("seed", range(20))
    def test_shape_primitives(self, gradcheck, seed):
        rng = np.random.default_rng(100 + seed)
        x = rng.normal(size=(2, 3, 5))
        skip = rng.normal(size=(2, 2, 5))
        weight = rng.normal(size=(2, 5, 5))

        def f(t):
            pooled = avg_pool1d(t)
            up = upsample_nearest1d(pooled, 5)
            joined = concat([up, Tensor(skip)], axis=1)
            return (joined * weight).sum()

        assert gradcheck(f, x) < 1e-6

    @pytest.mark.parametrize("seed", range(20))
    def test_indexing_primitives(self, gradcheck, seed):
        rng = np.random.default_rng(200 + seed)
        x = rng.normal(size=(5, 4))
        index = rng.integers(0, 5, size=7)
        labels = rng.integers(0, 4, size=7)

        def f(t):
            rows = t.take_rows(index)
            return (rows.pick(labels) * rows.mean(axis=1)).sum() + log(rows.T.reshape(28) * rows.T.reshape(28) + 1.0).sum()

        assert gradcheck(f, x) < 1e-6

    @pytest.mark.parametrize("seed", range(20))
    def test_cross_entropy_logit_gradient(self, gradcheck, seed):
        rng = np.random.default_rng(600 + seed)
        z = rng.normal(size=(6, 4))
        labels = rng.integers(0, 4, size=6)
        assert gradcheck(lambda t: softmax_cross_entropy(t, labels), z) < 1e-6
