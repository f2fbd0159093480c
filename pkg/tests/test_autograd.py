"""
张量、Tape 与反向传播的测试
"""
import numpy as np
import pytest

from tvqe.autograd import ops
from tvqe.autograd.gradcheck import finite_diff_check
from tvqe.autograd.tensor import OPS, Tape, Tensor, active_tape, backward, inject_backward_fault
from tvqe.entity.errors import NumericError, UsageError


class TestTensor:
    """Tensor 基本行为"""

    def test_copies_input(self):
        arr = np.ones((2, 2))
        t = Tensor(arr)
        arr[0, 0] = 5.0
        assert t.data[0, 0] == 1.0

    def test_keeps_float64(self):
        assert Tensor(np.zeros(3)).dtype == np.float64

    def test_integer_input_becomes_float32(self):
        assert Tensor([1, 2, 3]).dtype == np.float32

    def test_rejects_unsupported_dtype(self):
        with pytest.raises(UsageError):
            Tensor(np.zeros(3), dtype=np.int32)

    def test_item_needs_single_element(self):
        assert Tensor([[2.5]]).item() == 2.5
        with pytest.raises(UsageError):
            Tensor([1.0, 2.0]).item()

    def test_accumulate_grad_checks_shape(self):
        t = Tensor(np.zeros((2, 3)), requires_grad=True)
        t.accumulate_grad(np.ones((2, 3)))
        t.accumulate_grad(np.ones((2, 3)))
        assert np.all(t.grad == 2.0)
        with pytest.raises(UsageError):
            t.accumulate_grad(np.ones(3))

    def test_operator_overloads(self):
        a = Tensor(np.array([1.0, 2.0]))
        b = Tensor(np.array([3.0, 5.0]))
        np.testing.assert_array_equal((a + b).data, [4.0, 7.0])
        np.testing.assert_array_equal((a - 1.0).data, [0.0, 1.0])
        np.testing.assert_array_equal((2.0 * a).data, [2.0, 4.0])
        np.testing.assert_array_equal((a / 2.0).data, [0.5, 1.0])
        np.testing.assert_array_equal((-a).data, [-1.0, -2.0])
        with pytest.raises(UsageError):
            a / b


class TestTape:
    """Tape 记录规则"""

    def test_no_recording_outside_tape(self):
        x = Tensor(np.ones(3), requires_grad=True)
        assert active_tape() is None
        ops.square(x)

    def test_records_only_grad_paths(self):
        x = Tensor(np.ones(3), requires_grad=True)
        c = Tensor(np.ones(3))
        with Tape() as tape:
            ops.square(c)
            ops.square(x)
        assert len(tape) == 1
        assert tape.nodes[0].op == "square"

    def test_nested_tapes(self):
        x = Tensor(np.ones(2), requires_grad=True)
        with Tape() as outer:
            with Tape() as inner:
                ops.neg(x)
            assert active_tape() is outer
        assert len(inner) == 1
        assert len(outer) == 0
        assert active_tape() is None

    def test_backward_needs_scalar(self):
        x = Tensor(np.ones(3), requires_grad=True)
        with Tape() as tape:
            y = ops.square(x)
        with pytest.raises(UsageError):
            backward(y, tape)


class TestBackward:
    """反向传播的正确性"""

    def test_square_sum(self):
        x = Tensor(np.array([1.0, -2.0, 3.0]), requires_grad=True)
        with Tape() as tape:
            loss = ops.sum(ops.square(x))
        backward(loss, tape)
        np.testing.assert_allclose(x.grad, [2.0, -4.0, 6.0])

    def test_reused_tensor_accumulates(self):
        x = Tensor(np.array([2.0, 3.0]), requires_grad=True)
        with Tape() as tape:
            loss = ops.sum(ops.mul(x, x))
        backward(loss, tape)
        np.testing.assert_allclose(x.grad, [4.0, 6.0])

    def test_broadcast_gradient_reduced(self):
        a = Tensor(np.ones((3, 4)), requires_grad=True)
        b = Tensor(np.ones(4), requires_grad=True)
        with Tape() as tape:
            loss = ops.sum(ops.add(a, b))
        backward(loss, tape)
        assert b.grad.shape == (4,)
        np.testing.assert_allclose(b.grad, 3.0)

    def test_constants_get_no_grad(self):
        x = Tensor(np.ones(2), requires_grad=True)
        c = Tensor(np.full(2, 3.0))
        with Tape() as tape:
            loss = ops.sum(ops.mul(x, c))
        backward(loss, tape)
        assert c.grad is None
        np.testing.assert_allclose(x.grad, 3.0)

    def test_grads_accumulate_across_calls(self):
        x = Tensor(np.array([1.0]), requires_grad=True)
        for _ in range(2):
            with Tape() as tape:
                loss = ops.sum(ops.scale(x, 2.0))
            backward(loss, tape)
        np.testing.assert_allclose(x.grad, [4.0])

    def test_softmax_sum_gradient_is_zero(self, rng):
        x = Tensor(rng.standard_normal((3, 5)), requires_grad=True)
        with Tape() as tape:
            loss = ops.sum(ops.softmax(x, axis=-1))
        backward(loss, tape)
        assert np.max(np.abs(x.grad)) < 1e-6


class TestNumericGuard:
    """非有限值检测"""

    def test_sqrt_of_negative_rejected(self):
        with pytest.raises(UsageError):
            ops.sqrt(Tensor(np.array([-1.0, 4.0])))

    def test_overflow_names_op(self):
        big = Tensor(np.array([1e200, 2.0]))
        with pytest.raises(NumericError) as info:
            ops.square(big)
        assert info.value.op == "square"
        assert "square" in str(info.value)

    def test_inf_input_detected(self):
        with pytest.raises(NumericError):
            ops.add(Tensor(np.array([np.inf])), Tensor(np.array([1.0])))


class TestFaultInjection:
    """反向规则变异哨兵"""

    def test_unknown_op_rejected(self):
        with pytest.raises(UsageError):
            with inject_backward_fault("no_such_op"):
                pass

    def test_flipped_rule_detected_and_restored(self, rng):
        x = Tensor(rng.uniform(-1, 1, (3, 4)), dtype=np.float64)

        def f(t):
            return ops.sum(ops.square(t))

        with inject_backward_fault("square"):
            report = finite_diff_check(f, x, name="square")
        assert not report.passed
        assert finite_diff_check(f, x, name="square").passed

    def test_registry_lists_vocabulary(self):
        for name in ("add", "matmul", "softmax", "layer_norm", "conv2d", "gelu", "pixel_shuffle", "roll"):
            assert name in OPS
