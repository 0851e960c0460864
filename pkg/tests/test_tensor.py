"""Tensor core: construction, arithmetic, tape, backward."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rfrlkit.errors import ContractError, NumericsError, ShapeError
from rfrlkit.tensor import (ComputationTape, Tensor, backward, ewise,
                            grad_enabled, matmul, no_grad, ones, tclip,
                            tensor, tlog, tmean, tsum, zeros)


def t_(values, dtype=np.float32, requires_grad=False):
    return Tensor(np.asarray(values, dtype=dtype), requires_grad=requires_grad)


class TestConstruction:
    def test_wraps_contiguous_readonly(self):
        a = np.arange(6, dtype=np.float32).reshape(2, 3)
        t = Tensor(a)
        assert t.data.flags.c_contiguous
        assert not t.data.flags.writeable
        with pytest.raises(ValueError):
            t.data[0, 0] = 5.0

    def test_non_contiguous_input_copied(self):
        a = np.arange(12, dtype=np.float64).reshape(3, 4).T
        t = Tensor(a)
        assert t.data.flags.c_contiguous
        assert np.array_equal(t.data, a)

    def test_rank0_stays_rank0(self):
        t = Tensor(np.float32(2.5).reshape(()))
        assert t.shape == ()
        assert t.item() == 2.5

    def test_integer_dtype_rejected(self):
        with pytest.raises(ContractError):
            Tensor(np.arange(3))

    def test_factories(self):
        assert tensor([1, 2], dtype="f64").dtype == np.float64
        assert zeros((2, 2)).data.sum() == 0.0
        assert ones((3,), dtype="f32").data.sum() == 3.0

    def test_item_requires_single_element(self):
        with pytest.raises(ContractError):
            t_([1.0, 2.0]).item()

    def test_detach_drops_graph(self):
        a = t_([1.0], requires_grad=True)
        b = ewise("mul", a, a)
        d = b.detach()
        assert not d.requires_grad and d.node is None


class TestArithmetic:
    def test_add_sub_mul_values(self):
        a, b = t_([1.0, 2.0]), t_([3.0, 5.0])
        assert np.array_equal(ewise("add", a, b).data, [4.0, 7.0])
        assert np.array_equal(ewise("sub", a, b).data, [-2.0, -3.0])
        assert np.array_equal(ewise("mul", a, b).data, [3.0, 10.0])

    def test_operator_sugar(self):
        a = t_([2.0])
        assert ((a + 1.0).data == 3.0).all()
        assert ((1.0 + a).data == 3.0).all()
        assert ((a - 1.0).data == 1.0).all()
        assert ((a * 3.0).data == 6.0).all()
        assert ((-a).data == -2.0).all()

    def test_scalar_broadcast_only(self):
        a = t_(np.zeros((2, 3)))
        s = t_(np.float32(1.0).reshape(()))
        assert ewise("add", a, s).shape == (2, 3)
        with pytest.raises(ShapeError):
            ewise("add", a, t_(np.zeros(3)))

    def test_mixed_dtypes_rejected(self):
        with pytest.raises(ContractError):
            ewise("add", t_([1.0], np.float32), t_([1.0], np.float64))

    def test_matmul_strict_2d(self):
        a = t_(np.ones((2, 3)))
        b = t_(np.ones((3, 4)))
        assert matmul(a, b).shape == (2, 4)
        with pytest.raises(ShapeError):
            matmul(a, t_(np.ones((4, 2))))
        with pytest.raises(ShapeError):
            matmul(t_(np.ones(3)), b)

    def test_nan_raises_numerics(self):
        a = t_([0.0])
        with pytest.raises(NumericsError):
            tlog(a)  # log(0) = -inf

    def test_clip_and_abs_values(self):
        x = t_([-2.0, 0.5, 3.0])
        assert np.array_equal(tclip(x, 0.0, 1.0).data, [0.0, 0.5, 1.0])
        assert np.array_equal(x.abs().data, [2.0, 0.5, 3.0])


class TestBackward:
    def test_mul_grads(self):
        a = t_([2.0, 3.0], requires_grad=True)
        b = t_([5.0, 7.0], requires_grad=True)
        loss = tsum(ewise("mul", a, b))
        g = backward(loss)
        assert np.array_equal(g.raw(a), [5.0, 7.0])
        assert np.array_equal(g.raw(b), [2.0, 3.0])

    def test_reuse_accumulates(self):
        a = t_([3.0], requires_grad=True)
        loss = tsum(ewise("add", ewise("mul", a, a), a))  # a^2 + a
        g = backward(loss)
        assert np.allclose(g.raw(a), [7.0])  # 2a + 1

    def test_scalar_broadcast_grad_reduces(self):
        a = t_(np.ones((2, 2)), requires_grad=True)
        s = t_(np.float32(2.0).reshape(()), requires_grad=True)
        loss = tsum(ewise("mul", a, s))
        g = backward(loss)
        assert g.raw(s).shape == ()
        assert g.raw(s) == 4.0
        assert np.array_equal(g.raw(a), np.full((2, 2), 2.0))

    def test_matmul_grads(self):
        a = t_(np.arange(6).reshape(2, 3), np.float64, requires_grad=True)
        b = t_(np.arange(12).reshape(3, 4), np.float64, requires_grad=True)
        g = backward(tsum(matmul(a, b)))
        gy = np.ones((2, 4))
        assert np.array_equal(g.raw(a), gy @ b.data.T)
        assert np.array_equal(g.raw(b), a.data.T @ gy)

    def test_mean_grad(self):
        a = t_(np.ones((4,)), requires_grad=True)
        g = backward(tmean(a))
        assert np.allclose(g.raw(a), 0.25)

    def test_non_scalar_loss_rejected(self):
        a = t_([1.0, 2.0], requires_grad=True)
        with pytest.raises(ContractError):
            backward(ewise("mul", a, a))

    def test_intermediates_receive_grads(self):
        a = t_([1.0, 2.0], requires_grad=True)
        mid = ewise("mul", a, a)
        loss = tsum(mid)
        g = backward(loss)
        assert mid in g
        assert np.array_equal(g.raw(mid), [1.0, 1.0])

    def test_gradmap_interface(self):
        a = t_([1.0], requires_grad=True)
        c = t_([1.0])
        g = backward(tsum(ewise("mul", a, a)))
        assert a in g and c not in g
        assert g.get(c) is None
        assert isinstance(g[a], Tensor)
        with pytest.raises(KeyError):
            g[c]

    def test_constant_inputs_skipped(self):
        a = t_([2.0], requires_grad=True)
        c = t_([5.0])
        g = backward(tsum(ewise("mul", a, c)))
        assert c not in g
        assert np.array_equal(g.raw(a), [5.0])

    def test_clip_gradient_zero_outside(self):
        x = t_([-1.0, 0.5, 2.0], requires_grad=True)
        g = backward(tsum(tclip(x, 0.0, 1.0)))
        assert np.array_equal(g.raw(x), [0.0, 1.0, 0.0])

    def test_clip_gradient_zero_on_boundary(self):
        x = t_([0.0, 1.0], requires_grad=True)
        g = backward(tsum(tclip(x, 0.0, 1.0)))
        assert np.array_equal(g.raw(x), [0.0, 0.0])


class TestNoGrad:
    def test_no_grad_blocks_taping(self):
        a = t_([1.0], requires_grad=True)
        with no_grad():
            assert not grad_enabled()
            b = ewise("mul", a, a)
        assert b.node is None and not b.requires_grad
        assert grad_enabled()

    def test_no_grad_restored_on_error(self):
        try:
            with no_grad():
                raise RuntimeError("boom")
        except RuntimeError:
            pass
        assert grad_enabled()


class TestTape:
    def test_trace_orders_inputs_before_outputs(self):
        a = t_([1.0], requires_grad=True)
        b = ewise("mul", a, a)
        c = tsum(b)
        tape = ComputationTape.trace(c)
        recs = tape.records()
        assert [op for op, _, _ in recs] == ["mul", "sum"]
        produced = {out for _, _, out in recs}
        for _, inputs, out in recs:
            for i in inputs:
                assert i not in produced or i != out

    def test_diamond_visited_once(self):
        a = t_([2.0], requires_grad=True)
        b = ewise("mul", a, a)
        c = ewise("add", b, b)
        tape = ComputationTape.trace(tsum(c))
        ops = [op for op, _, _ in tape.records()]
        assert ops.count("mul") == 1


@settings(max_examples=40, deadline=None)
@given(st.lists(st.floats(-10, 10), min_size=1, max_size=8),
       st.lists(st.floats(-10, 10), min_size=1, max_size=8))
def test_add_grad_is_ones_property(xs, ys):
    n = min(len(xs), len(ys))
    a = t_(xs[:n], np.float64, requires_grad=True)
    b = t_(ys[:n], np.float64, requires_grad=True)
    g = backward(tsum(ewise("add", a, b)))
    assert np.array_equal(g.raw(a), np.ones(n))
    assert np.array_equal(g.raw(b), np.ones(n))


@settings(max_examples=40, deadline=None)
@given(st.lists(st.floats(0.1, 10), min_size=2, max_size=9))
def test_log_grad_reciprocal_property(xs):
    x = t_(xs, np.float64, requires_grad=True)
    g = backward(tsum(tlog(x)))
    assert np.allclose(g.raw(x), 1.0 / np.asarray(xs))
