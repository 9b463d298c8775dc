# test_autodiff.py - Tests for the tensor engine, its adjoints and the gradient checker

import numpy as np
import pytest

from services import autodiff as ad
from services.autodiff import Tape, Tensor
from services.errors import ConfigurationError, DimensionError
from services.gradcheck import check_parameters, grad_check, relative_error

SEEDS = (0, 1, 2, 3, 4)


def _weighted(fn, shape, rng):
    weights = Tensor(rng.normal(size=shape))
    return lambda t: ad.sum_reduce(ad.mul(fn(t), weights))


def test_matmul_examples():
    """Identity and a hand-computed product"""
    print("🔍 Testing matmul...")
    x = np.arange(9.0).reshape(3, 3)
    assert np.array_equal(ad.matmul(np.eye(3), x).data, x)
    out = ad.matmul(np.array([[1.0, 2.0], [3.0, 4.0]]), np.array([[0.0], [1.0]]))
    assert np.array_equal(out.data, [[2.0], [4.0]])
    with pytest.raises(DimensionError, match=r"\(2, 3\).*\(2, 3\)"):
        ad.matmul(np.ones((2, 3)), np.ones((2, 3)))


def test_matmul_gradient():
    for seed in SEEDS:
        rng = np.random.default_rng(seed)
        b = Tensor(rng.normal(size=(5, 3)))
        f = _weighted(lambda a: ad.matmul(a, b), (4, 3), rng)
        assert grad_check(f, Tensor(rng.normal(size=(4, 5)))) < 1e-6


def test_conv2d_examples():
    print("🔍 Testing conv2d...")
    rng = np.random.default_rng(0)
    x = rng.normal(size=(2, 3, 5, 5))
    identity = np.zeros((3, 3, 1, 1))
    identity[np.arange(3), np.arange(3)] = 1.0
    assert np.array_equal(ad.conv2d(x, identity).data, x)

    constant = np.full((1, 1, 4, 6), 0.75)
    out = ad.conv2d(constant, np.ones((1, 1, 3, 3)), padding=1, pad_mode="replicate")
    assert np.allclose(out.data, 9 * 0.75, rtol=0, atol=1e-15)

    out = ad.conv2d(np.ones((1, 1, 9, 9)), np.ones((4, 1, 3, 3)), stride=2, padding=1)
    assert out.shape == (1, 4, 5, 5)


def test_conv2d_rejects_oversized_kernel():
    with pytest.raises(DimensionError):
        ad.conv2d(np.ones((1, 1, 2, 2)), np.ones((1, 1, 5, 5)))


def test_conv2d_gradient():
    for seed in SEEDS:
        rng = np.random.default_rng(seed)
        w = Tensor(rng.normal(size=(3, 2, 3, 3)))
        x = Tensor(rng.normal(size=(1, 2, 6, 6)))
        for mode in ("zero", "replicate"):
            f = _weighted(lambda t: ad.conv2d(t, w, padding=1, pad_mode=mode), (1, 3, 6, 6), rng)
            assert grad_check(f, x) < 1e-6
        g = _weighted(lambda t: ad.conv2d(x, t, padding=1), (1, 3, 6, 6), rng)
        assert grad_check(g, w) < 1e-6


def test_deconv2d_is_adjoint_of_strided_conv():
    rng = np.random.default_rng(1)
    x = rng.normal(size=(1, 2, 4, 4))
    delta_up = np.zeros((2, 2, 2, 2))
    delta_down = np.zeros((2, 2, 2, 2))
    for c in range(2):
        delta_up[c, c, 0, 0] = 1.0
        delta_down[c, c, 0, 0] = 1.0
    up = ad.deconv2d(x, delta_up, stride=2)
    assert up.shape == (1, 2, 8, 8)
    assert np.array_equal(ad.conv2d(up, delta_down, stride=2).data, x)

    assert ad.deconv2d(np.ones((1, 3, 8, 8)), np.ones((3, 5, 2, 2))).shape == (1, 5, 16, 16)

    # <conv(u), v> == <u, deconv(v)> for the same kernel layout
    w = rng.normal(size=(2, 3, 2, 2))
    u = rng.normal(size=(1, 3, 8, 8))
    v = rng.normal(size=(1, 2, 4, 4))
    lhs = np.sum(ad.conv2d(u, w, stride=2).data * v)
    rhs = np.sum(u * ad.deconv2d(v, w, stride=2).data)
    assert abs(lhs - rhs) < 1e-10


def test_deconv2d_gradient():
    for seed in SEEDS:
        rng = np.random.default_rng(seed)
        w = Tensor(rng.normal(size=(2, 3, 2, 2)))
        f = _weighted(lambda t: ad.deconv2d(t, w, stride=2), (1, 3, 8, 8), rng)
        assert grad_check(f, Tensor(rng.normal(size=(1, 2, 4, 4)))) < 1e-6


def test_softmax_properties():
    out = ad.softmax(np.zeros((2, 4)), axis=-1)
    assert np.allclose(out.data, 0.25, rtol=0, atol=1e-15)
    rng = np.random.default_rng(2)
    x = rng.normal(size=(3, 7))
    assert np.allclose(ad.softmax(x).data, ad.softmax(x + 100.0).data, rtol=0, atol=1e-12)
    assert np.max(np.abs(ad.softmax(x).data.sum(axis=-1) - 1.0)) < 1e-12
    for seed in SEEDS:
        rng = np.random.default_rng(seed)
        f = _weighted(lambda t: ad.softmax(t, axis=-1), (3, 5), rng)
        assert grad_check(f, Tensor(rng.normal(size=(3, 5)))) < 1e-6


def test_layer_norm_properties():
    gain = np.array([1.5, -0.5, 2.0, 1.0])
    bias = np.array([0.1, 0.2, -0.3, 0.0])
    constant = ad.layer_norm(np.full((2, 4), 3.0), np.ones(4), np.zeros(4))
    assert np.array_equal(constant.data, np.zeros((2, 4)))

    rng = np.random.default_rng(3)
    x = rng.normal(scale=3.0, size=(5, 4))
    plain = ad.layer_norm(x, np.ones(4), np.zeros(4)).data
    assert np.allclose(plain.mean(axis=-1), 0.0, atol=1e-12)
    assert np.allclose(plain.var(axis=-1), 1.0, atol=1e-4)
    scaled = ad.layer_norm(x, gain, bias).data
    assert np.allclose(scaled, plain * gain + bias, atol=1e-12)

    for seed in SEEDS:
        rng = np.random.default_rng(seed)
        g, b = Tensor(rng.normal(size=4)), Tensor(rng.normal(size=4))
        f = _weighted(lambda t: ad.layer_norm(t, g, b), (2, 3, 4), rng)
        assert grad_check(f, Tensor(rng.normal(size=(2, 3, 4)))) < 1e-5


@pytest.mark.parametrize("op", ["add", "sub", "mul", "div", "scalar_mul", "sigmoid", "gelu_like",
                                "mean_reduce", "broadcast_add"])
def test_elementwise_gradients(op):
    for seed in SEEDS:
        rng = np.random.default_rng(seed)
        other = Tensor(rng.uniform(0.5, 2.0, size=(3, 4)))
        bias = Tensor(rng.normal(size=(1, 4)))
        fns = {
            "add": lambda t: ad.add(t, other),
            "sub": lambda t: ad.sub(other, t),
            "mul": lambda t: ad.mul(t, t),
            "div": lambda t: ad.div(t, other),
            "scalar_mul": lambda t: ad.scalar_mul(t, -2.5),
            "sigmoid": ad.sigmoid,
            "gelu_like": ad.gelu_like,
            "mean_reduce": lambda t: ad.mean_reduce(t, axis=0),
            "broadcast_add": lambda t: ad.broadcast_add(t, bias),
        }
        shape = (4,) if op == "mean_reduce" else (3, 4)
        f = _weighted(fns[op], shape, rng)
        assert grad_check(f, Tensor(rng.normal(size=(3, 4)))) < 1e-5, op


def test_elementwise_zero_and_identity_cases():
    zeros = np.zeros((2, 3))
    assert np.array_equal(ad.add(zeros, zeros).data, zeros)
    assert np.array_equal(ad.sigmoid(zeros).data, np.full((2, 3), 0.5))
    assert np.array_equal(ad.gelu_like(zeros).data, zeros)
    x = np.random.default_rng(4).normal(size=(2, 3))
    assert np.array_equal(ad.mul(x, np.ones((2, 3))).data, x)
    assert np.array_equal(ad.sub(x, x).data, zeros)
    assert np.array_equal(ad.scalar_mul(x, 1.0).data, x)
    assert np.allclose(ad.sigmoid(x).data + ad.sigmoid(-x).data, 1.0, atol=1e-15)
    with pytest.raises(DimensionError):
        ad.broadcast_add(np.ones((2, 3)), np.ones((4, 3)))


def test_sigmoid_saturates_without_overflow():
    out = ad.sigmoid(np.array([-1000.0, 1000.0])).data
    assert np.all(np.isfinite(out))
    assert out[0] == 0.0 and out[1] == 1.0


def test_grad_check_trivial_functions():
    x = Tensor(np.zeros((3, 4)))
    assert grad_check(lambda t: ad.sum_reduce(t), x) < 1e-12
    with Tape() as tape:
        x.requires_grad = True
        out = ad.sum_reduce(ad.mul(x, x))
        tape.backward(out)
    assert np.array_equal(x.grad, np.zeros((3, 4)))


def test_scalar_tensors_keep_zero_dims():
    assert Tensor(3.0).shape == ()
    x = Tensor(np.ones((3, 4)), requires_grad=True)
    with Tape():
        total = ad.sum_reduce(x)
        assert total.shape == ()
        total.backward()
    assert np.array_equal(x.grad, np.ones((3, 4)))
    with Tape() as tape:
        tape.backward(ad.mean_reduce(x))
    assert np.allclose(x.grad, np.ones((3, 4)) + 1.0 / 12.0)
    assert grad_check(lambda t: t.sum(), Tensor(np.random.default_rng(8).normal(size=(2, 3)))) < 1e-6


def test_ops_outside_a_tape_are_not_recorded():
    x = Tensor(np.ones((2, 2)), requires_grad=True)
    y = ad.sum_reduce(ad.mul(x, x))
    assert Tape.current() is None
    assert not y.requires_grad
    with pytest.raises(ConfigurationError):
        y.backward()
    with Tape() as tape:
        assert Tape.current() is tape
    assert Tape.current() is None


def test_fan_out_accumulates():
    x = Tensor(np.random.default_rng(5).normal(size=(2, 2)), requires_grad=True)
    with Tape() as tape:
        out = ad.add(ad.sum_reduce(x), ad.sum_reduce(x))
        tape.backward(out)
    assert np.array_equal(x.grad, 2.0 * np.ones((2, 2)))


def test_backward_visits_reverse_insertion_order():
    x = Tensor(np.ones(3), requires_grad=True)
    with Tape() as tape:
        a = ad.scalar_mul(x, 2.0)
        b = ad.sigmoid(a)
        c = ad.sum_reduce(b)
        recorded = [node.op for node in tape.nodes]
        visited = tape.backward(c)
    assert [node.op for node in visited] == list(reversed(recorded))
    assert tape.nodes == []


def test_no_grad_records_nothing():
    x = Tensor(np.ones(3), requires_grad=True)
    with Tape() as tape:
        with ad.no_grad():
            y = ad.scalar_mul(x, 3.0)
        assert tape.nodes == []
    assert not y.requires_grad


def test_layout_op_gradients():
    for seed in SEEDS[:3]:
        rng = np.random.default_rng(seed)
        x = Tensor(rng.normal(size=(1, 2, 3, 4)))
        cases = [
            (lambda t: ad.transpose(t, (0, 2, 3, 1)), (1, 3, 4, 2)),
            (lambda t: ad.reshape(t, (2, 12)), (2, 12)),
            (lambda t: ad.take(t, [0, 0, 2, 1], axis=2), (1, 2, 4, 4)),
            (lambda t: ad.concat([t, ad.scalar_mul(t, 2.0)], axis=1), (1, 4, 3, 4)),
            (lambda t: ad.pad2d(t, (1, 2, 0, 1), "replicate"), (1, 2, 6, 5)),
            (lambda t: ad.pad2d(t, (1, 0, 2, 1), "zero"), (1, 2, 4, 7)),
            (lambda t: ad.resize_bilinear(t, 6, 8), (1, 2, 6, 8)),
        ]
        for fn, shape in cases:
            assert grad_check(_weighted(fn, shape, rng), x) < 1e-6


def test_resize_bilinear_preserves_constants():
    out = ad.resize_bilinear(np.full((1, 1, 2, 2), 0.3), 64, 64)
    assert out.shape == (1, 1, 64, 64)
    assert np.allclose(out.data, 0.3, atol=1e-14)


def test_forward_is_deterministic():
    rng = np.random.default_rng(6)
    x = rng.normal(size=(1, 2, 6, 6))
    w = rng.normal(size=(3, 2, 3, 3))
    first = ad.conv2d(x, w, padding=1).data
    second = ad.conv2d(x, w, padding=1).data
    assert first.tobytes() == second.tobytes()


def test_check_parameters_clears_gradients():
    rng = np.random.default_rng(7)
    w = ad.init_uniform((3, 2), 2, rng)
    x = Tensor(rng.normal(size=(4, 3)))
    errors = check_parameters(lambda: ad.sum_reduce(ad.gelu_like(ad.matmul(x, w))), [("w", w)])
    assert errors["w"] < 1e-6
    assert w.grad is None


def test_relative_error_floor():
    assert relative_error(0.0, 0.0) == 0.0
    assert relative_error(1e-12, 0.0) == pytest.approx(1e-4)


def main():
    """Run all tests and print a summary"""
    tests = [(name, fn) for name, fn in globals().items()
             if name.startswith("test_") and callable(fn) and name != "test_elementwise_gradients"]
    tests += [(f"test_elementwise_gradients[{op}]", lambda op=op: test_elementwise_gradients(op))
              for op in ("add", "sub", "mul", "div", "scalar_mul", "sigmoid", "gelu_like",
                         "mean_reduce", "broadcast_add")]
    results = []
    for name, fn in tests:
        try:
            fn()
            results.append((name, True))
        except Exception as e:
            print(f"❌ {name} failed: {e}")
            results.append((name, False))

    print("\n" + "=" * 50)
    print("📊 TEST RESULTS:")
    for name, passed in results:
        print(f"{name}: {'✅ PASSED' if passed else '❌ FAILED'}")
    print(f"\nOverall: {sum(p for _, p in results)}/{len(results)} tests passed")


if __name__ == "__main__":
    main()
