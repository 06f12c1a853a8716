"""Autodiff engine tests.

Oracles: central finite differences in double precision (h = 1e-5) for
every gradient, a direct O(N*K) loop convolution for both conv operators,
the inner-product adjoint identity, and hand-computed Adam steps.
"""

import numpy as np
import pytest

import rirpost.neural as nn

GRAD_RTOL = 1e-6
FD_EPS = 1e-5


def fd_grad(f, x, eps=FD_EPS):
    """Central finite differences of the scalar function f wrt array x.

    f() re-evaluates the computation using the current contents of x.
    """
    g = np.zeros_like(x)
    flat = x.reshape(-1)
    gf = g.reshape(-1)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + eps
        fp = f()
        flat[i] = orig - eps
        fm = f()
        flat[i] = orig
        gf[i] = (fp - fm) / (2 * eps)
    return g


def rel_err(analytic, numeric):
    denom = max(np.max(np.abs(numeric)), 1.0)
    return np.max(np.abs(analytic - numeric)) / denom


def direct_conv1d(x, w, stride=1, padding=0):
    """Brute-force cross-correlation oracle, [B,Cin,L] x [Cout,Cin,K]."""
    B, Cin, L = x.shape
    Cout, _, K = w.shape
    xp = np.pad(x, ((0, 0), (0, 0), (padding, padding)))
    Lout = (L + 2 * padding - K) // stride + 1
    out = np.zeros((B, Cout, Lout))
    for b in range(B):
        for co in range(Cout):
            for i in range(Lout):
                s = i * stride
                for ci in range(Cin):
                    for k in range(K):
                        out[b, co, i] += xp[b, ci, s + k] * w[co, ci, k]
    return out


def direct_conv_transpose1d(x, w, stride=1, padding=0, output_padding=0):
    """Brute-force scatter oracle, [B,Cin,L] x [Cin,Cout,K]."""
    B, Cin, L = x.shape
    _, Cout, K = w.shape
    full = (L - 1) * stride + K + output_padding
    buf = np.zeros((B, Cout, full))
    for b in range(B):
        for ci in range(Cin):
            for i in range(L):
                for co in range(Cout):
                    for k in range(K):
                        buf[b, co, i * stride + k] += x[b, ci, i] * w[ci, co, k]
    Lout = (L - 1) * stride - 2 * padding + K + output_padding
    return buf[:, :, padding : padding + Lout]


class TestTensorBasics:
    def test_scalar_lift_and_repr(self):
        t = nn.Tensor(np.array([1.0, 2.0]))
        assert t.shape == (2,)
        assert "Tensor" in repr(t)

    def test_detach_drops_history(self):
        a = nn.Tensor(np.array([2.0]), requires_grad=True)
        b = a * 3.0
        d = b.detach()
        assert d._backward is None and not d.requires_grad
        np.testing.assert_array_equal(d.data, b.data)

    def test_non_scalar_backward_raises(self):
        a = nn.Tensor(np.array([1.0, 2.0]), requires_grad=True)
        with pytest.raises(ValueError):
            (a * 2.0).backward()

    def test_numpy_scalar_minus_tensor_stays_in_engine(self):
        # __array_ufunc__ = None forces numpy scalars through __rsub__
        a = nn.Tensor(np.array([0.25]), requires_grad=True)
        out = np.float64(1.0) - a
        assert isinstance(out, nn.Tensor)
        out2 = 1.0 - a
        np.testing.assert_array_equal(out.data, out2.data)


class TestForwardValues:
    def test_add_mul_sub_neg(self):
        a = nn.Tensor(np.array([1.0, -2.0]))
        b = nn.Tensor(np.array([3.0, 4.0]))
        np.testing.assert_array_equal((a + b).data, [4.0, 2.0])
        np.testing.assert_array_equal((a * b).data, [3.0, -8.0])
        np.testing.assert_array_equal((a - b).data, [-2.0, -6.0])
        np.testing.assert_array_equal((-a).data, [-1.0, 2.0])
        np.testing.assert_array_equal((5.0 - a).data, [4.0, 7.0])

    def test_relu_and_leaky(self):
        x = nn.Tensor(np.array([-1.0, 0.0, 2.0]))
        np.testing.assert_array_equal(nn.relu(x).data, [0.0, 0.0, 2.0])
        np.testing.assert_allclose(nn.leaky_relu(x, 0.2).data, [-0.2, 0.0, 2.0])

    def test_tanh_sigmoid(self):
        x = nn.Tensor(np.array([0.0]))
        assert nn.tanh(x).data[0] == 0.0
        assert nn.sigmoid(x).data[0] == 0.5

    def test_clip(self):
        x = nn.Tensor(np.array([-5.0, 0.5, 5.0]))
        np.testing.assert_array_equal(nn.clip(x, -1.0, 1.0).data, [-1.0, 0.5, 1.0])

    def test_log_clamps_at_1e12(self):
        x = nn.Tensor(np.array([0.0, 1.0]))
        out = nn.log(x)
        assert out.data[0] == np.log(1e-12)
        assert out.data[1] == 0.0

    def test_log_unclamped_raises_on_nonpositive(self):
        x = nn.Tensor(np.array([0.0]))
        with pytest.raises(ValueError):
            nn.log(x, clamp=None)
        ok = nn.log(nn.Tensor(np.array([np.e])), clamp=None)
        assert abs(ok.data[0] - 1.0) < 1e-15

    def test_mean_and_l1(self):
        x = nn.Tensor(np.array([1.0, -2.0, 3.0]))
        assert nn.mean(x).data == pytest.approx(2.0 / 3.0)
        assert nn.l1_norm(x).data == pytest.approx(2.0)

    def test_l1_of_difference_with_self_is_zero(self):
        x = nn.Tensor(np.random.default_rng(0).standard_normal(16))
        assert nn.l1_norm(x - x).data == 0.0

    def test_batch_concat_and_reshape(self):
        a = nn.Tensor(np.ones((2, 3)))
        b = nn.Tensor(np.zeros((1, 3)))
        cat = nn.batch_concat([a, b])
        assert cat.shape == (3, 3)
        assert nn.reshape(cat, (9,)).shape == (9,)

    def test_forward_determinism_bit_identical(self):
        rng = np.random.default_rng(5)
        x = rng.standard_normal((2, 3, 32))
        w = rng.standard_normal((4, 3, 5))
        a = nn.conv1d(nn.Tensor(x), nn.Tensor(w), stride=2, padding=2).data
        b = nn.conv1d(nn.Tensor(x.copy()), nn.Tensor(w.copy()), stride=2, padding=2).data
        assert np.array_equal(a, b)


class TestConvForward:
    def test_pointwise_scale(self):
        x = nn.Tensor(np.array([[[1.0, 2.0, 3.0, 4.0]]]))
        w = nn.Tensor(np.array([[[2.0]]]))
        np.testing.assert_array_equal(nn.conv1d(x, w).data, [[[2.0, 4.0, 6.0, 8.0]]])

    def test_padded_cross_correlation(self):
        x = nn.Tensor(np.array([[[1.0, 0.0, 0.0, 0.0, 0.0]]]))
        w = nn.Tensor(np.array([[[1.0, 2.0, 3.0]]]))
        out = nn.conv1d(x, w, stride=1, padding=1)
        np.testing.assert_array_equal(out.data, [[[2.0, 1.0, 0.0, 0.0, 0.0]]])

    def test_length_formula_stride2(self):
        x = nn.Tensor(np.zeros((1, 1, 16384)))
        w = nn.Tensor(np.zeros((1, 1, 25)))
        assert nn.conv1d(x, w, stride=2, padding=12).shape == (1, 1, 8192)

    def test_channel_mismatch_raises(self):
        x = nn.Tensor(np.zeros((1, 2, 8)))
        w = nn.Tensor(np.zeros((1, 3, 3)))
        with pytest.raises(ValueError):
            nn.conv1d(x, w)

    def test_kernel_longer_than_input_raises(self):
        with pytest.raises(ValueError):
            nn.conv1d(nn.Tensor(np.zeros((1, 1, 4))), nn.Tensor(np.zeros((1, 1, 9))))

    @pytest.mark.parametrize("seed", range(8))
    def test_matches_direct_oracle(self, seed):
        rng = np.random.default_rng(seed)
        B, Cin, Cout = rng.integers(1, 4), rng.integers(1, 4), rng.integers(1, 4)
        K = int(rng.integers(1, 7))
        stride = int(rng.integers(1, 4))
        padding = int(rng.integers(0, 4))
        L = int(rng.integers(max(1, K - 2 * padding), 20) + K)
        x = rng.standard_normal((B, Cin, L))
        w = rng.standard_normal((Cout, Cin, K))
        ours = nn.conv1d(nn.Tensor(x), nn.Tensor(w), stride, padding).data
        np.testing.assert_allclose(ours, direct_conv1d(x, w, stride, padding), atol=1e-12)


class TestConvTransposeForward:
    def test_kernel_stamping(self):
        x = nn.Tensor(np.array([[[1.0]]]))
        w = nn.Tensor(np.array([[[1.0, 2.0, 3.0]]]))
        np.testing.assert_array_equal(nn.conv_transpose1d(x, w).data, [[[1.0, 2.0, 3.0]]])

    def test_length_formula_with_output_padding(self):
        x = nn.Tensor(np.zeros((1, 1, 8192)))
        w = nn.Tensor(np.zeros((1, 1, 25)))
        assert nn.conv_transpose1d(x, w, stride=2, padding=12).shape == (1, 1, 16383)
        assert nn.conv_transpose1d(x, w, stride=2, padding=12, output_padding=1).shape == (1, 1, 16384)

    def test_output_padding_bounds(self):
        x = nn.Tensor(np.zeros((1, 1, 8)))
        w = nn.Tensor(np.zeros((1, 1, 3)))
        with pytest.raises(ValueError):
            nn.conv_transpose1d(x, w, stride=2, output_padding=2)
        with pytest.raises(ValueError):
            nn.conv_transpose1d(x, w, stride=1, output_padding=-1)

    @pytest.mark.parametrize("seed", range(8))
    def test_matches_direct_oracle(self, seed):
        rng = np.random.default_rng(100 + seed)
        B, Cin, Cout = rng.integers(1, 4), rng.integers(1, 4), rng.integers(1, 4)
        K = int(rng.integers(1, 7))
        stride = int(rng.integers(1, 4))
        output_padding = int(rng.integers(0, stride))
        L = int(rng.integers(2, 12))
        padding = int(rng.integers(0, min(3, ((L - 1) * stride + K - 1) // 2) + 1))
        x = rng.standard_normal((B, Cin, L))
        w = rng.standard_normal((Cin, Cout, K))
        ours = nn.conv_transpose1d(nn.Tensor(x), nn.Tensor(w), stride, padding, output_padding).data
        oracle = direct_conv_transpose1d(x, w, stride, padding, output_padding)
        np.testing.assert_allclose(ours, oracle, atol=1e-12)


class TestAdjointIdentity:
    @pytest.mark.parametrize("seed", range(10))
    def test_inner_product_identity(self, seed):
        # <conv1d(x, w), y> == <x, grad_x> where grad_x is the backward
        # pass at cotangent y; equality characterizes the true adjoint
        rng = np.random.default_rng(200 + seed)
        B, Cin, Cout = 2, int(rng.integers(1, 4)), int(rng.integers(1, 4))
        K = int(rng.integers(1, 8))
        stride = int(rng.integers(1, 4))
        padding = int(rng.integers(0, 3))
        L = int(rng.integers(K + 2, K + 20))
        x = nn.Tensor(rng.standard_normal((B, Cin, L)), requires_grad=True)
        w = rng.standard_normal((Cout, Cin, K))
        out = nn.conv1d(x, nn.Tensor(w), stride, padding)
        y = rng.standard_normal(out.shape)
        x.zero_grad()
        (nn.mean(out * nn.Tensor(y)) * float(out.data.size)).backward()
        lhs = float(np.sum(out.data * y))
        rhs = float(np.sum(x.data * x.grad))
        assert abs(lhs - rhs) <= 1e-10 * max(1.0, abs(lhs))

    @pytest.mark.parametrize("seed", range(10))
    def test_transpose_equals_input_gradient(self, seed):
        # conv_transpose1d(y, w) must equal the input-gradient of conv1d
        # evaluated at output cotangent y, for matching configurations
        rng = np.random.default_rng(300 + seed)
        Cin, Cout = int(rng.integers(1, 4)), int(rng.integers(1, 4))
        K = int(rng.integers(1, 8))
        stride = int(rng.integers(1, 4))
        padding = int(rng.integers(0, (K + 1) // 2))
        L = int(rng.integers(K + 2, K + 20))
        x = nn.Tensor(rng.standard_normal((2, Cin, L)), requires_grad=True)
        w = rng.standard_normal((Cout, Cin, K))
        out = nn.conv1d(x, nn.Tensor(w), stride, padding)
        y = rng.standard_normal(out.shape)
        x.zero_grad()
        # scaling after the mean keeps the cotangent equal to y bit-exactly
        (nn.mean(out * nn.Tensor(y)) * float(out.data.size)).backward()
        grad_route = x.grad
        op = (L + 2 * padding - K) % stride
        direct_route = nn.conv_transpose1d(
            nn.Tensor(y), nn.Tensor(w), stride=stride, padding=padding, output_padding=op
        ).data
        assert grad_route.shape == direct_route.shape
        assert np.max(np.abs(grad_route - direct_route)) <= 1e-10


class TestGradients:
    def test_mean_square_hand_gradient(self):
        x = nn.Tensor(np.array([1.0, 2.0, 3.0]), requires_grad=True)
        nn.mean(x * x).backward()
        np.testing.assert_allclose(x.grad, [2.0 / 3.0, 4.0 / 3.0, 2.0])

    def test_sum_wx_gradient_is_x(self):
        # 4 elements: division and multiplication by 4 are exact in binary
        xv = np.array([0.5, -1.25, 2.0, 3.75])
        w = nn.Tensor(np.array([1.0, 1.0, 1.0, 1.0]), requires_grad=True)
        loss = nn.mean(w * nn.Tensor(xv)) * 4.0
        loss.backward()
        np.testing.assert_array_equal(w.grad, xv)

    def test_double_backward_doubles_exactly(self):
        rng = np.random.default_rng(7)
        x = nn.Tensor(rng.standard_normal((2, 3, 16)), requires_grad=True)
        w = nn.Tensor(rng.standard_normal((2, 3, 5)), requires_grad=True)
        x.zero_grad()
        w.zero_grad()

        def build():
            return nn.mean(nn.tanh(nn.conv1d(x, w, stride=2, padding=2)))

        build().backward()
        gx1 = x.grad.copy()
        gw1 = w.grad.copy()
        build().backward()
        np.testing.assert_array_equal(x.grad, 2.0 * gx1)
        np.testing.assert_array_equal(w.grad, 2.0 * gw1)

    def test_disconnected_parameter_grad_zero(self):
        used = nn.Tensor(np.array([1.0, 2.0]), requires_grad=True)
        unused = nn.Tensor(np.array([5.0]), requires_grad=True)
        used.zero_grad()
        unused.zero_grad()
        nn.mean(used * used).backward()
        assert np.all(unused.grad == 0.0)
        assert np.any(used.grad != 0.0)

    def test_reused_node_accumulates_sum(self):
        # a appears twice: d/da (a*a) = 2a must come from two path sums
        a = nn.Tensor(np.array([3.0]), requires_grad=True)
        a.zero_grad()
        nn.mean(a * a).backward()
        np.testing.assert_allclose(a.grad, [6.0])

    @pytest.mark.parametrize("seed", range(22))
    def test_fd_composite_graph(self, seed):
        """Random composite of the primitives vs central differences."""
        rng = np.random.default_rng(400 + seed)
        B, Cin, Cmid, L = 2, 2, 3, 18
        K = 5
        x = nn.Tensor(rng.standard_normal((B, Cin, L)) * 0.5)
        w1 = nn.Tensor(rng.standard_normal((Cmid, Cin, K)) * 0.4, requires_grad=True)
        w2 = nn.Tensor(rng.standard_normal((Cmid, Cin, K)) * 0.4, requires_grad=True)
        dense_w = nn.Tensor(rng.standard_normal((Cin * L, 4)) * 0.3, requires_grad=True)
        act = [nn.relu, nn.tanh, lambda t: nn.leaky_relu(t, 0.2), nn.sigmoid][seed % 4]

        def forward():
            h = act(nn.conv1d(x, w1, stride=1, padding=2))
            h = nn.tanh(nn.conv_transpose1d(h, w2, stride=1, padding=2))
            flat = nn.reshape(h, (B, Cin * L))
            out = nn.matmul(flat, dense_w)
            probs = nn.sigmoid(out)
            return nn.mean(nn.log(probs)) + nn.l1_norm(h - x)

        for p in (w1, w2, dense_w):
            p.zero_grad()
        forward().backward()
        for p in (w1, w2, dense_w):
            numeric = fd_grad(lambda: float(forward().data), p.data)
            assert rel_err(p.grad, numeric) <= GRAD_RTOL

    @pytest.mark.parametrize(
        "op",
        [
            lambda t: nn.mean(nn.relu(t)),
            lambda t: nn.mean(nn.leaky_relu(t, 0.2)),
            lambda t: nn.mean(nn.tanh(t)),
            lambda t: nn.mean(nn.sigmoid(t)),
            lambda t: nn.mean(nn.log(nn.sigmoid(t))),
            lambda t: nn.l1_norm(t),
            lambda t: nn.mean(t * t),
            lambda t: nn.mean(nn.clip(t, -0.75, 0.75)),
            lambda t: nn.mean(nn.reshape(t, (-1,)) * nn.reshape(t, (-1,))),
        ],
    )
    def test_fd_each_primitive(self, op):
        rng = np.random.default_rng(hash(op) % (2**32))
        # keep values away from relu/clip kinks so FD is well-defined
        data = rng.standard_normal((3, 7))
        data[np.abs(data) < 0.05] += 0.1
        data[np.abs(np.abs(data) - 0.75) < 0.05] += 0.1
        t = nn.Tensor(data, requires_grad=True)
        t.zero_grad()
        op(t).backward()
        numeric = fd_grad(lambda: float(op(t).data), t.data)
        assert rel_err(t.grad, numeric) <= GRAD_RTOL

    def test_fd_batch_concat(self):
        rng = np.random.default_rng(17)
        a = nn.Tensor(rng.standard_normal((2, 4)), requires_grad=True)
        b = nn.Tensor(rng.standard_normal((3, 4)), requires_grad=True)

        def forward():
            return nn.mean(nn.tanh(nn.batch_concat([a, b])))

        a.zero_grad()
        b.zero_grad()
        forward().backward()
        for p in (a, b):
            numeric = fd_grad(lambda: float(forward().data), p.data)
            assert rel_err(p.grad, numeric) <= GRAD_RTOL


class TestModules:
    def test_named_parameters_walks_lists(self):
        rng = np.random.default_rng(0)

        class Net(nn.Module):
            def __init__(self):
                self.layers = [nn.Conv1d(1, 2, 3, rng=rng), nn.Conv1d(2, 1, 3, rng=rng)]
                self.head = nn.Dense(4, 1, rng=rng)

        names = [name for name, _ in Net().named_parameters("net")]
        assert names == [
            "net.layers.0.weight",
            "net.layers.0.bias",
            "net.layers.1.weight",
            "net.layers.1.bias",
            "net.head.weight",
            "net.head.bias",
        ]

    def test_init_bounds_follow_fan_in(self):
        rng = np.random.default_rng(1)
        layer = nn.Conv1d(4, 8, 25, rng=rng, dtype=np.float64)
        bound = 1.0 / np.sqrt(4 * 25)
        assert np.max(np.abs(layer.weight.data)) <= bound
        assert layer.weight.data.shape == (8, 4, 25)
        assert layer.bias.data.shape == (1, 8, 1)

    def test_dense_shapes(self):
        rng = np.random.default_rng(2)
        layer = nn.Dense(6, 3, rng=rng, dtype=np.float64)
        out = layer(nn.Tensor(np.ones((2, 6))))
        assert out.shape == (2, 3)


class TestAdam:
    def test_first_step_is_almost_sign_step(self):
        # w = 1, f(w) = w^2, lr = 0.1: bias-corrected first step gives
        # update = lr * g / (|g| + eps) ~ lr, so w -> 0.9
        w = nn.Parameter(np.array([1.0]), name="w")
        opt = nn.Adam([w], lr=0.1)
        w.zero_grad()
        nn.mean(w * w).backward()
        opt.step()
        assert abs(w.data[0] - 0.9) < 1e-8

    def test_zero_gradient_leaves_parameters_unchanged(self):
        w = nn.Parameter(np.array([1.5, -2.5]), name="w")
        opt = nn.Adam([w], lr=0.1)
        w.zero_grad()
        opt.step()
        np.testing.assert_array_equal(w.data, [1.5, -2.5])

    def test_missing_gradient_raises(self):
        w = nn.Parameter(np.array([1.0]), name="w")
        opt = nn.Adam([w], lr=0.1)
        with pytest.raises(ValueError):
            opt.step()

    def test_converges_on_shifted_quadratic(self):
        # 2000 steps on f(w) = (w - 3)^2 from w = 0
        w = nn.Parameter(np.array([0.0]), name="w")
        opt = nn.Adam([w], lr=0.01, beta1=0.9, beta2=0.999)
        target = nn.Tensor(np.array([3.0]))
        for _ in range(2000):
            w.zero_grad()
            diff = w - target
            nn.mean(diff * diff).backward()
            opt.step()
        assert abs(w.data[0] - 3.0) <= 1e-3

    def test_state_arrays_roundtrip(self):
        w = nn.Parameter(np.array([1.0, 2.0]), name="w")
        opt = nn.Adam([w], lr=0.1)
        w.zero_grad()
        nn.mean(w * w).backward()
        opt.step()
        state = opt.state_arrays()
        assert set(state) == {"w.m", "w.v"}
        w2 = nn.Parameter(w.data.copy(), name="w")
        opt2 = nn.Adam([w2], lr=0.1)
        opt2.load_state_arrays(state)
        opt2.step_count = opt.step_count
        # identical gradients now produce identical updates
        for o, p in ((opt, w), (opt2, w2)):
            p.grad = np.array([0.3, -0.4])
        opt.step()
        opt2.step()
        np.testing.assert_array_equal(w.data, w2.data)
