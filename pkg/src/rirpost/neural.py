"""Minimal reverse-mode automatic differentiation over dense numpy arrays.

Every operation builds a node holding its inputs and a closure that maps
the output cotangent onto the input gradients; `Tensor.backward` walks the
graph in reverse topological order and accumulates into `.grad` (repeated
backward calls keep accumulating, callers zero grads between phases).

The 1-D convolutions are implemented with an im2col layout so the inner
contraction is a single BLAS matmul; `conv_transpose1d` realizes the exact
adjoint of `conv1d`, which the test suite checks via inner-product
identities. Training runs in float32; gradient checking uses float64.
"""

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

LOG_CLAMP = 1e-12


class Tensor:
    """N-d array with an optional gradient buffer and autodiff history."""

    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward")

    # keep numpy from intercepting scalar <op> Tensor expressions
    __array_ufunc__ = None

    def __init__(self, data, requires_grad=False):
        self.data = data if isinstance(data, np.ndarray) else np.asarray(data, dtype=np.float64)
        self.grad = None
        self.requires_grad = requires_grad
        self._parents = ()
        self._backward = None

    @property
    def shape(self):
        return self.data.shape

    @property
    def dtype(self):
        return self.data.dtype

    def detach(self):
        return Tensor(self.data, requires_grad=False)

    def zero_grad(self):
        self.grad = np.zeros_like(self.data)

    def _accumulate(self, g):
        if self.grad is None:
            self.grad = np.zeros_like(self.data)
        self.grad += g

    def backward(self):
        """Reverse-accumulate gradients from a scalar loss."""
        if self.data.size != 1:
            raise ValueError(f"backward requires a scalar loss, got shape {self.shape}")
        order = []
        visited = set()
        stack = [(self, False)]
        while stack:
            node, done = stack.pop()
            if done:
                order.append(node)
                continue
            if id(node) in visited:
                continue
            visited.add(id(node))
            stack.append((node, True))
            for parent in node._parents:
                if id(parent) not in visited:
                    stack.append((parent, False))
        # cotangents for this pass live in a dict; only leaf tensors keep a
        # persistent .grad, so repeated backward calls add exact copies
        grads = {id(self): np.ones_like(self.data)}
        for node in reversed(order):
            g = grads.pop(id(node), None)
            if g is None:
                continue
            if node._backward is None:
                if node.requires_grad:
                    node._accumulate(g)
                continue
            for parent, pg in node._backward(g):
                if parent._backward is None and not parent.requires_grad:
                    continue
                key = id(parent)
                if key in grads:
                    grads[key] = grads[key] + pg
                else:
                    grads[key] = pg

    # operator sugar over the functional ops below
    def __add__(self, other):
        return add(self, _lift(other, self.dtype))

    __radd__ = __add__

    def __mul__(self, other):
        return mul(self, _lift(other, self.dtype))

    __rmul__ = __mul__

    def __neg__(self):
        return mul(self, _lift(-1.0, self.dtype))

    def __sub__(self, other):
        return add(self, -_lift(other, self.dtype))

    def __rsub__(self, other):
        return add(-self, _lift(other, self.dtype))

    def __repr__(self):
        return f"Tensor(shape={self.shape}, dtype={self.dtype}, requires_grad={self.requires_grad})"


class Parameter(Tensor):
    """Trainable tensor; `name` is filled in by Module.named_parameters."""

    __slots__ = ("name",)

    def __init__(self, data, name=""):
        super().__init__(np.asarray(data), requires_grad=True)
        self.name = name


def _lift(x, dtype):
    if isinstance(x, Tensor):
        return x
    return Tensor(np.asarray(x, dtype=dtype))


def _node(data, parents, backward, requires_grad=None):
    out = Tensor(data)
    if requires_grad is None:
        requires_grad = any(p.requires_grad or p._backward is not None for p in parents)
    if requires_grad:
        out.requires_grad = True
        out._parents = tuple(parents)
        out._backward = backward
    return out


def _unbroadcast(g, shape):
    """Sum-reduce a gradient back to the shape it was broadcast from."""
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for axis, n in enumerate(shape):
        if n == 1 and g.shape[axis] != 1:
            g = g.sum(axis=axis, keepdims=True)
    return g


# ---------------------------------------------------------------------------
# pointwise and reduction primitives


def add(a, b):
    data = a.data + b.data
    return _node(data, (a, b), lambda g: ((a, _unbroadcast(g, a.shape)), (b, _unbroadcast(g, b.shape))))


def mul(a, b):
    data = a.data * b.data
    return _node(
        data,
        (a, b),
        lambda g: (
            (a, _unbroadcast(g * b.data, a.shape)),
            (b, _unbroadcast(g * a.data, b.shape)),
        ),
    )


def relu(x):
    mask = x.data > 0
    return _node(x.data * mask, (x,), lambda g: ((x, g * mask),))


def leaky_relu(x, slope=0.2):
    factor = np.where(x.data > 0, x.dtype.type(1), x.dtype.type(slope))
    return _node(x.data * factor, (x,), lambda g: ((x, g * factor),))


def tanh(x):
    t = np.tanh(x.data)
    return _node(t, (x,), lambda g: ((x, g * (1.0 - t * t)),))


def sigmoid(x):
    s = 1.0 / (1.0 + np.exp(-x.data))
    return _node(s, (x,), lambda g: ((x, g * s * (1.0 - s)),))


def clip(x, lo, hi):
    """Value clamp; gradient is zero outside [lo, hi]."""
    inside = (x.data >= lo) & (x.data <= hi)
    return _node(np.clip(x.data, lo, hi), (x,), lambda g: ((x, g * inside),))


def log(x, clamp=LOG_CLAMP):
    """Natural log. With clamp=None, non-positive input raises instead."""
    if clamp is None:
        if np.any(x.data <= 0):
            raise ValueError("log of non-positive value with clamping disabled")
        clamped = x.data
        mask = True
    else:
        clamped = np.maximum(x.data, clamp)
        mask = x.data >= clamp
    data = np.log(clamped)
    return _node(data, (x,), lambda g: ((x, g * mask / clamped),))


def mean(x):
    n = x.data.size
    data = np.asarray(x.data.mean())
    return _node(data, (x,), lambda g: ((x, np.broadcast_to(g / n, x.shape).astype(x.dtype, copy=True)),))


def l1_norm(x):
    """Mean absolute value, as a scalar."""
    n = x.data.size
    sign = np.sign(x.data)
    data = np.asarray(np.abs(x.data).mean())
    return _node(data, (x,), lambda g: ((x, g * sign / n),))


def batch_concat(tensors):
    """Concatenate along the batch (first) axis."""
    tensors = list(tensors)
    data = np.concatenate([t.data for t in tensors], axis=0)
    sizes = [t.shape[0] for t in tensors]
    splits = np.cumsum(sizes)[:-1]

    def backward(g):
        return tuple(zip(tensors, np.split(g, splits, axis=0)))

    return _node(data, tuple(tensors), backward)


def reshape(x, shape):
    orig = x.shape
    return _node(x.data.reshape(shape), (x,), lambda g: ((x, g.reshape(orig)),))


def matmul(a, b):
    data = a.data @ b.data
    return _node(
        data,
        (a, b),
        lambda g: ((a, g @ b.data.T), (b, a.data.T @ g)),
    )


# ---------------------------------------------------------------------------
# 1-D convolutions (cross-correlation semantics)


def _conv_sizes(L, K, stride, padding):
    Lp = L + 2 * padding
    if K > Lp:
        raise ValueError(f"kernel {K} longer than padded input {Lp}")
    Lout = (Lp - K) // stride + 1
    if Lout < 1:
        raise ValueError("convolution produces an empty output")
    return Lp, Lout


def _im2col(xdata, K, stride):
    """[B, C, Lp] -> [B*Lout, C*K] window matrix (contiguous copy)."""
    win = sliding_window_view(xdata, K, axis=2)[:, :, ::stride, :]
    B, C, Lout, _ = win.shape
    return np.ascontiguousarray(win.transpose(0, 2, 1, 3)).reshape(B * Lout, C * K)


def _col2im(gcols, B, C, Lp, K, stride, Lout, dtype):
    """Adjoint of _im2col: scatter-add window gradients back to [B, C, Lp].

    For a fixed kernel tap the target positions k, k+stride, ... form a
    regular slice, so the scatter is K strided adds with no index arrays.
    """
    acc = np.zeros((B, Lp, C), dtype=dtype)
    g4 = gcols.reshape(B, Lout, C, K)
    span = (Lout - 1) * stride + 1
    for k in range(K):
        acc[:, k : k + span : stride, :] += g4[:, :, :, k]
    return acc.transpose(0, 2, 1)


def conv1d(x, w, stride=1, padding=0):
    """Batched 1-D cross-correlation: x [B,Cin,L], w [Cout,Cin,K] -> [B,Cout,L']."""
    B, Cin, L = x.shape
    Cout, Cin_w, K = w.shape
    if Cin != Cin_w:
        raise ValueError(f"input has {Cin} channels but weight expects {Cin_w}")
    Lp, Lout = _conv_sizes(L, K, stride, padding)
    xp = np.pad(x.data, ((0, 0), (0, 0), (padding, padding))) if padding else x.data
    cols = _im2col(xp, K, stride)  # [B*Lout, Cin*K]
    w2 = w.data.reshape(Cout, Cin * K)
    out = (cols @ w2.T).reshape(B, Lout, Cout).transpose(0, 2, 1)

    def backward(g):
        g2 = np.ascontiguousarray(g.transpose(0, 2, 1)).reshape(B * Lout, Cout)
        gw = (g2.T @ cols).reshape(w.shape)
        gcols = g2 @ w2
        gxp = _col2im(gcols, B, Cin, Lp, K, stride, Lout, x.dtype)
        gx = gxp[:, :, padding : padding + L] if padding else gxp
        return ((x, gx), (w, gw))

    return _node(out, (x, w), backward)


def conv_transpose1d(x, w, stride=1, padding=0, output_padding=0):
    """Transposed 1-D convolution: x [B,Cin,L], w [Cin,Cout,K] -> [B,Cout,L'].

    L' = (L-1)*stride - 2*padding + K + output_padding. For matching
    configurations this is the exact adjoint of conv1d.
    """
    B, Cin, L = x.shape
    Cin_w, Cout, K = w.shape
    if Cin != Cin_w:
        raise ValueError(f"input has {Cin} channels but weight expects {Cin_w}")
    if not 0 <= output_padding < max(stride, 1):
        raise ValueError("output_padding must satisfy 0 <= output_padding < stride")
    Lout = (L - 1) * stride - 2 * padding + K + output_padding
    if Lout < 1:
        raise ValueError("transposed convolution produces an empty output")
    full = (L - 1) * stride + K

    w2 = w.data.reshape(Cin, Cout * K)
    x2 = np.ascontiguousarray(x.data.transpose(0, 2, 1)).reshape(B * L, Cin)
    contrib = (x2 @ w2).reshape(B, L, Cout, K)
    buf = np.zeros((B, full + output_padding, Cout), dtype=x.dtype)
    span = (L - 1) * stride + 1
    for k in range(K):
        buf[:, k : k + span : stride, :] += contrib[:, :, :, k]
    out = buf.transpose(0, 2, 1)[:, :, padding : padding + Lout]

    def backward(g):
        # pad the cotangent so every input position sees a full window
        gp = np.zeros((B, Cout, full + output_padding + 2 * padding), dtype=x.dtype)
        gp[:, :, padding : padding + Lout] = g
        win = sliding_window_view(gp, K, axis=2)[:, :, ::stride, :][:, :, :L, :]
        wincols = np.ascontiguousarray(win.transpose(0, 2, 1, 3)).reshape(B * L, Cout * K)
        gx = (wincols @ w2.T).reshape(B, L, Cin).transpose(0, 2, 1)
        gw = (x2.T @ wincols).reshape(w.shape)
        return ((x, gx), (w, gw))

    return _node(out, (x, w), backward)


# ---------------------------------------------------------------------------
# modules and optimization


class Module:
    """Lightweight container supporting named parameter traversal."""

    def parameters(self):
        return [p for _, p in self.named_parameters()]

    def named_parameters(self, prefix=""):
        for key, value in vars(self).items():
            path = f"{prefix}.{key}" if prefix else key
            if isinstance(value, Parameter):
                value.name = path
                yield path, value
            elif isinstance(value, Module):
                yield from value.named_parameters(path)
            elif isinstance(value, (list, tuple)):
                for i, item in enumerate(value):
                    if isinstance(item, Module):
                        yield from item.named_parameters(f"{path}.{i}")

    def zero_grad(self):
        for p in self.parameters():
            p.zero_grad()

    def __call__(self, *args, **kwargs):
        return self.forward(*args, **kwargs)


def _uniform_init(rng, shape, fan_in, dtype):
    bound = 1.0 / np.sqrt(fan_in)
    return rng.uniform(-bound, bound, size=shape).astype(dtype)


class Conv1d(Module):
    def __init__(self, in_channels, out_channels, kernel_size, stride=1, padding=0, rng=None, dtype=np.float32):
        rng = rng or np.random.default_rng()
        self.stride = stride
        self.padding = padding
        fan_in = in_channels * kernel_size
        self.weight = Parameter(_uniform_init(rng, (out_channels, in_channels, kernel_size), fan_in, dtype))
        self.bias = Parameter(_uniform_init(rng, (1, out_channels, 1), fan_in, dtype))

    def forward(self, x):
        return add(conv1d(x, self.weight, self.stride, self.padding), self.bias)


class ConvTranspose1d(Module):
    def __init__(self, in_channels, out_channels, kernel_size, stride=1, padding=0, output_padding=0, rng=None, dtype=np.float32):
        rng = rng or np.random.default_rng()
        self.stride = stride
        self.padding = padding
        self.output_padding = output_padding
        fan_in = in_channels * kernel_size
        self.weight = Parameter(_uniform_init(rng, (in_channels, out_channels, kernel_size), fan_in, dtype))
        self.bias = Parameter(_uniform_init(rng, (1, out_channels, 1), fan_in, dtype))

    def forward(self, x):
        return add(
            conv_transpose1d(x, self.weight, self.stride, self.padding, self.output_padding),
            self.bias,
        )


class Dense(Module):
    def __init__(self, in_features, out_features, rng=None, dtype=np.float32):
        rng = rng or np.random.default_rng()
        self.weight = Parameter(_uniform_init(rng, (in_features, out_features), in_features, dtype))
        self.bias = Parameter(_uniform_init(rng, (1, out_features), in_features, dtype))

    def forward(self, x):
        return add(matmul(x, self.weight), self.bias)


class Adam:
    """Standard Adam with bias correction; state arrays match param dtype."""

    def __init__(self, params, lr=1e-4, beta1=0.5, beta2=0.9, eps=1e-8):
        self.params = list(params)
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.step_count = 0
        self.m = [np.zeros_like(p.data) for p in self.params]
        self.v = [np.zeros_like(p.data) for p in self.params]

    def zero_grad(self):
        for p in self.params:
            p.zero_grad()

    def step(self):
        for p in self.params:
            if p.grad is None:
                raise ValueError(f"parameter {getattr(p, 'name', '?')} has no gradient")
        self.step_count += 1
        t = self.step_count
        b1, b2 = self.beta1, self.beta2
        for p, m, v in zip(self.params, self.m, self.v):
            g = p.grad
            m *= b1
            m += (1 - b1) * g
            v *= b2
            v += (1 - b2) * g * g
            mhat = m / (1 - b1**t)
            vhat = v / (1 - b2**t)
            p.data -= (self.lr * mhat / (np.sqrt(vhat) + self.eps)).astype(p.dtype)

    def state_arrays(self):
        """Moment buffers keyed by parameter name, for checkpointing."""
        out = {}
        for p, m, v in zip(self.params, self.m, self.v):
            out[f"{p.name}.m"] = m
            out[f"{p.name}.v"] = v
        return out

    def load_state_arrays(self, arrays):
        for i, p in enumerate(self.params):
            self.m[i] = np.array(arrays[f"{p.name}.m"], dtype=p.dtype)
            self.v[i] = np.array(arrays[f"{p.name}.v"], dtype=p.dtype)
